#include "qgcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "qgcl/error.hpp"

namespace qgcl::model {

using ad::Var;

std::string_view cell_kind_name(CellKind k) {
    return k == CellKind::quality_gated ? "quality_gated" : "original";
}

CellKind parse_cell_kind(std::string_view s) {
    if (s == "quality_gated") return CellKind::quality_gated;
    if (s == "original") return CellKind::original;
    throw DomainError("unknown cell kind '" + std::string(s) + "' (expected quality_gated or original)");
}

void ModelConfig::validate() const {
    if (spatial_layers < 1 || recon_layers < 1) throw DomainError("layer counts must be at least 1");
    if (kernel % 2 == 0) throw DomainError("kernel size must be odd");
    if (channels == 0 || lstm_hidden == 0 || feature_dims == 0) throw DomainError("widths must be positive");
    if (window_T % 2 != 0) throw DomainError("window T must be even");
}

namespace {

const char* const kDirections[2] = {"cell_fwd", "cell_bwd"};
const char* const kLstms[2] = {"gates.lstm_fwd", "gates.lstm_bwd"};

std::string idx(const char* base, std::size_t i) { return base + std::to_string(i); }

bool is_lstm_weight(const std::string& name) {
    return name.rfind("gates.lstm", 0) == 0 && name.find(".w_") != std::string::npos;
}

template <class T>
Var<T> conv_stack(Var<T> x, const Bound<T>& p, const char* w, const char* b, std::size_t layers, bool relu_last) {
    for (std::size_t m = 1; m <= layers; ++m) {
        x = ad::conv2d(x, p(idx(w, m)), p(idx(b, m)));
        if (m < layers || relu_last) x = ad::relu(x);
    }
    return x;
}

template <class T>
struct FusedCell {
    Var<T> kernel;  // gate convolutions stacked on the output axis
    Var<T> bias;
};

template <class T>
FusedCell<T> fuse(const Bound<T>& p, const std::string& prefix, bool original) {
    std::vector<Var<T>> ks{p(prefix + ".w_c"), p(prefix + ".w_o")};
    std::vector<Var<T>> bs{p(prefix + ".b_c"), p(prefix + ".b_o")};
    if (original) {
        ks.push_back(p(prefix + ".w_f"));
        ks.push_back(p(prefix + ".w_i"));
        bs.push_back(p(prefix + ".b_f"));
        bs.push_back(p(prefix + ".b_i"));
    }
    return {ad::concat<T>(ks), ad::concat<T>(bs)};
}

template <class T>
void check_gate(const Var<T>& g, GateDomain domain) {
    if (g.numel() != 1) throw ShapeError("cell gate must be a single value, got " + shape_str(g.shape()));
    const T v = g.value()[0];
    const bool ok = domain == GateDomain::open ? (v > T(0) && v < T(1)) : (v >= T(0) && v <= T(1));
    if (!ok) throw DomainError("cell gate " + std::to_string(static_cast<double>(v)) + " outside (0,1)");
}

template <class T>
Var<T> cell_input(const Var<T>& S, const CellState<T>& prev) {
    if (S.shape() != prev.H.shape())
        throw ShapeError("cell input " + shape_str(S.shape()) + " does not match state " + shape_str(prev.H.shape()));
    const Var<T> parts[2] = {S, prev.H};
    return ad::concat<T>(parts);
}

template <class T>
CellStepTrace<T> qg_step(const Var<T>& S, const CellState<T>& prev, const Var<T>& g, const FusedCell<T>& cell) {
    const std::size_t c = S.shape()[0];
    const Var<T> z = ad::conv2d(cell_input(S, prev), cell.kernel, cell.bias);
    const Var<T> cand = ad::tanh(ad::slice(z, 0, c));
    const Var<T> mem = ad::affine_blend(prev.C, cand, g);
    const Var<T> out = ad::sigmoid(ad::slice(z, c, c));
    return {{mem, ad::mul(out, ad::tanh(mem))}, cand};
}

template <class T>
CellState<T> original_step(const Var<T>& S, const CellState<T>& prev, const FusedCell<T>& cell) {
    const std::size_t c = S.shape()[0];
    const Var<T> z = ad::conv2d(cell_input(S, prev), cell.kernel, cell.bias);
    const Var<T> cand = ad::tanh(ad::slice(z, 0, c));
    const Var<T> out = ad::sigmoid(ad::slice(z, c, c));
    const Var<T> forget = ad::sigmoid(ad::slice(z, 2 * c, c));
    const Var<T> input = ad::sigmoid(ad::slice(z, 3 * c, c));
    const Var<T> mem = ad::add(ad::mul(forget, prev.C), ad::mul(input, cand));
    return {mem, ad::mul(out, ad::tanh(mem))};
}

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t C = cfg.channels, k = cfg.kernel, H = cfg.lstm_hidden;
    std::map<std::string, Shape> s;
    for (std::size_t m = 1; m <= cfg.spatial_layers; ++m) {
        s[idx("spatial.w", m)] = {C, m == 1 ? 1 : C, k, k};
        s[idx("spatial.b", m)] = {C};
    }
    for (const char* dir : kDirections) {
        const std::string d = dir;
        std::vector<std::string> gates{"c", "o"};
        if (cfg.cell_kind == CellKind::original) gates.insert(gates.end(), {"f", "i"});
        for (const auto& g : gates) {
            s[d + ".w_" + g] = {C, 2 * C, k, k};
            s[d + ".b_" + g] = {C};
        }
    }
    if (cfg.cell_kind == CellKind::quality_gated) {
        for (const char* l : kLstms) {
            const std::string p = l;
            s[p + ".w_x"] = {4 * H, cfg.gate_input_dims()};
            s[p + ".w_h"] = {4 * H, H};
            s[p + ".b"] = {4 * H};
        }
        s["gates.fc.w"] = {1, 2 * H};
        s["gates.fc.b"] = {1};
    }
    for (std::size_t l = 1; l <= cfg.recon_layers; ++l) {
        const std::size_t cin = l == 1 ? 2 * C : C;
        const std::size_t cout = l == cfg.recon_layers ? 1 : C;
        s[idx("recon.w", l)] = {cout, cin, k, k};
        s[idx("recon.b", l)] = {cout};
    }
    return s;
}

template <class T>
Params<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Params<T> out;
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(cfg.lstm_hidden));
    for (const auto& [name, shape] : parameter_shapes(cfg)) {
        Tensor<T> t(shape);
        if (shape.size() >= 2) {
            const std::size_t fan_in = shape_numel(shape) / shape[0];
            if (is_lstm_weight(name)) {
                std::uniform_real_distribution<double> u(-lstm_bound, lstm_bound);
                for (auto& v : t.values()) v = static_cast<T>(u(rng));
            } else {
                std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
                for (auto& v : t.values()) v = static_cast<T>(n(rng));
            }
        } else if (name.rfind("gates.lstm", 0) == 0) {
            const std::size_t h = cfg.lstm_hidden;
            for (std::size_t i = h; i < 2 * h; ++i) t[i] = T(1);
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

template <class T>
ModelConfig config_from_params(const Params<T>& params, bool residual, std::size_t feature_dims) {
    auto get = [&](const std::string& name) -> const Tensor<T>& {
        auto it = params.find(name);
        if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
        return it->second;
    };
    ModelConfig c;
    const auto& w1 = get("spatial.w1");
    if (w1.rank() != 4) throw ShapeError("spatial.w1 has shape " + shape_str(w1.shape()) + ", expected rank 4");
    c.channels = w1.dim(0);
    c.kernel = w1.dim(2);
    c.spatial_layers = 0;
    while (params.count(idx("spatial.w", c.spatial_layers + 1))) ++c.spatial_layers;
    c.recon_layers = 0;
    while (params.count(idx("recon.w", c.recon_layers + 1))) ++c.recon_layers;
    c.cell_kind = params.count("cell_fwd.w_f") ? CellKind::original : CellKind::quality_gated;
    c.feature_dims = feature_dims;
    if (c.cell_kind == CellKind::quality_gated) {
        const auto& wh = get("gates.lstm_fwd.w_h");
        const auto& wx = get("gates.lstm_fwd.w_x");
        if (wh.rank() != 2 || wx.rank() != 2) throw ShapeError("gates LSTM weights must be matrices");
        c.lstm_hidden = wh.dim(1);
        if (wx.dim(1) % feature_dims != 0 || wx.dim(1) < feature_dims)
            throw ShapeError("gates.lstm_fwd.w_x input width " + std::to_string(wx.dim(1)) + " is not a multiple of " +
                             std::to_string(feature_dims));
        c.window_T = wx.dim(1) / feature_dims - 1;
        if (c.window_T == 0) throw ShapeError("gates.lstm_fwd.w_x implies an empty quality window");
    }
    c.residual = residual;
    validate_params(c, params);
    return c;
}

template <class T>
void validate_params(const ModelConfig& cfg, const Params<T>& params) {
    const auto shapes = parameter_shapes(cfg);
    for (const auto& [name, shape] : shapes) {
        auto it = params.find(name);
        if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
        if (it->second.shape() != shape)
            throw ShapeError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                             shape_str(shape));
    }
    for (const auto& [name, t] : params)
        if (!shapes.count(name))
            throw ShapeError("unexpected parameter '" + name + "' for " +
                             std::string(cell_kind_name(cfg.cell_kind)) + " cells");
}

template <class T>
Bound<T>::Bound(const Params<T>& params, bool trainable) {
    const bool record = trainable && ad::grad_enabled();
    for (const auto& [name, t] : params) vars_.emplace(name, record ? ad::leaf(t, name) : ad::constant(t));
}

template <class T>
const Var<T>& Bound<T>::operator()(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ShapeError("parameter '" + name + "' is not bound");
    return it->second;
}

template <class T>
Var<T> spatial_forward(const Var<T>& clip, const Bound<T>& p, const ModelConfig& cfg) {
    if (clip.shape().size() != 4 || clip.shape()[1] != 1)
        throw ShapeError("spatial network expects (N,1,H,W), got " + shape_str(clip.shape()));
    return conv_stack(clip, p, "spatial.w", "spatial.b", cfg.spatial_layers, true);
}

template <class T>
LstmState<T> lstm_zero_state(std::size_t hidden) {
    return {ad::constant(Tensor<T>(Shape{hidden})), ad::constant(Tensor<T>(Shape{hidden}))};
}

template <class T>
LstmState<T> lstm_step(const Var<T>& x, const LstmState<T>& prev, const Bound<T>& p, const std::string& prefix) {
    const Var<T>& wx = p(prefix + ".w_x");
    const Var<T>& wh = p(prefix + ".w_h");
    const std::size_t h = wh.shape()[1];
    if (x.shape() != Shape{wx.shape()[1]})
        throw ShapeError(prefix + ": input " + shape_str(x.shape()) + ", expected (" + std::to_string(wx.shape()[1]) + ")");
    if (prev.h.shape() != Shape{h} || prev.c.shape() != Shape{h})
        throw ShapeError(prefix + ": state must be (" + std::to_string(h) + ")");
    const Var<T> no_bias = ad::constant(Tensor<T>(Shape{4 * h}));
    const Var<T> z = ad::add(ad::dense(x, wx, p(prefix + ".b")), ad::dense(prev.h, wh, no_bias));
    const Var<T> i = ad::sigmoid(ad::slice(z, 0, h));
    const Var<T> f = ad::sigmoid(ad::slice(z, h, h));
    const Var<T> g = ad::tanh(ad::slice(z, 2 * h, h));
    const Var<T> o = ad::sigmoid(ad::slice(z, 3 * h, h));
    const Var<T> c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
    return {ad::mul(o, ad::tanh(c)), c};
}

template <class T>
std::vector<Var<T>> gates_forward(std::span<const std::vector<double>> windows, const Bound<T>& p,
                                  const ModelConfig& cfg) {
    const std::size_t n = windows.size();
    if (n == 0) throw DomainError("gates generator needs at least one frame");
    std::vector<Var<T>> x;
    x.reserve(n);
    for (const auto& w : windows) {
        if (w.size() != cfg.gate_input_dims())
            throw ShapeError("quality window has " + std::to_string(w.size()) + " values, expected " +
                             std::to_string(cfg.gate_input_dims()));
        x.push_back(ad::constant(Tensor<T>(Shape{w.size()}, std::vector<T>(w.begin(), w.end()))));
    }
    std::vector<Var<T>> fwd(n), bwd(n);
    LstmState<T> s = lstm_zero_state<T>(cfg.lstm_hidden);
    for (std::size_t t = 0; t < n; ++t) {
        s = lstm_step(x[t], s, p, kLstms[0]);
        fwd[t] = s.h;
    }
    s = lstm_zero_state<T>(cfg.lstm_hidden);
    for (std::size_t t = n; t-- > 0;) {
        s = lstm_step(x[t], s, p, kLstms[1]);
        bwd[t] = s.h;
    }
    std::vector<Var<T>> logits;
    logits.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const Var<T> both[2] = {fwd[t], bwd[t]};
        logits.push_back(ad::dense(ad::concat<T>(both), p("gates.fc.w"), p("gates.fc.b")));
    }
    return logits;
}

double gate_value(double logit) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    return std::clamp(stable_sigmoid(logit), eps, 1.0 - eps);
}

double GateSequence::input(std::size_t n) const { return gate_value(logits.at(n)); }

template <class T>
Var<T> gate_from_logit(const Var<T>& logit) {
    constexpr T eps = std::numeric_limits<T>::epsilon();
    return ad::clamp(ad::sigmoid(logit), eps, T(1) - eps);
}

template <class T>
CellState<T> cell_zero_state(std::size_t channels, std::size_t h, std::size_t w) {
    return {ad::constant(Tensor<T>(Shape{channels, h, w})), ad::constant(Tensor<T>(Shape{channels, h, w}))};
}

template <class T>
CellStepTrace<T> qg_cell_step_traced(const Var<T>& S, const CellState<T>& prev, const Var<T>& g, const Bound<T>& p,
                                     const std::string& prefix, GateDomain domain) {
    check_gate(g, domain);
    return qg_step(S, prev, g, fuse(p, prefix, false));
}

template <class T>
CellState<T> qg_cell_step(const Var<T>& S, const CellState<T>& prev, const Var<T>& g, const Bound<T>& p,
                          const std::string& prefix, GateDomain domain) {
    return qg_cell_step_traced(S, prev, g, p, prefix, domain).state;
}

template <class T>
CellState<T> original_cell_step(const Var<T>& S, const CellState<T>& prev, const Bound<T>& p,
                                const std::string& prefix) {
    return original_step(S, prev, fuse(p, prefix, true));
}

template <class T>
Var<T> bidir_recurrence(const Var<T>& features, std::span<const Var<T>> logits, const Bound<T>& p,
                        const ModelConfig& cfg) {
    const Shape& fs = features.shape();
    if (fs.size() != 4 || fs[1] != cfg.channels)
        throw ShapeError("recurrence expects (N," + std::to_string(cfg.channels) + ",H,W), got " + shape_str(fs));
    const std::size_t n = fs[0];
    const bool gated = cfg.cell_kind == CellKind::quality_gated;
    if (gated && logits.size() != n)
        throw ShapeError("recurrence over " + std::to_string(n) + " frames got " + std::to_string(logits.size()) +
                         " gate logits");

    std::vector<Var<T>> S(n), gate(gated ? n : 0);
    for (std::size_t t = 0; t < n; ++t) S[t] = ad::select(features, t);
    for (std::size_t t = 0; t < gate.size(); ++t) {
        gate[t] = gate_from_logit(logits[t]);
        check_gate(gate[t], GateDomain::open);
    }

    std::vector<Var<T>> out[2] = {std::vector<Var<T>>(n), std::vector<Var<T>>(n)};
    for (int dir = 0; dir < 2; ++dir) {
        const FusedCell<T> cell = fuse(p, kDirections[dir], !gated);
        CellState<T> state = cell_zero_state<T>(fs[1], fs[2], fs[3]);
        for (std::size_t step = 0; step < n; ++step) {
            const std::size_t t = dir == 0 ? step : n - 1 - step;
            state = gated ? qg_step(S[t], state, gate[t], cell).state : original_step(S[t], state, cell);
            out[dir][t] = state.H;
        }
    }
    std::vector<Var<T>> fused(n);
    for (std::size_t t = 0; t < n; ++t) {
        const Var<T> both[2] = {out[0][t], out[1][t]};
        fused[t] = ad::concat<T>(both);
    }
    return ad::stack<T>(fused);
}

template <class T>
Var<T> reconstruct(const Var<T>& fused, const Var<T>& input, const Bound<T>& p, const ModelConfig& cfg) {
    const Shape& s = fused.shape();
    if (s.size() != 4 || s[1] != 2 * cfg.channels)
        throw ShapeError("reconstruction expects (N," + std::to_string(2 * cfg.channels) + ",H,W), got " +
                         shape_str(s));
    Var<T> y = conv_stack(fused, p, "recon.w", "recon.b", cfg.recon_layers, false);
    if (cfg.residual) {
        if (input.shape() != y.shape())
            throw ShapeError("residual input " + shape_str(input.shape()) + " does not match " + shape_str(y.shape()));
        y = ad::add(y, input);
    }
    return y;
}

template <class T>
ForwardResult<T> forward(const Var<T>& clip, std::span<const std::vector<double>> windows, const Bound<T>& p,
                         const ModelConfig& cfg) {
    if (clip.shape().size() != 4) throw ShapeError("clip must be (N,1,H,W), got " + shape_str(clip.shape()));
    const std::size_t n = clip.shape()[0];
    ForwardResult<T> r;
    if (cfg.cell_kind == CellKind::quality_gated) {
        if (windows.size() != n)
            throw ShapeError("clip has " + std::to_string(n) + " frames but " + std::to_string(windows.size()) +
                             " quality windows");
        r.logits = gates_forward(windows, p, cfg);
    }
    const Var<T> features = spatial_forward(clip, p, cfg);
    r.output = reconstruct(bidir_recurrence<T>(features, r.logits, p, cfg), clip, p, cfg);
    return r;
}

std::vector<ChunkPlan> plan_chunks(std::size_t frames, const ChunkOptions& opt) {
    if (frames == 0) throw DomainError("no frames to enhance");
    if (opt.length == 0 || opt.overlap >= opt.length)
        throw DomainError("chunk length must exceed the overlap");
    if (frames <= opt.length) return {{0, frames, 0, frames}};
    std::vector<ChunkPlan> plan;
    const std::size_t step = opt.length - opt.overlap;
    for (std::size_t s = 0; s + opt.length < frames; s += step) plan.push_back({s, s + opt.length, 0, 0});
    plan.push_back({frames - opt.length, frames, 0, 0});
    plan.front().keep_begin = 0;
    for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
        const std::size_t cut = (plan[i].end + plan[i + 1].begin) / 2;
        plan[i].keep_end = cut;
        plan[i + 1].keep_begin = cut;
    }
    plan.back().keep_end = frames;
    return plan;
}

template <class T>
Enhanced<T> enhance(const Params<T>& params, const ModelConfig& cfg, const Tensor<T>& clip,
                    std::span<const std::vector<double>> windows, std::optional<ChunkOptions> chunks) {
    if (clip.rank() != 4) throw ShapeError("clip must be (N,1,H,W), got " + shape_str(clip.shape()));
    validate_params(cfg, params);
    ad::NoGradGuard no_grad;
    const Bound<T> p(params, false);
    const std::size_t n = clip.dim(0), frame = clip.numel() / n;
    const auto plan = chunks ? plan_chunks(n, *chunks) : std::vector<ChunkPlan>{{0, n, 0, n}};
    const bool gated = cfg.cell_kind == CellKind::quality_gated;
    if (gated && windows.size() != n)
        throw ShapeError("clip has " + std::to_string(n) + " frames but " + std::to_string(windows.size()) +
                         " quality windows");

    Enhanced<T> out{Tensor<T>(clip.shape()), {}};
    if (gated) out.gates.logits.assign(n, 0.0);
    for (const auto& c : plan) {
        const std::size_t len = c.end - c.begin;
        Shape s = clip.shape();
        s[0] = len;
        Tensor<T> piece(s, std::vector<T>(clip.data() + c.begin * frame, clip.data() + c.end * frame));
        const auto w = gated ? windows.subspan(c.begin, len) : std::span<const std::vector<double>>{};
        const ForwardResult<T> r = forward(ad::constant(std::move(piece)), w, p, cfg);
        std::copy(r.output.value().data() + (c.keep_begin - c.begin) * frame,
                  r.output.value().data() + (c.keep_end - c.begin) * frame, out.frames.data() + c.keep_begin * frame);
        for (std::size_t t = c.keep_begin; gated && t < c.keep_end; ++t)
            out.gates.logits[t] = static_cast<double>(r.logits[t - c.begin].value()[0]);
    }
    return out;
}

template <class T>
ParamCount param_count(const Params<T>& params) {
    ParamCount c;
    for (const auto& [name, t] : params) {
        if (name.rfind("spatial.", 0) == 0)
            c.spatial += t.numel();
        else if (name.rfind("cell_", 0) == 0)
            c.cells += t.numel();
        else if (name.rfind("gates.", 0) == 0)
            c.gates += t.numel();
        else if (name.rfind("recon.", 0) == 0)
            c.reconstruction += t.numel();
        else
            throw ShapeError("parameter '" + name + "' belongs to no network");
    }
    return c;
}

ParamCount param_count(const ModelConfig& cfg) {
    ParamCount c;
    for (const auto& [name, shape] : parameter_shapes(cfg)) {
        const std::size_t k = shape_numel(shape);
        if (name.rfind("spatial.", 0) == 0)
            c.spatial += k;
        else if (name.rfind("cell_", 0) == 0)
            c.cells += k;
        else if (name.rfind("gates.", 0) == 0)
            c.gates += k;
        else
            c.reconstruction += k;
    }
    return c;
}

std::string param_report(const ParamCount& c) {
    std::ostringstream os;
    os << "network,parameters\n"
       << "spatial," << c.spatial << '\n'
       << "cells," << c.cells << '\n'
       << "gates_generator," << c.gates << '\n'
       << "reconstruction," << c.reconstruction << '\n'
       << "total," << c.total() << '\n'
       << "published_total," << kPublishedTotal << '\n';
    const long long diff = static_cast<long long>(c.total()) - static_cast<long long>(kPublishedTotal);
    os << "# discrepancy: counted total differs from the published " << kPublishedTotal << " by "
       << (diff >= 0 ? "+" : "") << diff << ".\n";
    if (c.gates > kPublishedTotal)
        os << "# The gates generator alone holds " << c.gates
           << " parameters, more than the published total: each LSTM direction has 4*hidden*(input+hidden)+4*hidden"
              " weights, so 256 hidden units over a 190-value window cannot fit.\n";
    return os.str();
}

#define QGCL_MODEL_INSTANTIATE(T)                                                                                \
    template Params<T> init_params<T>(const ModelConfig&, std::uint64_t);                                        \
    template void validate_params<T>(const ModelConfig&, const Params<T>&);                                      \
    template ModelConfig config_from_params<T>(const Params<T>&, bool, std::size_t);                             \
    template class Bound<T>;                                                                                     \
    template Var<T> spatial_forward<T>(const Var<T>&, const Bound<T>&, const ModelConfig&);                      \
    template LstmState<T> lstm_zero_state<T>(std::size_t);                                                       \
    template LstmState<T> lstm_step<T>(const Var<T>&, const LstmState<T>&, const Bound<T>&, const std::string&); \
    template std::vector<Var<T>> gates_forward<T>(std::span<const std::vector<double>>, const Bound<T>&,         \
                                                  const ModelConfig&);                                           \
    template Var<T> gate_from_logit<T>(const Var<T>&);                                                           \
    template CellState<T> cell_zero_state<T>(std::size_t, std::size_t, std::size_t);                             \
    template CellStepTrace<T> qg_cell_step_traced<T>(const Var<T>&, const CellState<T>&, const Var<T>&,          \
                                                     const Bound<T>&, const std::string&, GateDomain);           \
    template CellState<T> qg_cell_step<T>(const Var<T>&, const CellState<T>&, const Var<T>&, const Bound<T>&,    \
                                          const std::string&, GateDomain);                                       \
    template CellState<T> original_cell_step<T>(const Var<T>&, const CellState<T>&, const Bound<T>&,             \
                                                const std::string&);                                             \
    template Var<T> bidir_recurrence<T>(const Var<T>&, std::span<const Var<T>>, const Bound<T>&,                 \
                                        const ModelConfig&);                                                     \
    template Var<T> reconstruct<T>(const Var<T>&, const Var<T>&, const Bound<T>&, const ModelConfig&);           \
    template ForwardResult<T> forward<T>(const Var<T>&, std::span<const std::vector<double>>, const Bound<T>&,   \
                                         const ModelConfig&);                                                    \
    template Enhanced<T> enhance<T>(const Params<T>&, const ModelConfig&, const Tensor<T>&,                      \
                                    std::span<const std::vector<double>>, std::optional<ChunkOptions>);          \
    template ParamCount param_count<T>(const Params<T>&);

QGCL_MODEL_INSTANTIATE(float)
QGCL_MODEL_INSTANTIATE(double)

#undef QGCL_MODEL_INSTANTIATE

}  // namespace qgcl::model
