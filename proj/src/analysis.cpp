#include "qgcl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fs_util.hpp"
#include "qgcl/error.hpp"
#include "qgcl/features.hpp"
#include "qgcl/labeling.hpp"

namespace qgcl::analysis {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string psnr_text(const Psnr& p) { return p.is_infinite() ? "inf" : num(p.db()); }

double mean_of(const std::vector<Psnr>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : v)
        if (!p.is_infinite()) {
            s += p.db();
            ++n;
        }
    return n ? s / static_cast<double>(n) : NAN;
}

}  // namespace

ContributionProfile contribution(std::span<const double> input, std::span<const double> forget, std::size_t n) {
    const std::size_t N = input.size();
    if (forget.size() != N)
        throw ShapeError("contribution: " + std::to_string(N) + " input gates but " + std::to_string(forget.size()) +
                         " forget gates");
    if (n >= N) throw DomainError("contribution: frame " + std::to_string(n) + " outside 0.." + std::to_string(N) + "-1");
    for (std::size_t j = 0; j < N; ++j)
        if (!(input[j] >= 0.0 && input[j] <= 1.0 && forget[j] >= 0.0 && forget[j] <= 1.0))
            throw DomainError("contribution: gates of frame " + std::to_string(j) + " outside [0,1]");

    ContributionProfile p;
    p.target = n;
    p.weight.assign(N, 0.0);
    p.weight[n] = 0.5 * input[n];
    double chain = 1.0;  // product of f_j for j in (m, n]
    for (std::size_t m = n; m-- > 0;) {
        chain *= forget[m + 1];
        p.weight[m] = 0.5 * input[m] * chain;
    }
    chain = 1.0;  // product of f_j for j in [n, m)
    for (std::size_t m = n + 1; m < N; ++m) {
        chain *= forget[m - 1];
        p.weight[m] = 0.5 * input[m] * chain;
    }
    return p;
}

ContributionProfile contribution(const model::GateSequence& gates, std::size_t n) {
    std::vector<double> i(gates.size()), f(gates.size());
    for (std::size_t j = 0; j < gates.size(); ++j) {
        i[j] = gates.input(j);
        f[j] = gates.forget(j);
    }
    return contribution(i, f, n);
}

double pcc(const FrameView& a, const FrameView& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("pcc: frames are " + std::to_string(a.width) + "x" + std::to_string(a.height) + " and " +
                         std::to_string(b.width) + "x" + std::to_string(b.height));
    const std::size_t n = a.pixels.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a.pixels[i];
        mb += b.pixels[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.pixels[i] - ma, db = b.pixels[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw DomainError("pcc: correlation with a constant frame is undefined");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

PccCurve pcc_curve(const LumaSequence& seq, std::size_t max_distance) {
    if (max_distance == 0) throw DomainError("pcc_curve: max_distance must be at least 1");
    if (seq.frame_count() <= max_distance)
        throw DomainError("pcc_curve: " + std::to_string(seq.frame_count()) + " frames cannot span distance " +
                          std::to_string(max_distance));
    const std::size_t N = seq.frame_count();
    std::vector<bool> constant(N);
    for (std::size_t n = 0; n < N; ++n) {
        const auto& f = seq.frames[n];
        constant[n] = std::all_of(f.begin(), f.end(), [&](std::uint8_t v) { return v == f[0]; });
    }
    PccCurve c;
    for (std::size_t d = 1; d <= max_distance; ++d) {
        double s = 0.0;
        std::size_t used = 0, skipped = 0;
        for (std::size_t n = 0; n + d < N; ++n) {
            if (constant[n] || constant[n + d]) {
                ++skipped;
                continue;
            }
            s += pcc(seq.frame(n), seq.frame(n + d));
            ++used;
        }
        c.mean.push_back(used ? std::optional<double>(s / static_cast<double>(used)) : std::nullopt);
        c.pairs.push_back(used);
        c.skipped.push_back(skipped);
    }
    return c;
}

FluctuationStats quality_fluctuation_stats(std::span<const double> psnr) {
    if (psnr.empty()) throw DomainError("quality_fluctuation_stats: empty sequence");
    for (double v : psnr)
        if (!std::isfinite(v)) throw DomainError("quality_fluctuation_stats: non-finite PSNR");
    const double n = static_cast<double>(psnr.size());
    double mean = 0.0;
    for (double v : psnr) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : psnr) var += (v - mean) * (v - mean);

    FluctuationStats s;
    s.std = std::sqrt(var / n);
    if (psnr.size() < 3) return s;

    const auto peaks = detect_pqf(psnr).labels;
    const auto valleys = detect_valleys(psnr);
    std::vector<std::size_t> vidx;
    for (std::size_t i = 0; i < valleys.size(); ++i)
        if (valleys[i]) vidx.push_back(i);

    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t p = 0; p < peaks.size(); ++p) {
        if (!peaks[p]) continue;
        const auto after = std::upper_bound(vidx.begin(), vidx.end(), p);
        if (after != vidx.end()) pairs.emplace(p, *after);
        const auto before = std::lower_bound(vidx.begin(), vidx.end(), p);
        if (before != vidx.begin()) pairs.emplace(p, *std::prev(before));
    }
    if (pairs.empty()) return s;
    double sum = 0.0;
    for (const auto& [p, v] : pairs) sum += std::abs(psnr[p] - psnr[v]);
    s.pairs = pairs.size();
    s.pvd = sum / static_cast<double>(pairs.size());
    return s;
}

EvalReport evaluate(const model::Params<float>& params, const model::ModelConfig& cfg,
                    std::span<const TestPair> pairs, const EvalOptions& opt) {
    model::validate_params(cfg, params);
    EvalReport r;
    r.params = model::param_count(params);
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& tp : pairs) {
        if (!tp.compressed.meta) throw FormatError(tp.name + ": compressed sequence has no per-frame metadata");
        const auto q = features::extract(tp.compressed, opt.threads);
        const auto w = features::windows(q, cfg.window_T);
        const auto clip = to_unit_clip<float>(tp.compressed, 0, tp.compressed.frame_count());
        const auto out = model::enhance(params, cfg, clip, std::span<const std::vector<double>>(w), opt.chunks);

        SequenceReport s;
        s.name = tp.name;
        s.enhanced = from_unit_clip(out.frames);
        s.psnr = delta_psnr(tp.raw, tp.compressed, s.enhanced);
        if (cfg.cell_kind == model::CellKind::quality_gated) {
            s.gates = out.gates;
            for (std::size_t n : opt.contribution_frames) s.contributions.push_back(contribution(out.gates, n));
        } else if (!opt.contribution_frames.empty()) {
            throw DomainError("evaluate: contribution profiles need the quality-gated cell");
        }
        if (s.psnr.mean) {
            sum += *s.psnr.mean;
            ++used;
        }
        r.sequences.push_back(std::move(s));
    }
    if (used) r.mean_delta_psnr = sum / static_cast<double>(used);
    return r;
}

void write_frame_csv(const std::filesystem::path& path, const DeltaPsnrReport& r) {
    std::string text = "frame,psnr_compressed,psnr_enhanced,delta\n";
    for (std::size_t n = 0; n < r.compressed.size(); ++n) {
        text += std::to_string(n) + "," + psnr_text(r.compressed[n]) + "," + psnr_text(r.enhanced[n]) + ",";
        if (r.delta[n]) text += num(*r.delta[n]);
        text += '\n';
    }
    detail::write_file_atomic(path, text);
}

void write_contribution_csv(const std::filesystem::path& path, const ContributionProfile& p) {
    std::string text = "frame,weight\n";
    char buf[48];
    for (std::size_t m = 0; m < p.weight.size(); ++m) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", m, p.weight[m]);
        text += buf;
    }
    detail::write_file_atomic(path, text);
}

void write_summary_csv(const std::filesystem::path& path, const EvalReport& r) {
    std::string text = "sequence,frames,psnr_compressed,psnr_enhanced,delta_psnr,excluded_frames\n";
    for (const auto& s : r.sequences) {
        text += s.name + "," + std::to_string(s.psnr.compressed.size()) + "," + num(mean_of(s.psnr.compressed)) + "," +
                num(mean_of(s.psnr.enhanced)) + "," + (s.psnr.mean ? num(*s.psnr.mean) : std::string()) + "," +
                std::to_string(s.psnr.excluded_frames) + "\n";
    }
    detail::write_file_atomic(path, text);
}

}  // namespace qgcl::analysis
