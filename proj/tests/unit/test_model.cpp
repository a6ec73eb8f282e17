#include <cmath>
#include <random>

#include "doctest.h"
#include "qgcl/error.hpp"
#include "qgcl/model.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace qgcl;
using namespace qgcl::model;
using ad::Var;
using test::random_tensor;

namespace {

ModelConfig small_config(CellKind kind = CellKind::quality_gated) {
    ModelConfig c;
    c.channels = 3;
    c.kernel = 3;
    c.spatial_layers = 2;
    c.recon_layers = 2;
    c.lstm_hidden = 4;
    c.feature_dims = 2;
    c.window_T = 2;
    c.cell_kind = kind;
    return c;
}

std::vector<std::vector<double>> random_windows(std::size_t n, std::size_t dims, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<std::vector<double>> w(n, std::vector<double>(dims));
    for (auto& v : w)
        for (auto& x : v) x = d(rng);
    return w;
}

template <class T>
void zero_all(Params<T>& p, const std::string& prefix) {
    for (auto& [name, t] : p)
        if (name.rfind(prefix, 0) == 0) t.fill(T(0));
}

}  // namespace

TEST_CASE("parameter accounting at the default size") {
    const ParamCount c = param_count(ModelConfig{});
    CHECK(c.spatial == 58320);
    CHECK(c.spatial == (25 * 1 * 24 + 24) + 4 * (25 * 24 * 24 + 24));
    CHECK(c.cells == 115296);
    CHECK(c.cells == 2 * 2 * (25 * 48 * 24 + 24));
    CHECK(c.reconstruction == 72697);
    CHECK(c.reconstruction == (25 * 48 * 24 + 24) + 3 * (25 * 24 * 24 + 24) + (25 * 24 + 1));
    CHECK(c.gates == 2 * (4 * 256 * (190 + 256) + 4 * 256) + 513);
    CHECK(c.total() == 1162282);

    const auto params = init_params<float>(ModelConfig{}, 1);
    const ParamCount counted = param_count(params);
    CHECK(counted.total() == c.total());
    CHECK(counted.cells == c.cells);

    ModelConfig orig;
    orig.cell_kind = CellKind::original;
    const ParamCount o = param_count(orig);
    CHECK(o.cells == 2 * c.cells);
    CHECK(o.gates == 0);

    const std::string report = param_report(c);
    CHECK(report.find("646907") != std::string::npos);
    CHECK(report.find("discrepancy") != std::string::npos);
    CHECK(report.find("spatial,58320") != std::string::npos);
}

TEST_CASE("initialization") {
    const ModelConfig cfg;
    const auto a = init_params<float>(cfg, 42), b = init_params<float>(cfg, 42), c = init_params<float>(cfg, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK_NOTHROW(validate_params(cfg, a));
    const auto& bias = a.at("gates.lstm_fwd.b");
    for (std::size_t i = 0; i < 1024; ++i) CHECK(bias[i] == (i >= 256 && i < 512 ? 1.0f : 0.0f));
    for (float v : a.at("spatial.b1").values()) CHECK(v == 0.0f);
    const float bound = 1.0f / 16.0f;
    for (float v : a.at("gates.lstm_bwd.w_h").values()) CHECK(std::abs(v) <= bound);

    // Sample deviation of a conv kernel tracks sqrt(2 / fan_in).
    const auto& w = a.at("recon.w2");
    double ss = 0.0;
    for (float v : w.values()) ss += double(v) * v;
    CHECK(std::sqrt(ss / double(w.numel())) == doctest::Approx(std::sqrt(2.0 / 600.0)).epsilon(0.05));

    auto broken = a;
    broken.erase("recon.b3");
    CHECK_THROWS_AS(validate_params(cfg, broken), ShapeError);
    broken = a;
    broken["extra"] = Tensor<float>(Shape{1});
    CHECK_THROWS_AS(validate_params(cfg, broken), ShapeError);
    broken = a;
    broken["spatial.w1"] = Tensor<float>(Shape{24, 2, 5, 5});
    CHECK_THROWS_AS(validate_params(cfg, broken), ShapeError);
}

TEST_CASE("spatial network") {
    std::mt19937_64 rng(1);
    ad::NoGradGuard ng;
    const ModelConfig cfg;
    auto params = init_params<double>(cfg, 3);
    const Bound<double> p(params);
    const auto y = spatial_forward(ad::constant(random_tensor<double>({2, 1, 9, 7}, rng, 0, 1)), p, cfg);
    CHECK(y.shape() == Shape{2, 24, 9, 7});

    // Identical frames give identical features regardless of position.
    Tensor<double> clip = random_tensor<double>({3, 1, 8, 8}, rng, 0, 1);
    for (std::size_t i = 0; i < 64; ++i) clip[2 * 64 + i] = clip[i];
    const auto f = spatial_forward(ad::constant(clip), p, cfg);
    const std::size_t per = 24 * 64;
    for (std::size_t i = 0; i < per; ++i) REQUIRE(f.value()[i] == f.value()[2 * per + i]);

    zero_all(params, "spatial.");
    const auto z = spatial_forward(ad::constant(clip), Bound<double>(params), cfg);
    for (double v : z.value().values()) CHECK(v == 0.0);

    CHECK_THROWS_AS(spatial_forward(ad::constant(Tensor<double>(Shape{2, 2, 8, 8})), p, cfg), ShapeError);
}

TEST_CASE("lstm step") {
    ad::NoGradGuard ng;
    const ModelConfig cfg;
    auto params = init_params<double>(cfg, 5);
    zero_all(params, "gates.");
    const Bound<double> p(params);
    const Var<double> x = ad::constant(Tensor<double>(Shape{190}, 0.3));
    const auto s0 = lstm_step(x, lstm_zero_state<double>(256), p, "gates.lstm_fwd");
    for (double v : s0.h.value().values()) CHECK(v == 0.0);
    for (double v : s0.c.value().values()) CHECK(v == 0.0);

    Tensor<double> cv(Shape{256});
    for (std::size_t i = 0; i < 256; ++i) cv[i] = -2.0 + 4.0 * double(i) / 255.0;
    const LstmState<double> prev{ad::constant(Tensor<double>(Shape{256})), ad::constant(cv)};
    const auto s1 = lstm_step(x, prev, p, "gates.lstm_fwd");
    for (std::size_t i = 0; i < 256; ++i) {
        CHECK(std::abs(s1.c.value()[i] - 0.5 * cv[i]) < 1e-15);
        CHECK(std::abs(s1.h.value()[i] - 0.5 * std::tanh(0.5 * cv[i])) < 1e-15);
    }
    CHECK_THROWS_AS(lstm_step(ad::constant(Tensor<double>(Shape{10})), prev, p, "gates.lstm_fwd"), ShapeError);
}

TEST_CASE("lstm step gradients") {
    std::mt19937_64 rng(8);
    const ModelConfig cfg = small_config();
    auto params = init_params<double>(cfg, 9);
    const Tensor<double> x = random_tensor<double>({cfg.gate_input_dims()}, rng);
    const Tensor<double> h0 = random_tensor<double>({4}, rng), c0 = random_tensor<double>({4}, rng);
    Tensor<double> probe = random_tensor<double>({4}, rng);
    auto loss = [&](const Bound<double>& p) {
        const auto s = lstm_step(ad::constant(x), {ad::constant(h0), ad::constant(c0)}, p, "gates.lstm_fwd");
        return ad::sum(ad::mul(s.h, ad::constant(probe)));
    };
    const auto r = test::check_param_gradients(params, loss, 1e-4, 0, 1);
    INFO("worst ", r.worst_param, "[", r.worst_index, "]");
    CHECK(r.worst < 1e-6);
}

TEST_CASE("gates generator") {
    std::mt19937_64 rng(4);
    ad::NoGradGuard ng;
    const ModelConfig cfg = small_config();
    auto params = init_params<double>(cfg, 2);
    const auto w = random_windows(6, cfg.gate_input_dims(), rng);

    SUBCASE("zero head gives even gates") {
        auto z = params;
        z["gates.fc.w"].fill(0.0);
        z["gates.fc.b"].fill(0.0);
        const auto g = gates_forward<double>(w, Bound<double>(z), cfg);
        REQUIRE(g.size() == 6);
        GateSequence seq;
        for (const auto& v : g) seq.logits.push_back(v.value()[0]);
        for (std::size_t n = 0; n < 6; ++n) {
            CHECK(seq.logits[n] == 0.0);
            CHECK(seq.input(n) == 0.5);
            CHECK(seq.forget(n) == 0.5);
        }
    }
    SUBCASE("reversal symmetry with swapped directions") {
        auto swapped = params;
        for (const char* s : {".w_x", ".w_h", ".b"})
            std::swap(swapped[std::string("gates.lstm_fwd") + s], swapped[std::string("gates.lstm_bwd") + s]);
        // The head sees [h+, h-]; swapping directions swaps its two halves.
        auto& fc = swapped["gates.fc.w"];
        for (std::size_t i = 0; i < 4; ++i) std::swap(fc[i], fc[4 + i]);
        auto rev = w;
        std::reverse(rev.begin(), rev.end());
        const auto a = gates_forward<double>(w, Bound<double>(params), cfg);
        const auto b = gates_forward<double>(rev, Bound<double>(swapped), cfg);
        for (std::size_t n = 0; n < 6; ++n) CHECK(std::abs(a[n].value()[0] - b[5 - n].value()[0]) < 1e-14);
    }
    SUBCASE("single frame") {
        const auto g = gates_forward<double>(std::span(w).first(1), Bound<double>(params), cfg);
        CHECK(g.size() == 1);
        CHECK(g[0].shape() == Shape{1});
    }
    SUBCASE("bad windows") {
        auto bad = w;
        bad[2].pop_back();
        CHECK_THROWS_AS(gates_forward<double>(bad, Bound<double>(params), cfg), ShapeError);
        CHECK_THROWS_AS(gates_forward<double>({}, Bound<double>(params), cfg), DomainError);
    }
}

TEST_CASE("gate coupling") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-60.0, 60.0);
    GateSequence s;
    for (int i = 0; i < 10000; ++i) s.logits.push_back(u(rng));
    s.logits.push_back(800.0);
    s.logits.push_back(-800.0);
    for (std::size_t n = 0; n < s.size(); ++n) {
        const double i = s.input(n), f = s.forget(n);
        CHECK(std::abs(f + i - 1.0) <= 1e-12);
        CHECK(i > 0.0);
        CHECK(i < 1.0);
        CHECK(f > 0.0);
        CHECK(f < 1.0);
    }
    ad::NoGradGuard ng;
    for (double z : {-200.0, -20.0, 0.0, 20.0, 200.0}) {
        const float g = gate_from_logit(ad::constant(Tensor<float>::scalar(float(z)))).value()[0];
        CHECK(g > 0.0f);
        CHECK(g < 1.0f);
    }
}

TEST_CASE("quality-gated cell") {
    std::mt19937_64 rng(10);
    ad::NoGradGuard ng;
    const ModelConfig cfg;
    const auto params = init_params<double>(cfg, 11);
    const Bound<double> p(params);
    const auto S = ad::constant(random_tensor<double>({24, 6, 5}, rng));
    const CellState<double> prev{ad::constant(random_tensor<double>({24, 6, 5}, rng)),
                                 ad::constant(random_tensor<double>({24, 6, 5}, rng))};
    auto g = [](double v) { return ad::constant(Tensor<double>::scalar(v)); };

    const auto at0 = qg_cell_step_traced(S, prev, g(0.0), p, "cell_fwd", GateDomain::closed);
    CHECK(at0.state.C.value() == prev.C.value());
    const auto at1 = qg_cell_step_traced(S, prev, g(1.0), p, "cell_fwd", GateDomain::closed);
    CHECK(at1.state.C.value() == at1.candidate.value());
    const auto mid = qg_cell_step_traced(S, prev, g(0.5), p, "cell_fwd");
    for (std::size_t i = 0; i < mid.state.C.numel(); ++i)
        CHECK(std::abs(mid.state.C.value()[i] - 0.5 * (prev.C.value()[i] + mid.candidate.value()[i])) <= 1e-12);

    // Output gate and candidate do not see C, so a memory perturbation
    // passes through scaled by the forget weight.
    for (double gv : {0.1, 0.37, 0.9}) {
        Tensor<double> shifted = prev.C.value();
        const Tensor<double> delta = random_tensor<double>({24, 6, 5}, rng);
        for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += delta[i];
        const auto a = qg_cell_step(S, prev, g(gv), p, "cell_fwd");
        const auto b = qg_cell_step(S, {ad::constant(shifted), prev.H}, g(gv), p, "cell_fwd");
        for (std::size_t i = 0; i < shifted.numel(); ++i)
            CHECK(std::abs((b.C.value()[i] - a.C.value()[i]) - (1 - gv) * delta[i]) <= 1e-12);
    }

    CHECK_THROWS_AS(qg_cell_step(S, prev, g(0.0), p, "cell_fwd"), DomainError);
    CHECK_THROWS_AS(qg_cell_step(S, prev, g(1.0), p, "cell_fwd"), DomainError);
    CHECK_THROWS_AS(qg_cell_step(S, prev, g(1.5), p, "cell_fwd", GateDomain::closed), DomainError);
    CHECK_THROWS_AS(qg_cell_step(S, prev, g(NAN), p, "cell_fwd", GateDomain::closed), DomainError);
}

TEST_CASE("original cell") {
    std::mt19937_64 rng(12);
    const ModelConfig cfg = [] {
        ModelConfig c;
        c.cell_kind = CellKind::original;
        return c;
    }();
    auto params = init_params<double>(cfg, 13);
    const auto S = random_tensor<double>({24, 5, 5}, rng);
    {
        ad::NoGradGuard ng;
        auto zero = params;
        zero_all(zero, "cell_fwd");
        CellState<double> st = cell_zero_state<double>(24, 5, 5);
        for (int t = 0; t < 3; ++t) {
            st = original_cell_step(ad::constant(S), st, Bound<double>(zero), "cell_fwd");
            for (double v : st.C.value().values()) CHECK(v == 0.0);
            for (double v : st.H.value().values()) CHECK(v == 0.0);
        }

        auto sat = params;
        sat["cell_fwd.w_f"].fill(0.0);
        sat["cell_fwd.w_i"].fill(0.0);
        sat["cell_fwd.b_f"].fill(800.0);
        sat["cell_fwd.b_i"].fill(-800.0);
        const CellState<double> prev{ad::constant(random_tensor<double>({24, 5, 5}, rng)),
                                     ad::constant(random_tensor<double>({24, 5, 5}, rng))};
        const auto next = original_cell_step(ad::constant(S), prev, Bound<double>(sat), "cell_fwd");
        CHECK(next.C.value() == prev.C.value());
    }
    const ModelConfig small = small_config(CellKind::original);
    auto sp = init_params<double>(small, 14);
    const Tensor<double> s3 = random_tensor<double>({3, 4, 5}, rng);
    const Tensor<double> c0 = random_tensor<double>({3, 4, 5}, rng), h0 = random_tensor<double>({3, 4, 5}, rng);
    const Tensor<double> probe = random_tensor<double>({3, 4, 5}, rng);
    auto loss = [&](const Bound<double>& p) {
        auto st = original_cell_step(ad::constant(s3), {ad::constant(c0), ad::constant(h0)}, p, "cell_fwd");
        st = original_cell_step(ad::constant(s3), st, p, "cell_fwd");
        return ad::sum(ad::add(ad::mul(st.H, ad::constant(probe)), ad::scale(st.C, 0.3)));
    };
    const auto r = test::check_param_gradients(sp, loss, 1e-4, 0, 2);
    INFO("worst ", r.worst_param, "[", r.worst_index, "]");
    CHECK(r.worst < 1e-5);
}

TEST_CASE("bidirectional recurrence") {
    std::mt19937_64 rng(15);
    ad::NoGradGuard ng;
    const ModelConfig cfg;
    auto params = init_params<double>(cfg, 16);
    const auto feats = ad::constant(random_tensor<double>({1, 24, 5, 6}, rng, 0, 2));
    const std::vector<Var<double>> one{ad::constant(Tensor<double>::scalar(0.3))};

    const auto y = bidir_recurrence<double>(feats, one, Bound<double>(params), cfg);
    CHECK(y.shape() == Shape{1, 48, 5, 6});
    const std::size_t half = 24 * 30;
    bool equal = true;
    for (std::size_t i = 0; i < half; ++i) equal &= y.value()[i] == y.value()[half + i];
    CHECK_FALSE(equal);

    auto tied = params;
    for (const char* s : {".w_c", ".b_c", ".w_o", ".b_o"}) tied[std::string("cell_bwd") + s] = tied[std::string("cell_fwd") + s];
    const auto t = bidir_recurrence<double>(feats, one, Bound<double>(tied), cfg);
    for (std::size_t i = 0; i < half; ++i) CHECK(t.value()[i] == t.value()[half + i]);

    // With every gate shut the memory never leaves zero.
    const auto many = ad::constant(random_tensor<double>({4, 24, 5, 6}, rng, 0, 2));
    std::vector<Var<double>> shut(4, ad::constant(Tensor<double>::scalar(-40.0)));
    const auto z = bidir_recurrence<double>(many, shut, Bound<double>(params), cfg);
    CHECK(z.shape() == Shape{4, 48, 5, 6});
    for (double v : z.value().values()) CHECK(std::abs(v) < 1e-14);

    CHECK_THROWS_AS(bidir_recurrence<double>(many, one, Bound<double>(params), cfg), ShapeError);
}

TEST_CASE("reconstruction") {
    std::mt19937_64 rng(17);
    const ModelConfig cfg;
    auto params = init_params<double>(cfg, 18);
    {
        ad::NoGradGuard ng;
        const auto fused = ad::constant(random_tensor<double>({2, 48, 6, 6}, rng));
        const auto input = ad::constant(random_tensor<double>({2, 1, 6, 6}, rng));
        const auto y = reconstruct(fused, input, Bound<double>(params), cfg);
        CHECK(y.shape() == Shape{2, 1, 6, 6});
        auto zero = params;
        zero_all(zero, "recon.");
        const auto zy = reconstruct(fused, input, Bound<double>(zero), cfg);
        for (double v : zy.value().values()) CHECK(v == 0.0);
        ModelConfig res = cfg;
        res.residual = true;
        CHECK(reconstruct(fused, input, Bound<double>(zero), res).value() == input.value());
    }
    const ModelConfig small = small_config();
    auto sp = init_params<double>(small, 19);
    const Tensor<double> fused = random_tensor<double>({2, 6, 5, 4}, rng);
    const Tensor<double> probe = random_tensor<double>({2, 1, 5, 4}, rng);
    auto loss = [&](const Bound<double>& p) {
        return ad::sum(ad::mul(reconstruct(ad::constant(fused), ad::constant(probe), p, small), ad::constant(probe)));
    };
    const auto r = test::check_param_gradients(sp, loss, 1e-4, 0, 3);
    INFO("worst ", r.worst_param, "[", r.worst_index, "]");
    CHECK(r.worst < 1e-5);
}

TEST_CASE("forward composes the stages") {
    std::mt19937_64 rng(20);
    ad::NoGradGuard ng;
    const ModelConfig cfg;
    const auto params = init_params<double>(cfg, 21);
    const Bound<double> p(params);
    const Tensor<double> clip = random_tensor<double>({3, 1, 8, 8}, rng, 0, 1);
    const auto w = random_windows(3, cfg.gate_input_dims(), rng);

    const auto r = forward(ad::constant(clip), w, p, cfg);
    const auto logits = gates_forward<double>(w, p, cfg);
    const auto manual = reconstruct(bidir_recurrence<double>(spatial_forward(ad::constant(clip), p, cfg), logits, p, cfg),
                                    ad::constant(clip), p, cfg);
    CHECK(r.output.value() == manual.value());
    CHECK(r.output.shape() == Shape{3, 1, 8, 8});
    CHECK(forward(ad::constant(clip), w, p, cfg).output.value() == r.output.value());

    CHECK_THROWS_AS(forward(ad::constant(clip), std::span(w).first(2), p, cfg), ShapeError);

    ModelConfig orig = cfg;
    orig.cell_kind = CellKind::original;
    const auto op = init_params<double>(orig, 22);
    const auto o = forward(ad::constant(clip), {}, Bound<double>(op), orig);
    CHECK(o.output.shape() == Shape{3, 1, 8, 8});
    CHECK(o.logits.empty());
}

TEST_CASE("full model gradients on a small configuration") {
    std::mt19937_64 rng(23);
    for (CellKind kind : {CellKind::quality_gated, CellKind::original}) {
        const ModelConfig cfg = small_config(kind);
        auto params = init_params<double>(cfg, 24);
        test::jitter(params, 0.05, 25);
        const Tensor<double> clip = random_tensor<double>({3, 1, 6, 6}, rng, 0, 1);
        const Tensor<double> target = random_tensor<double>({3, 1, 6, 6}, rng, 0, 1);
        const auto w = random_windows(3, cfg.gate_input_dims(), rng);
        auto loss = [&](const Bound<double>& p) {
            return ad::mse(forward(ad::constant(clip), w, p, cfg).output, ad::constant(target));
        };
        const auto r = test::check_param_gradients(params, loss, 1e-4, 0, 4);
        INFO(cell_kind_name(kind), " worst ", r.worst_param, "[", r.worst_index, "] of ", r.checked, ", ",
             r.kink_reprobes, " re-probed");
        CHECK(r.worst < 1e-4);
        CHECK(r.unresolved_kinks == 0);
    }
}

TEST_CASE("chunk planning") {
    const ChunkOptions opt;
    CHECK(plan_chunks(40, opt).size() == 1);
    for (std::size_t n = 1; n <= 300; ++n) {
        const auto plan = plan_chunks(n, opt);
        std::size_t next = 0;
        for (const auto& c : plan) {
            CHECK(c.keep_begin == next);
            CHECK(c.begin <= c.keep_begin);
            CHECK(c.keep_end <= c.end);
            CHECK(c.keep_begin < c.keep_end);
            CHECK(c.end - c.begin == std::min<std::size_t>(n, 40));
            next = c.keep_end;
        }
        CHECK(next == n);
        for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
            // Each cut leaves at least a few frames of context on both sides.
            CHECK(plan[i].end - plan[i].keep_end >= 4);
            CHECK(plan[i + 1].keep_begin - plan[i + 1].begin >= 4);
        }
    }
    CHECK_THROWS_AS(plan_chunks(10, {8, 8}), DomainError);
}

TEST_CASE("enhance") {
    std::mt19937_64 rng(25);
    const ModelConfig cfg = small_config();
    const auto params = init_params<double>(cfg, 26);
    const Tensor<double> clip = random_tensor<double>({12, 1, 5, 5}, rng, 0, 1);
    const auto w = random_windows(12, cfg.gate_input_dims(), rng);
    const auto whole = enhance(params, cfg, clip, w);
    CHECK(whole.frames.shape() == clip.shape());
    CHECK(whole.gates.size() == 12);
    CHECK(enhance(params, cfg, clip, w, ChunkOptions{12, 4}).frames == whole.frames);

    // Chunks shorter than the clip still produce every frame and stay close
    // to the whole-sequence result away from the cuts.
    const auto chunked = enhance(params, cfg, clip, w, ChunkOptions{8, 4});
    CHECK(chunked.frames.shape() == clip.shape());
    for (double v : chunked.frames.values()) CHECK(std::isfinite(v));

    ModelConfig id = cfg;
    id.residual = true;
    auto zero = params;
    zero_all(zero, "recon.");
    CHECK(enhance(zero, id, clip, w).frames == clip);
}

TEST_CASE("architecture is recovered from a parameter set") {
    for (auto kind : {CellKind::quality_gated, CellKind::original}) {
        auto c = small_config(kind);
        c.feature_dims = 38;
        c.window_T = 6;
        c.spatial_layers = 3;
        const auto p = init_params<float>(c, 1);
        const auto got = config_from_params(p, true);
        CHECK(got.cell_kind == kind);
        CHECK(got.channels == c.channels);
        CHECK(got.kernel == c.kernel);
        CHECK(got.spatial_layers == 3);
        CHECK(got.recon_layers == c.recon_layers);
        CHECK(got.residual);
        if (kind == CellKind::quality_gated) {
            CHECK(got.lstm_hidden == c.lstm_hidden);
            CHECK(got.window_T == 6);
        }
        CHECK(parameter_shapes(got) == parameter_shapes(c));
    }
    auto p = init_params<float>(ModelConfig{}, 1);
    p.erase("recon.b2");
    CHECK_THROWS_AS(config_from_params(p), ShapeError);
}
