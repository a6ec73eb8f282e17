#include <cmath>
#include <random>

#include "doctest.h"
#include "qgcl/analysis.hpp"
#include "qgcl/error.hpp"
#include "qgcl/synthetic.hpp"
#include "support/scratch_dir.hpp"

using namespace qgcl;
using namespace qgcl::analysis;

namespace {

// Straight from the product formulas, one product per entry.
double contribution_oracle(const std::vector<double>& i, const std::vector<double>& f, std::size_t n, std::size_t m) {
    double w = 0.5 * i[m];
    if (m < n)
        for (std::size_t j = m + 1; j <= n; ++j) w *= f[j];
    else
        for (std::size_t j = n; j < m; ++j) w *= f[j];
    return w;
}

LumaSequence sequence_of(std::size_t w, std::size_t h, std::vector<std::vector<std::uint8_t>> frames) {
    LumaSequence s;
    s.width = w;
    s.height = h;
    s.frames = std::move(frames);
    return s;
}

std::vector<std::uint8_t> noise_frame(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, 255);
    std::vector<std::uint8_t> f(n);
    for (auto& v : f) v = static_cast<std::uint8_t>(u(rng));
    return f;
}

model::ModelConfig small_model(bool residual = false) {
    model::ModelConfig c;
    c.channels = 3;
    c.kernel = 3;
    c.spatial_layers = 2;
    c.recon_layers = 2;
    c.lstm_hidden = 4;
    c.residual = residual;
    return c;
}

}  // namespace

TEST_CASE("contribution with constant half gates decays geometrically") {
    const std::vector<double> half(41, 0.5);
    const auto p = contribution(half, half, 20);
    CHECK(p.target == 20);
    for (std::size_t k = 0; k <= 20; ++k) {
        const double want = 0.25 * std::pow(0.5, static_cast<double>(k));
        CHECK(std::abs(p.weight[20 - k] - want) < 1e-12);
        CHECK(std::abs(p.weight[20 + k] - want) < 1e-12);
    }
    for (double i : {0.1, 0.5, 0.9}) {
        const std::vector<double> in(15, i), fo(15, 1.0 - i);
        const auto q = contribution(in, fo, 7);
        for (std::size_t k = 1; k <= 7; ++k) {
            CHECK(q.weight[7 - k] < q.weight[7 - k + 1]);
            CHECK(q.weight[7 + k] < q.weight[7 + k - 1]);
        }
    }
}

TEST_CASE("contribution limits and errors") {
    const std::size_t N = 30;
    const std::vector<double> in(N, 1e-3), fo(N, 1.0 - 1e-6);
    const auto p = contribution(in, fo, 10);
    for (std::size_t m = 0; m < N; ++m) CHECK(p.weight[m] == doctest::Approx(0.5e-3).epsilon(1e-4));

    CHECK_THROWS_AS(contribution(in, fo, N), DomainError);
    CHECK_THROWS_AS(contribution(in, std::vector<double>(N - 1, 0.5), 0), ShapeError);
    std::vector<double> bad = in;
    bad[3] = 1.5;
    CHECK_THROWS_AS(contribution(bad, fo, 0), DomainError);

    model::GateSequence g;
    g.logits = {-1.0, 0.0, 2.0, 0.5};
    const auto q = contribution(g, 2);
    CHECK(q.weight[2] == doctest::Approx(0.5 * g.input(2)).epsilon(1e-15));
    CHECK(q.weight[0] == doctest::Approx(0.5 * g.input(0) * g.forget(1) * g.forget(2)).epsilon(1e-15));
    CHECK(q.weight[3] == doctest::Approx(0.5 * g.input(3) * g.forget(2)).epsilon(1e-15));
}

TEST_CASE("contribution matches the product formula on random gates") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> len(1, 40);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t N = len(rng);
        std::vector<double> i(N), f(N);
        for (std::size_t j = 0; j < N; ++j) {
            i[j] = u(rng);
            f[j] = trial % 2 ? 1.0 - i[j] : u(rng);
        }
        const std::size_t dead = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
        i[dead] = 0.0;
        const std::size_t n = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
        const auto p = contribution(i, f, n);
        REQUIRE(p.weight.size() == N);
        CHECK(p.weight[dead] == 0.0);
        for (std::size_t m = 0; m < N; ++m) {
            CHECK(p.weight[m] >= 0.0);
            CHECK(p.weight[m] <= 0.5);
            CHECK(p.weight[m] == doctest::Approx(contribution_oracle(i, f, n, m)).epsilon(1e-12));
        }
    }
}

TEST_CASE("pcc identities") {
    std::mt19937_64 rng(3);
    const std::size_t w = 17, h = 11;
    for (int trial = 0; trial < 50; ++trial) {
        auto a = noise_frame(w * h, rng);
        auto b = noise_frame(w * h, rng);
        std::vector<std::uint8_t> inv(a.size()), aff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            inv[i] = static_cast<std::uint8_t>(255 - a[i]);
            a[i] = static_cast<std::uint8_t>(a[i] / 3);
            aff[i] = static_cast<std::uint8_t>(2 * a[i] + 40);
        }
        const FrameView A{w, h, a}, B{w, h, b}, Aff{w, h, aff};
        CHECK(pcc(A, A) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(pcc(A, B) == doctest::Approx(pcc(B, A)).epsilon(1e-14));
        CHECK(pcc(Aff, B) == doctest::Approx(pcc(A, B)).epsilon(1e-12));
        CHECK(std::abs(pcc(A, B)) <= 1.0);
    }
    std::vector<std::uint8_t> a(24), inv(24);
    for (std::size_t i = 0; i < 24; ++i) {
        a[i] = static_cast<std::uint8_t>(i * 10);
        inv[i] = static_cast<std::uint8_t>(255 - a[i]);
    }
    CHECK(pcc({6, 4, a}, {6, 4, inv}) == doctest::Approx(-1.0).epsilon(1e-14));
    const std::vector<std::uint8_t> flat(24, 9);
    CHECK_THROWS_AS(pcc({6, 4, a}, {6, 4, flat}), DomainError);
    CHECK_THROWS_AS(pcc({6, 4, a}, {4, 6, a}), ShapeError);
}

TEST_CASE("pcc curves") {
    std::mt19937_64 rng(8);
    const auto still = noise_frame(64 * 64, rng);
    const auto stat = pcc_curve(sequence_of(64, 64, std::vector<std::vector<std::uint8_t>>(10, still)), 5);
    REQUIRE(stat.mean.size() == 5);
    for (const auto& m : stat.mean) CHECK(*m == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<std::vector<std::uint8_t>> frames;
    for (int n = 0; n < 50; ++n) frames.push_back(noise_frame(64 * 64, rng));
    const auto noise = pcc_curve(sequence_of(64, 64, frames), 8);
    REQUIRE(noise.mean.size() == 8);
    for (std::size_t d = 0; d < 8; ++d) {
        CHECK(std::abs(*noise.mean[d]) < 0.05);
        CHECK(noise.pairs[d] == 50 - (d + 1));
    }

    frames[4].assign(64 * 64, 128);
    const auto gap = pcc_curve(sequence_of(64, 64, frames), 2);
    CHECK(gap.skipped[0] == 2);
    CHECK(gap.pairs[0] == 47);
    CHECK_THROWS_AS(pcc_curve(sequence_of(64, 64, frames), 50), DomainError);
    CHECK_THROWS_AS(pcc_curve(sequence_of(64, 64, frames), 0), DomainError);
}

TEST_CASE("quality fluctuation statistics") {
    const auto s = quality_fluctuation_stats(std::vector<double>{30, 32, 30, 32, 30});
    CHECK(std::abs(s.std - 0.9798) < 1e-3);
    CHECK(std::abs(s.std - std::sqrt(0.96)) < 1e-12);
    REQUIRE(s.pvd);
    CHECK(*s.pvd == 2.0);

    const auto flat = quality_fluctuation_stats(std::vector<double>(9, 33.0));
    CHECK(flat.std == 0.0);
    CHECK_FALSE(flat.pvd);

    // Peaks 1, 3, 5; valleys 0, 2, 4. Pairs (1,0) (1,2) (3,2) (3,4) (5,4).
    const auto hand = quality_fluctuation_stats(std::vector<double>{30, 35, 31, 33, 29, 36});
    CHECK(hand.pairs == 5);
    CHECK(*hand.pvd == doctest::Approx(22.0 / 5.0).epsilon(1e-14));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> amp(0.1, 5.0), base(20.0, 45.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double A = amp(rng), mu = base(rng);
        std::vector<double> v(3 + trial % 20);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = mu + (i % 2 ? A : -A);
        const auto r = quality_fluctuation_stats(v);
        CHECK(*r.pvd == doctest::Approx(2.0 * A).epsilon(1e-12));

        std::normal_distribution<double> z(mu, A);
        std::vector<double> x(30), shifted(30), scaled(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = z(rng);
            shifted[i] = x[i] + 7.5;
            scaled[i] = 3.0 * x[i];
        }
        const double sx = quality_fluctuation_stats(x).std;
        CHECK(quality_fluctuation_stats(shifted).std == doctest::Approx(sx).epsilon(1e-10));
        CHECK(quality_fluctuation_stats(scaled).std == doctest::Approx(3.0 * sx).epsilon(1e-12));
    }
    CHECK_FALSE(quality_fluctuation_stats(std::vector<double>{30, 32}).pvd);
    CHECK_THROWS_AS(quality_fluctuation_stats(std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(quality_fluctuation_stats(std::vector<double>{30, INFINITY, 31}), DomainError);
}

TEST_CASE("evaluate: identity control and report writers") {
    const auto cfg = small_model(true);
    auto params = model::init_params<float>(cfg, 2);
    for (auto& [name, t] : params)
        if (name.rfind("recon.", 0) == 0) t.fill(0.0f);

    std::vector<TestPair> pairs;
    for (std::uint64_t seed : {1, 2, 3}) {
        synthetic::PairOptions o;
        o.width = 24;
        o.height = 24;
        o.frames = 6;
        o.seed = seed;
        auto p = synthetic::make_pair(o);
        pairs.push_back({"seq" + std::to_string(seed), std::move(p.raw), std::move(p.compressed)});
    }
    EvalOptions opt;
    opt.contribution_frames = {0, 3};
    const auto r = evaluate(params, cfg, pairs, opt);
    REQUIRE(r.sequences.size() == 3);
    REQUIRE(r.mean_delta_psnr);
    CHECK(*r.mean_delta_psnr == 0.0);
    for (std::size_t k = 0; k < r.sequences.size(); ++k) {
        const auto& s = r.sequences[k];
        CHECK(s.name == pairs[k].name);
        CHECK(s.enhanced.frames == pairs[k].compressed.frames);
        CHECK(s.contributions.size() == 2);
        CHECK(s.gates->size() == 6);
        for (const auto& d : s.psnr.delta) CHECK(*d == 0.0);
    }
    CHECK(r.params.total() == model::param_count(params).total());

    test::ScratchDir dir("eval");
    write_summary_csv(dir / "summary.csv", r);
    const auto summary = test::slurp(dir / "summary.csv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
    CHECK(summary.rfind("sequence,frames,psnr_compressed,psnr_enhanced,delta_psnr,excluded_frames\nseq1,6,", 0) == 0);

    write_contribution_csv(dir / "c.csv", contribution(std::vector<double>{0.5, 1.0}, std::vector<double>{0.5, 0.5}, 1));
    CHECK(test::slurp(dir / "c.csv") == "frame,weight\n0,0.125\n1,0.5\n");

    DeltaPsnrReport d;
    d.compressed = {Psnr::decibels(30.0), Psnr::infinite()};
    d.enhanced = {Psnr::decibels(30.5), Psnr::decibels(40.0)};
    d.delta = {0.5, std::nullopt};
    write_frame_csv(dir / "f.csv", d);
    CHECK(test::slurp(dir / "f.csv") == "frame,psnr_compressed,psnr_enhanced,delta\n0,30,30.5,0.5\n1,inf,40,\n");

    auto orig = small_model(true);
    orig.cell_kind = model::CellKind::original;
    CHECK_THROWS_AS(evaluate(model::init_params<float>(orig, 1), orig, pairs, opt), DomainError);
    opt.contribution_frames.clear();
    const auto ro = evaluate(model::init_params<float>(orig, 1), orig, pairs, opt);
    CHECK_FALSE(ro.sequences[0].gates);
}
