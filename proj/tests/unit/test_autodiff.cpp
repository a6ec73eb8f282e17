#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "qgcl/adam.hpp"
#include "qgcl/autodiff.hpp"
#include "qgcl/kernels.hpp"
#include "support/oracles.hpp"

using namespace qgcl;
using qgcl::test::random_tensor;
using qgcl::test::relative_error;

namespace {

using VarD = ad::Var<double>;

// Checks d(loss)/d(leaf) for every element of every leaf against central
// differences of the scalar function rebuilt from the leaf values.
double max_gradient_error(std::vector<Tensor<double>>& inputs,
                          const std::function<VarD(const std::vector<VarD>&)>& build) {
    std::vector<VarD> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        leaves.push_back(ad::leaf(inputs[i], "x" + std::to_string(i)));
    auto grads = ad::backward(build(leaves));

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor<double>& g = grads.at("x" + std::to_string(i));
        for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
            auto f = [&] {
                ad::NoGradGuard ng;
                std::vector<VarD> c;
                for (auto& t : inputs) c.push_back(ad::constant(t));
                return build(c).value().item();
            };
            const double num = test::central_difference(f, inputs[i][e], 1e-4);
            worst = std::max(worst, relative_error(g[e], num));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("conv2d examples") {
    SUBCASE("zero input gives zero output") {
        std::mt19937_64 rng(1);
        auto x = ad::constant(Tensor<double>(Shape{3, 5, 4}));
        auto w = ad::constant(random_tensor<double>({2, 3, 3, 3}, rng));
        auto b = ad::constant(Tensor<double>(Shape{2}));
        const auto y = ad::conv2d(x, w, b);
        for (double v : y.value().values()) CHECK(v == 0.0);
    }
    const Tensor<double> img(Shape{1, 2, 2}, {1, 2, 3, 4});
    SUBCASE("identity 1x1 kernel") {
        auto y = ad::conv2d(ad::constant(img), ad::constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)),
                            ad::constant(Tensor<double>(Shape{1})));
        CHECK(y.value() == img);
    }
    SUBCASE("3x3 all-ones kernel sums the whole 2x2 frame") {
        const Tensor<double> w(Shape{1, 1, 3, 3}, 1.0);
        const Tensor<double> b(Shape{1});
        const auto expected = test::conv2d_direct(img, w, b);
        for (double v : expected.values()) CHECK(v == 10.0);
        auto y = ad::conv2d(ad::constant(img), ad::constant(w), ad::constant(b));
        CHECK(y.value() == expected);
    }
    SUBCASE("channel mismatch is rejected") {
        auto x = ad::constant(Tensor<double>(Shape{2, 4, 4}));
        auto w = ad::constant(Tensor<double>(Shape{1, 3, 3, 3}));
        auto b = ad::constant(Tensor<double>(Shape{1}));
        CHECK_THROWS_AS(ad::conv2d(x, w, b), ShapeError);
        auto even = ad::constant(Tensor<double>(Shape{1, 2, 2, 2}));
        CHECK_THROWS_AS(ad::conv2d(x, even, b), ShapeError);
    }
}

TEST_CASE("conv2d matches the nested-loop oracle on every kernel variant") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor<double>({5, 9, 7}, rng);
    const auto w = random_tensor<double>({4, 5, 5, 5}, rng);
    const auto b = random_tensor<double>({4}, rng);
    const auto expected = test::conv2d_direct(x, w, b);
    const auto restore = kernels::active_isa();
    for (auto isa : kernels::supported_isas()) {
        kernels::set_isa(isa);
        auto y = ad::conv2d(ad::constant(x), ad::constant(w), ad::constant(b));
        for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.value()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        // batched input gives the per-frame result
        Tensor<double> batch(Shape{2, 5, 9, 7});
        std::copy(x.data(), x.data() + x.numel(), batch.data());
        std::copy(x.data(), x.data() + x.numel(), batch.data() + x.numel());
        auto yb = ad::conv2d(ad::constant(batch), ad::constant(w), ad::constant(b));
        for (std::size_t i = 0; i < y.numel(); ++i) {
            CHECK(yb.value()[i] == y.value()[i]);
            CHECK(yb.value()[y.numel() + i] == y.value()[i]);
        }
    }
    kernels::set_isa(restore);
}

TEST_CASE("conv2d is linear") {
    std::mt19937_64 rng(11);
    const auto x = random_tensor<double>({3, 8, 8}, rng);
    const auto z = random_tensor<double>({3, 8, 8}, rng);
    const auto w = ad::constant(random_tensor<double>({2, 3, 5, 5}, rng));
    const auto zero = ad::constant(Tensor<double>(Shape{2}));
    const double a = 0.7, c = -1.9;
    Tensor<double> mix(x.shape());
    for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + c * z[i];
    auto lhs = ad::conv2d(ad::constant(mix), w, zero).value();
    auto cx = ad::conv2d(ad::constant(x), w, zero).value();
    auto cz = ad::conv2d(ad::constant(z), w, zero).value();
    for (std::size_t i = 0; i < lhs.numel(); ++i) CHECK(std::abs(lhs[i] - (a * cx[i] + c * cz[i])) < 1e-10);
}

TEST_CASE("elementwise examples and errors") {
    auto s = [](double v) { return ad::constant(Tensor<double>::scalar(v)); };
    CHECK(ad::sigmoid(s(0.0)).value().item() == 0.5);
    CHECK(ad::relu(s(-3.5)).value().item() == 0.0);
    CHECK(ad::relu(s(2.25)).value().item() == 2.25);
    CHECK(ad::sigmoid(s(1.0)).value().item() == doctest::Approx(0.7310585786).epsilon(1e-10));
    CHECK(ad::sigmoid(s(-800.0)).value().item() == 0.0);

    auto a = ad::constant(Tensor<double>(Shape{2, 3}, 1.0));
    auto b = ad::constant(Tensor<double>(Shape{3, 2}, 1.0));
    CHECK_THROWS_AS(ad::add(a, b), ShapeError);
    CHECK_THROWS_AS(ad::mul(a, b), ShapeError);
    // scalar broadcast either side
    CHECK(ad::mul(s(2.0), a).value()[5] == 2.0);
    CHECK(ad::add(a, s(2.0)).value()[0] == 3.0);

    const std::array<ad::Var<double>, 3> ops{a, ad::constant(Tensor<double>(Shape{2, 3}, 3.0)), s(0.25)};
    auto blend = ad::elementwise<double>(ad::Elementwise::affine_blend, ops);
    CHECK(blend.value()[0] == doctest::Approx(1.5));
    CHECK_THROWS_AS(ad::elementwise<double>(ad::Elementwise::relu, ops), ShapeError);
}

TEST_CASE("dense examples") {
    const Tensor<double> x(Shape{2}, {1, 1});
    auto eye = ad::constant(Tensor<double>(Shape{2, 2}, {1, 0, 0, 1}));
    auto zb = ad::constant(Tensor<double>(Shape{2}));
    CHECK(ad::dense(ad::constant(x), eye, zb).value() == x);
    auto y = ad::dense(ad::constant(x), ad::constant(Tensor<double>(Shape{2, 2})),
                       ad::constant(Tensor<double>(Shape{2}, {0.5, -2})));
    CHECK(y.value() == Tensor<double>(Shape{2}, {0.5, -2}));
    auto m = ad::dense(ad::constant(x), ad::constant(Tensor<double>(Shape{2, 2}, {1, 2, 3, 4})), zb);
    CHECK(m.value() == Tensor<double>(Shape{2}, {3, 7}));
    CHECK_THROWS_AS(ad::dense(ad::constant(Tensor<double>(Shape{3})), eye, zb), ShapeError);
}

TEST_CASE("backward examples") {
    SUBCASE("sum of squares") {
        auto x = ad::leaf(Tensor<double>(Shape{3}, {1, 2, 3}), "x");
        auto g = ad::backward(ad::sum(ad::mul(x, x)));
        CHECK(g.at("x") == Tensor<double>(Shape{3}, {2, 4, 6}));
    }
    SUBCASE("sigmoid of a dot product at zero weight") {
        const Tensor<double> xv(Shape{3}, {0.5, -1.5, 2.0});
        auto w = ad::leaf(Tensor<double>(Shape{1, 3}), "w");
        auto loss = ad::sigmoid(ad::dense(ad::constant(xv), w, ad::constant(Tensor<double>(Shape{1}))));
        auto g = ad::backward(loss);
        for (std::size_t i = 0; i < 3; ++i) CHECK(g.at("w")[i] == doctest::Approx(0.25 * xv[i]).epsilon(1e-15));
    }
    SUBCASE("non-scalar loss and repeated sweeps are rejected") {
        auto x = ad::leaf(Tensor<double>(Shape{2}, {1, 2}), "x");
        CHECK_THROWS_AS(ad::backward(ad::mul(x, x)), ShapeError);
        auto loss = ad::sum(x);
        ad::backward(loss);
        CHECK_THROWS_AS(ad::backward(loss), Error);
    }
    SUBCASE("no-grad mode records nothing") {
        auto x = ad::leaf(Tensor<double>(Shape{2}, {1, 2}), "x");
        ad::NoGradGuard guard;
        auto y = ad::sum(ad::mul(x, x));
        CHECK_FALSE(y.requires_grad());
        CHECK(y.node()->parents.empty());
    }
    SUBCASE("shared operand accumulates from both uses") {
        auto x = ad::leaf(Tensor<double>::scalar(3.0), "x");
        auto g = ad::backward(ad::add(ad::mul(x, x), ad::scale(x, 2.0)));
        CHECK(g.at("x").item() == 8.0);
    }
}

TEST_CASE("primitive gradients match central differences") {
    std::mt19937_64 rng(2024);
    auto r = [&](Shape s) { return random_tensor<double>(std::move(s), rng); };
    const double tol = 1e-4;

    SUBCASE("conv2d") {
        std::vector<Tensor<double>> in{r({3, 6, 5}), r({2, 3, 5, 5}), r({2})};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  return ad::sum(ad::mul(ad::conv2d(v[0], v[1], v[2]), ad::conv2d(v[0], v[1], v[2])));
              }) < tol);
    }
    SUBCASE("batched conv2d") {
        std::vector<Tensor<double>> in{r({2, 2, 4, 4}), r({3, 2, 3, 3}), r({3})};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  return ad::sum(ad::tanh(ad::conv2d(v[0], v[1], v[2])));
              }) < tol);
    }
    SUBCASE("dense, sigmoid, tanh") {
        std::vector<Tensor<double>> in{r({7}), r({4, 7}), r({4})};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  auto h = ad::dense(v[0], v[1], v[2]);
                  return ad::sum(ad::mul(ad::sigmoid(h), ad::tanh(h)));
              }) < tol);
    }
    SUBCASE("relu away from the kink") {
        Tensor<double> x = r({12});
        for (auto& v : x.values()) v = v >= 0 ? v + 0.1 : v - 0.1;
        std::vector<Tensor<double>> in{x};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  return ad::sum(ad::mul(ad::relu(v[0]), v[0]));
              }) < tol);
    }
    SUBCASE("affine blend and broadcast products") {
        std::vector<Tensor<double>> in{r({2, 3, 3}), r({2, 3, 3}), r({1})};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  auto g = ad::sigmoid(v[2]);
                  auto c = ad::affine_blend(v[0], ad::tanh(v[1]), g);
                  return ad::sum(ad::mul(ad::mul(c, c), ad::one_minus(g)));
              }) < tol);
    }
    SUBCASE("structural ops") {
        std::vector<Tensor<double>> in{r({2, 3}), r({1, 3}), r({3})};
        CHECK(max_gradient_error(in, [](const std::vector<VarD>& v) {
                  const std::array<VarD, 2> parts{v[0], v[1]};
                  auto cat = ad::concat<double>(parts);  // (3,3)
                  const std::array<VarD, 2> rows{ad::select(cat, 2), v[2]};
                  auto st = ad::stack<double>(rows);  // (2,3)
                  auto sl = ad::slice(cat, 1, 2);     // (2,3)
                  return ad::sum(ad::mul(ad::sub(st, sl), ad::reshape(ad::tanh(ad::reshape(st, {6})), {2, 3})));
              }) < tol);
    }
    SUBCASE("mse and weighted cross entropy") {
        std::vector<Tensor<double>> in{r({5}), r({5})};
        const int labels[] = {1, 0, 0, 1, 0};
        CHECK(max_gradient_error(in, [&](const std::vector<VarD>& v) {
                  return ad::add(ad::mse(v[0], v[1]),
                                 ad::weighted_sigmoid_cross_entropy<double>(v[0], labels, 1.5, 10.0));
              }) < tol);
    }
}

TEST_CASE("forward and backward are deterministic") {
    auto run = [] {
        std::mt19937_64 rng(5);
        auto x = ad::constant(random_tensor<float>({2, 3, 12, 12}, rng));
        auto w = ad::leaf(random_tensor<float>({4, 3, 5, 5}, rng), "w");
        auto b = ad::leaf(random_tensor<float>({4}, rng), "b");
        auto y = ad::conv2d(x, w, b);
        auto loss = ad::mean(ad::mul(y, y));
        auto g = ad::backward(loss);
        return std::make_pair(loss.value().item(), g);
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("adam examples") {
    NamedTensors<double> params{{"p", Tensor<double>(Shape{3}, {1.0, -2.0, 0.5})}};
    AdamState<double> st;
    SUBCASE("zero gradient leaves parameters and advances the counter") {
        adam_step(params, {{"p", Tensor<double>(Shape{3})}}, st);
        CHECK(params.at("p") == Tensor<double>(Shape{3}, {1.0, -2.0, 0.5}));
        CHECK(st.step == 1);
    }
    SUBCASE("first step moves each entry by about lr against the gradient sign") {
        for (double g : {3.0, -0.01, 1e-3, 250.0}) {
            NamedTensors<double> p{{"s", Tensor<double>::scalar(0.0)}};
            AdamState<double> s;
            adam_step(p, {{"s", Tensor<double>::scalar(g)}}, s);
            CHECK(std::abs(p.at("s").item() - (-1e-4 * (g > 0 ? 1 : -1))) < 1e-6);
        }
    }
    SUBCASE("constant gradient gives monotone movement") {
        double prev = params.at("p")[0];
        for (int i = 0; i < 2; ++i) {
            adam_step(params, {{"p", Tensor<double>(Shape{3}, 0.7)}}, st);
            CHECK(params.at("p")[0] < prev);
            prev = params.at("p")[0];
        }
        CHECK(st.step == 2);
    }
    SUBCASE("non-finite gradient is rejected without side effects") {
        Tensor<double> g(Shape{3}, 1.0);
        g[1] = std::nan("");
        try {
            adam_step(params, {{"p", g}}, st);
            FAIL("expected rejection");
        } catch (const DomainError& e) {
            CHECK(std::string(e.what()).find("'p'") != std::string::npos);
        }
        CHECK(st.step == 0);
        CHECK(params.at("p")[0] == 1.0);
    }
}

TEST_CASE("activation probe tracks relu regions") {
    ad::NoGradGuard ng;
    auto pattern = [](std::vector<double> v) {
        ad::ActivationProbe probe;
        ad::relu(ad::constant(Tensor<double>(Shape{v.size()}, v)));
        return std::pair{probe.pattern(), probe.units()};
    };
    const auto a = pattern({0.5, -1.0, 2.0});
    CHECK(a.second == 3);
    CHECK(pattern({0.1, -3.0, 0.2}).first == a.first);
    CHECK(pattern({0.5, 1.0, 2.0}).first != a.first);
    CHECK(pattern({0.5, 0.0, 2.0}).first == a.first);  // zero counts as inactive
    {
        ad::ActivationProbe outer;
        { ad::ActivationProbe inner; ad::relu(ad::constant(Tensor<double>::scalar(1.0))); }
        CHECK(outer.units() == 0);
    }
}
