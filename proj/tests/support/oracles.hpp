#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "qgcl/tensor.hpp"

namespace qgcl::test {

// Nested-loop same-padded convolution on a (C,H,W) input.
template <class T>
Tensor<T> conv2d_direct(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    const long pad = static_cast<long>(k / 2);
    Tensor<T> out(Shape{cout, h, wd});
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < wd; ++xx) {
                T s = b[co];
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long sy = static_cast<long>(y + ky) - pad;
                            const long sx = static_cast<long>(xx + kx) - pad;
                            if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd))
                                continue;
                            s += x.at(ci, sy, sx) * w.at(co, ci, ky, kx);
                        }
                out.at(co, y, xx) = s;
            }
    return out;
}

template <class T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
    return t;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients, whose
// central differences are dominated by rounding, from reading as large errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

// Central difference of f with respect to element i of x.
inline double central_difference(const std::function<double()>& f, double& xi, double eps) {
    const double saved = xi;
    xi = saved + eps;
    const double fp = f();
    xi = saved - eps;
    const double fm = f();
    xi = saved;
    return (fp - fm) / (2.0 * eps);
}

}  // namespace qgcl::test
