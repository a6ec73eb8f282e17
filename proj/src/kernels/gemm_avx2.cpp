// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and is only
// entered after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "kernel_variants.hpp"

namespace qgcl::kernels::avx2 {
namespace {

struct VecF {
    using scalar = float;
    using reg = __m256;
    static constexpr std::size_t width = 8;
    static reg zero() { return _mm256_setzero_ps(); }
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg r) { _mm256_storeu_ps(p, r); }
    static reg set1(float x) { return _mm256_set1_ps(x); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
    static float hsum(reg r) {
        __m128 lo = _mm256_castps256_ps128(r);
        __m128 hi = _mm256_extractf128_ps(r, 1);
        lo = _mm_add_ps(lo, hi);
        lo = _mm_hadd_ps(lo, lo);
        lo = _mm_hadd_ps(lo, lo);
        return _mm_cvtss_f32(lo);
    }
};

struct VecD {
    using scalar = double;
    using reg = __m256d;
    static constexpr std::size_t width = 4;
    static reg zero() { return _mm256_setzero_pd(); }
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg r) { _mm256_storeu_pd(p, r); }
    static reg set1(double x) { return _mm256_set1_pd(x); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
    static double hsum(reg r) {
        __m128d lo = _mm256_castpd256_pd128(r);
        __m128d hi = _mm256_extractf128_pd(r, 1);
        lo = _mm_add_pd(lo, hi);
        return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    }
};

#include "simd_common.inl"

template <class T>
struct Micro;
template <>
struct Micro<float> : MicroImpl<VecF, 6, 2> {};
template <>
struct Micro<double> : MicroImpl<VecD, 6, 2> {};

#include "gemm_driver.inl"

template <class T>
struct Vec;
template <>
struct Vec<float> : VecF {};
template <>
struct Vec<double> : VecD {};

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    return simd_dot<Vec<T>>(x, y, n);
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    simd_axpy<Vec<T>>(alpha, x, y, n);
}

}  // namespace

template <class T>
const KernelTable<T>& table() {
    static const KernelTable<T> t{&blocked_gemm<T>, &dot<T>, &axpy<T>};
    return t;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace qgcl::kernels::avx2
