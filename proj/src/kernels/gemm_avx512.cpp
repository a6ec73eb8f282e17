// AVX-512F variants. Compiled with -mavx512f -mfma; entered only after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "kernel_variants.hpp"

namespace qgcl::kernels::avx512 {
namespace {

struct VecF {
    using scalar = float;
    using reg = __m512;
    static constexpr std::size_t width = 16;
    static reg zero() { return _mm512_setzero_ps(); }
    static reg load(const float* p) { return _mm512_loadu_ps(p); }
    static void store(float* p, reg r) { _mm512_storeu_ps(p, r); }
    static reg set1(float x) { return _mm512_set1_ps(x); }
    static reg add(reg a, reg b) { return _mm512_add_ps(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm512_fmadd_ps(a, b, c); }
    static float hsum(reg r) { return _mm512_reduce_add_ps(r); }
};

struct VecD {
    using scalar = double;
    using reg = __m512d;
    static constexpr std::size_t width = 8;
    static reg zero() { return _mm512_setzero_pd(); }
    static reg load(const double* p) { return _mm512_loadu_pd(p); }
    static void store(double* p, reg r) { _mm512_storeu_pd(p, r); }
    static reg set1(double x) { return _mm512_set1_pd(x); }
    static reg add(reg a, reg b) { return _mm512_add_pd(a, b); }
    static reg fmadd(reg a, reg b, reg c) { return _mm512_fmadd_pd(a, b, c); }
    static double hsum(reg r) { return _mm512_reduce_add_pd(r); }
};

#include "simd_common.inl"

template <class T>
struct Micro;
template <>
struct Micro<float> : MicroImpl<VecF, 12, 2> {};
template <>
struct Micro<double> : MicroImpl<VecD, 12, 2> {};

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

}  // namespace qgcl::kernels::avx512
