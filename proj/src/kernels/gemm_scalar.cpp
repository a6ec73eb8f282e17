// Portable reference kernels. These are the oracles for the SIMD variants and
// the fallback on CPUs without AVX2.

#include <cstddef>

#include "kernel_variants.hpp"

namespace qgcl::kernels::scalar {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
            if (tb == Trans::no) {
                const T* brow = b + p * ldb;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            } else {
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
            }
        }
    }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
const KernelTable<T>& table() {
    static const KernelTable<T> t{&gemm<T>, &dot<T>, &axpy<T>};
    return t;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace qgcl::kernels::scalar
