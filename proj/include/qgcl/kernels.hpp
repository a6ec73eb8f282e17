#pragma once

// Dense arithmetic kernels behind the tensor engine. Every kernel has a
// portable scalar reference implementation; x86 builds add AVX2 and AVX-512
// variants that are selected at runtime from the CPU feature flags.
//
// The active variant can be forced with set_isa() or the QGCL_ISA
// environment variable (scalar | avx2 | avx512).

#include <cstddef>
#include <string_view>
#include <vector>

namespace qgcl::kernels {

enum class Isa { scalar, avx2, avx512 };
enum class Trans { no, yes };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

bool isa_supported(Isa isa);
std::vector<Isa> supported_isas();

// Best supported variant, unless overridden by QGCL_ISA.
Isa default_isa();
Isa active_isa();
void set_isa(Isa isa);

// C = op(A) * op(B) (+ C when accumulate). Row-major with leading dimensions.
// op(A) is m x k, op(B) is k x n.
template <class T>
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                        std::size_t ldc, bool accumulate);
template <class T>
using DotFn = T (*)(const T* x, const T* y, std::size_t n);
// y += alpha * x
template <class T>
using AxpyFn = void (*)(T alpha, const T* x, T* y, std::size_t n);

template <class T>
struct KernelTable {
    GemmFn<T> gemm;
    DotFn<T> dot;
    AxpyFn<T> axpy;
};

// Direct access to one variant; throws DomainError if the CPU lacks it.
template <class T>
const KernelTable<T>& table(Isa isa);

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

template <class T>
T dot(const T* x, const T* y, std::size_t n);

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n);

}  // namespace qgcl::kernels
