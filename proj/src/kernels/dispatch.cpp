#include <atomic>
#include <cstdlib>
#include <string>

#include "kernel_variants.hpp"
#include "qgcl/error.hpp"

namespace qgcl::kernels {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::avx512: return "avx512";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "avx512") return Isa::avx512;
    throw DomainError("unknown kernel variant '" + std::string(name) + "'");
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
#if QGCL_HAVE_X86_SIMD
        case Isa::avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
#else
        default: return false;
#endif
    }
    return false;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512})
        if (isa_supported(isa)) out.push_back(isa);
    return out;
}

Isa default_isa() {
    if (const char* env = std::getenv("QGCL_ISA"); env && *env) {
        const Isa forced = parse_isa(env);
        if (!isa_supported(forced))
            throw DomainError("QGCL_ISA=" + std::string(env) + " not supported by this CPU");
        return forced;
    }
    if (isa_supported(Isa::avx512)) return Isa::avx512;
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

namespace {

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{default_isa()};
    return isa;
}

}  // namespace

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_supported(isa))
        throw DomainError("kernel variant " + std::string(isa_name(isa)) + " not supported");
    active().store(isa, std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& table(Isa isa) {
    if (!isa_supported(isa))
        throw DomainError("kernel variant " + std::string(isa_name(isa)) + " not supported");
    switch (isa) {
#if QGCL_HAVE_X86_SIMD
        case Isa::avx2: return avx2::table<T>();
        case Isa::avx512: return avx512::table<T>();
#endif
        default: return scalar::table<T>();
    }
}

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    table<T>(active_isa()).gemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    return table<T>(active_isa()).dot(x, y, n);
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    table<T>(active_isa()).axpy(alpha, x, y, n);
}

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);
template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, const float*,
                          std::size_t, const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double*, std::size_t, bool);
template float dot<float>(const float*, const float*, std::size_t);
template double dot<double>(const double*, const double*, std::size_t);
template void axpy<float>(float, const float*, float*, std::size_t);
template void axpy<double>(double, const double*, double*, std::size_t);

}  // namespace qgcl::kernels
