#pragma once

#include "qgcl/kernels.hpp"

namespace qgcl::kernels {

namespace scalar {
template <class T>
const KernelTable<T>& table();
}

#if QGCL_HAVE_X86_SIMD
namespace avx2 {
template <class T>
const KernelTable<T>& table();
}
namespace avx512 {
template <class T>
const KernelTable<T>& table();
}
#endif

}  // namespace qgcl::kernels
