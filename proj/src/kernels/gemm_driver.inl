// Blocked GEMM driver shared by the SIMD variants. Included inside an
// ISA-specific anonymous namespace so each translation unit gets its own copy
// compiled with its own target flags. Standard headers (<algorithm>, <cstring>,
// <vector>) must already be included.
//
// Requires, in the including scope:
//   template <class T> struct Micro;   // with MR, NR and
//   static void run(std::size_t kc, const T* ap, const T* bp, std::size_t ldbp, T* c,
//                   std::size_t ldc);
// The micro-kernel accumulates an MR x NR tile:
//   c[i*ldc + j] += sum_p ap[p*MR + i] * bp[p*ldbp + j].
// Untransposed B is read in place for full-width tiles; everything else is packed.

template <class T>
struct PackBuffers {
    std::vector<T> a;
    std::vector<T> b;
};

template <class T>
PackBuffers<T>& pack_buffers() {
    thread_local PackBuffers<T> buffers;
    return buffers;
}

template <class T, std::size_t MR>
void pack_a(qgcl::kernels::Trans ta, const T* a, std::size_t lda, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, T* out) {
    for (std::size_t ir = 0; ir < mc; ir += MR) {
        const std::size_t rows = std::min(MR, mc - ir);
        for (std::size_t p = 0; p < kc; ++p) {
            T* dst = out + p * MR;
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t i = i0 + ir + r;
                const std::size_t kk = p0 + p;
                dst[r] = ta == qgcl::kernels::Trans::no ? a[i * lda + kk] : a[kk * lda + i];
            }
            for (std::size_t r = rows; r < MR; ++r) dst[r] = T(0);
        }
        out += kc * MR;
    }
}

template <class T, std::size_t NR>
void pack_b(qgcl::kernels::Trans tb, const T* b, std::size_t ldb, std::size_t j0, std::size_t nc,
            std::size_t p0, std::size_t kc, T* out) {
    for (std::size_t jr = 0; jr < nc; jr += NR) {
        const std::size_t cols = std::min(NR, nc - jr);
        if (tb == qgcl::kernels::Trans::no) {
            for (std::size_t p = 0; p < kc; ++p) {
                const T* src = b + (p0 + p) * ldb + j0 + jr;
                T* dst = out + p * NR;
                std::memcpy(dst, src, cols * sizeof(T));
                for (std::size_t c = cols; c < NR; ++c) dst[c] = T(0);
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                T* dst = out + p * NR;
                for (std::size_t c = 0; c < cols; ++c) dst[c] = b[(j0 + jr + c) * ldb + p0 + p];
                for (std::size_t c = cols; c < NR; ++c) dst[c] = T(0);
            }
        }
        out += kc * NR;
    }
}

template <class T>
void blocked_gemm(qgcl::kernels::Trans ta, qgcl::kernels::Trans tb, std::size_t m, std::size_t n,
                  std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate) {
    using M = Micro<T>;
    constexpr std::size_t MR = M::MR;
    constexpr std::size_t NR = M::NR;
    constexpr std::size_t KC = 256;
    constexpr std::size_t MC = MR * 8;
    constexpr std::size_t NC = NR * 128;

    if (!accumulate) {
        for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
    }
    if (m == 0 || n == 0 || k == 0) return;

    auto& buf = pack_buffers<T>();
    buf.a.resize(MC * KC);
    buf.b.resize(NC * KC);
    alignas(64) T tile[MR * NR];

    for (std::size_t j0 = 0; j0 < n; j0 += NC) {
        const std::size_t nc = std::min(NC, n - j0);
        for (std::size_t p0 = 0; p0 < k; p0 += KC) {
            const std::size_t kc = std::min(KC, k - p0);
            const bool direct_b = tb == qgcl::kernels::Trans::no;
            if (!direct_b) pack_b<T, NR>(tb, b, ldb, j0, nc, p0, kc, buf.b.data());
            for (std::size_t i0 = 0; i0 < m; i0 += MC) {
                const std::size_t mc = std::min(MC, m - i0);
                pack_a<T, MR>(ta, a, lda, i0, mc, p0, kc, buf.a.data());
                for (std::size_t jr = 0; jr < nc; jr += NR) {
                    const std::size_t cols = std::min(NR, nc - jr);
                    const T* bp;
                    std::size_t ldbp = NR;
                    if (!direct_b) {
                        bp = buf.b.data() + (jr / NR) * kc * NR;
                    } else if (cols == NR) {
                        bp = b + p0 * ldb + j0 + jr;
                        ldbp = ldb;
                    } else {
                        pack_b<T, NR>(tb, b, ldb, j0 + jr, cols, p0, kc, buf.b.data());
                        bp = buf.b.data();
                    }
                    for (std::size_t ir = 0; ir < mc; ir += MR) {
                        const std::size_t rows = std::min(MR, mc - ir);
                        const T* ap = buf.a.data() + (ir / MR) * kc * MR;
                        T* cp = c + (i0 + ir) * ldc + j0 + jr;
                        if (rows == MR && cols == NR) {
                            M::run(kc, ap, bp, ldbp, cp, ldc);
                        } else {
                            std::fill(tile, tile + MR * NR, T(0));
                            M::run(kc, ap, bp, ldbp, tile, NR);
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t cc = 0; cc < cols; ++cc)
                                    cp[r * ldc + cc] += tile[r * NR + cc];
                        }
                    }
                }
            }
        }
    }
}
