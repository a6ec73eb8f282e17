// Micro-kernel, dot and axpy written against a small vector-traits type V
// providing: reg, width, zero(), load(p), store(p, r), set1(x), fmadd(a, b, c),
// hsum(r). Included by each ISA translation unit after defining its traits.

template <class V, std::size_t MRows, std::size_t NVecs>
struct MicroImpl {
    using T = typename V::scalar;
    static constexpr std::size_t MR = MRows;
    static constexpr std::size_t NR = NVecs * V::width;

    static void run(std::size_t kc, const T* ap, const T* bp, std::size_t ldbp, T* c,
                    std::size_t ldc) {
        typename V::reg acc[MR][NVecs];
#pragma GCC unroll 16
        for (std::size_t i = 0; i < MR; ++i)
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NVecs; ++v) acc[i][v] = V::zero();

        for (std::size_t p = 0; p < kc; ++p) {
            typename V::reg bv[NVecs];
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NVecs; ++v) bv[v] = V::load(bp + v * V::width);
#pragma GCC unroll 16
            for (std::size_t i = 0; i < MR; ++i) {
                const typename V::reg av = V::set1(ap[i]);
#pragma GCC unroll 4
                for (std::size_t v = 0; v < NVecs; ++v) acc[i][v] = V::fmadd(av, bv[v], acc[i][v]);
            }
            ap += MR;
            bp += ldbp;
        }

#pragma GCC unroll 16
        for (std::size_t i = 0; i < MR; ++i)
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NVecs; ++v) {
                T* dst = c + i * ldc + v * V::width;
                V::store(dst, V::add(V::load(dst), acc[i][v]));
            }
    }
};

template <class V>
typename V::scalar simd_dot(const typename V::scalar* x, const typename V::scalar* y,
                            std::size_t n) {
    using T = typename V::scalar;
    typename V::reg a0 = V::zero(), a1 = V::zero();
    std::size_t i = 0;
    for (; i + 2 * V::width <= n; i += 2 * V::width) {
        a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
        a1 = V::fmadd(V::load(x + i + V::width), V::load(y + i + V::width), a1);
    }
    for (; i + V::width <= n; i += V::width) a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
    T acc = V::hsum(V::add(a0, a1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class V>
void simd_axpy(typename V::scalar alpha, const typename V::scalar* x, typename V::scalar* y,
               std::size_t n) {
    const typename V::reg av = V::set1(alpha);
    std::size_t i = 0;
    for (; i + V::width <= n; i += V::width)
        V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}
