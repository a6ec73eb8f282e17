#include "qgcl/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "qgcl/error.hpp"
#include "text_util.hpp"

namespace qgcl::features {

namespace {

constexpr double kMscnC = 1.0 / 255.0;
constexpr double kAlphaMin = 0.2;
constexpr double kAlphaStep = 1e-3;
constexpr std::size_t kAlphaCount = 9801;  // 0.2 .. 10.0 inclusive

std::array<double, kMscnWindow> gaussian_taps() {
    constexpr double sigma = 7.0 / 6.0;
    std::array<double, kMscnWindow> g{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kMscnWindow; ++i) {
        const double d = static_cast<double>(i) - 3.0;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Separable replicate-padded filtering with the normalized Gaussian.
Tensor<double> gaussian_blur(const Tensor<double>& img) {
    static const auto g = gaussian_taps();
    const std::size_t h = img.dim(0), w = img.dim(1);
    Tensor<double> rows(img.shape()), out(img.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < kMscnWindow; ++k) {
                const long sx = std::clamp<long>(long(x) + long(k) - 3, 0, long(w) - 1);
                s += g[k] * img.at(y, std::size_t(sx));
            }
            rows.at(y, x) = s;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < kMscnWindow; ++k) {
                const long sy = std::clamp<long>(long(y) + long(k) - 3, 0, long(h) - 1);
                s += g[k] * rows.at(std::size_t(sy), x);
            }
            out.at(y, x) = s;
        }
    return out;
}

struct AlphaTable {
    std::vector<double> ratio;  // ggd_moment_ratio at each grid alpha
    AlphaTable() : ratio(kAlphaCount) {
        for (std::size_t i = 0; i < kAlphaCount; ++i) ratio[i] = ggd_moment_ratio(grid_alpha(i));
    }
    static double grid_alpha(std::size_t i) { return kAlphaMin + kAlphaStep * static_cast<double>(i); }

    // Grid alpha whose ratio is closest to `target`; ties go to the smaller alpha.
    double invert(double target) const {
        std::size_t best = 0;
        double best_err = std::abs(ratio[0] - target);
        for (std::size_t i = 1; i < kAlphaCount; ++i) {
            const double e = std::abs(ratio[i] - target);
            if (e < best_err) {
                best_err = e;
                best = i;
            }
        }
        return grid_alpha(best);
    }
};

const AlphaTable& alpha_table() {
    static const AlphaTable t;
    return t;
}

void check_samples(std::span<const double> s, const char* who) {
    if (s.size() < 100)
        throw DomainError(std::string(who) + ": need at least 100 samples, got " + std::to_string(s.size()));
    for (double v : s)
        if (!std::isfinite(v)) throw DomainError(std::string(who) + ": non-finite sample");
    if (std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; }))
        throw DomainError(std::string(who) + ": all samples are equal");
}

void check_image(const Tensor<double>& img, std::size_t min_side, const char* who) {
    if (img.rank() != 2) throw ShapeError(std::string(who) + ": expected an (H,W) image, got " + shape_str(img.shape()));
    if (img.dim(0) < min_side || img.dim(1) < min_side)
        throw ShapeError(std::string(who) + ": image " + shape_str(img.shape()) + " smaller than " +
                         std::to_string(min_side) + "x" + std::to_string(min_side));
}

}  // namespace

double ggd_moment_ratio(double alpha) {
    return std::exp(std::lgamma(1.0 / alpha) + std::lgamma(3.0 / alpha) - 2.0 * std::lgamma(2.0 / alpha));
}

Tensor<double> mscn(const Tensor<double>& image) {
    check_image(image, kMscnWindow, "mscn");
    const Tensor<double> mu = gaussian_blur(image);
    Tensor<double> sq(image.shape());
    for (std::size_t i = 0; i < image.numel(); ++i) sq[i] = image[i] * image[i];
    const Tensor<double> mu2 = gaussian_blur(sq);
    Tensor<double> out(image.shape());
    for (std::size_t i = 0; i < image.numel(); ++i) {
        const double sigma = std::sqrt(std::abs(mu2[i] - mu[i] * mu[i]));
        out[i] = (image[i] - mu[i]) / (sigma + kMscnC);
    }
    return out;
}

GgdFit fit_ggd(std::span<const double> s) {
    check_samples(s, "fit_ggd");
    double sum_abs = 0.0, sum_sq = 0.0;
    for (double v : s) {
        sum_abs += std::abs(v);
        sum_sq += v * v;
    }
    const double n = static_cast<double>(s.size());
    const double mean_abs = sum_abs / n, mean_sq = sum_sq / n;
    GgdFit f;
    f.sigma2 = mean_sq;
    f.alpha = alpha_table().invert(mean_sq / (mean_abs * mean_abs));
    return f;
}

AggdFit fit_aggd(std::span<const double> s) {
    check_samples(s, "fit_aggd");
    double left_sq = 0.0, right_sq = 0.0, sum_abs = 0.0;
    std::size_t nl = 0, nr = 0;
    for (double v : s) {
        if (v < 0) {
            left_sq += v * v;
            ++nl;
        } else if (v > 0) {
            right_sq += v * v;
            ++nr;
        }
        sum_abs += std::abs(v);
    }
    if (nl == 0 || nr == 0) throw DomainError("fit_aggd: samples are all of one sign");
    const double n = static_cast<double>(s.size());
    const double l = std::sqrt(left_sq / double(nl));
    const double r = std::sqrt(right_sq / double(nr));
    const double mean_abs = sum_abs / n;
    const double mean_sq = (left_sq + right_sq) / n;
    // (gamma^3+1)(gamma+1)/(gamma^2+1)^2 with gamma = l/r, written so that
    // swapping l and r leaves the value bit-identical.
    const double l2 = l * l, r2 = r * r;
    const double adjust = ((l2 * l + r2 * r) * (l + r)) / ((l2 + r2) * (l2 + r2));
    const double rhat = mean_abs * mean_abs / mean_sq * adjust;
    AggdFit f;
    f.nu = alpha_table().invert(1.0 / rhat);
    f.sigma_l2 = l2;
    f.sigma_r2 = r2;
    const double g1 = std::tgamma(1.0 / f.nu), g2 = std::tgamma(2.0 / f.nu), g3 = std::tgamma(3.0 / f.nu);
    f.eta = (r - l) * (g2 / g1) * std::sqrt(g1 / g3);
    return f;
}

std::vector<double> pairwise_products(const Tensor<double>& c, Orientation o) {
    const std::size_t h = c.dim(0), w = c.dim(1);
    std::vector<double> out;
    switch (o) {
        case Orientation::horizontal:
            out.reserve(h * (w - 1));
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x + 1 < w; ++x) out.push_back(c.at(y, x) * c.at(y, x + 1));
            break;
        case Orientation::vertical:
            out.reserve((h - 1) * w);
            for (std::size_t y = 0; y + 1 < h; ++y)
                for (std::size_t x = 0; x < w; ++x) out.push_back(c.at(y, x) * c.at(y + 1, x));
            break;
        case Orientation::diagonal:
            for (std::size_t y = 0; y + 1 < h; ++y)
                for (std::size_t x = 0; x + 1 < w; ++x) out.push_back(c.at(y, x) * c.at(y + 1, x + 1));
            break;
        case Orientation::antidiagonal:
            for (std::size_t y = 0; y + 1 < h; ++y)
                for (std::size_t x = 1; x < w; ++x) out.push_back(c.at(y, x) * c.at(y + 1, x - 1));
            break;
    }
    return out;
}

Tensor<double> downsample2(const Tensor<double>& img) {
    check_image(img, 2, "downsample2");
    const std::size_t h = img.dim(0) / 2, w = img.dim(1) / 2;
    Tensor<double> out(Shape{h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            out.at(y, x) = 0.25 * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) + img.at(2 * y + 1, 2 * x) +
                                   img.at(2 * y + 1, 2 * x + 1));
    return out;
}

std::array<double, kNssDims> nss36(const Tensor<double>& image) {
    check_image(image, 2 * kMscnWindow, "nss36");
    std::array<double, kNssDims> out{};
    std::size_t k = 0;
    Tensor<double> scaled = image;
    for (int scale = 0; scale < 2; ++scale) {
        if (scale == 1) scaled = downsample2(image);
        const Tensor<double> c = mscn(scaled);
        const GgdFit g = fit_ggd(c.span());
        out[k++] = g.alpha;
        out[k++] = g.sigma2;
        for (Orientation o : {Orientation::horizontal, Orientation::vertical, Orientation::diagonal,
                              Orientation::antidiagonal}) {
            const auto p = pairwise_products(c, o);
            const AggdFit a = fit_aggd(p);
            out[k++] = a.nu;
            out[k++] = a.eta;
            out[k++] = a.sigma_l2;
            out[k++] = a.sigma_r2;
        }
    }
    return out;
}

std::array<double, kNssDims> nss36(const FrameView& frame) {
    Tensor<double> img(Shape{frame.height, frame.width});
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) img[i] = frame.pixels[i] / 255.0;
    return nss36(img);
}

BitStats bit_stats(std::span<const FrameMeta> meta) {
    if (meta.empty()) throw DomainError("bit_stats: no frames");
    double sum = 0.0;
    for (const auto& m : meta) {
        validate_meta(m);
        sum += std::log2(static_cast<double>(m.bits));
    }
    BitStats s;
    s.mean = sum / static_cast<double>(meta.size());
    double var = 0.0;
    for (const auto& m : meta) {
        const double d = std::log2(static_cast<double>(m.bits)) - s.mean;
        var += d * d;
    }
    s.std = std::sqrt(var / static_cast<double>(meta.size()));
    return s;
}

QualityVector quality_vector(const std::array<double, kNssDims>& nss, const FrameMeta& meta, const BitStats& stats) {
    validate_meta(meta);
    QualityVector q{};
    std::copy(nss.begin(), nss.end(), q.begin());
    q[kNssDims] = static_cast<double>(meta.qp) / 51.0;
    q[kNssDims + 1] = stats.std > 0.0 ? (std::log2(static_cast<double>(meta.bits)) - stats.mean) / stats.std : 0.0;
    for (double v : q)
        if (!std::isfinite(v)) throw DomainError("quality_vector: non-finite feature");
    return q;
}

QualityVector quality_vector(const FrameView& frame, const FrameMeta& meta, const BitStats& stats) {
    return quality_vector(nss36(frame), meta, stats);
}

std::vector<QualityVector> extract(const LumaSequence& seq, unsigned threads) {
    seq.validate();
    if (!seq.meta) throw FormatError("feature extraction needs per-frame metadata");
    const BitStats stats = bit_stats(*seq.meta);
    const std::size_t n = seq.frame_count();
    std::vector<QualityVector> out(n);
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = quality_vector(seq.frame(i), (*seq.meta)[i], stats);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers)
                    out[i] = quality_vector(seq.frame(i), (*seq.meta)[i], stats);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<double> window(std::span<const QualityVector> q, std::size_t n, std::size_t T) {
    if (q.empty()) throw DomainError("window: empty feature sequence");
    if (T % 2 != 0) throw DomainError("window: T must be even, got " + std::to_string(T));
    if (n >= q.size())
        throw DomainError("window: frame " + std::to_string(n) + " outside sequence of " + std::to_string(q.size()));
    std::vector<double> out;
    out.reserve(kQualityDims * (T + 1));
    const long half = static_cast<long>(T / 2);
    for (long d = -half; d <= half; ++d) {
        const long idx = std::clamp<long>(static_cast<long>(n) + d, 0, static_cast<long>(q.size()) - 1);
        const auto& v = q[static_cast<std::size_t>(idx)];
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

std::vector<std::vector<double>> windows(std::span<const QualityVector> q, std::size_t T) {
    std::vector<std::vector<double>> out;
    out.reserve(q.size());
    for (std::size_t n = 0; n < q.size(); ++n) out.push_back(window(q, n, T));
    return out;
}

namespace {
std::string csv_header() {
    std::string h = "frame_index";
    for (std::size_t i = 0; i < kNssDims; ++i) h += ",nss" + std::to_string(i);
    h += ",qp_norm,bits_norm";
    return h;
}
}  // namespace

void write_csv(const std::filesystem::path& path, std::span<const QualityVector> q) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write feature CSV " + path.string());
    out << csv_header() << '\n';
    char buf[32];
    for (std::size_t n = 0; n < q.size(); ++n) {
        out << n;
        for (double v : q[n]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<QualityVector> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read feature CSV " + path.string());
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != csv_header())
        throw FormatError(path.string() + ": unexpected feature CSV header");
    std::vector<QualityVector> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cells = detail::split_csv(line);
        if (cells.size() != kQualityDims + 1) throw FormatError(where + ": expected 39 columns");
        if (detail::parse_int(cells[0], where) != static_cast<long long>(out.size()))
            throw FormatError(where + ": frame_index out of sequence");
        QualityVector q{};
        for (std::size_t i = 0; i < kQualityDims; ++i) q[i] = detail::parse_double(cells[i + 1], where);
        out.push_back(q);
    }
    if (out.empty()) throw FormatError(path.string() + ": no feature rows");
    return out;
}

}  // namespace qgcl::features
