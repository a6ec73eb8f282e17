#include "qgcl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qgcl/error.hpp"
#include "qgcl/labeling.hpp"

namespace qgcl::synthetic {

namespace {

struct Level {
    int qp;
    double block_mix;  // weight of the 4x4 block mean
    int quant;         // quantizer step in 8-bit units
    double noise;      // sd of additive noise
    std::int64_t bits;
};

Level level_for(std::size_t offset) {
    // offset 0 is the peak; the others degrade with distance from it.
    switch (offset) {
        case 0: return {32, 0.15, 4, 1.0, 24000};
        case 1: return {37, 0.55, 10, 2.5, 7000};
        case 2: return {38, 0.65, 12, 3.0, 6000};
        default: return {37, 0.6, 11, 2.7, 6500};
    }
}

}  // namespace

VideoPair make_pair(const PairOptions& opt) {
    if (opt.width < 8 || opt.height < 8 || opt.frames == 0 || opt.period == 0)
        throw DomainError("synthetic pair needs at least 8x8 pixels, one frame and a positive period");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // A handful of drifting blobs and gratings.
    struct Blob {
        double x, y, vx, vy, r, amp;
    };
    std::vector<Blob> blobs(5);
    for (auto& b : blobs)
        b = {u(rng) * double(opt.width), u(rng) * double(opt.height), (u(rng) - 0.5) * 1.5, (u(rng) - 0.5) * 1.5,
             4.0 + 8.0 * u(rng), (u(rng) - 0.5) * 140.0};
    const double fx = 0.05 + 0.15 * u(rng), fy = 0.05 + 0.15 * u(rng), drift = 0.3 + 0.4 * u(rng);

    VideoPair p;
    for (LumaSequence* s : {&p.raw, &p.compressed}) {
        s->width = opt.width;
        s->height = opt.height;
    }
    std::vector<FrameMeta> meta;
    for (std::size_t n = 0; n < opt.frames; ++n) {
        std::vector<double> img(opt.width * opt.height);
        for (std::size_t y = 0; y < opt.height; ++y)
            for (std::size_t x = 0; x < opt.width; ++x) {
                double v = 128.0 + 40.0 * std::sin(fx * double(x) + drift * double(n)) * std::cos(fy * double(y));
                for (const auto& b : blobs) {
                    const double dx = double(x) - (b.x + b.vx * double(n));
                    const double dy = double(y) - (b.y + b.vy * double(n));
                    v += b.amp * std::exp(-(dx * dx + dy * dy) / (2 * b.r * b.r));
                }
                img[y * opt.width + x] = std::clamp(v, 16.0, 239.0);
            }
        std::vector<std::uint8_t> raw(img.size());
        for (std::size_t i = 0; i < img.size(); ++i) raw[i] = static_cast<std::uint8_t>(std::lround(img[i]));

        const std::size_t offset = (n + opt.period - opt.phase % opt.period) % opt.period;
        const Level lv = level_for(offset);
        std::vector<std::uint8_t> comp(img.size());
        for (std::size_t by = 0; by < opt.height; by += 4)
            for (std::size_t bx = 0; bx < opt.width; bx += 4) {
                double mean = 0.0;
                std::size_t cnt = 0;
                for (std::size_t y = by; y < std::min(by + 4, opt.height); ++y)
                    for (std::size_t x = bx; x < std::min(bx + 4, opt.width); ++x, ++cnt) mean += raw[y * opt.width + x];
                mean /= double(cnt);
                for (std::size_t y = by; y < std::min(by + 4, opt.height); ++y)
                    for (std::size_t x = bx; x < std::min(bx + 4, opt.width); ++x) {
                        const std::size_t i = y * opt.width + x;
                        double v = (1 - lv.block_mix) * raw[i] + lv.block_mix * mean + lv.noise * gauss(rng);
                        v = std::round(v / lv.quant) * lv.quant;
                        comp[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                    }
            }
        p.raw.frames.push_back(std::move(raw));
        p.compressed.frames.push_back(std::move(comp));
        const std::int64_t jitter = static_cast<std::int64_t>(std::lround(gauss(rng) * double(lv.bits) * 0.03));
        meta.push_back({lv.qp, std::max<std::int64_t>(1, lv.bits + jitter)});
    }
    p.compressed.meta = std::move(meta);
    return p;
}

FeatureSequence make_feature_sequence(const FeatureOptions& opt) {
    if (opt.frames == 0 || opt.period < 2) throw DomainError("feature sequence needs frames and a period >= 2");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> phase_d(0, opt.period - 1);
    const std::size_t phase = phase_d(rng);

    // Loadings of every feature on the (standardized) quality signal, and a
    // per-sequence content offset that carries no quality information.
    std::array<double, features::kQualityDims> load{}, offset{};
    for (std::size_t k = 0; k < features::kQualityDims; ++k) {
        load[k] = 0.4 * gauss(rng);
        offset[k] = 0.5 * gauss(rng);
    }
    const double base = 31.0 + 3.0 * gauss(rng);

    FeatureSequence s;
    for (std::size_t n = 0; n < opt.frames; ++n) {
        const std::size_t d = (n + opt.period - phase) % opt.period;
        const double dist = double(std::min(d, opt.period - d));
        s.psnr.push_back(base + (d == 0 ? 1.6 : -0.4 * dist) + 0.15 * gauss(rng));
    }
    s.labels = detect_pqf(s.psnr).labels;
    double mean = 0.0;
    for (double v : s.psnr) mean += v;
    mean /= double(s.psnr.size());
    for (std::size_t n = 0; n < opt.frames; ++n) {
        features::QualityVector q{};
        const double signal = s.psnr[n] - mean;
        for (std::size_t k = 0; k < features::kNssDims; ++k)
            q[k] = offset[k] + load[k] * signal + opt.noise * 0.4 * gauss(rng);
        const int qp = std::clamp(static_cast<int>(std::lround(37 - 2.5 * signal + gauss(rng))), 0, 51);
        q[features::kNssDims] = qp / 51.0;
        q[features::kNssDims + 1] = 0.8 * signal + opt.noise * gauss(rng);
        s.q.push_back(q);
    }
    return s;
}

}  // namespace qgcl::synthetic
