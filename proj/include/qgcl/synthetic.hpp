#pragma once

// Deterministic synthetic data with LDP-like periodic quality: every
// `period`-th frame is coded at a finer quantizer than the frames around it.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qgcl/features.hpp"
#include "qgcl/video_io.hpp"

namespace qgcl::synthetic {

struct PairOptions {
    std::size_t width = 48;
    std::size_t height = 48;
    std::size_t frames = 8;
    std::size_t period = 4;
    std::size_t phase = 0;  // index of the first high-quality frame
    std::uint64_t seed = 1;
};

struct VideoPair {
    LumaSequence raw;
    LumaSequence compressed;  // carries per-frame metadata
};

// Smooth drifting content; the "compressed" copy gets block averaging,
// coarse quantization and noise whose strength depends on the frame's
// position in the quality period.
VideoPair make_pair(const PairOptions& opt);

struct FeatureOptions {
    std::size_t frames = 64;
    std::size_t period = 4;
    double noise = 0.35;  // per-feature noise relative to the quality signal
    std::uint64_t seed = 1;
};

struct FeatureSequence {
    std::vector<features::QualityVector> q;
    std::vector<double> psnr;  // planted quality curve
    std::vector<int> labels;   // PQF labels of that curve
};

// Feature vectors whose entries load on a planted PSNR curve with one peak
// every `period` frames (random phase), plus noise.
FeatureSequence make_feature_sequence(const FeatureOptions& opt);

}  // namespace qgcl::synthetic
