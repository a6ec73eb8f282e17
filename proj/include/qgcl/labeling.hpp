#pragma once

// Peak-quality-frame labels from a per-frame PSNR curve.

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "qgcl/video_io.hpp"

namespace qgcl {

struct PqfLabels {
    std::vector<int> labels;  // 1 for a peak-quality frame
    std::size_t positive_count = 0;
    std::size_t negative_count = 0;
};

// A frame is a PQF when its PSNR strictly exceeds every existing neighbour.
// A single-frame sequence is one PQF.
PqfLabels detect_pqf(std::span<const double> psnr);

// Mirror image of detect_pqf: strict local minima.
std::vector<int> detect_valleys(std::span<const double> psnr);

struct ClassWeight {
    double P = 0.0;  // negatives / positives
    bool degenerate = false;  // no negatives at all
};

ClassWeight class_weight(std::span<const int> labels);

// PSNR of each compressed frame against its raw frame. Throws if any frame
// is lossless, since the PQF definition needs finite values.
std::vector<double> frame_psnr(const LumaSequence& raw, const LumaSequence& compressed);

// CSV `frame_index,psnr,label`.
void write_label_csv(const std::filesystem::path& path, std::span<const double> psnr, const PqfLabels& labels);
struct LabelRows {
    std::vector<double> psnr;
    std::vector<int> labels;
};
LabelRows read_label_csv(const std::filesystem::path& path);

}  // namespace qgcl
