#pragma once

// Per-frame quality features: 36 natural-scene statistics (MSCN coefficients
// and generalized Gaussian fits at two scales) plus normalized QP and coded
// bits, and the temporal window that feeds the gates generator.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "qgcl/tensor.hpp"
#include "qgcl/video_io.hpp"

namespace qgcl::features {

inline constexpr std::size_t kNssDims = 36;
inline constexpr std::size_t kQualityDims = 38;
inline constexpr std::size_t kMscnWindow = 7;

using QualityVector = std::array<double, kQualityDims>;

// Local mean-subtracted contrast-normalized coefficients of an (H,W) image
// with intensities in [0,1]. Borders use replicate padding.
Tensor<double> mscn(const Tensor<double>& image);

struct GgdFit {
    double alpha = 0.0;   // shape
    double sigma2 = 0.0;  // second moment
};

struct AggdFit {
    double eta = 0.0;  // mean term
    double nu = 0.0;   // shape
    double sigma_l2 = 0.0;
    double sigma_r2 = 0.0;
};

// Moment-matching fits with the shape found by table lookup over
// alpha in [0.2, 10] at step 1e-3.
GgdFit fit_ggd(std::span<const double> samples);
AggdFit fit_aggd(std::span<const double> samples);

// r(alpha) = G(1/a) G(3/a) / G(2/a)^2, the ratio E[x^2] / E[|x|]^2 of a
// zero-mean generalized Gaussian.
double ggd_moment_ratio(double alpha);

enum class Orientation { horizontal, vertical, diagonal, antidiagonal };

// Products of each coefficient with its neighbour in the given direction:
// (0,+1), (+1,0), (+1,+1) and (+1,-1) respectively.
std::vector<double> pairwise_products(const Tensor<double>& coeffs, Orientation o);

// 2x2 mean pooling; odd trailing rows/columns are dropped.
Tensor<double> downsample2(const Tensor<double>& image);

// Per scale [alpha, sigma2, then (nu, eta, sigma_l2, sigma_r2) for the
// horizontal, vertical, diagonal and anti-diagonal products]; full scale first.
std::array<double, kNssDims> nss36(const Tensor<double>& image);
std::array<double, kNssDims> nss36(const FrameView& frame);

struct BitStats {
    double mean = 0.0;  // of log2(bits)
    double std = 0.0;   // population
};

BitStats bit_stats(std::span<const FrameMeta> meta);

QualityVector quality_vector(const FrameView& frame, const FrameMeta& meta, const BitStats& stats);
QualityVector quality_vector(const std::array<double, kNssDims>& nss, const FrameMeta& meta,
                             const BitStats& stats);

// Features for every frame of a sequence that carries metadata. Frames are
// processed by up to `threads` workers; the result does not depend on it.
std::vector<QualityVector> extract(const LumaSequence& seq, unsigned threads = 1);

// q_{n-T/2} .. q_{n+T/2} concatenated, indices clamped to [0, N-1].
// n is zero-based.
std::vector<double> window(std::span<const QualityVector> q, std::size_t n, std::size_t T);
std::vector<std::vector<double>> windows(std::span<const QualityVector> q, std::size_t T);

// CSV with `frame_index` and 38 feature columns.
void write_csv(const std::filesystem::path& path, std::span<const QualityVector> q);
std::vector<QualityVector> read_csv(const std::filesystem::path& path);

}  // namespace qgcl::features
