#pragma once

// Measurements around the model: how much each frame feeds the memory of
// another, frame-to-frame correlation, quality fluctuation, and dPSNR
// evaluation of a trained parameter set. Frame indices are zero-based.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgcl/model.hpp"
#include "qgcl/video_io.hpp"

namespace qgcl::analysis {

// weight[m] is the share of frame m's candidate memory inside C_n of the
// direction that reaches n from m: forward for m < n, backward for m > n.
// For m == n it is i_n / 2, which each direction contributes once.
struct ContributionProfile {
    std::size_t target = 0;
    std::vector<double> weight;
};

// Per-frame input and forget gates, each in [0, 1].
ContributionProfile contribution(std::span<const double> input, std::span<const double> forget, std::size_t n);
ContributionProfile contribution(const model::GateSequence& gates, std::size_t n);

// Pearson correlation of co-located pixels. Throws DomainError if either
// frame is constant.
double pcc(const FrameView& a, const FrameView& b);

struct PccCurve {
    // mean[d-1] for distance d; empty when every pair at d was skipped.
    std::vector<std::optional<double>> mean;
    std::vector<std::size_t> pairs;
    std::vector<std::size_t> skipped;  // pairs involving a constant frame
};
PccCurve pcc_curve(const LumaSequence& seq, std::size_t max_distance);

struct FluctuationStats {
    double std = 0.0;           // population standard deviation
    std::optional<double> pvd;  // mean peak-valley difference
    std::size_t pairs = 0;
};

// Each peak is paired with the nearest valley after it and the nearest
// before it; shared pairs count once.
FluctuationStats quality_fluctuation_stats(std::span<const double> psnr);

struct TestPair {
    std::string name;
    LumaSequence raw;
    LumaSequence compressed;  // with metadata
};

struct EvalOptions {
    std::optional<model::ChunkOptions> chunks;
    std::vector<std::size_t> contribution_frames;
    unsigned threads = 1;  // feature extraction
};

struct SequenceReport {
    std::string name;
    DeltaPsnrReport psnr;
    LumaSequence enhanced;
    std::optional<model::GateSequence> gates;  // quality-gated cell only
    std::vector<ContributionProfile> contributions;
};

struct EvalReport {
    std::vector<SequenceReport> sequences;
    std::optional<double> mean_delta_psnr;  // over sequences with a defined mean
    model::ParamCount params;
};

EvalReport evaluate(const model::Params<float>& params, const model::ModelConfig& cfg,
                    std::span<const TestPair> pairs, const EvalOptions& opt = {});

// `frame,psnr_compressed,psnr_enhanced,delta`; lossless frames print inf.
void write_frame_csv(const std::filesystem::path& path, const DeltaPsnrReport& r);
// `frame,weight`.
void write_contribution_csv(const std::filesystem::path& path, const ContributionProfile& p);
// One row per sequence.
void write_summary_csv(const std::filesystem::path& path, const EvalReport& r);

}  // namespace qgcl::analysis
