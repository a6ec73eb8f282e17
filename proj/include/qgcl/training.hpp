#pragma once

// Two-stage training: the gates generator alone on PQF labels, then every
// network jointly on reconstruction error.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qgcl/adam.hpp"
#include "qgcl/autodiff.hpp"
#include "qgcl/features.hpp"
#include "qgcl/labeling.hpp"
#include "qgcl/model.hpp"
#include "qgcl/video_io.hpp"

namespace qgcl::training {

enum class Stage { pretrain_gates, joint };

struct TrainingConfig {
    Stage stage = Stage::joint;
    double learning_rate = 1e-4;
    double K = 10.0;
    std::size_t T = 4;
    std::size_t clip_length = 8;
    std::size_t crop = 64;
    std::size_t batch = 4;
    std::size_t steps = 1000;
    std::uint64_t seed = 1;
    model::CellKind cell_kind = model::CellKind::quality_gated;
    std::size_t lstm_hidden = 256;
    bool residual = false;
    double clip_norm = 5.0;
    std::size_t checkpoint_every = 500;
    std::size_t validate_every = 100;
    std::size_t log_every = 10;
    unsigned threads = 1;

    void validate() const;
    model::ModelConfig model_config() const;
};

// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
TrainingConfig parse_config(const std::string& text, const std::string& origin = "config");
TrainingConfig load_config(const std::filesystem::path& path);
std::string format_config(const TrainingConfig& c);
// Applies one `key=value` assignment; used for command-line overrides.
void set_config_value(TrainingConfig& c, const std::string& key, const std::string& value);

std::string_view stage_name(Stage s);

// ---- data -------------------------------------------------------------------
struct Video {
    std::string name;
    LumaSequence raw;
    LumaSequence compressed;  // with metadata
    std::vector<features::QualityVector> q;
    std::vector<double> psnr;
    std::vector<int> labels;
};

// Features from the full compressed frames, labels from raw-vs-compressed PSNR.
Video prepare_video(std::string name, LumaSequence raw, LumaSequence compressed, unsigned threads = 1);

// One row of a dataset list: CSV `name,raw,compressed,meta`. Relative paths
// resolve against the list's directory.
struct DatasetEntry {
    std::string name;
    std::filesystem::path raw, compressed, meta;
};
std::vector<DatasetEntry> read_dataset_list(const std::filesystem::path& list_csv);

// Both luma files are read with their `<file>.desc` descriptors.
struct LoadedPair {
    LumaSequence raw;
    LumaSequence compressed;  // with metadata
};
LoadedPair load_pair(const DatasetEntry& e);

std::vector<Video> load_dataset(const std::filesystem::path& list_csv, unsigned threads = 1);

struct TrainingSample {
    Tensor<float> compressed;  // (L,1,crop,crop)
    Tensor<float> raw;
    std::vector<std::vector<double>> windows;
    std::vector<int> labels;
    std::size_t video = 0, start = 0, y = 0, x = 0;
};

// Deterministic stream of random clips: video, start frame and crop origin
// are drawn uniformly. Videos too short or too small are skipped with a
// warning; if none remain the constructor throws.
class ClipSampler {
public:
    ClipSampler(std::span<const Video> videos, const TrainingConfig& cfg, std::uint64_t seed);
    TrainingSample next();
    const std::vector<std::string>& warnings() const { return warnings_; }
    std::size_t eligible() const { return eligible_.size(); }

private:
    std::span<const Video> videos_;
    std::vector<std::vector<std::vector<double>>> windows_;
    std::vector<std::size_t> eligible_;
    std::vector<std::string> warnings_;
    std::size_t length_, crop_;
    std::mt19937_64 rng_;
};

// Quality features and labels only, for the first stage.
struct GateSequenceData {
    std::vector<features::QualityVector> q;
    std::vector<int> labels;
};

GateSequenceData gate_data(const Video& v);

struct GateClip {
    std::vector<std::vector<double>> windows;
    std::vector<int> labels;
};

class GateClipSampler {
public:
    GateClipSampler(std::span<const GateSequenceData> data, std::size_t clip_length, std::size_t T,
                    std::uint64_t seed);
    GateClip next();

private:
    std::vector<std::vector<std::vector<double>>> windows_;
    std::span<const GateSequenceData> data_;
    std::vector<std::size_t> eligible_;
    std::size_t length_;
    std::mt19937_64 rng_;
};

// Consecutive non-overlapping clips covering each sequence (a shorter tail
// clip included), for evaluation.
std::vector<GateClip> tile_gate_clips(std::span<const GateSequenceData> data, std::size_t clip_length,
                                      std::size_t T);

// ---- losses -------------------------------------------------------------------
template <class T>
ad::Var<T> gates_pretrain_loss(std::span<const ad::Var<T>> logits, std::span<const int> labels, double P, double K);

template <class T>
ad::Var<T> joint_loss(const ad::Var<T>& enhanced, const ad::Var<T>& raw);

// ---- runs ---------------------------------------------------------------------
struct LogRow {
    std::size_t step = 0;
    double loss = 0.0;
    std::optional<double> metric;  // accuracy or validation dPSNR
};

struct RunHooks {
    // Called with the parameters each time a checkpoint is due.
    std::function<void(std::size_t step, const model::Params<float>&)> checkpoint;
    std::function<void(const LogRow&)> log;
};

struct PretrainResult {
    model::Params<float> params;
    std::vector<LogRow> log;
    double P = 0.0;
    double final_accuracy = 0.0;
};

// Fraction of frames where s(K G_n) > 0.5 agrees with the label.
double gate_accuracy(const model::Params<float>& params, const model::ModelConfig& cfg,
                     std::span<const GateClip> clips);

// Adam over the gates-generator tensors only; every other tensor is returned
// untouched. P comes from the labels of the whole training set.
PretrainResult pretrain_gates(std::span<const GateSequenceData> train, std::span<const GateSequenceData> held_out,
                              const TrainingConfig& cfg, model::Params<float> init, const RunHooks& hooks = {});

struct ValidationClip {
    Tensor<float> compressed;  // (L,1,h,w)
    Tensor<float> raw;
    std::vector<std::vector<double>> windows;
};

ValidationClip validation_clip(const TrainingSample& s);

// Mean dPSNR after 8-bit rounding, over clips with a finite value.
std::optional<double> validation_delta_psnr(const model::Params<float>& params, const model::ModelConfig& cfg,
                                            std::span<const ValidationClip> clips);

struct JointResult {
    model::Params<float> params;  // last parameters that produced a finite loss
    std::vector<LogRow> log;
    bool halted = false;
    std::string halt_reason;
    std::size_t steps_done = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;  // on the first batch, after training
};

// End-to-end training with global-norm clipping. A non-finite loss or
// gradient stops the run with `halted` set; the returned parameters are the
// last good ones.
JointResult joint_train(ClipSampler& sampler, std::span<const ValidationClip> validation, const TrainingConfig& cfg,
                        model::Params<float> init, const RunHooks& hooks = {});

// Batch loss and gradient for one update: members evaluated on up to
// `threads` workers, gradients summed in member order and divided by the
// batch size, so the result does not depend on the thread count.
struct BatchGradient {
    double loss = 0.0;
    NamedTensors<float> grads;
};
BatchGradient joint_batch_gradient(const model::Params<float>& params, const model::ModelConfig& cfg,
                                   std::span<const TrainingSample> batch, unsigned threads);

void write_log_csv(const std::filesystem::path& path, std::span<const LogRow> rows, const std::string& metric_name);

}  // namespace qgcl::training
