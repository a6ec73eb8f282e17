#pragma once

// The enhancement network: a per-frame spatial CNN, a bidirectional LSTM
// that turns windowed quality features into one gate logit per frame, a
// bidirectional ConvLSTM whose memory blend is driven by those gates, and a
// reconstruction CNN.
//
// Stage functions take parameters already bound into the current autodiff
// record (see Bound) so the same code serves training, inference and
// gradient checks in either float or double.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgcl/autodiff.hpp"
#include "qgcl/tensor.hpp"

namespace qgcl::model {

enum class CellKind { quality_gated, original };

std::string_view cell_kind_name(CellKind k);
CellKind parse_cell_kind(std::string_view s);

struct ModelConfig {
    std::size_t spatial_layers = 5;
    std::size_t recon_layers = 5;
    std::size_t kernel = 5;
    std::size_t channels = 24;
    std::size_t window_T = 4;
    std::size_t feature_dims = 38;
    std::size_t lstm_hidden = 256;
    CellKind cell_kind = CellKind::quality_gated;
    // Adds the compressed input to the reconstruction output.
    bool residual = false;

    std::size_t gate_input_dims() const { return feature_dims * (window_T + 1); }
    void validate() const;
};

template <class T>
using Params = NamedTensors<T>;

// Shapes of every trainable tensor, keyed by parameter name.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg);

// Conv and FC weights He-normal over fan-in, LSTM weights uniform in
// +-1/sqrt(hidden), forget-gate bias 1, all other biases 0.
template <class T>
Params<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

// Recovers the architecture from tensor names and shapes (layer counts,
// channels, kernel, hidden size, window length, cell kind). The residual
// flag leaves no trace in the tensors and is taken from the argument.
template <class T>
ModelConfig config_from_params(const Params<T>& params, bool residual = false,
                               std::size_t feature_dims = 38);

// Throws ShapeError naming the first missing, unexpected or mis-shaped tensor.
template <class T>
void validate_params(const ModelConfig& cfg, const Params<T>& params);

// Parameters attached to one autodiff record. With recording enabled each
// tensor becomes a named leaf whose gradient backward() reports; inside a
// NoGradGuard they are plain constants.
template <class T>
class Bound {
public:
    Bound(const Params<T>& params, bool trainable = true);
    const ad::Var<T>& operator()(const std::string& name) const;

private:
    std::map<std::string, ad::Var<T>> vars_;
};

// ---- spatial network --------------------------------------------------------
// (N,1,H,W) -> (N,C,H,W), conv+ReLU per layer, weights shared over frames.
template <class T>
ad::Var<T> spatial_forward(const ad::Var<T>& clip, const Bound<T>& p, const ModelConfig& cfg);

// ---- gates generator --------------------------------------------------------
template <class T>
struct LstmState {
    ad::Var<T> h;
    ad::Var<T> c;
};

// Gate order in the stacked weights is input, forget, candidate, output.
template <class T>
LstmState<T> lstm_step(const ad::Var<T>& x, const LstmState<T>& prev, const Bound<T>& p,
                       const std::string& prefix);

template <class T>
LstmState<T> lstm_zero_state(std::size_t hidden);

// One logit G_n of shape (1) per frame.
template <class T>
std::vector<ad::Var<T>> gates_forward(std::span<const std::vector<double>> windows, const Bound<T>& p,
                                      const ModelConfig& cfg);

// Numeric view of the gate logits: i_n = s(G_n), f_n = 1 - i_n, with i_n
// kept within [eps, 1 - eps] so both gates stay strictly inside (0,1).
struct GateSequence {
    std::vector<double> logits;

    std::size_t size() const { return logits.size(); }
    double input(std::size_t n) const;
    double forget(std::size_t n) const { return 1.0 - input(n); }
};

// The map from logit to input gate used inside the cell.
template <class T>
ad::Var<T> gate_from_logit(const ad::Var<T>& logit);
double gate_value(double logit);

// ---- recurrent cells ----------------------------------------------------------
template <class T>
struct CellState {
    ad::Var<T> C;
    ad::Var<T> H;
};

template <class T>
CellState<T> cell_zero_state(std::size_t channels, std::size_t h, std::size_t w);

// Whether the gate may sit exactly on 0 or 1. Only tests use the closed form.
enum class GateDomain { open, closed };

// C~ = tanh(W_c*[S,H]+B_c); C = (1-g)C_prev + g C~; O = s(W_o*[S,H]+B_o);
// H = O . tanh(C). Throws DomainError for g outside the allowed domain.
template <class T>
CellState<T> qg_cell_step(const ad::Var<T>& S, const CellState<T>& prev, const ad::Var<T>& g,
                          const Bound<T>& p, const std::string& prefix, GateDomain domain = GateDomain::open);

// Exposes the candidate memory alongside the new state.
template <class T>
struct CellStepTrace {
    CellState<T> state;
    ad::Var<T> candidate;
};
template <class T>
CellStepTrace<T> qg_cell_step_traced(const ad::Var<T>& S, const CellState<T>& prev, const ad::Var<T>& g,
                                     const Bound<T>& p, const std::string& prefix,
                                     GateDomain domain = GateDomain::open);

// Convolutional forget and input gates learned per pixel (the ablation).
template <class T>
CellState<T> original_cell_step(const ad::Var<T>& S, const CellState<T>& prev, const Bound<T>& p,
                                const std::string& prefix);

// Forward direction over n = 0..N-1, backward over N-1..0 with the same
// gates, outputs concatenated on channels: (N,C,H,W) -> (N,2C,H,W).
// `logits` is ignored by the original cell.
template <class T>
ad::Var<T> bidir_recurrence(const ad::Var<T>& features, std::span<const ad::Var<T>> logits, const Bound<T>& p,
                            const ModelConfig& cfg);

// ---- reconstruction -------------------------------------------------------------
// (N,2C,H,W) -> (N,1,H,W); the last layer is linear. `input` is added when
// the residual flag is set.
template <class T>
ad::Var<T> reconstruct(const ad::Var<T>& fused, const ad::Var<T>& input, const Bound<T>& p,
                       const ModelConfig& cfg);

template <class T>
struct ForwardResult {
    ad::Var<T> output;                // (N,1,H,W)
    std::vector<ad::Var<T>> logits;   // G_n
};

// clip (N,1,H,W) in [0,1]; one window per frame.
template <class T>
ForwardResult<T> forward(const ad::Var<T>& clip, std::span<const std::vector<double>> windows, const Bound<T>& p,
                         const ModelConfig& cfg);

// ---- inference ------------------------------------------------------------------
struct ChunkOptions {
    std::size_t length = 40;
    std::size_t overlap = 8;
};

template <class T>
struct Enhanced {
    Tensor<T> frames;  // (N,1,H,W), unclipped
    GateSequence gates;
};

// Runs the network without recording. With `chunks` the sequence is split
// into overlapping pieces and each frame is taken from the piece in which it
// sits furthest from a cut.
template <class T>
Enhanced<T> enhance(const Params<T>& params, const ModelConfig& cfg, const Tensor<T>& clip,
                    std::span<const std::vector<double>> windows, std::optional<ChunkOptions> chunks = {});

// Frame ranges [begin, end) per chunk plus the span each chunk contributes.
struct ChunkPlan {
    std::size_t begin, end;            // frames fed to the network
    std::size_t keep_begin, keep_end;  // frames taken from its output
};
std::vector<ChunkPlan> plan_chunks(std::size_t frames, const ChunkOptions& opt);

// ---- accounting -----------------------------------------------------------------
struct ParamCount {
    std::size_t spatial = 0;
    std::size_t cells = 0;
    std::size_t gates = 0;
    std::size_t reconstruction = 0;
    std::size_t total() const { return spatial + cells + gates + reconstruction; }
};

inline constexpr std::size_t kPublishedTotal = 646907;

template <class T>
ParamCount param_count(const Params<T>& params);
ParamCount param_count(const ModelConfig& cfg);

// Human-readable breakdown including the comparison with the published total.
std::string param_report(const ParamCount& c);

}  // namespace qgcl::model
