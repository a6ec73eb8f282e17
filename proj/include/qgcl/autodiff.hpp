#pragma once

// Reverse-mode differentiation over coarse tensor primitives.
//
// Each operation returns a Var whose node remembers its operands and a rule
// for pushing the result gradient back to them. Nodes are reference counted:
// a record lives as long as the Vars that reach it, and with recording
// disabled (NoGradGuard) intermediates are freed as soon as they go out of
// scope. A record must stay on the thread that built it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qgcl/tensor.hpp"

namespace qgcl::ad {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until something flows into it
    bool requires_grad = false;
    bool consumed = false;
    std::string name;  // set on named leaves
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor<T>& grad_buffer() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
    bool is_leaf() const { return !backward; }
};

template <class T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    const Tensor<T>& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    // Gradient after backward(); empty tensor if none reached this node.
    const Tensor<T>& grad() const { return node_->grad; }

    const std::shared_ptr<Node<T>>& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node<T>> node_;
};

// Disables recording on the current thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// While alive, every relu evaluated on this thread folds the on/off state
// of each element into a running hash. Two evaluations with equal hashes
// went through the same piecewise-linear region.
class ActivationProbe {
public:
    ActivationProbe();
    ~ActivationProbe();
    ActivationProbe(const ActivationProbe&) = delete;
    ActivationProbe& operator=(const ActivationProbe&) = delete;

    std::uint64_t pattern() const { return hash_; }
    std::size_t units() const { return units_; }
    void record(bool active);

private:
    ActivationProbe* previous_;
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
    std::size_t units_ = 0;
};

template <class T>
Var<T> leaf(Tensor<T> value, std::string name, bool requires_grad = true);

template <class T>
Var<T> constant(Tensor<T> value);

// Runs the reverse sweep from a scalar loss. Returns the gradient of every
// named requires_grad leaf reachable from it. Unnamed leaves keep their
// gradient on the node. A record can be swept once.
template <class T>
NamedTensors<T> backward(const Var<T>& loss);

// ---- elementwise ----------------------------------------------------------
// Binary ops require equal shapes, or one operand with a single element which
// is broadcast over the other.
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& a, T factor);
template <class T> Var<T> one_minus(const Var<T>& a);
template <class T> Var<T> relu(const Var<T>& a);
template <class T> Var<T> sigmoid(const Var<T>& a);
template <class T> Var<T> tanh(const Var<T>& a);
// Gradient passes where lo <= a <= hi and is zero elsewhere.
template <class T> Var<T> clamp(const Var<T>& a, T lo, T hi);
// (1 - g) * a + g * b with g a single-element Var.
template <class T> Var<T> affine_blend(const Var<T>& a, const Var<T>& b, const Var<T>& g);

enum class Elementwise { relu, sigmoid, tanh, add, hadamard, affine_blend };
template <class T>
Var<T> elementwise(Elementwise op, std::span<const Var<T>> operands);

// ---- structural -----------------------------------------------------------
// Concatenate along axis 0; trailing dimensions must agree.
template <class T> Var<T> concat(std::span<const Var<T>> parts);
// Stack equal-shaped tensors along a new leading axis.
template <class T> Var<T> stack(std::span<const Var<T>> parts);
// Rows [begin, begin + count) along axis 0.
template <class T> Var<T> slice(const Var<T>& a, std::size_t begin, std::size_t count);
// Index i along axis 0, dropping that axis.
template <class T> Var<T> select(const Var<T>& a, std::size_t index);
template <class T> Var<T> reshape(const Var<T>& a, Shape shape);

// ---- linear algebra -------------------------------------------------------
// Same-padded 2-D convolution (odd kernel, zero padding, stride 1).
// input (C_in,H,W) or (N,C_in,H,W); kernel (C_out,C_in,k,k); bias (C_out).
template <class T> Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias);
// weight (D_out,D_in) * input (D_in) + bias (D_out).
template <class T> Var<T> dense(const Var<T>& input, const Var<T>& weight, const Var<T>& bias);

// ---- reductions and losses --------------------------------------------------
template <class T> Var<T> sum(const Var<T>& a);
template <class T> Var<T> mean(const Var<T>& a);
// mean((a - b)^2) over all elements.
template <class T> Var<T> mse(const Var<T>& a, const Var<T>& b);
// -(1/N) sum_n [ l_n * P * log s(K z_n) + (1 - l_n) * log(1 - s(K z_n)) ]
// evaluated through log-sum-exp so |K z| in the hundreds does not overflow.
template <class T>
Var<T> weighted_sigmoid_cross_entropy(const Var<T>& logits, std::span<const int> labels,
                                      T positive_weight, T logit_scale);

}  // namespace qgcl::ad
