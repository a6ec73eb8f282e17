#pragma once

#include <cstdint>

#include "qgcl/tensor.hpp"

namespace qgcl {

struct AdamHyper {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    NamedTensors<T> first_moment;
    NamedTensors<T> second_moment;
};

// Bias-corrected Adam update for every parameter named in `grads`; parameters
// without a gradient are left untouched. If any gradient is non-finite the
// whole step is rejected (DomainError naming the parameter) and nothing
// changes.
template <class T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before scaling.
template <class T>
double clip_global_norm(NamedTensors<T>& grads, double max_norm);

}  // namespace qgcl
