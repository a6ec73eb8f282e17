#include "qgcl/adam.hpp"

#include <cmath>

namespace qgcl {

template <class T>
void adam_step(NamedTensors<T>& params, const NamedTensors<T>& grads, AdamState<T>& state) {
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ShapeError("adam: gradient for unknown parameter '" + name + "'");
        if (it->second.shape() != g.shape())
            throw ShapeError("adam: gradient shape " + shape_str(g.shape()) + " != parameter '" + name +
                             "' shape " + shape_str(it->second.shape()));
        for (T v : g.values())
            if (!std::isfinite(v)) throw DomainError("adam: non-finite gradient for parameter '" + name + "'");
    }

    ++state.step;
    const AdamHyper& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (const auto& [name, g] : grads) {
        Tensor<T>& p = params.at(name);
        auto [mit, m_new] = state.first_moment.try_emplace(name, g.shape());
        auto [vit, v_new] = state.second_moment.try_emplace(name, g.shape());
        Tensor<T>& m = mit->second;
        Tensor<T>& v = vit->second;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const double gi = g[i];
            const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
            const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = h.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + h.epsilon);
            p[i] = static_cast<T>(p[i] - update);
        }
    }
}

template <class T>
double clip_global_norm(NamedTensors<T>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (T v : g.values()) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& [name, g] : grads)
            for (T& v : g.values()) v = static_cast<T>(v * s);
    }
    return norm;
}

template void adam_step<float>(NamedTensors<float>&, const NamedTensors<float>&, AdamState<float>&);
template void adam_step<double>(NamedTensors<double>&, const NamedTensors<double>&, AdamState<double>&);
template double clip_global_norm<float>(NamedTensors<float>&, double);
template double clip_global_norm<double>(NamedTensors<double>&, double);

}  // namespace qgcl
