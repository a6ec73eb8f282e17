#include "qgcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "qgcl/error.hpp"
#include "qgcl/kernels.hpp"

namespace qgcl::ad {

namespace {

thread_local bool t_grad_enabled = true;
thread_local ActivationProbe* t_probe = nullptr;

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

// Builds a result node. Operands are only retained when the result needs a
// gradient, so no-grad evaluation keeps nothing alive.
template <class T>
Var<T> make_result(Tensor<T> value, std::vector<NodePtr<T>> parents,
                   std::function<void(Node<T>&)> rule) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    bool needs = false;
    if (t_grad_enabled)
        for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(rule);
    }
    return Var<T>(std::move(node));
}

template <class T>
void check_binary(const Var<T>& a, const Var<T>& b, const char* op) {
    if (a.shape() == b.shape() || a.numel() == 1 || b.numel() == 1) return;
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are not broadcastable");
}

template <class T>
const Shape& broadcast_shape(const Var<T>& a, const Var<T>& b) {
    return a.numel() >= b.numel() ? a.shape() : b.shape();
}

// Accumulates g (full-size) into the gradient of p (full-size or single).
template <class T>
void accumulate(Node<T>& p, const Tensor<T>& g) {
    if (!p.requires_grad) return;
    Tensor<T>& dst = p.grad_buffer();
    if (dst.numel() == g.numel()) {
        for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    } else {
        T s = T(0);
        for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
        dst[0] += s;
    }
}

template <class T>
T at_broadcast(const Tensor<T>& t, std::size_t i) {
    return t.numel() == 1 ? t[0] : t[i];
}

template <class T, class F, class DF>
Var<T> unary(const Var<T>& a, F f, DF df_from_out) {
    Tensor<T> out(a.shape());
    const Tensor<T>& x = a.value();
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
    return make_result<T>(std::move(out), {a.node()}, [df_from_out](Node<T>& self) {
        Node<T>& p = *self.parents[0];
        Tensor<T>& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i] * df_from_out(p.value[i], self.value[i]);
    });
}

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
std::vector<T>& scratch(int slot) {
    thread_local std::vector<T> buffers[2];
    return buffers[slot];
}

// Lays out the k x k neighbourhoods of a (C,H,W) plane as a (C*k*k, H*W)
// matrix, zero outside the frame.
template <class T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* col) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* plane = x + ci * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* row = col + ((ci * k + ky) * k + kx) * h * w;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y) {
                    T* dst = row + y * W;
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst, dst + W, T(0));
                        continue;
                    }
                    const T* src = plane + sy * W + dx;
                    std::fill(dst, dst + x0, T(0));
                    std::copy(src + x0, src + x1, dst + x0);
                    std::fill(dst + x1, dst + W, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: scatters column rows back into the plane, accumulating.
template <class T>
void col2im_add(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* x) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t ci = 0; ci < c; ++ci) {
        T* plane = x + ci * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* row = col + ((ci * k + ky) * k + kx) * h * w;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y) {
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    const T* src = row + y * W;
                    T* dst = plane + sy * W + dx;
                    for (std::ptrdiff_t xx = x0; xx < x1; ++xx) dst[xx] += src[xx];
                }
            }
        }
    }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

ActivationProbe::ActivationProbe() : previous_(t_probe) { t_probe = this; }
ActivationProbe::~ActivationProbe() { t_probe = previous_; }

void ActivationProbe::record(bool active) {
    // FNV-1a over the sequence of ReLU states.
    hash_ = (hash_ ^ (active ? 0x9bu : 0x37u)) * 0x100000001b3ull;
    ++units_;
}

template <class T>
Var<T> leaf(Tensor<T> value, std::string name, bool requires_grad) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->name = std::move(name);
    node->requires_grad = requires_grad;
    return Var<T>(std::move(node));
}

template <class T>
Var<T> constant(Tensor<T> value) {
    return leaf(std::move(value), std::string{}, false);
}

template <class T>
NamedTensors<T> backward(const Var<T>& loss) {
    if (!loss) throw Error("backward: empty loss");
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    Node<T>& root = *loss.node();
    if (root.consumed) throw Error("backward: record already swept; re-run the forward pass");
    if (!root.requires_grad) throw Error("backward: loss does not depend on any requires_grad tensor");

    // Iterative post-order DFS; operands precede their users in `order`.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{&root, 0}};
    seen.insert(&root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>& n = **it;
        if (!n.is_leaf() && n.grad.numel() == n.value.numel()) n.backward(n);
    }

    NamedTensors<T> grads;
    for (Node<T>* n : order) {
        if (n->is_leaf()) {
            if (!n->name.empty() && n->grad.numel() == n->value.numel()) {
                auto [it, inserted] = grads.try_emplace(n->name, n->grad);
                if (!inserted)
                    for (std::size_t i = 0; i < n->grad.numel(); ++i) it->second[i] += n->grad[i];
            }
        } else {
            n->backward = nullptr;
            n->parents.clear();
            n->grad = Tensor<T>();
        }
        n->consumed = true;
    }
    root.consumed = true;
    return grads;
}

// ---- elementwise ----------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check_binary(a, b, "add");
    Tensor<T> out(broadcast_shape(a, b));
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = at_broadcast(a.value(), i) + at_broadcast(b.value(), i);
    return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
        accumulate(*self.parents[0], self.grad);
        accumulate(*self.parents[1], self.grad);
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check_binary(a, b, "sub");
    Tensor<T> out(broadcast_shape(a, b));
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = at_broadcast(a.value(), i) - at_broadcast(b.value(), i);
    return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
        accumulate(*self.parents[0], self.grad);
        Tensor<T> neg = self.grad;
        for (auto& v : neg.values()) v = -v;
        accumulate(*self.parents[1], neg);
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check_binary(a, b, "mul");
    Tensor<T> out(broadcast_shape(a, b));
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = at_broadcast(a.value(), i) * at_broadcast(b.value(), i);
    return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        Tensor<T> g(self.value.shape());
        if (pa.requires_grad) {
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * at_broadcast(pb.value, i);
            accumulate(pa, g);
        }
        if (pb.requires_grad) {
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * at_broadcast(pa.value, i);
            accumulate(pb, g);
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T factor) {
    return unary<T>(a, [factor](T x) { return factor * x; },
                    [factor](T, T) { return factor; });
}

template <class T>
Var<T> one_minus(const Var<T>& a) {
    return unary<T>(a, [](T x) { return T(1) - x; }, [](T, T) { return T(-1); });
}

template <class T>
Var<T> relu(const Var<T>& a) {
    if (t_probe)
        for (T x : a.value().values()) t_probe->record(x > T(0));
    return unary<T>(a, [](T x) { return x > T(0) ? x : T(0); },
                    [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
    return unary<T>(a, [](T x) { return stable_sigmoid(x); },
                    [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
    return unary<T>(a, [](T x) { return std::tanh(x); },
                    [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
    if (!(lo <= hi)) throw DomainError("clamp: empty interval");
    return unary<T>(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                    [lo, hi](T x, T) { return x >= lo && x <= hi ? T(1) : T(0); });
}

template <class T>
Var<T> affine_blend(const Var<T>& a, const Var<T>& b, const Var<T>& g) {
    if (a.shape() != b.shape())
        throw ShapeError("affine_blend: operand shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
    if (g.numel() != 1) throw ShapeError("affine_blend: blend weight must be a single element");
    const T w = g.value()[0];
    Tensor<T> out(a.shape());
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (T(1) - w) * av[i] + w * bv[i];
    return make_result<T>(std::move(out), {a.node(), b.node(), g.node()}, [](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        Node<T>& pg = *self.parents[2];
        const T w = pg.value[0];
        if (pa.requires_grad) {
            Tensor<T>& ga = pa.grad_buffer();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += (T(1) - w) * self.grad[i];
        }
        if (pb.requires_grad) {
            Tensor<T>& gb = pb.grad_buffer();
            for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += w * self.grad[i];
        }
        if (pg.requires_grad) {
            T s = T(0);
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                s += self.grad[i] * (pb.value[i] - pa.value[i]);
            pg.grad_buffer()[0] += s;
        }
    });
}

template <class T>
Var<T> elementwise(Elementwise op, std::span<const Var<T>> operands) {
    auto need = [&](std::size_t n, const char* what) {
        if (operands.size() != n)
            throw ShapeError(std::string("elementwise ") + what + " expects " + std::to_string(n) +
                             " operands, got " + std::to_string(operands.size()));
    };
    switch (op) {
        case Elementwise::relu: need(1, "relu"); return relu(operands[0]);
        case Elementwise::sigmoid: need(1, "sigmoid"); return sigmoid(operands[0]);
        case Elementwise::tanh: need(1, "tanh"); return tanh(operands[0]);
        case Elementwise::add: need(2, "add"); return add(operands[0], operands[1]);
        case Elementwise::hadamard: need(2, "hadamard"); return mul(operands[0], operands[1]);
        case Elementwise::affine_blend:
            need(3, "affine_blend");
            return affine_blend(operands[0], operands[1], operands[2]);
    }
    throw Error("elementwise: unknown op");
}

// ---- structural -----------------------------------------------------------

template <class T>
Var<T> concat(std::span<const Var<T>> parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    std::size_t lead = 0;
    for (const auto& p : parts) {
        Shape t(p.shape().begin() + 1, p.shape().end());
        if (p.shape().empty() || t != tail)
            throw ShapeError("concat: trailing shape " + shape_str(t) + " differs from " + shape_str(tail));
        lead += p.shape()[0];
    }
    Shape shape{lead};
    shape.insert(shape.end(), tail.begin(), tail.end());
    Tensor<T> out(shape);
    std::vector<NodePtr<T>> parents;
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.numel(), out.data() + off);
        off += p.numel();
        parents.push_back(p.node());
    }
    return make_result<T>(std::move(out), std::move(parents), [](Node<T>& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.numel();
            if (p->requires_grad) {
                Tensor<T>& g = p->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
            }
            off += n;
        }
    });
}

template <class T>
Var<T> stack(std::span<const Var<T>> parts) {
    if (parts.empty()) throw ShapeError("stack: no operands");
    for (const auto& p : parts)
        if (p.shape() != parts[0].shape())
            throw ShapeError("stack: shape " + shape_str(p.shape()) + " differs from " +
                             shape_str(parts[0].shape()));
    std::vector<Var<T>> flat;
    flat.reserve(parts.size());
    Shape one{1};
    one.insert(one.end(), parts[0].shape().begin(), parts[0].shape().end());
    for (const auto& p : parts) flat.push_back(reshape(p, one));
    return concat<T>(flat);
}

template <class T>
Var<T> slice(const Var<T>& a, std::size_t begin, std::size_t count) {
    if (a.shape().empty() || count == 0 || begin + count > a.shape()[0])
        throw ShapeError("slice: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for shape " + shape_str(a.shape()));
    Shape shape = a.shape();
    const std::size_t row = a.numel() / shape[0];
    shape[0] = count;
    Tensor<T> out(shape);
    std::copy(a.value().data() + begin * row, a.value().data() + (begin + count) * row, out.data());
    return make_result<T>(std::move(out), {a.node()}, [begin, row](Node<T>& self) {
        Tensor<T>& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) g[begin * row + i] += self.grad[i];
    });
}

template <class T>
Var<T> select(const Var<T>& a, std::size_t index) {
    Var<T> s = slice(a, index, 1);
    Shape shape(a.shape().begin() + 1, a.shape().end());
    if (shape.empty()) shape.push_back(1);
    return reshape(s, shape);
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
    Tensor<T> out = a.value().reshaped(std::move(shape));
    return make_result<T>(std::move(out), {a.node()}, [](Node<T>& self) {
        Tensor<T>& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

// ---- linear algebra -------------------------------------------------------

template <class T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias) {
    const Shape& xs = input.shape();
    const Shape& ws = kernel.shape();
    if (xs.size() != 3 && xs.size() != 4)
        throw ShapeError("conv2d: input must be (C,H,W) or (N,C,H,W), got " + shape_str(xs));
    if (ws.size() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0)
        throw ShapeError("conv2d: kernel must be (C_out,C_in,k,k) with odd k, got " + shape_str(ws));
    const bool batched = xs.size() == 4;
    const std::size_t frames = batched ? xs[0] : 1;
    const std::size_t cin = xs[xs.size() - 3], h = xs[xs.size() - 2], w = xs[xs.size() - 1];
    const std::size_t cout = ws[0], k = ws[2];
    if (ws[1] != cin)
        throw ShapeError("conv2d: kernel expects " + std::to_string(ws[1]) + " input channels, input " +
                         shape_str(xs) + " has " + std::to_string(cin));
    if (bias.shape() != Shape{cout})
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " != (" + std::to_string(cout) + ")");

    const std::size_t hw = h * w, ckk = cin * k * k;
    Shape os = batched ? Shape{frames, cout, h, w} : Shape{cout, h, w};
    Tensor<T> out(os);
    std::vector<T>& col = scratch<T>(0);
    col.resize(ckk * hw);
    for (std::size_t n = 0; n < frames; ++n) {
        im2col(input.value().data() + n * cin * hw, cin, h, w, k, col.data());
        T* y = out.data() + n * cout * hw;
        for (std::size_t c = 0; c < cout; ++c) std::fill(y + c * hw, y + (c + 1) * hw, bias.value()[c]);
        kernels::gemm<T>(kernels::Trans::no, kernels::Trans::no, cout, hw, ckk, kernel.value().data(),
                         ckk, col.data(), hw, y, hw, true);
    }

    return make_result<T>(std::move(out), {input.node(), kernel.node(), bias.node()},
                          [frames, cin, h, w, cout, k, hw, ckk](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        std::vector<T>& col = scratch<T>(0);
        std::vector<T>& dcol = scratch<T>(1);
        col.resize(ckk * hw);
        if (px.requires_grad) dcol.resize(ckk * hw);
        for (std::size_t n = 0; n < frames; ++n) {
            const T* gy = self.grad.data() + n * cout * hw;
            if (pb.requires_grad) {
                Tensor<T>& gb = pb.grad_buffer();
                for (std::size_t c = 0; c < cout; ++c) {
                    T s = T(0);
                    for (std::size_t i = 0; i < hw; ++i) s += gy[c * hw + i];
                    gb[c] += s;
                }
            }
            if (pw.requires_grad) {
                im2col(px.value.data() + n * cin * hw, cin, h, w, k, col.data());
                kernels::gemm<T>(kernels::Trans::no, kernels::Trans::yes, cout, ckk, hw, gy, hw,
                                 col.data(), hw, pw.grad_buffer().data(), ckk, true);
            }
            if (px.requires_grad) {
                kernels::gemm<T>(kernels::Trans::yes, kernels::Trans::no, ckk, hw, cout,
                                 pw.value.data(), ckk, gy, hw, dcol.data(), hw, false);
                col2im_add(dcol.data(), cin, h, w, k, px.grad_buffer().data() + n * cin * hw);
            }
        }
    });
}

template <class T>
Var<T> dense(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
    const Shape& ws = weight.shape();
    if (input.shape().size() != 1 || ws.size() != 2 || ws[1] != input.shape()[0])
        throw ShapeError("dense: weight " + shape_str(ws) + " incompatible with input " +
                         shape_str(input.shape()));
    if (bias.shape() != Shape{ws[0]})
        throw ShapeError("dense: bias " + shape_str(bias.shape()) + " != (" + std::to_string(ws[0]) + ")");
    const std::size_t dout = ws[0], din = ws[1];
    Tensor<T> out(Shape{dout});
    for (std::size_t i = 0; i < dout; ++i)
        out[i] = kernels::dot<T>(weight.value().data() + i * din, input.value().data(), din) +
                 bias.value()[i];
    return make_result<T>(std::move(out), {input.node(), weight.node(), bias.node()},
                          [dout, din](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        if (pb.requires_grad) {
            Tensor<T>& gb = pb.grad_buffer();
            for (std::size_t i = 0; i < dout; ++i) gb[i] += self.grad[i];
        }
        if (pw.requires_grad) {
            T* gw = pw.grad_buffer().data();
            for (std::size_t i = 0; i < dout; ++i)
                kernels::axpy<T>(self.grad[i], px.value.data(), gw + i * din, din);
        }
        if (px.requires_grad) {
            T* gx = px.grad_buffer().data();
            for (std::size_t i = 0; i < dout; ++i)
                kernels::axpy<T>(self.grad[i], pw.value.data() + i * din, gx, din);
        }
    });
}

// ---- reductions and losses --------------------------------------------------

template <class T>
Var<T> sum(const Var<T>& a) {
    T s = T(0);
    for (T v : a.value().values()) s += v;
    return make_result<T>(Tensor<T>::scalar(s), {a.node()}, [](Node<T>& self) {
        Tensor<T>& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[0];
    });
}

template <class T>
Var<T> mean(const Var<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mse: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
    const std::size_t n = a.numel();
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = a.value()[i] - b.value()[i];
        s += d * d;
    }
    return make_result<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {a.node(), b.node()},
                          [n](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        const T c = T(2) * self.grad[0] / static_cast<T>(n);
        if (pa.requires_grad) {
            Tensor<T>& g = pa.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) g[i] += c * (pa.value[i] - pb.value[i]);
        }
        if (pb.requires_grad) {
            Tensor<T>& g = pb.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) g[i] -= c * (pa.value[i] - pb.value[i]);
        }
    });
}

template <class T>
Var<T> weighted_sigmoid_cross_entropy(const Var<T>& logits, std::span<const int> labels,
                                      T positive_weight, T logit_scale) {
    const std::size_t n = logits.numel();
    if (labels.size() != n)
        throw ShapeError("sigmoid cross entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " logits");
    for (int l : labels)
        if (l != 0 && l != 1) throw DomainError("sigmoid cross entropy: label " + std::to_string(l) + " not in {0,1}");
    std::vector<int> lab(labels.begin(), labels.end());
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T z = logit_scale * logits.value()[i];
        // -log s(z) = softplus(-z), -log(1 - s(z)) = softplus(z)
        s += lab[i] ? positive_weight * softplus(-z) : softplus(z);
    }
    return make_result<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {logits.node()},
                          [lab = std::move(lab), positive_weight, logit_scale, n](Node<T>& self) {
        Node<T>& p = *self.parents[0];
        Tensor<T>& g = p.grad_buffer();
        const T c = self.grad[0] * logit_scale / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T sg = stable_sigmoid(logit_scale * p.value[i]);
            g[i] += c * (lab[i] ? -positive_weight * (T(1) - sg) : sg);
        }
    });
}

#define QGCL_INSTANTIATE(T)                                                                     \
    template Var<T> leaf<T>(Tensor<T>, std::string, bool);                                     \
    template Var<T> constant<T>(Tensor<T>);                                                    \
    template NamedTensors<T> backward<T>(const Var<T>&);                                       \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                      \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                      \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                      \
    template Var<T> scale<T>(const Var<T>&, T);                                                \
    template Var<T> one_minus<T>(const Var<T>&);                                               \
    template Var<T> clamp<T>(const Var<T>&, T, T);                                             \
    template Var<T> relu<T>(const Var<T>&);                                                    \
    template Var<T> sigmoid<T>(const Var<T>&);                                                 \
    template Var<T> tanh<T>(const Var<T>&);                                                    \
    template Var<T> affine_blend<T>(const Var<T>&, const Var<T>&, const Var<T>&);              \
    template Var<T> elementwise<T>(Elementwise, std::span<const Var<T>>);                      \
    template Var<T> concat<T>(std::span<const Var<T>>);                                        \
    template Var<T> stack<T>(std::span<const Var<T>>);                                         \
    template Var<T> slice<T>(const Var<T>&, std::size_t, std::size_t);                         \
    template Var<T> select<T>(const Var<T>&, std::size_t);                                     \
    template Var<T> reshape<T>(const Var<T>&, Shape);                                          \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&);                    \
    template Var<T> dense<T>(const Var<T>&, const Var<T>&, const Var<T>&);                     \
    template Var<T> sum<T>(const Var<T>&);                                                     \
    template Var<T> mean<T>(const Var<T>&);                                                    \
    template Var<T> mse<T>(const Var<T>&, const Var<T>&);                                      \
    template Var<T> weighted_sigmoid_cross_entropy<T>(const Var<T>&, std::span<const int>, T, T);

QGCL_INSTANTIATE(float)
QGCL_INSTANTIATE(double)

#undef QGCL_INSTANTIATE

}  // namespace qgcl::ad
