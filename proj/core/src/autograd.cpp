// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace dpanet {

namespace detail {

namespace {
thread_local GradSink* tls_sink = nullptr;
}

GradSink* exchange_thread_grad_sink(GradSink* sink) {
    GradSink* prev = tls_sink;
    tls_sink = sink;
    return prev;
}

Tensor& grad_buf(Node& n) {
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void accumulate(Node& n, const Tensor& g) {
    if (!n.requires_grad) return;
    Tensor* target;
    if (n.is_leaf && tls_sink) {
        target = &tls_sink->grads.try_emplace(&n, Tensor(n.value.shape())).first->second;
    } else {
        target = &grad_buf(n);
    }
    if (!target->same_shape(g)) throw std::logic_error("gradient shape mismatch in accumulate");
    double* d = target->data();
    const double* s = g.data();
    const int64_t m = g.numel();
    for (int64_t i = 0; i < m; ++i) d[i] += s[i];
}

Variable make_op(Tensor value, std::vector<Variable> parents, const char* op,
                 std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->is_leaf = false;
    n->op = op;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) {
        if (!p.defined()) throw std::invalid_argument(std::string("undefined operand to ") + op);
        n->parents.push_back(p.node());
        n->requires_grad = n->requires_grad || p.node()->requires_grad;
    }
    if (n->requires_grad) n->backward = std::move(backward);
    return Variable::from_node(std::move(n));
}

}  // namespace detail

using detail::accumulate;
using detail::make_op;
using detail::Node;

Variable Variable::constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    return Variable(std::move(n));
}

Variable Variable::parameter(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Variable(std::move(n));
}

Tensor& Variable::mutable_value() {
    if (!node_->is_leaf) throw std::logic_error("mutable_value on a non-leaf variable");
    return node_->value;
}

const Tensor& Variable::grad() const {
    return detail::grad_buf(*node_);
}

void Variable::zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

void Variable::backward() const {
    if (!defined() || numel() != 1) throw std::logic_error("backward requires a defined 1-element variable");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS over grad-requiring nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    accumulate(*node_, Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

// ---- elementwise & structural ops -----------------------------------------

namespace {

void require_same_shape(const Variable& a, const Variable& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() +
                                    " vs " + b.value().shape_str());
}

}  // namespace

Variable add(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    const double* pb = b.value().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
    return make_op(std::move(out), {a, b}, "add", [](Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad);
    });
}

Variable sub(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    const double* pb = b.value().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] -= pb[i];
    return make_op(std::move(out), {a, b}, "sub", [](Node& n) {
        accumulate(*n.parents[0], n.grad);
        Tensor neg(n.grad.shape());
        for (int64_t i = 0; i < neg.numel(); ++i) neg[i] = -n.grad[i];
        accumulate(*n.parents[1], neg);
    });
}

Variable mul(const Variable& a, const Variable& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    const double* pb = b.value().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] *= pb[i];
    return make_op(std::move(out), {a, b}, "mul", [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor ga(av.shape());
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] = n.grad[i] * bv[i];
            accumulate(*n.parents[0], ga);
        }
        if (n.parents[1]->requires_grad) {
            Tensor gb(bv.shape());
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] = n.grad[i] * av[i];
            accumulate(*n.parents[1], gb);
        }
    });
}

Variable add_scalar(const Variable& a, double c) {
    Tensor out = a.value();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    return make_op(std::move(out), {a}, "add_scalar",
                   [](Node& n) { accumulate(*n.parents[0], n.grad); });
}

Variable mul_scalar(const Variable& a, double c) {
    Tensor out = a.value();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make_op(std::move(out), {a}, "mul_scalar", [c](Node& n) {
        Tensor g(n.grad.shape());
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * c;
        accumulate(*n.parents[0], g);
    });
}

Variable scale(const Variable& x, const Variable& s) {
    if (s.numel() != 1) throw std::invalid_argument("scale: s must have 1 element");
    const double sv = s.value()[0];
    Tensor out = x.value();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    return make_op(std::move(out), {x, s}, "scale", [sv](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        if (n.parents[0]->requires_grad) {
            Tensor gx(xv.shape());
            for (int64_t i = 0; i < gx.numel(); ++i) gx[i] = n.grad[i] * sv;
            accumulate(*n.parents[0], gx);
        }
        if (n.parents[1]->requires_grad) {
            double gs = 0.0;
            for (int64_t i = 0; i < xv.numel(); ++i) gs += n.grad[i] * xv[i];
            accumulate(*n.parents[1], Tensor::scalar(gs));
        }
    });
}

Variable one_minus(const Variable& s) {
    if (s.numel() != 1) throw std::invalid_argument("one_minus: s must have 1 element");
    Tensor out = Tensor::scalar(1.0 - s.value()[0]);
    return make_op(std::move(out), {s}, "one_minus", [](Node& n) {
        accumulate(*n.parents[0], Tensor::scalar(-n.grad[0]));
    });
}

Variable channel_scale(const Variable& x, const Variable& alpha) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || alpha.value().ndim() != 1 || alpha.value().dim(0) != xv.dim(0))
        throw std::invalid_argument("channel_scale: x must be {C,H,W} and alpha {C}");
    const int c = xv.dim(0);
    const int64_t hw = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor out = xv;
    for (int ci = 0; ci < c; ++ci) {
        const double a = alpha.value()[ci];
        double* p = out.data() + ci * hw;
        for (int64_t i = 0; i < hw; ++i) p[i] *= a;
    }
    return make_op(std::move(out), {x, alpha}, "channel_scale", [c, hw](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        const Tensor& av = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor gx(xv.shape());
            for (int ci = 0; ci < c; ++ci) {
                const double a = av[ci];
                const double* g = n.grad.data() + ci * hw;
                double* o = gx.data() + ci * hw;
                for (int64_t i = 0; i < hw; ++i) o[i] = g[i] * a;
            }
            accumulate(*n.parents[0], gx);
        }
        if (n.parents[1]->requires_grad) {
            Tensor ga({c});
            for (int ci = 0; ci < c; ++ci) {
                const double* g = n.grad.data() + ci * hw;
                const double* xp = xv.data() + ci * hw;
                double acc = 0.0;
                for (int64_t i = 0; i < hw; ++i) acc += g[i] * xp[i];
                ga[ci] = acc;
            }
            accumulate(*n.parents[1], ga);
        }
    });
}

Variable concat_channels(const Variable& a, const Variable& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 3 || bv.ndim() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw std::invalid_argument("concat_channels: spatial dims must match");
    const int ca = av.dim(0), cb = bv.dim(0), h = av.dim(1), w = av.dim(2);
    Tensor out({ca + cb, h, w});
    std::copy(av.data(), av.data() + av.numel(), out.data());
    std::copy(bv.data(), bv.data() + bv.numel(), out.data() + av.numel());
    return make_op(std::move(out), {a, b}, "concat_channels", [ca, cb, h, w](Node& n) {
        const int64_t na = static_cast<int64_t>(ca) * h * w;
        const int64_t nb = static_cast<int64_t>(cb) * h * w;
        if (n.parents[0]->requires_grad) {
            Tensor ga({ca, h, w});
            std::copy(n.grad.data(), n.grad.data() + na, ga.data());
            accumulate(*n.parents[0], ga);
        }
        if (n.parents[1]->requires_grad) {
            Tensor gb({cb, h, w});
            std::copy(n.grad.data() + na, n.grad.data() + na + nb, gb.data());
            accumulate(*n.parents[1], gb);
        }
    });
}

Variable slice_channels(const Variable& x, int begin, int count) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || begin < 0 || count < 1 || begin + count > xv.dim(0))
        throw std::invalid_argument("slice_channels: bad range");
    const int h = xv.dim(1), w = xv.dim(2);
    const int64_t hw = static_cast<int64_t>(h) * w;
    Tensor out({count, h, w});
    std::copy(xv.data() + begin * hw, xv.data() + (begin + count) * hw, out.data());
    return make_op(std::move(out), {x}, "slice_channels", [begin, count, hw](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        std::copy(n.grad.data(), n.grad.data() + count * hw, gx.data() + begin * hw);
        accumulate(*n.parents[0], gx);
    });
}

Variable concat_vec(const Variable& a, const Variable& b) {
    if (a.value().ndim() != 1 || b.value().ndim() != 1)
        throw std::invalid_argument("concat_vec: 1-D operands required");
    const int na = a.value().dim(0), nb = b.value().dim(0);
    Tensor out({na + nb});
    std::copy(a.value().data(), a.value().data() + na, out.data());
    std::copy(b.value().data(), b.value().data() + nb, out.data() + na);
    return make_op(std::move(out), {a, b}, "concat_vec", [na, nb](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor ga({na});
            std::copy(n.grad.data(), n.grad.data() + na, ga.data());
            accumulate(*n.parents[0], ga);
        }
        if (n.parents[1]->requires_grad) {
            Tensor gb({nb});
            std::copy(n.grad.data() + na, n.grad.data() + na + nb, gb.data());
            accumulate(*n.parents[1], gb);
        }
    });
}

Variable reshape(const Variable& x, std::vector<int> shape) {
    Tensor out = x.value().reshaped(shape);
    return make_op(std::move(out), {x}, "reshape", [](Node& n) {
        accumulate(*n.parents[0], n.grad.reshaped(n.parents[0]->value.shape()));
    });
}

Variable relu(const Variable& x) {
    Tensor out = x.value();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return make_op(std::move(out), {x}, "relu", [](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        Tensor g(xv.shape());
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = xv[i] > 0.0 ? n.grad[i] : 0.0;
        accumulate(*n.parents[0], g);
    });
}

Variable sigmoid(const Variable& x) {
    Tensor out = x.value();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    Tensor saved = out;
    return make_op(std::move(out), {x}, "sigmoid", [saved](Node& n) {
        Tensor g(saved.shape());
        for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * saved[i] * (1.0 - saved[i]);
        accumulate(*n.parents[0], g);
    });
}

Variable sum_all(const Variable& x) {
    Tensor out = Tensor::scalar(x.value().sum());
    return make_op(std::move(out), {x}, "sum_all", [](Node& n) {
        accumulate(*n.parents[0], Tensor::full(n.parents[0]->value.shape(), n.grad[0]));
    });
}

Variable mean_all(const Variable& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::scalar(x.value().sum() * inv);
    return make_op(std::move(out), {x}, "mean_all", [inv](Node& n) {
        accumulate(*n.parents[0], Tensor::full(n.parents[0]->value.shape(), n.grad[0] * inv));
    });
}

// ---- losses ----------------------------------------------------------------

Variable bce_mean(const Variable& pred, const Tensor& target, double eps) {
    const Tensor& pv = pred.value();
    if (!pv.same_shape(target)) throw std::invalid_argument("bce_mean: pred/target shape mismatch");
    const int64_t n = pv.numel();
    const double inv = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double p = std::clamp(pv[i], eps, 1.0 - eps);
        const double t = target[i];
        loss -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    loss *= inv;
    Tensor tgt = target;
    return make_op(Tensor::scalar(loss), {pred}, "bce_mean", [tgt, eps, inv](Node& nd) {
        const Tensor& pv = nd.parents[0]->value;
        Tensor g(pv.shape());
        for (int64_t i = 0; i < g.numel(); ++i) {
            const double raw = pv[i];
            if (raw <= eps || raw >= 1.0 - eps) {
                g[i] = 0.0;  // clamped region
            } else {
                g[i] = nd.grad[0] * inv * (raw - tgt[i]) / (raw * (1.0 - raw));
            }
        }
        accumulate(*nd.parents[0], g);
    });
}

Variable smooth_l1_to(const Variable& pred, double target) {
    if (pred.numel() != 1) throw std::invalid_argument("smooth_l1_to: pred must have 1 element");
    const double d = pred.value()[0] - target;
    const double v = std::fabs(d) < 1.0 ? 0.5 * d * d : std::fabs(d) - 0.5;
    return make_op(Tensor::scalar(v), {pred}, "smooth_l1", [d](Node& n) {
        const double slope = std::fabs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
        accumulate(*n.parents[0], Tensor::scalar(n.grad[0] * slope));
    });
}

}  // namespace dpanet
