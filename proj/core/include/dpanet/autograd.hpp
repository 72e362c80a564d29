// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpanet/tensor.hpp"

namespace dpanet {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // reads this grad, accumulates into parents
};

void accumulate(Node& n, const Tensor& g);
Tensor& grad_buf(Node& n);

// While installed on a thread, leaf-gradient accumulation lands in this
// buffer instead of the shared leaf nodes. Lets per-sample backward passes
// run concurrently; the trainer merges sinks in fixed sample order, so the
// result is bit-identical to a serial run.
struct GradSink {
    std::unordered_map<Node*, Tensor> grads;
};
GradSink* exchange_thread_grad_sink(GradSink* sink);  // returns the previous sink

}  // namespace detail

// Handle to a node of the eagerly-built computation graph. Copies share the
// node. Constants do not track gradients; parameters do.
class Variable {
public:
    Variable() = default;

    static Variable constant(Tensor v);
    static Variable parameter(Tensor v);

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value();  // leaf-only, used by the optimizer
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool is_leaf() const { return node_ && node_->is_leaf; }
    const Tensor& grad() const;
    void zero_grad();

    const std::vector<int>& shape() const { return node_->value.shape(); }
    int64_t numel() const { return node_->value.numel(); }

    // Reverse-mode accumulation from this scalar into every reachable
    // gradient buffer. Grads accumulate; callers zero parameter grads first.
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    static Variable from_node(std::shared_ptr<detail::Node> n) { return Variable(std::move(n)); }

private:
    explicit Variable(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;
};

// ---- elementwise & structural ops -----------------------------------------

Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);  // elementwise, same shape
Variable add_scalar(const Variable& a, double c);
Variable mul_scalar(const Variable& a, double c);
// out = s * x where s is a 1-element variable; gradient flows into both.
Variable scale(const Variable& x, const Variable& s);
// out = 1 - s (1-element variable)
Variable one_minus(const Variable& s);
// x {C,H,W}, alpha {C}: out[c,h,w] = alpha[c] * x[c,h,w]
Variable channel_scale(const Variable& x, const Variable& alpha);
Variable concat_channels(const Variable& a, const Variable& b);
Variable slice_channels(const Variable& x, int begin, int count);
Variable concat_vec(const Variable& a, const Variable& b);
Variable reshape(const Variable& x, std::vector<int> shape);
Variable relu(const Variable& x);
Variable sigmoid(const Variable& x);
Variable sum_all(const Variable& x);   // -> {1}
Variable mean_all(const Variable& x);  // -> {1}

// ---- linear algebra --------------------------------------------------------

Variable matmul(const Variable& a, const Variable& b);     // (m,k)x(k,n)
Variable matmul_tn(const Variable& a, const Variable& b);  // a^T b: (k,m)x(k,n)->(m,n)
// Column-wise softmax of a 2-D tensor: every output column sums to 1.
Variable softmax_cols(const Variable& x);
// x {N}, w {M,N}, b {M} (optional, pass undefined Variable for none) -> {M}
Variable linear(const Variable& x, const Variable& w, const Variable& b);

// ---- spatial ops -----------------------------------------------------------

// x {Cin,H,W}, w {Cout,Cin,K,K}, b {Cout} or undefined.
Variable conv2d(const Variable& x, const Variable& w, const Variable& b, int stride, int pad);
Variable max_pool2d(const Variable& x, int k, int stride, int pad);
Variable global_avg_pool(const Variable& x);  // {C,H,W} -> {C}
// Per-channel normalization over the spatial dims, then affine (gamma, beta {C}).
Variable channel_norm(const Variable& x, const Variable& gamma, const Variable& beta, double eps = 1e-5);
// Half-pixel-center bilinear interpolation to (oh, ow).
Variable upsample_bilinear(const Variable& x, int oh, int ow);

// ---- losses ----------------------------------------------------------------

// Mean over pixels of -[t log p + (1-t) log(1-p)] with p clamped to
// [eps, 1-eps]. target must match pred's shape.
Variable bce_mean(const Variable& pred, const Tensor& target, double eps = 1e-7);
// Smooth L1 between a 1-element prediction and a fixed target.
Variable smooth_l1_to(const Variable& pred, double target);

namespace detail {
Variable make_op(Tensor value, std::vector<Variable> parents, const char* op,
                 std::function<void(Node&)> backward);
}

}  // namespace dpanet
