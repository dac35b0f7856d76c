// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dcuc/rng.hpp"
#include "dcuc/tensor.hpp"

namespace dcuc::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows back into this node
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  // Reads `grad` and accumulates into the parents that require grad.
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
  bool parent_needs_grad(std::size_t i) const {
    return parents[i] && parents[i]->requires_grad;
  }
};

// Shared handle to a node of the computation graph. Copies alias the same
// value, so parameters held by several modules stay in sync.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor(); }
  const NodePtr& node() const { return node_; }

  static Var from_node(NodePtr n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  NodePtr node_;
};

struct CVar {
  Var re;
  Var im;
  const Shape& shape() const { return re.shape(); }
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var parameter(Tensor t) { return Var(std::move(t), true); }

// Reverse sweep from a single-element root.
void backward(const Var& root);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds a result node; records `backward_fn` only when some input needs
// gradients and recording is enabled. Used by the fused ops in other modules.
Var make_op(Tensor value, std::vector<Var> inputs,
            std::function<void(Node&)> backward_fn);

// Elementwise, equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var square(const Var& x);
Var sqrt(const Var& x);
Var reciprocal(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var swish(const Var& x);
// y = x for x >= 0, slope[c] * x otherwise; c indexes `axis`.
Var prelu(const Var& x, const Var& slope, std::size_t axis);

// Per-channel broadcast along `axis`: x viewed as [outer, C, inner], v is [C].
Var bcast_add(const Var& x, const Var& v, std::size_t axis);
Var bcast_mul(const Var& x, const Var& v, std::size_t axis);
// Sums everything except `axis`, giving [C].
Var sum_to_axis(const Var& x, std::size_t axis);
Var sum(const Var& x);
Var mean(const Var& x);

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& perm);
Var concat(std::span<const Var> xs, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len);
// Crops or zero-pads the end of `axis` to `size`.
Var resize_axis(const Var& x, std::size_t axis, std::size_t size);
// out[.., j, ..] = sum_k taps[j][k].weight * x[.., taps[j][k].index, ..]
struct Tap {
  std::size_t index;
  double weight;
};
Var remap_axis(const Var& x, std::size_t axis,
               const std::vector<std::vector<Tap>>& taps);

// x [..., in], w [out, in], b [out] or undefined.
Var linear(const Var& x, const Var& w, const Var& b);
// a [B, M, K] times b [B, K, N] (or b [B, N, K] when transpose_b).
Var bmm(const Var& a, const Var& b, bool transpose_b);
Var softmax_last(const Var& x);
Var layer_norm_last(const Var& x, const Var& gamma, const Var& beta,
                    double eps);

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// Cross-correlation. x [B, C, H, W], w [O, C, kh, kw], b [O] or undefined.
Var conv2d(const Var& x, const Var& w, const Var& b, Conv2dGeometry g);
// Adjoint of conv2d in x. x [B, I, H, W], w [O, I, kh, kw]; output spatial
// size (H - 1) * stride - 2 * pad + k.
Var conv_transpose2d(const Var& x, const Var& w, const Var& b,
                     Conv2dGeometry g);
// x [B, T, D], w [D, K] (K odd), b [D]; zero "same" padding along T.
Var depthwise_conv_time(const Var& x, const Var& w, const Var& b);

Var dropout(const Var& x, double p, Rng& rng);

// Output spatial size of conv2d along one axis.
std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride,
                          std::size_t pad);
std::size_t conv_transpose_out_size(std::size_t in, std::size_t k,
                                    std::size_t stride, std::size_t pad);

}  // namespace dcuc::ag
