// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dcuc/error.hpp"

namespace dcuc::ag {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
}

struct AxisView {
  std::size_t outer = 1;
  std::size_t channels = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("axis out of range");
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.channels = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

// Unary elementwise op given f(x) and f'(x, y).
template <typename F, typename D>
Var unary(const Var& x, F f, D df) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_op(std::move(y), {x}, [df](Node& n) {
    Tensor& gx = n.parents[0]->grad_buffer();
    const Tensor& xv = n.parents[0]->value;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += n.grad[i] * df(xv[i], n.value[i]);
    }
  });
}

// col [C*kh*kw, Ho*Wo] from img [C, H, W].
void im2col(const double* img, std::size_t C, std::size_t H, std::size_t W,
            std::size_t kh, std::size_t kw, const Conv2dGeometry& g,
            std::size_t Ho, std::size_t Wo, double* col) {
  const std::size_t P = Ho * Wo;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = col + ((c * kh + ki) * kw + kj) * P;
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + ki) -
                          static_cast<long>(g.pad_h);
          double* dst = row + oh * Wo;
          if (ih < 0 || ih >= static_cast<long>(H)) {
            std::fill(dst, dst + Wo, 0.0);
            continue;
          }
          const double* src = img + (c * H + static_cast<std::size_t>(ih)) * W;
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            const long iw = static_cast<long>(ow * g.stride_w + kj) -
                            static_cast<long>(g.pad_w);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(W))
                          ? 0.0
                          : src[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col into img.
void col2im(const double* col, std::size_t C, std::size_t H, std::size_t W,
            std::size_t kh, std::size_t kw, const Conv2dGeometry& g,
            std::size_t Ho, std::size_t Wo, double* img) {
  const std::size_t P = Ho * Wo;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = col + ((c * kh + ki) * kw + kj) * P;
        for (std::size_t oh = 0; oh < Ho; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + ki) -
                          static_cast<long>(g.pad_h);
          if (ih < 0 || ih >= static_cast<long>(H)) continue;
          double* dst = img + (c * H + static_cast<std::size_t>(ih)) * W;
          const double* src = row + oh * Wo;
          for (std::size_t ow = 0; ow < Wo; ++ow) {
            const long iw = static_cast<long>(ow * g.stride_w + kj) -
                            static_cast<long>(g.pad_w);
            if (iw >= 0 && iw < static_cast<long>(W)) {
              dst[static_cast<std::size_t>(iw)] += src[ow];
            }
          }
        }
      }
    }
  }
}

void check_conv_args(const Var& x, const Var& w, const Var& b,
                     const Conv2dGeometry& g, const char* op) {
  if (x.shape().size() != 4 || w.shape().size() != 4) {
    throw ShapeError(std::string(op) + ": expected rank-4 input and weight");
  }
  if (g.stride_h == 0 || g.stride_w == 0) {
    throw ShapeError(std::string(op) + ": stride must be >= 1");
  }
  if (b.defined() && b.shape() != Shape{w.dim(0)}) {
    throw ShapeError(std::string(op) + ": bias shape " +
                     to_string(b.shape()));
  }
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> inputs,
            std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) {
      node->parents.push_back(in.defined() ? in.node() : nullptr);
    }
    node->backward_fn = std::move(backward_fn);
  }
  return Var::from_node(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw ShapeError("backward: root must hold exactly one element");
  }
  if (!root.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!n.parent_needs_grad(k)) continue;
      Tensor& g = n.parents[k]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& n) {
    if (n.parent_needs_grad(0)) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parent_needs_grad(1)) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parent_needs_grad(0)) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parent_needs_grad(1)) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double c) {
  return unary(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& x, double c) {
  return unary(
      x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Var sqrt(const Var& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Var reciprocal(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / v; },
      [](double, double y) { return -y * y; });
}

Var exp(const Var& x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Var log(const Var& x) {
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var swish(const Var& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Var prelu(const Var& x, const Var& slope, std::size_t axis) {
  const AxisView av = axis_view(x.shape(), axis);
  if (slope.shape() != Shape{av.channels}) {
    throw ShapeError("prelu: slope shape " + to_string(slope.shape()) +
                     " for " + std::to_string(av.channels) + " channels");
  }
  const Tensor& xv = x.value();
  const Tensor& sv = slope.value();
  Tensor y(xv.shape());
  for (std::size_t o = 0; o < av.outer; ++o) {
    for (std::size_t c = 0; c < av.channels; ++c) {
      const std::size_t base = (o * av.channels + c) * av.inner;
      for (std::size_t i = 0; i < av.inner; ++i) {
        const double v = xv[base + i];
        y[base + i] = v >= 0.0 ? v : sv[c] * v;
      }
    }
  }
  return make_op(std::move(y), {x, slope}, [av](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& sv = n.parents[1]->value;
    const bool gx_needed = n.parent_needs_grad(0);
    const bool gs_needed = n.parent_needs_grad(1);
    Tensor* gx = gx_needed ? &n.parents[0]->grad_buffer() : nullptr;
    Tensor* gs = gs_needed ? &n.parents[1]->grad_buffer() : nullptr;
    for (std::size_t o = 0; o < av.outer; ++o) {
      for (std::size_t c = 0; c < av.channels; ++c) {
        const std::size_t base = (o * av.channels + c) * av.inner;
        for (std::size_t i = 0; i < av.inner; ++i) {
          const double v = xv[base + i];
          const double g = n.grad[base + i];
          if (v >= 0.0) {
            if (gx) (*gx)[base + i] += g;
          } else {
            if (gx) (*gx)[base + i] += g * sv[c];
            if (gs) (*gs)[c] += g * v;
          }
        }
      }
    }
  });
}

Var bcast_add(const Var& x, const Var& v, std::size_t axis) {
  const AxisView av = axis_view(x.shape(), axis);
  if (v.shape() != Shape{av.channels}) {
    throw ShapeError("bcast_add: vector shape " + to_string(v.shape()));
  }
  Tensor y = x.value();
  for (std::size_t o = 0; o < av.outer; ++o)
    for (std::size_t c = 0; c < av.channels; ++c) {
      const double add = v.value()[c];
      double* p = y.data() + (o * av.channels + c) * av.inner;
      for (std::size_t i = 0; i < av.inner; ++i) p[i] += add;
    }
  return make_op(std::move(y), {x, v}, [av](Node& n) {
    if (n.parent_needs_grad(0)) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parent_needs_grad(1)) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (std::size_t o = 0; o < av.outer; ++o)
        for (std::size_t c = 0; c < av.channels; ++c) {
          const double* p = n.grad.data() + (o * av.channels + c) * av.inner;
          double s = 0.0;
          for (std::size_t i = 0; i < av.inner; ++i) s += p[i];
          g[c] += s;
        }
    }
  });
}

Var bcast_mul(const Var& x, const Var& v, std::size_t axis) {
  const AxisView av = axis_view(x.shape(), axis);
  if (v.shape() != Shape{av.channels}) {
    throw ShapeError("bcast_mul: vector shape " + to_string(v.shape()));
  }
  Tensor y = x.value();
  for (std::size_t o = 0; o < av.outer; ++o)
    for (std::size_t c = 0; c < av.channels; ++c) {
      const double m = v.value()[c];
      double* p = y.data() + (o * av.channels + c) * av.inner;
      for (std::size_t i = 0; i < av.inner; ++i) p[i] *= m;
    }
  return make_op(std::move(y), {x, v}, [av](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& vv = n.parents[1]->value;
    Tensor* gx = n.parent_needs_grad(0) ? &n.parents[0]->grad_buffer() : nullptr;
    Tensor* gv = n.parent_needs_grad(1) ? &n.parents[1]->grad_buffer() : nullptr;
    for (std::size_t o = 0; o < av.outer; ++o)
      for (std::size_t c = 0; c < av.channels; ++c) {
        const std::size_t base = (o * av.channels + c) * av.inner;
        double s = 0.0;
        for (std::size_t i = 0; i < av.inner; ++i) {
          const double g = n.grad[base + i];
          if (gx) (*gx)[base + i] += g * vv[c];
          s += g * xv[base + i];
        }
        if (gv) (*gv)[c] += s;
      }
  });
}

Var sum_to_axis(const Var& x, std::size_t axis) {
  const AxisView av = axis_view(x.shape(), axis);
  Tensor y({av.channels});
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < av.outer; ++o)
    for (std::size_t c = 0; c < av.channels; ++c) {
      const double* p = xv.data() + (o * av.channels + c) * av.inner;
      double s = 0.0;
      for (std::size_t i = 0; i < av.inner; ++i) s += p[i];
      y[c] += s;
    }
  return make_op(std::move(y), {x}, [av](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < av.outer; ++o)
      for (std::size_t c = 0; c < av.channels; ++c) {
        double* p = g.data() + (o * av.channels + c) * av.inner;
        for (std::size_t i = 0; i < av.inner; ++i) p[i] += n.grad[c];
      }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_op(Tensor::scalar(s), {x}, [](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
  });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return make_op(std::move(y), {x}, [](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

namespace {

// Index map from output flat index to input flat index for a permutation.
std::vector<std::size_t> permute_index(const Shape& in,
                                       const std::vector<std::size_t>& perm,
                                       Shape& out_shape) {
  const std::size_t r = in.size();
  if (perm.size() != r) throw ShapeError("permute: rank mismatch");
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  out_shape.assign(r, 0);
  std::vector<bool> used(r, false);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || used[perm[i]]) throw ShapeError("permute: bad perm");
    used[perm[i]] = true;
    out_shape[i] = in[perm[i]];
  }
  const std::size_t total = numel(in);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_stride[perm[i]];
    map[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  Shape out_shape;
  auto map = std::make_shared<std::vector<std::size_t>>(
      permute_index(x.shape(), perm, out_shape));
  Tensor y(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[(*map)[i]];
  return make_op(std::move(y), {x}, [map](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[(*map)[i]] += n.grad[i];
  });
}

Var concat(std::span<const Var> xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  Shape out_shape = xs[0].shape();
  if (axis >= out_shape.size()) throw ShapeError("concat: axis out of range");
  std::size_t total = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw ShapeError("concat: shape " + to_string(s) + " vs " +
                         to_string(out_shape));
      }
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  const AxisView ov = axis_view(out_shape, axis);
  Tensor y(out_shape);
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const std::size_t w = x.dim(axis) * ov.inner;
    for (std::size_t o = 0; o < ov.outer; ++o) {
      std::copy_n(x.value().data() + o * w, w,
                  y.data() + o * ov.channels * ov.inner + offset);
    }
    widths.push_back(w);
    offset += w;
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return make_op(std::move(y), std::move(inputs), [ov, widths](Node& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const std::size_t w = widths[k];
      if (n.parent_needs_grad(k)) {
        Tensor& g = n.parents[k]->grad_buffer();
        for (std::size_t o = 0; o < ov.outer; ++o) {
          const double* src = n.grad.data() + o * ov.channels * ov.inner + off;
          double* dst = g.data() + o * w;
          for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
        }
      }
      off += w;
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len) {
  const AxisView av = axis_view(x.shape(), axis);
  if (start + len > av.channels) throw ShapeError("slice: out of range");
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor y(out_shape);
  for (std::size_t o = 0; o < av.outer; ++o) {
    std::copy_n(x.value().data() + (o * av.channels + start) * av.inner,
                len * av.inner, y.data() + o * len * av.inner);
  }
  return make_op(std::move(y), {x}, [av, start, len](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < av.outer; ++o) {
      const double* src = n.grad.data() + o * len * av.inner;
      double* dst = g.data() + (o * av.channels + start) * av.inner;
      for (std::size_t i = 0; i < len * av.inner; ++i) dst[i] += src[i];
    }
  });
}

Var resize_axis(const Var& x, std::size_t axis, std::size_t size) {
  const AxisView av = axis_view(x.shape(), axis);
  if (size == av.channels) return x;
  if (size < av.channels) return slice(x, axis, 0, size);
  Shape out_shape = x.shape();
  out_shape[axis] = size;
  Tensor y(out_shape);
  for (std::size_t o = 0; o < av.outer; ++o) {
    std::copy_n(x.value().data() + o * av.channels * av.inner,
                av.channels * av.inner, y.data() + o * size * av.inner);
  }
  return make_op(std::move(y), {x}, [av, size](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < av.outer; ++o) {
      const double* src = n.grad.data() + o * size * av.inner;
      double* dst = g.data() + o * av.channels * av.inner;
      for (std::size_t i = 0; i < av.channels * av.inner; ++i) dst[i] += src[i];
    }
  });
}

Var remap_axis(const Var& x, std::size_t axis,
               const std::vector<std::vector<Tap>>& taps) {
  const AxisView av = axis_view(x.shape(), axis);
  for (const auto& row : taps)
    for (const auto& t : row)
      if (t.index >= av.channels) throw ShapeError("remap_axis: bad index");
  Shape out_shape = x.shape();
  out_shape[axis] = taps.size();
  const std::size_t m = taps.size();
  Tensor y(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < av.outer; ++o)
    for (std::size_t j = 0; j < m; ++j) {
      double* dst = y.data() + (o * m + j) * av.inner;
      for (const auto& t : taps[j]) {
        const double* src = xv.data() + (o * av.channels + t.index) * av.inner;
        for (std::size_t i = 0; i < av.inner; ++i) dst[i] += t.weight * src[i];
      }
    }
  return make_op(std::move(y), {x}, [av, taps, m](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < av.outer; ++o)
      for (std::size_t j = 0; j < m; ++j) {
        const double* src = n.grad.data() + (o * m + j) * av.inner;
        for (const auto& t : taps[j]) {
          double* dst = g.data() + (o * av.channels + t.index) * av.inner;
          for (std::size_t i = 0; i < av.inner; ++i) dst[i] += t.weight * src[i];
        }
      }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (w.shape().size() != 2 || x.shape().empty() ||
      x.shape().back() != w.dim(1)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " weight " +
                     to_string(w.shape()));
  }
  if (b.defined() && b.shape() != Shape{w.dim(0)}) {
    throw ShapeError("linear: bias " + to_string(b.shape()));
  }
  const std::size_t in = w.dim(1);
  const std::size_t out = w.dim(0);
  const std::size_t rows = x.value().size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out;
  Tensor y(out_shape);
  MatMap Y(y.data(), rows, out);
  CMatMap X(x.value().data(), rows, in);
  CMatMap W(w.value().data(), out, in);
  Y.noalias() = X * W.transpose();
  if (b.defined()) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) y[r * out + o] += b.value()[o];
  }
  return make_op(std::move(y), {x, w, b}, [rows, in, out](Node& n) {
    CMatMap G(n.grad.data(), rows, out);
    if (n.parent_needs_grad(0)) {
      MatMap GX(n.parents[0]->grad_buffer().data(), rows, in);
      GX.noalias() += G * CMatMap(n.parents[1]->value.data(), out, in);
    }
    if (n.parent_needs_grad(1)) {
      MatMap GW(n.parents[1]->grad_buffer().data(), out, in);
      GW.noalias() += G.transpose() * CMatMap(n.parents[0]->value.data(), rows, in);
    }
    if (n.parent_needs_grad(2)) {
      Tensor& gb = n.parents[2]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += n.grad[r * out + o];
    }
  });
}

Var bmm(const Var& a, const Var& b, bool transpose_b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("bmm: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t B = a.dim(0), M = a.dim(1), K = a.dim(2);
  const std::size_t N = transpose_b ? b.dim(1) : b.dim(2);
  if ((transpose_b ? b.dim(2) : b.dim(1)) != K) {
    throw ShapeError("bmm: inner dimension mismatch");
  }
  Tensor y({B, M, N});
  for (std::size_t i = 0; i < B; ++i) {
    CMatMap A(a.value().data() + i * M * K, M, K);
    MatMap Y(y.data() + i * M * N, M, N);
    if (transpose_b) {
      Y.noalias() = A * CMatMap(b.value().data() + i * N * K, N, K).transpose();
    } else {
      Y.noalias() = A * CMatMap(b.value().data() + i * K * N, K, N);
    }
  }
  return make_op(std::move(y), {a, b}, [B, M, K, N, transpose_b](Node& n) {
    const double* av = n.parents[0]->value.data();
    const double* bv = n.parents[1]->value.data();
    double* ga = n.parent_needs_grad(0) ? n.parents[0]->grad_buffer().data() : nullptr;
    double* gb = n.parent_needs_grad(1) ? n.parents[1]->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < B; ++i) {
      CMatMap G(n.grad.data() + i * M * N, M, N);
      CMatMap A(av + i * M * K, M, K);
      if (transpose_b) {
        CMatMap Bm(bv + i * N * K, N, K);
        if (ga) MatMap(ga + i * M * K, M, K).noalias() += G * Bm;
        if (gb) MatMap(gb + i * N * K, N, K).noalias() += G.transpose() * A;
      } else {
        CMatMap Bm(bv + i * K * N, K, N);
        if (ga) MatMap(ga + i * M * K, M, K).noalias() += G * Bm.transpose();
        if (gb) MatMap(gb + i * K * N, K, N).noalias() += A.transpose() * G;
      }
    }
  });
}

Var softmax_last(const Var& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.value().size() / d;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x.value().data() + r * d;
    double* dst = y.data() + r * d;
    const double m = *std::max_element(src, src + d);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (dst[i] = std::exp(src[i] - m));
    for (std::size_t i = 0; i < d; ++i) dst[i] /= s;
  }
  return make_op(std::move(y), {x}, [rows, d](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yv = n.value.data() + r * d;
      const double* gy = n.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += gy[i] * yv[i];
      for (std::size_t i = 0; i < d; ++i) g[r * d + i] += yv[i] * (gy[i] - dot);
    }
  });
}

Var layer_norm_last(const Var& x, const Var& gamma, const Var& beta,
                    double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: affine shape mismatch for dim " +
                     std::to_string(d));
  }
  const std::size_t rows = x.value().size() / d;
  Tensor y(x.shape());
  auto xhat = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x.value().data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += src[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (src[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      y[r * d + i] = gamma.value()[i] * h + beta.value()[i];
    }
  }
  return make_op(std::move(y), {x, gamma, beta},
                 [rows, d, xhat, inv_std](Node& n) {
    const Tensor& gv = n.parents[1]->value;
    double* gx = n.parent_needs_grad(0) ? n.parents[0]->grad_buffer().data() : nullptr;
    double* gg = n.parent_needs_grad(1) ? n.parents[1]->grad_buffer().data() : nullptr;
    double* gbeta = n.parent_needs_grad(2) ? n.parents[2]->grad_buffer().data() : nullptr;
    std::vector<double> dh(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gy = n.grad.data() + r * d;
      const double* h = xhat->data() + r * d;
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (gg) gg[i] += gy[i] * h[i];
        if (gbeta) gbeta[i] += gy[i];
        dh[i] = gy[i] * gv[i];
        mean_dh += dh[i];
        mean_dh_h += dh[i] * h[i];
      }
      if (!gx) continue;
      mean_dh /= static_cast<double>(d);
      mean_dh_h /= static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i) {
        gx[r * d + i] += (*inv_std)[r] * (dh[i] - mean_dh - h[i] * mean_dh_h);
      }
    }
  });
}

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride,
                          std::size_t pad) {
  if (in + 2 * pad < k) {
    throw ShapeError("kernel " + std::to_string(k) +
                     " larger than padded input " +
                     std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

std::size_t conv_transpose_out_size(std::size_t in, std::size_t k,
                                    std::size_t stride, std::size_t pad) {
  if (in == 0) throw ShapeError("transposed conv: empty input");
  const std::size_t full = (in - 1) * stride + k;
  if (full <= 2 * pad) throw ShapeError("transposed conv: padding too large");
  return full - 2 * pad;
}

Var conv2d(const Var& x, const Var& w, const Var& b, Conv2dGeometry g) {
  check_conv_args(x, w, b, g, "conv2d");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C) {
    throw ShapeError("conv2d: input has " + std::to_string(C) +
                     " channels, weight expects " + std::to_string(w.dim(1)));
  }
  const std::size_t Ho = conv_out_size(H, kh, g.stride_h, g.pad_h);
  const std::size_t Wo = conv_out_size(W, kw, g.stride_w, g.pad_w);
  const std::size_t CK = C * kh * kw, P = Ho * Wo;
  Tensor y({B, O, Ho, Wo});
  std::vector<double> col(CK * P);
  CMatMap Wm(w.value().data(), O, CK);
  for (std::size_t bi = 0; bi < B; ++bi) {
    im2col(x.value().data() + bi * C * H * W, C, H, W, kh, kw, g, Ho, Wo,
           col.data());
    MatMap Y(y.data() + bi * O * P, O, P);
    Y.noalias() = Wm * CMatMap(col.data(), CK, P);
    if (b.defined()) {
      for (std::size_t o = 0; o < O; ++o) Y.row(o).array() += b.value()[o];
    }
  }
  return make_op(std::move(y), {x, w, b},
                 [B, C, H, W, O, kh, kw, Ho, Wo, g](Node& n) {
    const std::size_t CK = C * kh * kw, P = Ho * Wo;
    const Tensor& xv = n.parents[0]->value;
    CMatMap Wm(n.parents[1]->value.data(), O, CK);
    const bool gx = n.parent_needs_grad(0);
    const bool gw = n.parent_needs_grad(1);
    std::vector<double> col(CK * P);
    for (std::size_t bi = 0; bi < B; ++bi) {
      CMatMap G(n.grad.data() + bi * O * P, O, P);
      if (gw) {
        im2col(xv.data() + bi * C * H * W, C, H, W, kh, kw, g, Ho, Wo,
               col.data());
        MatMap(n.parents[1]->grad_buffer().data(), O, CK).noalias() +=
            G * CMatMap(col.data(), CK, P).transpose();
      }
      if (gx) {
        MatMap(col.data(), CK, P).noalias() = Wm.transpose() * G;
        col2im(col.data(), C, H, W, kh, kw, g, Ho, Wo,
               n.parents[0]->grad_buffer().data() + bi * C * H * W);
      }
    }
    if (n.parent_needs_grad(2)) {
      Tensor& gb = n.parents[2]->grad_buffer();
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t o = 0; o < O; ++o) {
          const double* p = n.grad.data() + (bi * O + o) * P;
          double s = 0.0;
          for (std::size_t i = 0; i < P; ++i) s += p[i];
          gb[o] += s;
        }
    }
  });
}

namespace {

// [O, I, kh, kw] -> [(o, ki, kj), i]
std::vector<double> transpose_kernel(const Tensor& w) {
  const std::size_t O = w.dim(0), I = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  std::vector<double> r(O * kh * kw * I);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < kh * kw; ++k)
        r[(o * kh * kw + k) * I + i] = w[(o * I + i) * kh * kw + k];
  return r;
}

}  // namespace

Var conv_transpose2d(const Var& x, const Var& w, const Var& b,
                     Conv2dGeometry g) {
  check_conv_args(x, w, b, g, "conv_transpose2d");
  const std::size_t B = x.dim(0), I = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != I) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(I) +
                     " channels, weight expects " + std::to_string(w.dim(1)));
  }
  const std::size_t Ho = conv_transpose_out_size(H, kh, g.stride_h, g.pad_h);
  const std::size_t Wo = conv_transpose_out_size(W, kw, g.stride_w, g.pad_w);
  const std::size_t OK = O * kh * kw, P = H * W;
  Tensor y({B, O, Ho, Wo});
  const std::vector<double> wt = transpose_kernel(w.value());
  CMatMap Wt(wt.data(), OK, I);
  std::vector<double> col(OK * P);
  for (std::size_t bi = 0; bi < B; ++bi) {
    MatMap(col.data(), OK, P).noalias() =
        Wt * CMatMap(x.value().data() + bi * I * P, I, P);
    col2im(col.data(), O, Ho, Wo, kh, kw, g, H, W, y.data() + bi * O * Ho * Wo);
    if (b.defined()) {
      for (std::size_t o = 0; o < O; ++o) {
        double* p = y.data() + (bi * O + o) * Ho * Wo;
        for (std::size_t i = 0; i < Ho * Wo; ++i) p[i] += b.value()[o];
      }
    }
  }
  return make_op(std::move(y), {x, w, b},
                 [B, I, H, W, O, kh, kw, Ho, Wo, g](Node& n) {
    const std::size_t OK = O * kh * kw, P = H * W, Q = Ho * Wo;
    const bool gx = n.parent_needs_grad(0);
    const bool gw = n.parent_needs_grad(1);
    const std::vector<double> wt = transpose_kernel(n.parents[1]->value);
    CMatMap Wt(wt.data(), OK, I);
    std::vector<double> col(OK * P);
    std::vector<double> gwt(gw ? OK * I : 0, 0.0);
    for (std::size_t bi = 0; bi < B; ++bi) {
      im2col(n.grad.data() + bi * O * Q, O, Ho, Wo, kh, kw, g, H, W,
             col.data());
      CMatMap Cm(col.data(), OK, P);
      if (gx) {
        MatMap(n.parents[0]->grad_buffer().data() + bi * I * P, I, P)
            .noalias() += Wt.transpose() * Cm;
      }
      if (gw) {
        MatMap(gwt.data(), OK, I).noalias() +=
            Cm * CMatMap(n.parents[0]->value.data() + bi * I * P, I, P)
                     .transpose();
      }
    }
    if (gw) {
      Tensor& gwv = n.parents[1]->grad_buffer();
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < I; ++i)
          for (std::size_t k = 0; k < kh * kw; ++k)
            gwv[(o * I + i) * kh * kw + k] += gwt[(o * kh * kw + k) * I + i];
    }
    if (n.parent_needs_grad(2)) {
      Tensor& gb = n.parents[2]->grad_buffer();
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t o = 0; o < O; ++o) {
          const double* p = n.grad.data() + (bi * O + o) * Q;
          double s = 0.0;
          for (std::size_t i = 0; i < Q; ++i) s += p[i];
          gb[o] += s;
        }
    }
  });
}

Var depthwise_conv_time(const Var& x, const Var& w, const Var& b) {
  if (x.shape().size() != 3 || w.shape().size() != 2 ||
      w.dim(0) != x.dim(2) || w.dim(1) % 2 == 0 ||
      (b.defined() && b.shape() != Shape{x.dim(2)})) {
    throw ShapeError("depthwise_conv_time: input " + to_string(x.shape()) +
                     " kernel " + to_string(w.shape()));
  }
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2), K = w.dim(1);
  const long half = static_cast<long>(K / 2);
  Tensor y(x.shape());
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t t = 0; t < T; ++t) {
      double* dst = y.data() + (bi * T + t) * D;
      if (b.defined()) {
        for (std::size_t d = 0; d < D; ++d) dst[d] = b.value()[d];
      }
      for (std::size_t k = 0; k < K; ++k) {
        const long s = static_cast<long>(t) + static_cast<long>(k) - half;
        if (s < 0 || s >= static_cast<long>(T)) continue;
        const double* src = xv.data() + (bi * T + static_cast<std::size_t>(s)) * D;
        for (std::size_t d = 0; d < D; ++d) dst[d] += wv[d * K + k] * src[d];
      }
    }
  return make_op(std::move(y), {x, w, b}, [B, T, D, K, half](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    const Tensor& wv = n.parents[1]->value;
    double* gx = n.parent_needs_grad(0) ? n.parents[0]->grad_buffer().data() : nullptr;
    double* gw = n.parent_needs_grad(1) ? n.parents[1]->grad_buffer().data() : nullptr;
    double* gb = n.parent_needs_grad(2) ? n.parents[2]->grad_buffer().data() : nullptr;
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t t = 0; t < T; ++t) {
        const double* gy = n.grad.data() + (bi * T + t) * D;
        if (gb) {
          for (std::size_t d = 0; d < D; ++d) gb[d] += gy[d];
        }
        for (std::size_t k = 0; k < K; ++k) {
          const long s = static_cast<long>(t) + static_cast<long>(k) - half;
          if (s < 0 || s >= static_cast<long>(T)) continue;
          const std::size_t off = (bi * T + static_cast<std::size_t>(s)) * D;
          for (std::size_t d = 0; d < D; ++d) {
            if (gx) gx[off + d] += wv[d * K + k] * gy[d];
            if (gw) gw[d * K + k] += xv[off + d] * gy[d];
          }
        }
      }
  });
}

Var dropout(const Var& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw InvalidInput("dropout probability must be < 1");
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  const double keep = 1.0 / (1.0 - p);
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep;
    y[i] *= (*mask)[i];
  }
  return make_op(std::move(y), {x}, [mask](Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (*mask)[i];
  });
}

}  // namespace dcuc::ag
