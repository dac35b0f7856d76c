// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcuc/autograd.hpp"
#include "dcuc/rng.hpp"

namespace dcuc::nn {

enum class Mode { train, eval };

// Per-forward settings shared by every layer.
struct Context {
  Mode mode = Mode::eval;
  double dropout = 0.0;
  Rng* rng = nullptr;  // dropout masks; required when dropout is active

  bool training() const { return mode == Mode::train; }
  double active_dropout() const {
    return (training() && rng != nullptr) ? dropout : 0.0;
  }
};

// Named parameters and buffers (running statistics) of one model, keyed by
// canonical dotted names. Iteration order is lexicographic.
class ParamStore {
 public:
  ag::Var add(const std::string& name, Tensor init, bool trainable = true);
  ag::Var get(const std::string& name) const;
  bool contains(const std::string& name) const {
    return entries_.count(name) != 0;
  }
  bool trainable(const std::string& name) const;

  struct Entry {
    ag::Var var;
    bool trainable = true;
  };
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::pair<std::string, ag::Var>> trainable_params() const;

  void zero_grad();
  std::size_t num_trainable_values() const;

 private:
  std::map<std::string, Entry> entries_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

struct Linear {
  ag::Var weight;  // [out, in]
  ag::Var bias;    // [out]
};
// bias = false leaves Linear::bias undefined.
Linear make_linear(ParamStore& store, const std::string& prefix,
                   std::size_t in, std::size_t out, Rng& rng,
                   bool bias = true);
inline ag::Var apply(const Linear& l, const ag::Var& x) {
  return ag::linear(x, l.weight, l.bias);
}

struct LayerNorm {
  ag::Var gamma;
  ag::Var beta;
  double eps = 1e-5;
};
LayerNorm make_layer_norm(ParamStore& store, const std::string& prefix,
                          std::size_t dim);
inline ag::Var apply(const LayerNorm& ln, const ag::Var& x) {
  return ag::layer_norm_last(x, ln.gamma, ln.beta, ln.eps);
}

// Real batch norm with per-channel statistics over all other axes.
struct BatchNorm {
  ag::Var gamma;
  ag::Var beta;
  ag::Var running_mean;  // buffer
  ag::Var running_var;   // buffer
  double eps = 1e-5;
  double momentum = 0.1;
};
BatchNorm make_batch_norm(ParamStore& store, const std::string& prefix,
                          std::size_t channels);
ag::Var batch_norm(const ag::Var& x, const BatchNorm& bn, std::size_t axis,
                   Mode mode);

}  // namespace dcuc::nn
