// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/nn.hpp"

#include <cmath>

#include "dcuc/error.hpp"

namespace dcuc::nn {

ag::Var ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (entries_.count(name)) throw InvalidInput("duplicate parameter " + name);
  ag::Var v(std::move(init), trainable);
  entries_.emplace(name, Entry{v, trainable});
  return v;
}

ag::Var ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InvalidInput("unknown parameter " + name);
  return it->second.var;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  return it != entries_.end() && it->second.trainable;
}

std::vector<std::pair<std::string, ag::Var>> ParamStore::trainable_params()
    const {
  std::vector<std::pair<std::string, ag::Var>> out;
  for (const auto& [name, e] : entries_) {
    if (e.trainable) out.emplace_back(name, e.var);
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.var.zero_grad();
}

std::size_t ParamStore::num_trainable_values() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (e.trainable) n += e.var.value().size();
  }
  return n;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.uniform(-a, a);
  return t;
}

Linear make_linear(ParamStore& store, const std::string& prefix,
                   std::size_t in, std::size_t out, Rng& rng, bool bias) {
  Linear l;
  l.weight = store.add(prefix + ".weight", uniform_init({out, in}, in, rng));
  if (bias) l.bias = store.add(prefix + ".bias", uniform_init({out}, in, rng));
  return l;
}

LayerNorm make_layer_norm(ParamStore& store, const std::string& prefix,
                          std::size_t dim) {
  LayerNorm ln;
  ln.gamma = store.add(prefix + ".gamma", Tensor({dim}, 1.0));
  ln.beta = store.add(prefix + ".beta", Tensor({dim}, 0.0));
  return ln;
}

BatchNorm make_batch_norm(ParamStore& store, const std::string& prefix,
                          std::size_t channels) {
  BatchNorm bn;
  bn.gamma = store.add(prefix + ".gamma", Tensor({channels}, 1.0));
  bn.beta = store.add(prefix + ".beta", Tensor({channels}, 0.0));
  bn.running_mean =
      store.add(prefix + ".running_mean", Tensor({channels}, 0.0), false);
  bn.running_var =
      store.add(prefix + ".running_var", Tensor({channels}, 1.0), false);
  return bn;
}

ag::Var batch_norm(const ag::Var& x, const BatchNorm& bn, std::size_t axis,
                   Mode mode) {
  const std::size_t channels = x.dim(axis);
  const double count = static_cast<double>(x.value().size() / channels);
  ag::Var centered;
  ag::Var inv_std;
  if (mode == Mode::train) {
    if (count < 2) {
      throw InvalidInput("batch norm in train mode needs >= 2 values per "
                         "channel");
    }
    ag::Var mu = ag::scale(ag::sum_to_axis(x, axis), 1.0 / count);
    centered = ag::bcast_add(x, ag::scale(mu, -1.0), axis);
    ag::Var var =
        ag::scale(ag::sum_to_axis(ag::square(centered), axis), 1.0 / count);
    inv_std = ag::reciprocal(ag::sqrt(ag::add_scalar(var, bn.eps)));
    Tensor& rm = ag::Var(bn.running_mean).value();
    Tensor& rv = ag::Var(bn.running_var).value();
    for (std::size_t c = 0; c < channels; ++c) {
      rm[c] = (1.0 - bn.momentum) * rm[c] + bn.momentum * mu.value()[c];
      rv[c] = (1.0 - bn.momentum) * rv[c] + bn.momentum * var.value()[c];
    }
  } else {
    Tensor neg_mean = bn.running_mean.value();
    Tensor is = bn.running_var.value();
    for (std::size_t c = 0; c < channels; ++c) {
      neg_mean[c] = -neg_mean[c];
      is[c] = 1.0 / std::sqrt(is[c] + bn.eps);
    }
    centered = ag::bcast_add(x, ag::constant(std::move(neg_mean)), axis);
    inv_std = ag::constant(std::move(is));
  }
  ag::Var y = ag::bcast_mul(centered, ag::mul(inv_std, bn.gamma), axis);
  return ag::bcast_add(y, bn.beta, axis);
}

}  // namespace dcuc::nn
