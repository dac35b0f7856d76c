// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/conformer.hpp"

#include <cmath>

#include "dcuc/error.hpp"

namespace dcuc::conformer {

namespace {

void check_dim(const ag::Var& x, const nn::LayerNorm& norm, const char* op) {
  if (x.shape().size() != 3 || x.shape()[2] != norm.gamma.dim(0)) {
    throw ShapeError(std::string(op) + ": input " + to_string(x.shape()) +
                     " for model_dim " + std::to_string(norm.gamma.dim(0)));
  }
}

ag::Var maybe_dropout(const ag::Var& x, const nn::Context& ctx) {
  const double p = ctx.active_dropout();
  return p > 0.0 ? ag::dropout(x, p, *ctx.rng) : x;
}

// [B, T, D] -> [B * H, T, D / H]
ag::Var split_heads(const ag::Var& x, std::size_t heads) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  ag::Var r = ag::reshape(x, {B, T, heads, D / heads});
  r = ag::permute(r, {0, 2, 1, 3});
  return ag::reshape(r, {B * heads, T, D / heads});
}

ag::Var attention_probs(const ag::Var& normed, const AttentionParams& p,
                        ag::Var* values) {
  const std::size_t H = p.num_heads;
  const double d_head = static_cast<double>(normed.dim(2) / H);
  ag::Var q = split_heads(nn::apply(p.query, normed), H);
  ag::Var k = split_heads(nn::apply(p.key, normed), H);
  if (values) *values = split_heads(nn::apply(p.value, normed), H);
  ag::Var scores = ag::scale(ag::bmm(q, k, true), 1.0 / std::sqrt(d_head));
  return ag::softmax_last(scores);
}

}  // namespace

void ConformerConfig::validate() const {
  if (model_dim == 0 || num_heads == 0 || model_dim % num_heads != 0) {
    throw InvalidInput("conformer model_dim must be divisible by num_heads");
  }
  if (conv_kernel % 2 == 0) throw InvalidInput("conformer conv_kernel must be odd");
  if (ffn_expansion == 0) throw InvalidInput("ffn_expansion must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw InvalidInput("dropout must lie in [0, 1)");
  }
}

ag::Var ffn_half(const ag::Var& x, const FeedForwardParams& p,
                 const nn::Context& ctx) {
  check_dim(x, p.norm, "ffn_half");
  ag::Var h = nn::apply(p.norm, x);
  h = maybe_dropout(ag::swish(nn::apply(p.up, h)), ctx);
  h = maybe_dropout(nn::apply(p.down, h), ctx);
  return ag::add(x, ag::scale(h, 0.5));
}

ag::Var mhsa(const ag::Var& x, const AttentionParams& p,
             const nn::Context& /*ctx*/) {
  check_dim(x, p.norm, "mhsa");
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  const std::size_t H = p.num_heads;
  ag::Var v;
  ag::Var probs = attention_probs(nn::apply(p.norm, x), p, &v);
  ag::Var ctx_heads = ag::bmm(probs, v, false);  // [B*H, T, dh]
  ag::Var merged = ag::reshape(ctx_heads, {B, H, T, D / H});
  merged = ag::reshape(ag::permute(merged, {0, 2, 1, 3}), {B, T, D});
  return ag::add(x, nn::apply(p.out, merged));
}

Tensor attention_weights(const ag::Var& x, const AttentionParams& p) {
  check_dim(x, p.norm, "attention_weights");
  ag::NoGradGuard guard;
  ag::Var probs = attention_probs(nn::apply(p.norm, x), p, nullptr);
  return probs.value().reshaped({x.dim(0), p.num_heads, x.dim(1), x.dim(1)});
}

ag::Var conv_module(const ag::Var& x, const ConvModuleParams& p,
                    const nn::Context& ctx) {
  check_dim(x, p.norm, "conv_module");
  const std::size_t D = x.dim(2);
  ag::Var h = nn::apply(p.pointwise_in, nn::apply(p.norm, x));
  // GLU over the feature axis: first half gated by the second.
  h = ag::mul(ag::slice(h, 2, 0, D), ag::sigmoid(ag::slice(h, 2, D, D)));
  h = ag::depthwise_conv_time(h, p.depthwise_weight, p.depthwise_bias);
  h = nn::batch_norm(h, p.norm_time, 2, ctx.mode);
  h = ag::swish(h);
  h = maybe_dropout(nn::apply(p.pointwise_out, h), ctx);
  return ag::add(x, h);
}

ag::Var conformer_block(const ag::Var& x, const BlockParams& p,
                        const nn::Context& ctx) {
  ag::Var h = ffn_half(x, p.ffn1, ctx);
  h = mhsa(h, p.mhsa, ctx);
  h = conv_module(h, p.conv, ctx);
  h = ffn_half(h, p.ffn2, ctx);
  return nn::apply(p.final_norm, h);
}

FeedForwardParams make_ffn(nn::ParamStore& store, const std::string& prefix,
                           const ConformerConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.model_dim;
  FeedForwardParams p;
  p.norm = nn::make_layer_norm(store, prefix + ".norm", d);
  p.up = nn::make_linear(store, prefix + ".up", d, cfg.ffn_expansion * d, rng);
  p.down =
      nn::make_linear(store, prefix + ".down", cfg.ffn_expansion * d, d, rng);
  return p;
}

AttentionParams make_attention(nn::ParamStore& store,
                               const std::string& prefix,
                               const ConformerConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.model_dim;
  AttentionParams p;
  p.num_heads = cfg.num_heads;
  p.norm = nn::make_layer_norm(store, prefix + ".norm", d);
  p.query = nn::make_linear(store, prefix + ".query", d, d, rng);
  // A key bias shifts every logit of a row equally, which softmax ignores.
  p.key = nn::make_linear(store, prefix + ".key", d, d, rng, false);
  p.value = nn::make_linear(store, prefix + ".value", d, d, rng);
  p.out = nn::make_linear(store, prefix + ".out", d, d, rng);
  return p;
}

ConvModuleParams make_conv_module(nn::ParamStore& store,
                                  const std::string& prefix,
                                  const ConformerConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.model_dim, k = cfg.conv_kernel;
  ConvModuleParams p;
  p.norm = nn::make_layer_norm(store, prefix + ".norm", d);
  p.pointwise_in =
      nn::make_linear(store, prefix + ".pointwise_in", d, 2 * d, rng);
  p.depthwise_weight = store.add(prefix + ".depthwise.weight",
                                 nn::uniform_init({d, k}, k, rng));
  // No depthwise bias: the batch norm right after removes it.
  p.norm_time = nn::make_batch_norm(store, prefix + ".batch_norm", d);
  p.pointwise_out =
      nn::make_linear(store, prefix + ".pointwise_out", d, d, rng);
  return p;
}

BlockParams make_block(nn::ParamStore& store, const std::string& prefix,
                       const ConformerConfig& cfg, Rng& rng) {
  cfg.validate();
  BlockParams p;
  p.ffn1 = make_ffn(store, prefix + ".ffn1", cfg, rng);
  p.mhsa = make_attention(store, prefix + ".mhsa", cfg, rng);
  p.conv = make_conv_module(store, prefix + ".conv", cfg, rng);
  p.ffn2 = make_ffn(store, prefix + ".ffn2", cfg, rng);
  p.final_norm = nn::make_layer_norm(store, prefix + ".final_norm", cfg.model_dim);
  return p;
}

}  // namespace dcuc::conformer
