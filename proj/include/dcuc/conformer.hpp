// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "dcuc/nn.hpp"

// Conformer blocks over real frame sequences [batch, time, model_dim]:
//   x1 = x + 1/2 FFN(x)
//   x2 = x1 + MHSA(x1)
//   x3 = x2 + Conv(x2)
//   y  = LayerNorm(x3 + 1/2 FFN(x3))
namespace dcuc::conformer {

struct ConformerConfig {
  std::size_t model_dim = 128;
  std::size_t num_heads = 4;
  std::size_t ffn_expansion = 4;
  std::size_t conv_kernel = 15;
  std::size_t num_blocks = 2;
  double dropout = 0.1;

  void validate() const;
};

struct FeedForwardParams {
  nn::LayerNorm norm;
  nn::Linear up;    // model_dim -> expansion * model_dim
  nn::Linear down;  // back to model_dim
};

struct AttentionParams {
  nn::LayerNorm norm;
  nn::Linear query, key, value, out;
  std::size_t num_heads = 1;
};

struct ConvModuleParams {
  nn::LayerNorm norm;
  nn::Linear pointwise_in;  // model_dim -> 2 * model_dim, gated by GLU
  ag::Var depthwise_weight;  // [model_dim, kernel]
  ag::Var depthwise_bias;    // [model_dim] or undefined
  nn::BatchNorm norm_time;   // per feature over batch x time
  nn::Linear pointwise_out;
};

struct BlockParams {
  FeedForwardParams ffn1;
  AttentionParams mhsa;
  ConvModuleParams conv;
  FeedForwardParams ffn2;
  nn::LayerNorm final_norm;
};

// x + 0.5 * FFN(x)
ag::Var ffn_half(const ag::Var& x, const FeedForwardParams& p,
                 const nn::Context& ctx);
// x + MHSA(LayerNorm(x))
ag::Var mhsa(const ag::Var& x, const AttentionParams& p,
             const nn::Context& ctx);
// x + Conv(x)
ag::Var conv_module(const ag::Var& x, const ConvModuleParams& p,
                    const nn::Context& ctx);
ag::Var conformer_block(const ag::Var& x, const BlockParams& p,
                        const nn::Context& ctx);

// Softmax attention weights [batch, heads, time, time] of the MHSA module.
Tensor attention_weights(const ag::Var& x, const AttentionParams& p);

FeedForwardParams make_ffn(nn::ParamStore& store, const std::string& prefix,
                           const ConformerConfig& cfg, Rng& rng);
AttentionParams make_attention(nn::ParamStore& store,
                               const std::string& prefix,
                               const ConformerConfig& cfg, Rng& rng);
ConvModuleParams make_conv_module(nn::ParamStore& store,
                                  const std::string& prefix,
                                  const ConformerConfig& cfg, Rng& rng);
BlockParams make_block(nn::ParamStore& store, const std::string& prefix,
                       const ConformerConfig& cfg, Rng& rng);

}  // namespace dcuc::conformer
