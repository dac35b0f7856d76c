// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "dcuc/autograd.hpp"
#include "dcuc/nn.hpp"

// Complex-valued kernels for the U-Net encoder and decoder. Feature layout is
// [batch, channels, freq, time] for both parts.
namespace dcuc::cnn {

struct ComplexConvParams {
  ag::Var w_real;     // [out_ch, in_ch, kh, kw]
  ag::Var w_imag;     // same shape as w_real
  ag::Var bias_real;  // [out_ch] or undefined
  ag::Var bias_imag;
  std::size_t stride_freq = 1;
  std::size_t stride_time = 1;
  std::size_t pad_freq = 0;
  std::size_t pad_time = 0;

  void validate() const;
  std::size_t out_channels() const { return w_real.dim(0); }
  std::size_t in_channels() const { return w_real.dim(1); }
};

// W = W_r + j W_i applied to X = X_r + j X_i:
//   (X_r * W_r - X_i * W_i) + j (X_r * W_i + X_i * W_r)
ag::CVar complex_conv2d(const ag::CVar& x, const ComplexConvParams& p);

// Same four-term combination with transposed convolution as the primitive.
ag::CVar complex_conv_transpose2d(const ag::CVar& x,
                                  const ComplexConvParams& p);

struct ComplexBatchNormParams {
  // Affine Gamma = [[rr, ri], [ri, ii]] and complex shift beta, per channel.
  ag::Var gamma_rr, gamma_ii, gamma_ri;
  ag::Var beta_r, beta_i;
  // Running statistics (buffers).
  ag::Var mean_r, mean_i;
  ag::Var var_rr, var_ii, var_ri;
  double eps = 1e-5;
  double momentum = 0.1;
};

// Whitening by the inverse square root of the per-channel 2x2 covariance of
// (real, imag), then the affine map. Train mode uses batch statistics over
// batch x freq x time and updates the running ones.
ag::CVar complex_batch_norm(const ag::CVar& x,
                            const ComplexBatchNormParams& p, nn::Mode mode);

// Real PReLU applied separately to both parts; one slope per channel.
ag::CVar prelu(const ag::CVar& x, const ag::Var& slope);

ComplexConvParams make_complex_conv(nn::ParamStore& store,
                                    const std::string& prefix,
                                    std::size_t in_ch, std::size_t out_ch,
                                    std::size_t kh, std::size_t kw, Rng& rng,
                                    bool bias = true);
ComplexBatchNormParams make_complex_batch_norm(nn::ParamStore& store,
                                               const std::string& prefix,
                                               std::size_t channels);
ag::Var make_prelu_slope(nn::ParamStore& store, const std::string& prefix,
                         std::size_t channels);

// Inverse square root of [[vrr, vri], [vri, vii]] as (wrr, wii, wri).
struct Whitening {
  double rr, ii, ri;
};
Whitening inverse_sqrt_2x2(double vrr, double vii, double vri);

}  // namespace dcuc::cnn
