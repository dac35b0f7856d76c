// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Slow reference implementations written directly from the definitions, with
// plain loops and std::complex. They share nothing with the library kernels
// except the Tensor container.

#include <complex>
#include <vector>

#include "dcuc/complex_nn.hpp"
#include "dcuc/conformer.hpp"
#include "dcuc/tensor.hpp"
#include "dcuc/visual.hpp"

namespace oracle {

using cd = std::complex<double>;
using dcuc::ComplexTensor;
using dcuc::Tensor;

// Periodic Hann, optionally square-rooted.
std::vector<double> hann(std::size_t n, bool sqrt_window);

// Reflect-pad by win/2, frame, window, O(N^2) DFT. Result [bin][frame].
std::vector<std::vector<cd>> stft(const std::vector<double>& x,
                                  std::size_t win, std::size_t hop,
                                  std::size_t fft,
                                  const std::vector<double>& window);

// Full inverse DFT per frame via conjugate symmetry, windowed overlap-add,
// divided by the summed squared window, padding trimmed.
std::vector<double> istft(const std::vector<std::vector<cd>>& spec,
                          std::size_t length, std::size_t win,
                          std::size_t hop, std::size_t fft,
                          const std::vector<double>& window);

// Per-tap (a + jb)(c + jd) accumulation. Weights [O, I, kh, kw]; empty bias
// tensors mean no bias.
ComplexTensor complex_conv2d(const ComplexTensor& x, const Tensor& wr,
                             const Tensor& wi, const Tensor& br,
                             const Tensor& bi, std::size_t sh, std::size_t sw,
                             std::size_t ph, std::size_t pw);

// Zero-insert the input by the stride, pad by k - 1 - pad, then run the
// forward oracle with the spatially flipped kernel.
ComplexTensor complex_conv_transpose2d(const ComplexTensor& x,
                                       const Tensor& wr, const Tensor& wi,
                                       const Tensor& br, const Tensor& bi,
                                       std::size_t sh, std::size_t sw,
                                       std::size_t ph, std::size_t pw);

// Batch statistics, explicit 2x2 eigendecomposition of the covariance.
ComplexTensor complex_batch_norm_train(const ComplexTensor& x,
                                       const dcuc::cnn::ComplexBatchNormParams& p);
// Same transform from given running statistics.
ComplexTensor complex_batch_norm_eval(const ComplexTensor& x,
                                      const dcuc::cnn::ComplexBatchNormParams& p);

Tensor prelu(const Tensor& x, const Tensor& slope);  // channel axis 1

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride,
              std::size_t pad);
// Per-channel batch norm on `axis`, batch statistics (train) or running
// ones.
Tensor batch_norm(const Tensor& x, const dcuc::nn::BatchNorm& bn,
                  std::size_t axis, bool train);
Tensor relu(const Tensor& x);
Tensor layer_norm(const Tensor& x, const dcuc::nn::LayerNorm& ln);
Tensor linear(const Tensor& x, const dcuc::nn::Linear& l);
Tensor swish(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);

Tensor ffn_half(const Tensor& x, const dcuc::conformer::FeedForwardParams& p);
Tensor mhsa(const Tensor& x, const dcuc::conformer::AttentionParams& p);
// Per-head attention weights [B, H, T, T].
Tensor attention(const Tensor& x, const dcuc::conformer::AttentionParams& p);
Tensor conv_module(const Tensor& x, const dcuc::conformer::ConvModuleParams& p,
                   bool train);
Tensor conformer_block(const Tensor& x, const dcuc::conformer::BlockParams& p,
                       bool train);

// [N, 1, H, W] -> [N, embed].
Tensor encode_frames(const Tensor& frames,
                     const dcuc::visual::FrontendParams& p, bool train);

// SI-SNR / plain SNR straight from the definitions, uncapped.
double si_snr(const std::vector<double>& est, const std::vector<double>& ref,
              bool scale_invariant);

}  // namespace oracle
