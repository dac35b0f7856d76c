// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "dcuc/complex_nn.hpp"
#include "dcuc/conformer.hpp"
#include "dcuc/stft.hpp"
#include "dcuc/visual.hpp"

namespace dcuc::model {

struct ModelConfig {
  dsp::StftConfig stft;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 64, 64};
  std::size_t kernel_freq = 5;
  std::size_t kernel_time = 2;
  std::size_t stride_freq = 2;
  std::size_t stride_time = 1;
  // conformer.model_dim is the width the fused audio-visual rows are
  // projected to before the conformer stack.
  conformer::ConformerConfig conformer;
  visual::VisualConfig visual;
  visual::UpsampleMode upsample = visual::UpsampleMode::nearest;
  // Polar tanh bound on the mask magnitude; <= 0 leaves the mask unbounded.
  double mask_bound = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t fusion_proj_dim() const { return conformer.model_dim; }
  std::size_t visual_embed_dim() const { return visual.embed_dim; }
  std::size_t freq_pad() const { return kernel_freq / 2; }
  // Freq size after each encoder block for the configured STFT.
  std::vector<std::size_t> encoder_freq_sizes() const;
  std::size_t latent_width() const;  // channels * freq of the latent

  // 2 encoder blocks, 1 conformer block, 8 time-frequency bins (fft 16 gives
  // 9 bins; callers may feed any bin count to the spectral path).
  static ModelConfig micro();
};

struct EncoderBlock {
  cnn::ComplexConvParams conv;
  cnn::ComplexBatchNormParams bn;
  ag::Var slope;
};

struct DecoderBlock {
  cnn::ComplexConvParams conv;
  bool is_final = false;  // final block has no BN / PReLU
  cnn::ComplexBatchNormParams bn;
  ag::Var slope;
};

struct Encoded {
  ag::CVar latent;
  std::vector<ag::CVar> skips;  // output of every encoder block
};

struct ForwardOptions {
  bool zero_visual = false;  // audio-only ablation
};

class Model {
 public:
  explicit Model(ModelConfig cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const dsp::Stft& stft() const { return stft_; }
  const visual::FrontendParams& frontend() const { return frontend_; }
  const std::vector<conformer::BlockParams>& conformer_blocks() const {
    return blocks_;
  }
  const std::vector<EncoderBlock>& encoder_blocks() const { return encoder_; }
  const std::vector<DecoderBlock>& decoder_blocks() const { return decoder_; }
  const nn::Linear& fusion_in() const { return fusion_in_; }
  const nn::Linear& fusion_out() const { return fusion_out_; }

  // spec [B, 1, F, T]. Frequency halves per block, time is preserved.
  Encoded encode(const ag::CVar& spec, const nn::Context& ctx) const;
  // Real part flattened per frame, concatenated with the aligned visual rows
  // [B, T, E], projected, run through the conformer stack and projected back;
  // the imaginary part passes through unchanged.
  ag::CVar fuse(const ag::CVar& latent, const ag::Var& visual,
                const nn::Context& ctx) const;
  // Mirrors the encoder with channel-concatenated skips; returns the bounded
  // mask [B, 1, freq_bins, T].
  ag::CVar decode(const ag::CVar& fused, const std::vector<ag::CVar>& skips,
                  std::size_t freq_bins, const nn::Context& ctx) const;

  // frames [B * N, 1, H, W] -> aligned embeddings [B, T, E].
  ag::Var visual_features(const ag::Var& frames, std::size_t batch,
                          std::size_t target_frames,
                          const nn::Context& ctx) const;
  ag::CVar estimate_mask(const ag::CVar& spec, const ag::Var& visual,
                         const nn::Context& ctx) const;

  // noisy [B, L], frames [B * N, 1, H, W] -> enhanced [B, L].
  ag::Var forward(const Tensor& noisy, const Tensor& frames,
                  const nn::Context& ctx, ForwardOptions opt = {}) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  dsp::Stft stft_;
  std::vector<EncoderBlock> encoder_;
  visual::FrontendParams frontend_;
  nn::Linear fusion_in_;
  std::vector<conformer::BlockParams> blocks_;
  nn::Linear fusion_out_;
  std::vector<DecoderBlock> decoder_;
};

// Polar bounding: magnitude mapped through bound * tanh(|m| / bound), phase
// kept. bound <= 0 returns the input.
ag::CVar bound_mask(const ag::CVar& raw, double bound);

// Elementwise complex product (Xr Mr - Xi Mi) + j (Xr Mi + Xi Mr).
ag::CVar apply_mask(const ag::CVar& noisy, const ag::CVar& mask);
dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy,
                            const ComplexTensor& mask);

// Sets the final decoder block to emit the constant mask re + j im. Requires
// an unbounded mask so the value passes through exactly.
void force_constant_mask(Model& m, double re, double im);

dsp::Waveform enhance(const dsp::Waveform& noisy,
                      const visual::VideoFrames& video, const Model& m,
                      ForwardOptions opt = {});

}  // namespace dcuc::model
