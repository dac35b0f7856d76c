// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "dcuc/autograd.hpp"
#include "dcuc/tensor.hpp"

namespace dcuc::dsp {

enum class WindowKind { hann, sqrt_hann };

struct StftConfig {
  std::size_t win_length = 400;
  std::size_t hop_length = 160;
  std::size_t fft_length = 512;
  WindowKind window = WindowKind::sqrt_hann;
  double sample_rate = 16000.0;

  void validate() const;
  std::size_t freq_bins() const { return fft_length / 2 + 1; }
  // Reflect padding applied at both ends before framing.
  std::size_t pad() const { return win_length / 2; }
  std::size_t num_frames(std::size_t signal_length) const;
  double frames_per_second() const {
    return sample_rate / static_cast<double>(hop_length);
  }
  bool operator==(const StftConfig&) const = default;
};

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  void validate() const;
  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// One-sided spectrum, data shape [freq_bins, frames].
struct Spectrogram {
  ComplexTensor data;
  StftConfig config;
  std::size_t signal_length = 0;  // analysed length, restored by synthesis

  void validate() const;
  std::size_t frames() const { return data.shape().at(1); }
};

std::vector<double> make_window(const StftConfig& cfg);

// Framed windowed DFT realized as a product with DFT-basis kernels (one
// strided "convolution" per basis row).
class Stft {
 public:
  explicit Stft(StftConfig cfg);

  const StftConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }

  // x [B, L] -> (re, im) each [B, 1, F, T]
  ComplexTensor analyze(const Tensor& x) const;
  // spec parts [B, 1, F, T] -> [B, length]; differentiable.
  ag::Var synthesize(const ag::CVar& spec, std::size_t length) const;

  // Sum over frames of the squared synthesis window at each padded position;
  // throws SynthesisError when any position inside the trimmed output has
  // zero weight.
  std::vector<double> compensation(std::size_t length) const;

 private:
  StftConfig cfg_;
  std::vector<double> window_;
  std::vector<double> analysis_cos_;   // [F, win], window folded in
  std::vector<double> analysis_sin_;   // [F, win]
  std::vector<double> synthesis_cos_;  // [F, win], 1/N and the one-sided fold
  std::vector<double> synthesis_sin_;
};

Spectrogram conv_stft(const Waveform& x, const StftConfig& cfg);
Waveform conv_istft(const Spectrogram& s);

}  // namespace dcuc::dsp
