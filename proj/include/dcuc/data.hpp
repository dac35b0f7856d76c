// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcuc/keyvalue.hpp"
#include "dcuc/stft.hpp"
#include "dcuc/visual.hpp"

namespace dcuc::data {

struct CleanSignal {
  dsp::Waveform wave;
  std::vector<double> envelope;  // per sample, peak 1
};

// Harmonic toy "speech": 3-5 harmonics of a 100-300 Hz fundamental under a
// syllable-like envelope with silent gaps. Peak amplitude exactly 0.5.
CleanSignal synth_clean(std::uint64_t seed, double duration_s,
                        double sample_rate);

// Dark ellipse on a light background; its vertical semi-axis follows the
// envelope at each frame's midpoint. floor(duration * fps) frames.
visual::VideoFrames synth_video(const std::vector<double>& envelope,
                                double sample_rate, double fps,
                                std::size_t height, std::size_t width,
                                std::uint64_t seed);

enum class NoiseKind { white, pink, speech };
std::string to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

// Unit-variance-ish noise of the given kind; `speech` is another
// synth_clean draw.
dsp::Waveform synth_noise(NoiseKind kind, std::uint64_t seed, std::size_t n,
                          double sample_rate);

struct Mixture {
  dsp::Waveform clean;  // rescale * clean
  dsp::Waveform noise;  // rescale * gain * noise
  dsp::Waveform noisy;  // clean + noise
  double noise_gain = 0.0;
  double rescale = 1.0;  // < 1 when the sum would exceed |1|
};

// Noise gain g sets 10 log10(P_clean / P_{g noise}) = snr_db; +inf gives
// g = 0. If the mixture peak exceeds 1 everything is scaled to peak 0.99.
Mixture mix_at_snr(const dsp::Waveform& clean, const dsp::Waveform& noise,
                   double snr_db);

double power(const std::vector<double>& x);
double snr_db(const std::vector<double>& signal, const std::vector<double>& noise);

struct CorpusSpec {
  std::size_t num_scenes = 64;
  double duration_s = 2.0;
  double snr_lo_db = 0.0;
  double snr_hi_db = 10.0;
  double sample_rate = 16000.0;
  double fps = 25.0;
  std::size_t frame_height = 32;
  std::size_t frame_width = 32;
  std::uint64_t seed = 0;

  void validate() const;
  KeyValues to_kv() const;
  static CorpusSpec from_kv(const KeyValues& kv);
};

struct ToyScene {
  std::size_t index = 0;
  dsp::Waveform clean;
  dsp::Waveform noise;  // already scaled: noisy = clean + noise
  dsp::Waveform noisy;
  visual::VideoFrames video;
  double snr_db = 0.0;         // of the stored components
  double target_snr_db = 0.0;  // drawn before PCM quantization
  std::uint64_t seed = 0;
  NoiseKind noise_kind = NoiseKind::white;
  double noise_gain = 0.0;
  double rescale = 1.0;
};

// Pure function of (spec, index). Components are snapped to the 16-bit PCM
// grid so the on-disk files satisfy noisy = clean + noise exactly.
ToyScene generate_scene(const CorpusSpec& spec, std::size_t index);

// Throws InvalidInput describing the first violated invariant.
void check_scene(const ToyScene& s, double snr_tol_db = 1e-6);

enum class Split { train, val, test };
Split parse_split(const std::string& s);
std::string to_string(Split s);

struct SplitSizes {
  std::size_t train, val, test;
};
// floor(0.8 n) / floor(0.1 n) / remainder, assigned by scene index.
SplitSizes split_sizes(std::size_t n);

class Corpus {
 public:
  // Generates every scene and writes
  //   corpus.txt, scenes/<idx>/{clean,noise,noisy}.wav, video.dvid, meta.txt
  static Corpus build(const CorpusSpec& spec, const std::filesystem::path& dir);
  static Corpus open(const std::filesystem::path& dir);

  const CorpusSpec& spec() const { return spec_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::size_t size() const { return spec_.num_scenes; }
  std::vector<std::size_t> split(Split s) const;
  std::filesystem::path scene_dir(std::size_t index) const;

  ToyScene load(std::size_t index) const;
  // CRC32 over the scene's files in a fixed order.
  std::uint32_t scene_checksum(std::size_t index) const;
  std::uint32_t checksum() const;

 private:
  CorpusSpec spec_;
  std::filesystem::path dir_;
};

}  // namespace dcuc::data
