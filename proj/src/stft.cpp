// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/stft.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>

#include "dcuc/error.hpp"

namespace dcuc::dsp {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

// Reflect-padded copy: x[-k] = x[k], x[L-1+k] = x[L-1-k].
std::vector<double> reflect_pad(const double* x, std::size_t len,
                                std::size_t pad) {
  std::vector<double> out(len + 2 * pad);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const long j = static_cast<long>(i) - static_cast<long>(pad);
    long k = j;
    if (k < 0) k = -k;
    if (k >= static_cast<long>(len)) k = 2 * static_cast<long>(len) - 2 - k;
    out[i] = x[k];
  }
  return out;
}

}  // namespace

void StftConfig::validate() const {
  if (!(hop_length >= 1 && hop_length <= win_length &&
        win_length <= fft_length)) {
    throw InvalidInput("stft config needs 1 <= hop <= win <= fft");
  }
  if (!is_power_of_two(fft_length)) {
    throw InvalidInput("fft_length must be a power of two");
  }
  if (!(sample_rate > 0.0)) throw InvalidInput("sample_rate must be > 0");
}

std::size_t StftConfig::num_frames(std::size_t signal_length) const {
  return (signal_length + 2 * pad() - win_length) / hop_length + 1;
}

void Waveform::validate() const {
  if (!(sample_rate > 0.0)) throw InvalidInput("sample_rate must be > 0");
  for (double v : samples) {
    if (!std::isfinite(v)) throw InvalidInput("waveform has non-finite sample");
  }
}

void Spectrogram::validate() const {
  config.validate();
  if (data.shape().size() != 2 || data.shape()[0] != config.freq_bins() ||
      data.imag.shape() != data.real.shape()) {
    throw ShapeError("spectrogram shape " + to_string(data.shape()) +
                     " does not match " + std::to_string(config.freq_bins()) +
                     " bins");
  }
  if (!data.all_finite()) throw InvalidInput("spectrogram has non-finite bins");
}

std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.win_length);
  const double n = static_cast<double>(cfg.win_length);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    w[i] = cfg.window == WindowKind::sqrt_hann ? std::sqrt(hann) : hann;
  }
  return w;
}

Stft::Stft(StftConfig cfg) : cfg_(cfg), window_(make_window(cfg)) {
  cfg_.validate();
  const std::size_t F = cfg_.freq_bins(), W = cfg_.win_length,
                    N = cfg_.fft_length;
  analysis_cos_.resize(F * W);
  analysis_sin_.resize(F * W);
  synthesis_cos_.resize(F * W);
  synthesis_sin_.resize(F * W);
  for (std::size_t k = 0; k < F; ++k) {
    const double fold = (k == 0 || k == N / 2) ? 1.0 : 2.0;
    for (std::size_t n = 0; n < W; ++n) {
      // Reduce k*n mod N exactly before taking the angle.
      const double a = 2.0 * std::numbers::pi *
                       static_cast<double>((k * n) % N) /
                       static_cast<double>(N);
      const double c = std::cos(a), s = std::sin(a);
      analysis_cos_[k * W + n] = window_[n] * c;
      analysis_sin_[k * W + n] = -window_[n] * s;
      synthesis_cos_[k * W + n] = fold * c / static_cast<double>(N);
      synthesis_sin_[k * W + n] = -fold * s / static_cast<double>(N);
    }
  }
}

ComplexTensor Stft::analyze(const Tensor& x) const {
  if (x.rank() != 2) throw ShapeError("stft expects [batch, samples]");
  const std::size_t B = x.dim(0), L = x.dim(1);
  const std::size_t pad = cfg_.pad(), W = cfg_.win_length,
                    hop = cfg_.hop_length, F = cfg_.freq_bins();
  if (L == 0) throw InvalidInput("stft of empty signal");
  if (L <= pad) {
    throw InvalidInput("signal of " + std::to_string(L) +
                       " samples is too short for reflect padding of " +
                       std::to_string(pad));
  }
  const std::size_t T = cfg_.num_frames(L);
  ComplexTensor out(Shape{B, 1, F, T});
  std::vector<double> frames(W * T);
  CMatMap Cm(analysis_cos_.data(), F, W);
  CMatMap Sm(analysis_sin_.data(), F, W);
  for (std::size_t b = 0; b < B; ++b) {
    const auto padded = reflect_pad(x.data() + b * L, L, pad);
    for (std::size_t n = 0; n < W; ++n)
      for (std::size_t t = 0; t < T; ++t) frames[n * T + t] = padded[t * hop + n];
    CMatMap Fm(frames.data(), W, T);
    MatMap(out.real.data() + b * F * T, F, T).noalias() = Cm * Fm;
    MatMap(out.imag.data() + b * F * T, F, T).noalias() = Sm * Fm;
  }
  return out;
}

std::vector<double> Stft::compensation(std::size_t length) const {
  const std::size_t pad = cfg_.pad(), W = cfg_.win_length,
                    hop = cfg_.hop_length;
  const std::size_t T = cfg_.num_frames(length);
  std::vector<double> den(length + 2 * pad, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < W && t * hop + n < den.size(); ++n)
      den[t * hop + n] += window_[n] * window_[n];
  for (std::size_t m = pad; m < pad + length; ++m) {
    if (den[m] <= 1e-12) {
      throw SynthesisError("zero window compensation at sample " +
                           std::to_string(m - pad) +
                           "; window/hop pair is not overlap-add invertible");
    }
  }
  return den;
}

ag::Var Stft::synthesize(const ag::CVar& spec, std::size_t length) const {
  const Shape& s = spec.re.shape();
  const std::size_t F = cfg_.freq_bins();
  if (s.size() != 4 || s[1] != 1 || s[2] != F || spec.im.shape() != s) {
    throw ShapeError("istft expects [B, 1, " + std::to_string(F) +
                     ", T], got " + to_string(s));
  }
  const std::size_t B = s[0], T = s[3];
  if (T != cfg_.num_frames(length)) {
    throw ShapeError("istft: " + std::to_string(T) +
                     " frames cannot restore " + std::to_string(length) +
                     " samples");
  }
  const std::size_t pad = cfg_.pad(), W = cfg_.win_length,
                    hop = cfg_.hop_length;
  auto den = std::make_shared<std::vector<double>>(compensation(length));
  Tensor y({B, length});
  std::vector<double> frames(W * T);
  std::vector<double> ola(length + 2 * pad);
  CMatMap Cs(synthesis_cos_.data(), F, W);
  CMatMap Ss(synthesis_sin_.data(), F, W);
  for (std::size_t b = 0; b < B; ++b) {
    MatMap Fm(frames.data(), W, T);
    Fm.noalias() = Cs.transpose() * CMatMap(spec.re.value().data() + b * F * T, F, T);
    Fm.noalias() += Ss.transpose() * CMatMap(spec.im.value().data() + b * F * T, F, T);
    std::fill(ola.begin(), ola.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < W; ++n)
        ola[t * hop + n] += window_[n] * frames[n * T + t];
    for (std::size_t m = 0; m < length; ++m) {
      y[b * length + m] = ola[m + pad] / (*den)[m + pad];
    }
  }
  // The backward pass applies the adjoint of the linear map above.
  auto self = std::make_shared<Stft>(*this);
  return ag::make_op(std::move(y), {spec.re, spec.im},
                     [self, den, B, F, T, W, hop, pad, length](ag::Node& n) {
    std::vector<double> g(W * T);
    std::vector<double> padded(length + 2 * pad, 0.0);
    CMatMap Cs(self->synthesis_cos_.data(), F, W);
    CMatMap Ss(self->synthesis_sin_.data(), F, W);
    for (std::size_t b = 0; b < B; ++b) {
      std::fill(padded.begin(), padded.end(), 0.0);
      for (std::size_t m = 0; m < length; ++m) {
        padded[m + pad] = n.grad[b * length + m] / (*den)[m + pad];
      }
      for (std::size_t nn = 0; nn < W; ++nn)
        for (std::size_t t = 0; t < T; ++t)
          g[nn * T + t] = self->window_[nn] * padded[t * hop + nn];
      CMatMap G(g.data(), W, T);
      if (n.parent_needs_grad(0)) {
        MatMap(n.parents[0]->grad_buffer().data() + b * F * T, F, T)
            .noalias() += Cs * G;
      }
      if (n.parent_needs_grad(1)) {
        MatMap(n.parents[1]->grad_buffer().data() + b * F * T, F, T)
            .noalias() += Ss * G;
      }
    }
  });
}

Spectrogram conv_stft(const Waveform& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.samples.empty()) throw InvalidInput("conv_stft: empty waveform");
  if (x.sample_rate != cfg.sample_rate) {
    throw ConfigMismatch("waveform sample rate " +
                         std::to_string(x.sample_rate) +
                         " does not match stft config " +
                         std::to_string(cfg.sample_rate));
  }
  x.validate();
  Stft stft(cfg);
  ComplexTensor batch =
      stft.analyze(Tensor({1, x.size()}, x.samples));
  const std::size_t F = cfg.freq_bins();
  const std::size_t T = batch.shape()[3];
  Spectrogram s;
  s.data = ComplexTensor(batch.real.reshaped({F, T}),
                         batch.imag.reshaped({F, T}));
  s.config = cfg;
  s.signal_length = x.size();
  return s;
}

Waveform conv_istft(const Spectrogram& s) {
  s.validate();
  Stft stft(s.config);
  const std::size_t F = s.config.freq_bins(), T = s.frames();
  ag::NoGradGuard guard;
  ag::CVar spec{ag::constant(s.data.real.reshaped({1, 1, F, T})),
                ag::constant(s.data.imag.reshaped({1, 1, F, T}))};
  ag::Var y = stft.synthesize(spec, s.signal_length);
  Waveform w;
  w.samples = y.value().storage();
  w.sample_rate = s.config.sample_rate;
  return w;
}

}  // namespace dcuc::dsp
