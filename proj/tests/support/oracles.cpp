// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

namespace {

const double kPi = std::numbers::pi;

double val(const dcuc::ag::Var& v, std::size_t i) {
  return v.defined() ? v.value()[i] : 0.0;
}

// Flat index helper for row-major 4-D tensors.
struct Idx4 {
  std::size_t a, b, c, d;
  std::size_t operator()(std::size_t i, std::size_t j, std::size_t k,
                         std::size_t l) const {
    return ((i * b + j) * c + k) * d + l;
  }
};

}  // namespace

std::vector<double> hann(std::size_t n, bool sqrt_window) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(kPi * static_cast<double>(i) / static_cast<double>(n));
    w[i] = sqrt_window ? std::abs(s) : s * s;
  }
  return w;
}

std::vector<std::vector<cd>> stft(const std::vector<double>& x,
                                  std::size_t win, std::size_t hop,
                                  std::size_t fft,
                                  const std::vector<double>& window) {
  const long pad = static_cast<long>(win / 2);
  const long L = static_cast<long>(x.size());
  auto at = [&](long i) {
    // reflect without repeating the edge sample
    if (i < 0) i = -i;
    if (i >= L) i = 2 * (L - 1) - i;
    return x[static_cast<std::size_t>(i)];
  };
  const std::size_t T = (x.size() + 2 * win / 2 - win) / hop + 1;
  const std::size_t F = fft / 2 + 1;
  std::vector<std::vector<cd>> out(F, std::vector<cd>(T));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < F; ++k) {
      cd acc = 0.0;
      for (std::size_t n = 0; n < win; ++n) {
        const double s = at(static_cast<long>(t * hop + n) - pad) * window[n];
        acc += s * std::polar(1.0, -2.0 * kPi * static_cast<double>(k) *
                                       static_cast<double>(n) /
                                       static_cast<double>(fft));
      }
      out[k][t] = acc;
    }
  }
  return out;
}

std::vector<double> istft(const std::vector<std::vector<cd>>& spec,
                          std::size_t length, std::size_t win,
                          std::size_t hop, std::size_t fft,
                          const std::vector<double>& window) {
  const std::size_t T = spec.at(0).size(), pad = win / 2;
  std::vector<double> ola(length + 2 * pad + win, 0.0), den(ola.size(), 0.0);
  std::vector<cd> full(fft);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < fft; ++k) {
      full[k] = k <= fft / 2 ? spec[k][t] : std::conj(spec[fft - k][t]);
    }
    for (std::size_t n = 0; n < win; ++n) {
      cd acc = 0.0;
      for (std::size_t k = 0; k < fft; ++k) {
        acc += full[k] * std::polar(1.0, 2.0 * kPi * static_cast<double>(k) *
                                             static_cast<double>(n) /
                                             static_cast<double>(fft));
      }
      const double frame = acc.real() / static_cast<double>(fft);
      ola[t * hop + n] += window[n] * frame;
      den[t * hop + n] += window[n] * window[n];
    }
  }
  std::vector<double> y(length);
  for (std::size_t m = 0; m < length; ++m) y[m] = ola[m + pad] / den[m + pad];
  return y;
}

ComplexTensor complex_conv2d(const ComplexTensor& x, const Tensor& wr,
                             const Tensor& wi, const Tensor& br,
                             const Tensor& bi, std::size_t sh, std::size_t sw,
                             std::size_t ph, std::size_t pw) {
  const auto& xs = x.shape();
  const std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t O = wr.dim(0), KH = wr.dim(2), KW = wr.dim(3);
  if (wr.dim(1) != C) throw std::invalid_argument("oracle: channel mismatch");
  const std::size_t Ho = (H + 2 * ph - KH) / sh + 1;
  const std::size_t Wo = (W + 2 * pw - KW) / sw + 1;
  ComplexTensor y(dcuc::Shape{B, O, Ho, Wo});
  const Idx4 xi{B, C, H, W}, wi4{O, C, KH, KW}, yi{B, O, Ho, Wo};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t r = 0; r < Ho; ++r)
        for (std::size_t c = 0; c < Wo; ++c) {
          cd acc(br.empty() ? 0.0 : br[o], bi.empty() ? 0.0 : bi[o]);
          for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long rr = static_cast<long>(r * sh + i) - static_cast<long>(ph);
                const long cc = static_cast<long>(c * sw + j) - static_cast<long>(pw);
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) ||
                    cc >= static_cast<long>(W))
                  continue;
                const std::size_t xk = xi(b, ch, static_cast<std::size_t>(rr),
                                          static_cast<std::size_t>(cc));
                const std::size_t wk = wi4(o, ch, i, j);
                acc += cd(wr[wk], wi[wk]) * cd(x.real[xk], x.imag[xk]);
              }
          y.real[yi(b, o, r, c)] = acc.real();
          y.imag[yi(b, o, r, c)] = acc.imag();
        }
  return y;
}

ComplexTensor complex_conv_transpose2d(const ComplexTensor& x,
                                       const Tensor& wr, const Tensor& wi,
                                       const Tensor& br, const Tensor& bi,
                                       std::size_t sh, std::size_t sw,
                                       std::size_t ph, std::size_t pw) {
  const auto& xs = x.shape();
  const std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t O = wr.dim(0), KH = wr.dim(2), KW = wr.dim(3);
  if (ph > KH - 1 || pw > KW - 1) {
    throw std::invalid_argument("oracle: padding beyond kernel - 1");
  }
  // Zero-stuffed and padded input.
  const std::size_t eh = KH - 1 - ph, ew = KW - 1 - pw;
  const std::size_t Hs = (H - 1) * sh + 1 + 2 * eh;
  const std::size_t Ws = (W - 1) * sw + 1 + 2 * ew;
  ComplexTensor z(dcuc::Shape{B, C, Hs, Ws});
  const Idx4 xi{B, C, H, W}, zi{B, C, Hs, Ws};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t q = 0; q < W; ++q) {
          const std::size_t dst = zi(b, c, eh + r * sh, ew + q * sw);
          z.real[dst] = x.real[xi(b, c, r, q)];
          z.imag[dst] = x.imag[xi(b, c, r, q)];
        }
  // Flip spatially; weight layout already maps C inputs to O outputs.
  Tensor fr({O, C, KH, KW}), fi({O, C, KH, KW});
  const Idx4 wi4{O, C, KH, KW};
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < KH; ++i)
        for (std::size_t j = 0; j < KW; ++j) {
          fr[wi4(o, c, i, j)] = wr[wi4(o, c, KH - 1 - i, KW - 1 - j)];
          fi[wi4(o, c, i, j)] = wi[wi4(o, c, KH - 1 - i, KW - 1 - j)];
        }
  return complex_conv2d(z, fr, fi, br, bi, 1, 1, 0, 0);
}

namespace {

struct Stats {
  double mr, mi, vrr, vii, vri;
};

// V^{-1/2} = sum over eigenpairs of lambda^{-1/2} u u^T.
void inverse_sqrt_eig(double a, double d, double b, double out[2][2]) {
  const double mid = 0.5 * (a + d);
  const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  const double lam[2] = {mid + rad, mid - rad};
  double u[2][2];
  if (std::abs(b) < 1e-300) {
    const bool first_is_a = a >= d;
    u[0][0] = first_is_a ? 1.0 : 0.0;
    u[0][1] = first_is_a ? 0.0 : 1.0;
    u[1][0] = -u[0][1];
    u[1][1] = u[0][0];
  } else {
    for (int e = 0; e < 2; ++e) {
      double vx = lam[e] - d, vy = b;
      const double n = std::hypot(vx, vy);
      u[e][0] = vx / n;
      u[e][1] = vy / n;
    }
  }
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      out[r][c] = 0.0;
      for (int e = 0; e < 2; ++e) out[r][c] += u[e][r] * u[e][c] / std::sqrt(lam[e]);
    }
}

ComplexTensor whiten(const ComplexTensor& x,
                     const dcuc::cnn::ComplexBatchNormParams& p,
                     const std::vector<Stats>& st) {
  const auto& s = x.shape();
  const std::size_t B = s[0], C = s[1];
  std::size_t inner = 1;
  for (std::size_t k = 2; k < s.size(); ++k) inner *= s[k];
  ComplexTensor y(s);
  for (std::size_t c = 0; c < C; ++c) {
    double w[2][2];
    inverse_sqrt_eig(st[c].vrr + p.eps, st[c].vii + p.eps, st[c].vri, w);
    const double grr = val(p.gamma_rr, c), gii = val(p.gamma_ii, c),
                 gri = val(p.gamma_ri, c);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t i = (b * C + c) * inner + k;
        const double cr = x.real[i] - st[c].mr, ci = x.imag[i] - st[c].mi;
        const double zr = w[0][0] * cr + w[0][1] * ci;
        const double zi = w[1][0] * cr + w[1][1] * ci;
        y.real[i] = grr * zr + gri * zi + val(p.beta_r, c);
        y.imag[i] = gri * zr + gii * zi + val(p.beta_i, c);
      }
  }
  return y;
}

}  // namespace

ComplexTensor complex_batch_norm_train(const ComplexTensor& x,
                                       const dcuc::cnn::ComplexBatchNormParams& p) {
  const auto& s = x.shape();
  const std::size_t B = s[0], C = s[1];
  std::size_t inner = 1;
  for (std::size_t k = 2; k < s.size(); ++k) inner *= s[k];
  const double n = static_cast<double>(B * inner);
  std::vector<Stats> st(C);
  for (std::size_t c = 0; c < C; ++c) {
    Stats& q = st[c];
    q = {};
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t i = (b * C + c) * inner + k;
        q.mr += x.real[i] / n;
        q.mi += x.imag[i] / n;
      }
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t i = (b * C + c) * inner + k;
        const double dr = x.real[i] - q.mr, di = x.imag[i] - q.mi;
        q.vrr += dr * dr / n;
        q.vii += di * di / n;
        q.vri += dr * di / n;
      }
  }
  return whiten(x, p, st);
}

ComplexTensor complex_batch_norm_eval(const ComplexTensor& x,
                                      const dcuc::cnn::ComplexBatchNormParams& p) {
  std::vector<Stats> st(x.shape()[1]);
  for (std::size_t c = 0; c < st.size(); ++c) {
    st[c] = {val(p.mean_r, c), val(p.mean_i, c), val(p.var_rr, c),
             val(p.var_ii, c), val(p.var_ri, c)};
  }
  return whiten(x, p, st);
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  const std::size_t C = x.dim(1);
  std::size_t inner = 1;
  for (std::size_t k = 2; k < x.rank(); ++k) inner *= x.dim(k);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / inner) % C;
    y[i] = x[i] >= 0.0 ? x[i] : slope[c] * x[i];
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride,
              std::size_t pad) {
  ComplexTensor cx(x, Tensor(x.shape()));
  Tensor zero(w.shape()), none;
  return complex_conv2d(cx, w, zero, none, none, stride, stride, pad, pad).real;
}

Tensor batch_norm(const Tensor& x, const dcuc::nn::BatchNorm& bn,
                  std::size_t axis, bool train) {
  const std::size_t C = x.dim(axis);
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < x.rank(); ++k) inner *= x.dim(k);
  std::vector<double> mean(C, 0.0), var(C, 0.0), count(C, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / inner) % C;
    mean[c] += x[i];
    count[c] += 1.0;
  }
  for (std::size_t c = 0; c < C; ++c) mean[c] /= count[c];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / inner) % C;
    var[c] += (x[i] - mean[c]) * (x[i] - mean[c]) / count[c];
  }
  if (!train) {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = bn.running_mean.value()[c];
      var[c] = bn.running_var.value()[c];
    }
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / inner) % C;
    y[i] = (x[i] - mean[c]) / std::sqrt(var[c] + bn.eps) * bn.gamma.value()[c] +
           bn.beta.value()[c];
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor layer_norm(const Tensor& x, const dcuc::nn::LayerNorm& ln) {
  const std::size_t D = x.shape().back(), rows = x.size() / D;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t d = 0; d < D; ++d) m += x[r * D + d];
    m /= static_cast<double>(D);
    for (std::size_t d = 0; d < D; ++d) v += (x[r * D + d] - m) * (x[r * D + d] - m);
    v /= static_cast<double>(D);
    for (std::size_t d = 0; d < D; ++d) {
      y[r * D + d] = (x[r * D + d] - m) / std::sqrt(v + ln.eps) * ln.gamma.value()[d] +
                     ln.beta.value()[d];
    }
  }
  return y;
}

Tensor linear(const Tensor& x, const dcuc::nn::Linear& l) {
  const Tensor& w = l.weight.value();
  const std::size_t O = w.dim(0), I = w.dim(1), rows = x.size() / I;
  dcuc::Shape s = x.shape();
  s.back() = O;
  Tensor y(s);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < O; ++o) {
      double acc = l.bias.defined() ? l.bias.value()[o] : 0.0;
      for (std::size_t i = 0; i < I; ++i) acc += w[o * I + i] * x[r * I + i];
      y[r * O + o] = acc;
    }
  return y;
}

Tensor swish(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

Tensor ffn_half(const Tensor& x, const dcuc::conformer::FeedForwardParams& p) {
  const Tensor h = linear(swish(linear(layer_norm(x, p.norm), p.up)), p.down);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + 0.5 * h[i];
  return y;
}

Tensor attention(const Tensor& x, const dcuc::conformer::AttentionParams& p) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2), H = p.num_heads,
                    dh = D / H;
  const Tensor n = layer_norm(x, p.norm);
  const Tensor q = linear(n, p.query), k = linear(n, p.key);
  Tensor a({B, H, T, T});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < T; ++i) {
        std::vector<double> s(T);
        double mx = -1e300;
        for (std::size_t j = 0; j < T; ++j) {
          double dot = 0.0;
          for (std::size_t e = 0; e < dh; ++e) {
            dot += q[(b * T + i) * D + h * dh + e] * k[(b * T + j) * D + h * dh + e];
          }
          s[j] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (double& v : s) z += (v = std::exp(v - mx));
        for (std::size_t j = 0; j < T; ++j) a[((b * H + h) * T + i) * T + j] = s[j] / z;
      }
  return a;
}

Tensor mhsa(const Tensor& x, const dcuc::conformer::AttentionParams& p) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2), H = p.num_heads,
                    dh = D / H;
  const Tensor a = attention(x, p);
  const Tensor v = linear(layer_norm(x, p.norm), p.value);
  Tensor merged(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t e = 0; e < dh; ++e) {
          double acc = 0.0;
          for (std::size_t j = 0; j < T; ++j) {
            acc += a[((b * H + h) * T + i) * T + j] * v[(b * T + j) * D + h * dh + e];
          }
          merged[(b * T + i) * D + h * dh + e] = acc;
        }
  return add(x, linear(merged, p.out));
}

Tensor conv_module(const Tensor& x, const dcuc::conformer::ConvModuleParams& p,
                   bool train) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  const Tensor u = linear(layer_norm(x, p.norm), p.pointwise_in);
  Tensor g({B, T, D});
  for (std::size_t r = 0; r < B * T; ++r)
    for (std::size_t d = 0; d < D; ++d) {
      g[r * D + d] = u[r * 2 * D + d] / (1.0 + std::exp(-u[r * 2 * D + D + d]));
    }
  const Tensor& w = p.depthwise_weight.value();
  const std::size_t K = w.dim(1);
  Tensor c({B, T, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < D; ++d) {
        double acc = p.depthwise_bias.defined() ? p.depthwise_bias.value()[d] : 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const long s = static_cast<long>(t + k) - static_cast<long>(K / 2);
          if (s >= 0 && s < static_cast<long>(T)) {
            acc += w[d * K + k] * g[(b * T + static_cast<std::size_t>(s)) * D + d];
          }
        }
        c[(b * T + t) * D + d] = acc;
      }
  return add(x, linear(swish(batch_norm(c, p.norm_time, 2, train)), p.pointwise_out));
}

Tensor conformer_block(const Tensor& x, const dcuc::conformer::BlockParams& p,
                       bool train) {
  Tensor h = ffn_half(x, p.ffn1);
  h = mhsa(h, p.mhsa);
  h = conv_module(h, p.conv, train);
  h = ffn_half(h, p.ffn2);
  return layer_norm(h, p.final_norm);
}

namespace {

Tensor conv_bn(const Tensor& x, const dcuc::visual::ConvBn& c, bool train) {
  return batch_norm(conv2d(x, c.weight.value(), c.stride, 1), c.bn, 1, train);
}

}  // namespace

Tensor encode_frames(const Tensor& frames,
                     const dcuc::visual::FrontendParams& p, bool train) {
  Tensor h = relu(conv_bn(frames, p.stem, train));
  for (const auto& st : p.stages) {
    if (st.has_transition) h = relu(conv_bn(h, st.transition, train));
    Tensor r = relu(conv_bn(h, st.block.first, train));
    r = conv_bn(r, st.block.second, train);
    h = relu(add(h, r));
  }
  const std::size_t N = h.dim(0), C = h.dim(1), HW = h.dim(2) * h.dim(3);
  Tensor pooled({N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < HW; ++k) s += h[(n * C + c) * HW + k];
      pooled[n * C + c] = s / static_cast<double>(HW);
    }
  return linear(pooled, p.head);
}

double si_snr(const std::vector<double>& est, const std::vector<double>& ref,
              bool scale_invariant) {
  const std::size_t n = est.size();
  std::vector<double> e = est, s = ref;
  if (scale_invariant) {
    double me = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      me += e[i];
      ms += s[i];
    }
    me /= static_cast<double>(n);
    ms /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      e[i] -= me;
      s[i] -= ms;
    }
    double dot = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += e[i] * s[i];
      ss += s[i] * s[i];
    }
    double pt = 0.0, pe = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double st = dot / ss * s[i];
      pt += st * st;
      pe += (e[i] - st) * (e[i] - st);
    }
    return 10.0 * std::log10(pt / pe);
  }
  double pt = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pt += s[i] * s[i];
    pe += (e[i] - s[i]) * (e[i] - s[i]);
  }
  return 10.0 * std::log10(pt / pe);
}

}  // namespace oracle
