// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/complex_nn.hpp"

#include <cmath>

#include "dcuc/error.hpp"

namespace dcuc::cnn {

namespace {

ag::Conv2dGeometry geometry(const ComplexConvParams& p) {
  return {p.stride_freq, p.stride_time, p.pad_freq, p.pad_time};
}

void check_input(const ag::CVar& x, const ComplexConvParams& p) {
  p.validate();
  if (x.re.shape() != x.im.shape()) {
    throw ShapeError("complex input parts differ in shape");
  }
  if (x.shape().size() != 4 || x.shape()[1] != p.in_channels()) {
    throw ShapeError("complex conv: input " + to_string(x.shape()) +
                     " for " + std::to_string(p.in_channels()) +
                     " input channels");
  }
}

// Per-channel scalar algebra on [C] vectors.
struct ChannelWhitening {
  ag::Var rr, ii, ri;
};

ChannelWhitening whitening_vars(const ag::Var& vrr, const ag::Var& vii,
                                const ag::Var& vri) {
  // s = sqrt(det V), t = sqrt(tr V + 2 s), V^{-1/2} = (V + s I) / (s t)
  ag::Var s = ag::sqrt(ag::sub(ag::mul(vrr, vii), ag::square(vri)));
  ag::Var t = ag::sqrt(ag::add(ag::add(vrr, vii), ag::scale(s, 2.0)));
  ag::Var inv = ag::reciprocal(ag::mul(s, t));
  return {ag::mul(ag::add(vii, s), inv), ag::mul(ag::add(vrr, s), inv),
          ag::scale(ag::mul(vri, inv), -1.0)};
}

ag::Var mix(const ag::Var& a, const ag::Var& wa, const ag::Var& b,
            const ag::Var& wb) {
  return ag::add(ag::bcast_mul(a, wa, 1), ag::bcast_mul(b, wb, 1));
}

}  // namespace

void ComplexConvParams::validate() const {
  if (!w_real.defined() || !w_imag.defined() ||
      w_real.shape() != w_imag.shape() || w_real.shape().size() != 4) {
    throw ShapeError("complex conv kernels must share a rank-4 shape");
  }
  if (stride_freq < 1 || stride_time < 1) {
    throw ShapeError("complex conv stride components must be >= 1");
  }
  if (bias_real.defined() != bias_imag.defined()) {
    throw ShapeError("complex conv bias needs both parts");
  }
}

ag::CVar complex_conv2d(const ag::CVar& x, const ComplexConvParams& p) {
  check_input(x, p);
  const auto g = geometry(p);
  ag::Var none;
  ag::Var rr = ag::conv2d(x.re, p.w_real, p.bias_real, g);
  ag::Var ii = ag::conv2d(x.im, p.w_imag, none, g);
  ag::Var ri = ag::conv2d(x.re, p.w_imag, p.bias_imag, g);
  ag::Var ir = ag::conv2d(x.im, p.w_real, none, g);
  return {ag::sub(rr, ii), ag::add(ri, ir)};
}

ag::CVar complex_conv_transpose2d(const ag::CVar& x,
                                  const ComplexConvParams& p) {
  check_input(x, p);
  const auto g = geometry(p);
  ag::Var none;
  ag::Var rr = ag::conv_transpose2d(x.re, p.w_real, p.bias_real, g);
  ag::Var ii = ag::conv_transpose2d(x.im, p.w_imag, none, g);
  ag::Var ri = ag::conv_transpose2d(x.re, p.w_imag, p.bias_imag, g);
  ag::Var ir = ag::conv_transpose2d(x.im, p.w_real, none, g);
  return {ag::sub(rr, ii), ag::add(ri, ir)};
}

Whitening inverse_sqrt_2x2(double vrr, double vii, double vri) {
  const double s = std::sqrt(vrr * vii - vri * vri);
  const double t = std::sqrt(vrr + vii + 2.0 * s);
  const double inv = 1.0 / (s * t);
  return {(vii + s) * inv, (vrr + s) * inv, -vri * inv};
}

ag::CVar complex_batch_norm(const ag::CVar& x,
                            const ComplexBatchNormParams& p, nn::Mode mode) {
  if (x.shape().size() < 2) throw ShapeError("complex batch norm: rank < 2");
  const std::size_t channels = x.shape()[1];
  if (p.gamma_rr.shape() != Shape{channels}) {
    throw ShapeError("complex batch norm: parameters for " +
                     to_string(p.gamma_rr.shape()) + " channels, input " +
                     to_string(x.shape()));
  }
  if (p.eps <= 0.0) throw InvalidInput("complex batch norm: eps must be > 0");
  const double count =
      static_cast<double>(x.re.value().size() / channels);

  ag::Var cr, ci;
  ChannelWhitening w;
  if (mode == nn::Mode::train) {
    if (count < 2) {
      throw InvalidInput(
          "complex batch norm: train mode needs batch*freq*time >= 2");
    }
    const double inv_n = 1.0 / count;
    ag::Var mr = ag::scale(ag::sum_to_axis(x.re, 1), inv_n);
    ag::Var mi = ag::scale(ag::sum_to_axis(x.im, 1), inv_n);
    cr = ag::bcast_add(x.re, ag::scale(mr, -1.0), 1);
    ci = ag::bcast_add(x.im, ag::scale(mi, -1.0), 1);
    ag::Var vrr = ag::scale(ag::sum_to_axis(ag::square(cr), 1), inv_n);
    ag::Var vii = ag::scale(ag::sum_to_axis(ag::square(ci), 1), inv_n);
    ag::Var vri = ag::scale(ag::sum_to_axis(ag::mul(cr, ci), 1), inv_n);
    w = whitening_vars(ag::add_scalar(vrr, p.eps), ag::add_scalar(vii, p.eps),
                       vri);

    const double m = p.momentum;
    auto update = [m](ag::Var buf, const ag::Var& batch) {
      Tensor& b = buf.value();
      for (std::size_t c = 0; c < b.size(); ++c) {
        b[c] = (1.0 - m) * b[c] + m * batch.value()[c];
      }
    };
    update(p.mean_r, mr);
    update(p.mean_i, mi);
    update(p.var_rr, vrr);
    update(p.var_ii, vii);
    update(p.var_ri, vri);
  } else {
    Tensor nmr({channels}), nmi({channels});
    Tensor wrr({channels}), wii({channels}), wri({channels});
    for (std::size_t c = 0; c < channels; ++c) {
      nmr[c] = -p.mean_r.value()[c];
      nmi[c] = -p.mean_i.value()[c];
      const Whitening wc =
          inverse_sqrt_2x2(p.var_rr.value()[c] + p.eps,
                           p.var_ii.value()[c] + p.eps, p.var_ri.value()[c]);
      wrr[c] = wc.rr;
      wii[c] = wc.ii;
      wri[c] = wc.ri;
    }
    cr = ag::bcast_add(x.re, ag::constant(std::move(nmr)), 1);
    ci = ag::bcast_add(x.im, ag::constant(std::move(nmi)), 1);
    w = {ag::constant(std::move(wrr)), ag::constant(std::move(wii)),
         ag::constant(std::move(wri))};
  }

  ag::Var xr = mix(cr, w.rr, ci, w.ri);
  ag::Var xi = mix(cr, w.ri, ci, w.ii);
  ag::Var yr = ag::bcast_add(mix(xr, p.gamma_rr, xi, p.gamma_ri), p.beta_r, 1);
  ag::Var yi = ag::bcast_add(mix(xr, p.gamma_ri, xi, p.gamma_ii), p.beta_i, 1);
  return {yr, yi};
}

ag::CVar prelu(const ag::CVar& x, const ag::Var& slope) {
  return {ag::prelu(x.re, slope, 1), ag::prelu(x.im, slope, 1)};
}

ComplexConvParams make_complex_conv(nn::ParamStore& store,
                                    const std::string& prefix,
                                    std::size_t in_ch, std::size_t out_ch,
                                    std::size_t kh, std::size_t kw, Rng& rng,
                                    bool bias) {
  const std::size_t fan_in = in_ch * kh * kw;
  ComplexConvParams p;
  p.w_real = store.add(prefix + ".w_real",
                       nn::uniform_init({out_ch, in_ch, kh, kw}, fan_in, rng));
  p.w_imag = store.add(prefix + ".w_imag",
                       nn::uniform_init({out_ch, in_ch, kh, kw}, fan_in, rng));
  if (bias) {
    p.bias_real = store.add(prefix + ".bias_real", Tensor({out_ch}));
    p.bias_imag = store.add(prefix + ".bias_imag", Tensor({out_ch}));
  }
  return p;
}

ComplexBatchNormParams make_complex_batch_norm(nn::ParamStore& store,
                                               const std::string& prefix,
                                               std::size_t channels) {
  const double g0 = 1.0 / std::sqrt(2.0);
  ComplexBatchNormParams p;
  p.gamma_rr = store.add(prefix + ".gamma_rr", Tensor({channels}, g0));
  p.gamma_ii = store.add(prefix + ".gamma_ii", Tensor({channels}, g0));
  p.gamma_ri = store.add(prefix + ".gamma_ri", Tensor({channels}, 0.0));
  p.beta_r = store.add(prefix + ".beta_r", Tensor({channels}, 0.0));
  p.beta_i = store.add(prefix + ".beta_i", Tensor({channels}, 0.0));
  p.mean_r = store.add(prefix + ".running_mean_r", Tensor({channels}), false);
  p.mean_i = store.add(prefix + ".running_mean_i", Tensor({channels}), false);
  p.var_rr =
      store.add(prefix + ".running_var_rr", Tensor({channels}, 1.0), false);
  p.var_ii =
      store.add(prefix + ".running_var_ii", Tensor({channels}, 1.0), false);
  p.var_ri = store.add(prefix + ".running_var_ri", Tensor({channels}), false);
  return p;
}

ag::Var make_prelu_slope(nn::ParamStore& store, const std::string& prefix,
                         std::size_t channels) {
  return store.add(prefix + ".slope", Tensor({channels}, 0.25));
}

}  // namespace dcuc::cnn
