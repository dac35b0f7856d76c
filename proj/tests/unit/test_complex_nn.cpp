// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/helpers.hpp"
#include "../support/oracles.hpp"
#include "dcuc/complex_nn.hpp"
#include "dcuc/error.hpp"

using namespace dcuc;
using testing::random_complex;
using testing::random_tensor;
using testing::rel_err;

namespace {

ag::CVar cvar(const ComplexTensor& x) {
  return {ag::constant(x.real), ag::constant(x.imag)};
}

ComplexTensor value(const ag::CVar& v) { return {v.re.value(), v.im.value()}; }

cnn::ComplexConvParams conv_params(std::size_t in, std::size_t out, std::size_t kh,
                                   std::size_t kw, Rng& rng, bool bias) {
  cnn::ComplexConvParams p;
  p.w_real = ag::parameter(random_tensor({out, in, kh, kw}, rng));
  p.w_imag = ag::parameter(random_tensor({out, in, kh, kw}, rng));
  if (bias) {
    p.bias_real = ag::parameter(random_tensor({out}, rng));
    p.bias_imag = ag::parameter(random_tensor({out}, rng));
  }
  return p;
}

ComplexTensor conv_oracle(const ComplexTensor& x, const cnn::ComplexConvParams& p,
                          bool transpose) {
  const Tensor none;
  const Tensor& br = p.bias_real.defined() ? p.bias_real.value() : none;
  const Tensor& bi = p.bias_imag.defined() ? p.bias_imag.value() : none;
  return transpose
             ? oracle::complex_conv_transpose2d(x, p.w_real.value(), p.w_imag.value(), br, bi,
                                                p.stride_freq, p.stride_time, p.pad_freq,
                                                p.pad_time)
             : oracle::complex_conv2d(x, p.w_real.value(), p.w_imag.value(), br, bi,
                                      p.stride_freq, p.stride_time, p.pad_freq, p.pad_time);
}

cnn::ComplexConvParams scalar_kernel(double re, double im) {
  cnn::ComplexConvParams p;
  p.w_real = ag::parameter(Tensor({1, 1, 1, 1}, re));
  p.w_imag = ag::parameter(Tensor({1, 1, 1, 1}, im));
  return p;
}

}  // namespace

TEST_CASE("1x1 kernel 1+0j is the identity") {
  Rng rng(1);
  const auto x = random_complex({2, 1, 5, 7}, rng);
  const auto p = scalar_kernel(1.0, 0.0);
  const auto y = value(cnn::complex_conv2d(cvar(x), p));
  CHECK(max_abs_diff(y.real, x.real) == 0.0);
  CHECK(max_abs_diff(y.imag, x.imag) == 0.0);
  const auto t = value(cnn::complex_conv_transpose2d(cvar(x), p));
  CHECK(max_abs_diff(t.real, x.real) == 0.0);
  CHECK(max_abs_diff(t.imag, x.imag) == 0.0);
}

TEST_CASE("1x1 kernel j maps (a, b) to (-b, a)") {
  Rng rng(2);
  const auto x = random_complex({1, 1, 3, 4}, rng);
  const auto y = value(cnn::complex_conv2d(cvar(x), scalar_kernel(0.0, 1.0)));
  for (std::size_t i = 0; i < x.real.size(); ++i) {
    CHECK(y.real[i] == -x.imag[i]);
    CHECK(y.imag[i] == x.real[i]);
  }
}

TEST_CASE("unit phasor kernels rotate every output by theta") {
  Rng rng(3);
  const auto x = random_complex({1, 1, 6, 6}, rng);
  for (double th : {0.0, std::numbers::pi / 2, std::numbers::pi, 1.234}) {
    const auto y = value(cnn::complex_conv2d(cvar(x), scalar_kernel(std::cos(th), std::sin(th))));
    double err = 0.0;
    for (std::size_t i = 0; i < x.real.size(); ++i) {
      const auto expect = std::complex<double>(x.real[i], x.imag[i]) * std::polar(1.0, th);
      err = std::max(err, std::abs(std::complex<double>(y.real[i], y.imag[i]) - expect));
    }
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("complex_conv2d matches the per-tap oracle") {
  Rng rng(4);
  auto p = conv_params(2, 3, 3, 3, rng, true);
  p.pad_freq = p.pad_time = 1;
  const auto x = random_complex({1, 2, 8, 8}, rng);
  CHECK(rel_err(value(cnn::complex_conv2d(cvar(x), p)), conv_oracle(x, p, false)) <= 1e-6);

  // The encoder geometry: kernel (5, 2), stride (2, 1), freq pad 2.
  auto q = conv_params(3, 4, 5, 2, rng, false);
  q.stride_freq = 2;
  q.pad_freq = 2;
  q.pad_time = 1;
  const auto z = random_complex({2, 3, 17, 6}, rng);
  CHECK(rel_err(value(cnn::complex_conv2d(cvar(z), q)), conv_oracle(z, q, false)) <= 1e-6);
}

TEST_CASE("complex_conv_transpose2d matches the zero-insertion oracle") {
  Rng rng(5);
  auto p = conv_params(3, 2, 5, 2, rng, true);
  p.stride_freq = 2;
  p.pad_freq = 2;
  const auto x = random_complex({2, 3, 5, 4}, rng);
  CHECK(rel_err(value(cnn::complex_conv_transpose2d(cvar(x), p)), conv_oracle(x, p, true)) <= 1e-6);
}

TEST_CASE("transposed conv restores the forward input shape") {
  Rng rng(6);
  for (std::size_t F : {9u, 17u, 33u}) {
    auto p = conv_params(1, 1, 5, 1, rng, false);
    p.stride_freq = 2;
    p.pad_freq = 2;
    const auto x = random_complex({1, 1, F, 3}, rng);
    const auto y = cnn::complex_conv2d(cvar(x), p);
    const auto back = cnn::complex_conv_transpose2d(y, p);
    CHECK(back.shape()[2] == F);
    CHECK(back.shape()[3] == 3);
  }
}

TEST_CASE("complex conv shape errors") {
  Rng rng(7);
  const auto p = conv_params(2, 3, 3, 3, rng, false);
  CHECK_THROWS_AS(cnn::complex_conv2d(cvar(random_complex({1, 3, 8, 8}, rng)), p), ShapeError);
  CHECK_THROWS_AS(cnn::complex_conv2d(cvar(random_complex({1, 2, 2, 8}, rng)), p), ShapeError);
}

TEST_CASE("randomized oracle sweep over conv shapes") {
  Rng rng(8);
  for (int draw = 0; draw < 40; ++draw) {
    const std::size_t in = 1 + rng.below(3), out = 1 + rng.below(3);
    const std::size_t kh = 1 + rng.below(5), kw = 1 + rng.below(3);
    auto p = conv_params(in, out, kh, kw, rng, rng.below(2) == 1);
    p.stride_freq = 1 + rng.below(2);
    p.stride_time = 1 + rng.below(2);
    p.pad_freq = rng.below(kh);
    p.pad_time = rng.below(kw);
    const auto x = random_complex({1 + rng.below(2), in, kh + rng.below(6), kw + rng.below(6)}, rng);
    CHECK(rel_err(value(cnn::complex_conv2d(cvar(x), p)), conv_oracle(x, p, false)) <= 1e-6);
    CHECK(rel_err(value(cnn::complex_conv_transpose2d(cvar(x), p)), conv_oracle(x, p, true)) <= 1e-6);
  }
}

namespace {

cnn::ComplexBatchNormParams bn_params(std::size_t c, nn::ParamStore& store) {
  return cnn::make_complex_batch_norm(store, "bn", c);
}

void identity_affine(cnn::ComplexBatchNormParams& p) {
  p.gamma_rr.value().fill(1.0);
  p.gamma_ii.value().fill(1.0);
  p.gamma_ri.value().fill(0.0);
}

}  // namespace

TEST_CASE("complex batch norm initial affine is 1/sqrt2 with zero shift") {
  nn::ParamStore store;
  const auto p = bn_params(3, store);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(p.gamma_rr.value()[c] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(p.gamma_ii.value()[c] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(p.gamma_ri.value()[c] == 0.0);
    CHECK(p.beta_r.value()[c] == 0.0);
  }
}

TEST_CASE("whitening of already white data is the identity") {
  // Four points per channel with zero mean and identity covariance.
  const double s = std::sqrt(2.0);
  ComplexTensor x(Shape{1, 1, 4, 1});
  const double re[4] = {s, -s, 0, 0}, im[4] = {0, 0, s, -s};
  for (int i = 0; i < 4; ++i) x.real[i] = re[i], x.imag[i] = im[i];
  nn::ParamStore store;
  auto p = bn_params(1, store);
  identity_affine(p);
  p.eps = 1e-12;
  const auto y = value(cnn::complex_batch_norm(cvar(x), p, nn::Mode::train));
  CHECK(max_abs_diff(y.real, x.real) <= 1e-5);
  CHECK(max_abs_diff(y.imag, x.imag) <= 1e-5);
}

TEST_CASE("train-mode output covariance is the identity") {
  Rng rng(10);
  ComplexTensor x = random_complex({4, 3, 6, 10}, rng);
  // Correlate real and imaginary parts so whitening has work to do.
  for (std::size_t i = 0; i < x.real.size(); ++i) x.imag[i] = 0.5 * x.real[i] + x.imag[i] + 2.0;
  nn::ParamStore store;
  auto p = bn_params(3, store);
  identity_affine(p);
  const auto y = value(cnn::complex_batch_norm(cvar(x), p, nn::Mode::train));
  const std::size_t inner = 60;
  for (std::size_t c = 0; c < 3; ++c) {
    double mr = 0, mi = 0, rr = 0, ii = 0, ri = 0, n = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t i = (b * 3 + c) * inner + k;
        mr += y.real[i], mi += y.imag[i], n += 1;
      }
    mr /= n, mi /= n;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t i = (b * 3 + c) * inner + k;
        rr += (y.real[i] - mr) * (y.real[i] - mr) / n;
        ii += (y.imag[i] - mi) * (y.imag[i] - mi) / n;
        ri += (y.real[i] - mr) * (y.imag[i] - mi) / n;
      }
    CHECK(std::abs(rr - 1.0) <= 1e-4);
    CHECK(std::abs(ii - 1.0) <= 1e-4);
    CHECK(std::abs(ri) <= 1e-4);
  }
}

TEST_CASE("complex batch norm matches the eigendecomposition oracle") {
  Rng rng(11);
  const ComplexTensor x = random_complex({4, 3, 6, 10}, rng);
  nn::ParamStore store;
  auto p = bn_params(3, store);
  p.gamma_rr.value() = random_tensor({3}, rng);
  p.gamma_ii.value() = random_tensor({3}, rng);
  p.gamma_ri.value() = random_tensor({3}, rng);
  p.beta_r.value() = random_tensor({3}, rng);
  p.beta_i.value() = random_tensor({3}, rng);
  CHECK(rel_err(value(cnn::complex_batch_norm(cvar(x), p, nn::Mode::train)),
                oracle::complex_batch_norm_train(x, p)) <= 1e-4);
  // The train pass moved the running statistics; eval uses them.
  CHECK(p.var_rr.value()[0] != 1.0);
  CHECK(rel_err(value(cnn::complex_batch_norm(cvar(x), p, nn::Mode::eval)),
                oracle::complex_batch_norm_eval(x, p)) <= 1e-4);
}

TEST_CASE("running statistics follow the momentum update") {
  Rng rng(12);
  const ComplexTensor x = random_complex({2, 1, 4, 5}, rng);
  nn::ParamStore store;
  auto p = bn_params(1, store);
  double mr = 0;
  for (double v : x.real.values()) mr += v / 40.0;
  cnn::complex_batch_norm(cvar(x), p, nn::Mode::train);
  CHECK(p.mean_r.value()[0] == doctest::Approx(0.1 * mr).epsilon(1e-12));
}

TEST_CASE("complex batch norm rejects a single sample in train mode") {
  nn::ParamStore store;
  auto p = bn_params(1, store);
  ComplexTensor x(Shape{1, 1, 1, 1});
  CHECK_THROWS_AS(cnn::complex_batch_norm(cvar(x), p, nn::Mode::train), InvalidInput);
  CHECK_NOTHROW(cnn::complex_batch_norm(cvar(x), p, nn::Mode::eval));
}

TEST_CASE("inverse_sqrt_2x2 squares to the inverse") {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(0.1, 3), d = rng.uniform(0.1, 3);
    const double b = rng.uniform(-0.9, 0.9) * std::sqrt(a * d);
    const auto w = cnn::inverse_sqrt_2x2(a, d, b);
    // W V W = I
    const double m00 = w.rr * a + w.ri * b, m01 = w.rr * b + w.ri * d;
    const double m10 = w.ri * a + w.ii * b, m11 = w.ri * b + w.ii * d;
    CHECK(m00 * w.rr + m01 * w.ri == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m10 * w.ri + m11 * w.ii == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(m00 * w.ri + m01 * w.ii) <= 1e-10);
  }
}

TEST_CASE("prelu definition") {
  ComplexTensor x(Shape{1, 2, 1, 2});
  x.real[0] = -2.0;
  x.real[1] = 3.0;
  x.imag[2] = -4.0;
  const auto slope = ag::parameter(Tensor({2}, std::vector<double>{0.25, 0.5}));
  const auto y = value(cnn::prelu(cvar(x), slope));
  CHECK(y.real[0] == -0.5);
  CHECK(y.real[1] == 3.0);
  CHECK(y.imag[2] == -2.0);

  Rng rng(14);
  ComplexTensor pos = random_complex({2, 2, 3, 3}, rng);
  for (double& v : pos.real.values()) v = std::abs(v);
  for (double& v : pos.imag.values()) v = std::abs(v);
  const auto same = value(cnn::prelu(cvar(pos), slope));
  CHECK(max_abs_diff(same.real, pos.real) == 0.0);

  const auto r = random_complex({3, 2, 4, 5}, rng);
  const auto got = value(cnn::prelu(cvar(r), slope));
  CHECK(max_abs_diff(got.real, oracle::prelu(r.real, slope.value())) == 0.0);
  CHECK(max_abs_diff(got.imag, oracle::prelu(r.imag, slope.value())) == 0.0);

  CHECK_THROWS_AS(cnn::prelu(cvar(r), ag::parameter(Tensor({3}))), ShapeError);
}
