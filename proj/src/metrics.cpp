// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/metrics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "dcuc/error.hpp"

namespace dcuc::metrics {

namespace {

double energy(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void centre(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

// Target component and residual of one pair.
struct Split {
  std::vector<double> st;
  std::vector<double> e;
};

Split decompose(std::span<const double> est, std::span<const double> tgt,
                SnrVariant variant) {
  Split out;
  if (variant == SnrVariant::plain_snr) {
    out.st.assign(tgt.begin(), tgt.end());
    out.e.resize(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) out.e[i] = est[i] - tgt[i];
    return out;
  }
  std::vector<double> x(est.begin(), est.end());
  std::vector<double> s(tgt.begin(), tgt.end());
  centre(x);
  centre(s);
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * s[i];
  const double ss = energy(s);
  if (ss == 0.0) throw InvalidInput("si_snr: target is constant");
  const double alpha = dot / ss;
  out.st.resize(x.size());
  out.e.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.st[i] = alpha * s[i];
    out.e[i] = x[i] - out.st[i];
  }
  return out;
}

void check_pair(std::size_t ne, std::span<const double> tgt) {
  if (ne != tgt.size()) {
    throw ShapeError("si_snr: estimate has " + std::to_string(ne) +
                     " samples, target " + std::to_string(tgt.size()));
  }
  if (tgt.empty() || energy(tgt) == 0.0) {
    throw InvalidInput("si_snr: target is zero");
  }
}

}  // namespace

double si_snr(std::span<const double> estimate, std::span<const double> target,
              SnrVariant variant) {
  check_pair(estimate.size(), target);
  const Split d = decompose(estimate, target, variant);
  const double pt = energy(d.st);
  const double pe = energy(d.e);
  if (pt == 0.0) return -kSnrCapDb;
  if (pe < 1e-12 * pt) return kSnrCapDb;
  if (pt < 1e-12 * pe) return -kSnrCapDb;
  return 10.0 * std::log10(pt / pe);
}

ag::Var si_snr_loss(const ag::Var& estimate, const Tensor& target,
                    SnrVariant variant) {
  if (estimate.shape().size() != 2 || estimate.shape() != target.shape()) {
    throw ShapeError("si_snr_loss: estimate " + to_string(estimate.shape()) +
                     " vs target " + to_string(target.shape()));
  }
  const std::size_t B = target.dim(0), L = target.dim(1);
  const Tensor& est = estimate.value();
  const double c = 10.0 / std::numbers::ln10;
  // d value / d estimate per item, kept for the backward pass.
  Tensor dv({B, L});
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::span<const double> x(est.data() + b * L, L);
    std::span<const double> s(target.data() + b * L, L);
    check_pair(L, s);
    const Split d = decompose(x, s, variant);
    const double pt = energy(d.st) + kLossEps;
    const double pe = energy(d.e) + kLossEps;
    total += c * (std::log(pt) - std::log(pe));
    // d pt / dx = 2 s_t (scale-invariant only), d pe / dx = 2 e; both are
    // zero-mean in the scale-invariant case so centring is a no-op.
    const bool si = variant == SnrVariant::scale_invariant;
    for (std::size_t i = 0; i < L; ++i) {
      double g = -2.0 * d.e[i] / pe;
      if (si) g += 2.0 * d.st[i] / pt;
      dv[b * L + i] = c * g;
    }
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  return ag::make_op(Tensor::scalar(-total * inv_b), {estimate},
                     [dv = std::move(dv), inv_b](ag::Node& n) {
    Tensor& g = n.parents[0]->grad_buffer();
    const double up = n.grad[0] * -inv_b;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * dv[i];
  });
}

}  // namespace dcuc::metrics
