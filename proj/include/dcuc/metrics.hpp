// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>

#include "dcuc/autograd.hpp"

namespace dcuc::metrics {

enum class SnrVariant { scale_invariant, plain_snr };

constexpr double kSnrCapDb = 60.0;
constexpr double kLossEps = 1e-8;

// scale_invariant: zero-mean both, project the estimate onto the target,
// 10 log10(|s_t|^2 / |e|^2). plain_snr: e = estimate - target,
// 10 log10(|s|^2 / |e|^2). Result clipped to [-60, +60] dB; a vanishing
// error gives +60, a vanishing target component gives -60.
double si_snr(std::span<const double> estimate, std::span<const double> target,
              SnrVariant variant = SnrVariant::scale_invariant);

// estimate [B, L] against target [B, L]: minus the batch mean of the
// uncapped ratio 10 log10((|s_t|^2 + eps) / (|e|^2 + eps)).
ag::Var si_snr_loss(const ag::Var& estimate, const Tensor& target,
                    SnrVariant variant = SnrVariant::scale_invariant);

}  // namespace dcuc::metrics
