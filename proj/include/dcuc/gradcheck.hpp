// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcuc/autograd.hpp"

namespace dcuc::gradcheck {

struct GradReport {
  std::string op;
  std::string param;  // worst-offending input of the check
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
  double eps = 0.0;
  std::size_t coords = 0;  // coordinates differenced
  std::size_t kinks_skipped = 0;
};

struct Options {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t coords_per_param = 50;  // all coordinates when fewer
  std::uint64_t seed = 0;
};

struct Param {
  std::string name;
  ag::Var var;
};

// Builds the scalar loss from the current values of `params`.
using LossFn = std::function<ag::Var()>;

// Central differences against the reverse-mode gradient; relative error
// |a - n| / max(|a|, |n|, 1e-8). Coordinates whose step straddles a kink are
// replaced by others, up to coords_per_param per input. Throws NondeterminismError if two plain
// evaluations of `loss` disagree.
GradReport check_gradients(const std::string& op, const LossFn& loss,
                           const std::vector<Param>& params,
                           const Options& opt);

enum class Scope { kernel, model };

struct Check {
  std::string name;
  Scope scope;
  std::function<GradReport()> run;
};

// `with_faulty` appends a deliberately wrong-signed op for harness tests.
std::vector<Check> registered_checks(Scope scope, bool with_faulty = false);

// One line: op=... param=... max_rel_err=... tol=... eps=... coords=...
// kinks_skipped=... pass=0|1
std::string format_report(const GradReport& r);

}  // namespace dcuc::gradcheck
