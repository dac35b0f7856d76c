// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "dcuc/rng.hpp"
#include "dcuc/tensor.hpp"

namespace testing {

inline dcuc::Tensor random_tensor(dcuc::Shape s, dcuc::Rng& rng,
                                  double lo = -1.0, double hi = 1.0) {
  dcuc::Tensor t(std::move(s));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline dcuc::ComplexTensor random_complex(const dcuc::Shape& s, dcuc::Rng& rng) {
  return {random_tensor(s, rng), random_tensor(s, rng)};
}

// max |a - b| / max |b|: relative to the reference's scale, so isolated
// near-zero entries do not dominate.
inline double rel_err(const dcuc::Tensor& a, const dcuc::Tensor& ref) {
  if (a.shape() != ref.shape()) return INFINITY;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - ref[i]));
    den = std::max(den, std::abs(ref[i]));
  }
  return num / std::max(den, 1e-300);
}

inline double rel_err(const dcuc::ComplexTensor& a, const dcuc::ComplexTensor& ref) {
  return std::max(rel_err(a.real, ref.real), rel_err(a.imag, ref.imag));
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dcuc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
