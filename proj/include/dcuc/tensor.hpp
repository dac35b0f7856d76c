// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dcuc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Multi-index access, bounds checked.
  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool all_finite() const;
  double max_abs() const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
};

// Paired real/imaginary arrays sharing one shape.
struct ComplexTensor {
  Tensor real;
  Tensor imag;

  ComplexTensor() = default;
  explicit ComplexTensor(const Shape& shape)
      : real(shape), imag(shape) {}
  ComplexTensor(Tensor re, Tensor im);

  const Shape& shape() const { return real.shape(); }
  bool all_finite() const { return real.all_finite() && imag.all_finite(); }
};

// max |a - b| over equal-shape tensors.
double max_abs_diff(const Tensor& a, const Tensor& b);
// max |a - b| / max(max|b|, floor).
double max_rel_diff(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace dcuc
