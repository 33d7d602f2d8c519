#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dtsl/errors.hpp"

namespace dtsl {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major array of doubles. Plain value type; gradients live in the
// DiffGraph nodes, not here.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);              // zero-filled
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Flat value of a scalar (any single-element tensor).
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void fill(double v);
  Tensor reshaped(Shape shape) const;  // same element count, new shape

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace dtsl
