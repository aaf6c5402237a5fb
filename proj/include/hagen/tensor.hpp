#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hagen {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every extent is strictly positive, so `size()` is never zero. Rank-2
/// tensors are the workhorse; `rows()`/`cols()` and `at(i, j)` are only valid
/// on them.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor identity(std::size_t n);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }

  std::span<double> values() & { return values_; }
  std::span<const double> values() const& { return values_; }
  std::vector<double> values() && { return std::move(values_); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool grad_enabled() const { return grad_enabled_; }
  Tensor& set_grad_enabled(bool on) {
    grad_enabled_ = on;
    return *this;
  }

  /// Same values viewed under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);

  /// Throws DimensionError unless the shape is rank 2.
  void require_matrix(const char* what) const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
  bool grad_enabled_ = false;
};

/// Bitwise comparison of shape and values.
bool identical(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hagen
