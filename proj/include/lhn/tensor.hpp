#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lhn {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of doubles.
///
/// A default-constructed tensor is empty (no shape, no data). Every other
/// tensor has strictly positive extents and product(shape) == size().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Rank-2 tensor from nested rows; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t extent(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 helpers. No bounds checks beyond debug asserts.
  std::size_t rows() const { return extent(0); }
  std::size_t cols() const { return extent(1); }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  /// Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
double l2_norm(std::span<const double> v);
inline double l2_norm(const Tensor& v) { return l2_norm(v.data()); }
double dot(std::span<const double> a, std::span<const double> b);

/// Stacks equally sized vectors as the rows of an [n x m] matrix.
Tensor stack_rows(const std::vector<std::vector<double>>& rows);
/// Horizontal concatenation of matrices sharing a row count.
Tensor hconcat(const std::vector<Tensor>& blocks);

}  // namespace lhn
