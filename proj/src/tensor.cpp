#include "lhn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lhn/error.hpp"

namespace lhn {

std::size_t shape_product(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged matrix rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

std::span<double> Tensor::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * shape_[1], shape_[1]);
}

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * shape_[1], shape_[1]);
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out({n, m});
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < n; ++i) {
    auto out_row = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      if (aip == 0.0) continue;
      auto b_row = b.row(p);
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aip * b_row[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor, got " + shape_string(a.shape()));
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) {
  // Scaled accumulation avoids overflow for huge entries.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) {
    const double r = x / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("stack_rows: no rows");
  const std::size_t m = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("stack_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), m}, std::move(data));
}

Tensor hconcat(const std::vector<Tensor>& blocks) {
  if (blocks.empty()) throw InputError("hconcat: no blocks");
  const std::size_t n = blocks.front().rows();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.rank() != 2 || b.rows() != n) throw ShapeError("hconcat: row counts differ");
    total += b.cols();
  }
  Tensor out({n, total});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t offset = 0;
    for (const auto& b : blocks) {
      auto src = b.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += b.cols();
    }
  }
  return out;
}

}  // namespace lhn
