#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "lhn/tensor.hpp"

namespace lhn {

/// Per-column z-score transform.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
  double epsilon = 1e-8;

  std::size_t dim() const noexcept { return means.size(); }
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Sample mean and population standard deviation per column. Columns whose
/// deviation falls below epsilon get epsilon instead.
Standardizer standardize_fit(const Tensor& x, double epsilon = 1e-8);
Tensor standardize_apply(const Standardizer& s, const Tensor& x);
void standardize_apply_inplace(const Standardizer& s, std::span<double> row);

/// [n x k] indicator matrix.
Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_classes);

enum class Deflation : std::uint8_t {
  // p = X't / (t't), Y -= t (Y't / t't)'
  normalized = 0,
  // p = X't, X -= t p', Y -= t q' exactly as NIPALS is often printed.
  literal = 1,
};

/// Snapshot of one extracted component, handed to NipalsOptions::observer.
struct NipalsState {
  std::size_t component = 0;
  std::size_t inner_iterations = 0;
  bool converged = false;
  const Tensor* x_deflated = nullptr;  // before this component's deflation
  const Tensor* y_deflated = nullptr;
  std::vector<double> u;
  std::vector<double> w;
  std::vector<double> t;
  std::vector<double> q;
  std::vector<double> p;
};

struct NipalsOptions {
  double tol = 1e-8;
  std::size_t max_iters = 20;
  Deflation deflation = Deflation::normalized;
  double epsilon = 1e-8;
  std::function<void(const NipalsState&)> observer;
};

/// Projection model X' = z(X) W. Columns of W are unit-norm weight vectors.
struct PlsModel {
  Tensor weights;  // [m x c]
  Standardizer x_standardizer;
  std::size_t num_classes = 0;

  std::size_t input_dim() const { return weights.rows(); }
  std::size_t components() const { return weights.cols(); }
  friend bool operator==(const PlsModel&, const PlsModel&) = default;
};

struct PlsFit {
  PlsModel model;
  /// Scores t_a = X_deflated w_a collected during fitting, [n x c].
  Tensor scores;
  /// Frobenius norm of the deflated X before each component and after the last.
  std::vector<double> x_residual_norms;
  /// Requested component count before clamping to min(m, n - 1).
  std::size_t requested_components = 0;
};

/// Largest usable component count for an [n x m] problem.
std::size_t max_components(std::size_t n, std::size_t m);

/// NIPALS PLS on raw X (z-scored internally) and Y (centered internally).
/// c above max_components is clamped with a warning on stderr.
PlsFit nipals_fit(const Tensor& x, const Tensor& y, std::size_t c, const NipalsOptions& options = {});

Tensor pls_transform(const PlsModel& model, const Tensor& x_raw);
/// Single-row transform; out must have room for components() values.
void pls_transform_row(const PlsModel& model, std::span<const double> x_raw, std::span<double> out);

// Model file "LPLS" v1, little-endian:
//   u64 m, u64 k, u64 c, f64 epsilon, f64[m] means, f64[m] stds, f64[m*c] W row-major
void save_model(const PlsModel& model, const std::filesystem::path& path);
PlsModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const PlsModel& model);
PlsModel deserialize_model(std::vector<std::uint8_t> bytes);

}  // namespace lhn
