#pragma once

// Reference implementations used only by the tests. They are written for
// obviousness, share no code with the library, and are allowed to be slow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix random_matrix(std::size_t n, std::size_t m, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix a(n, std::vector<double>(m));
  for (auto& row : a)
    for (auto& v : row) v = d(gen);
  return a;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Matrix c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i][j] += a[i][p] * b[p][j];
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.empty() ? 0 : a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Column z-score with population deviation.
inline Matrix zscore(const Matrix& x) {
  const std::size_t n = x.size(), m = x[0].size();
  Matrix z = x;
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i][j] - mean) * (x[i][j] - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(n)), 1e-8);
    for (std::size_t i = 0; i < n; ++i) z[i][j] = (x[i][j] - mean) / sd;
  }
  return z;
}

inline Matrix center(const Matrix& y) {
  Matrix c = y;
  for (std::size_t j = 0; j < y[0].size(); ++j) {
    double mean = 0.0;
    for (const auto& row : y) mean += row[j];
    mean /= static_cast<double>(y.size());
    for (auto& row : c) row[j] -= mean;
  }
  return c;
}

/// First PLS weight: dominant eigenvector of X'YY'X by power iteration.
inline std::vector<double> first_pls_weight(const Matrix& xz, const Matrix& yc, std::size_t iterations = 2000) {
  const Matrix xty = matmul(transpose(xz), yc);
  const Matrix s = matmul(xty, transpose(xty));
  const std::size_t m = s.size();
  std::vector<double> w(m, 1.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> next(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) next[i] += s[i][j] * w[j];
    const double nn = norm(next);
    for (auto& v : next) v /= nn;
    w = next;
  }
  return w;
}

/// Squared norm of the feature/label covariance along direction w: ||Y'Xw||^2.
inline double covariance_objective(const Matrix& xz, const Matrix& yc, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t k = 0; k < yc[0].size(); ++k) {
    double c = 0.0;
    for (std::size_t i = 0; i < xz.size(); ++i) {
      double xw = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) xw += xz[i][j] * w[j];
      c += yc[i][k] * xw;
    }
    total += c * c;
  }
  return total;
}

/// Valid cross-correlation of one [in_maps x h x w] input with
/// [filters x in_maps x kh x kw] kernels, straight from the definition.
inline std::vector<double> conv_valid(const std::vector<double>& in, std::size_t maps, std::size_t h, std::size_t w,
                                      const std::vector<double>& k, std::size_t filters, std::size_t kh,
                                      std::size_t kw, const std::vector<double>& bias) {
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  std::vector<double> out(filters * oh * ow, 0.0);
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double s = bias[f];
        for (std::size_t c = 0; c < maps; ++c)
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j)
              s += in[(c * h + y + i) * w + x + j] * k[((f * maps + c) * kh + i) * kw + j];
        out[(f * oh + y) * ow + x] = s;
      }
  return out;
}

/// Windows counted by sliding a start pointer until the window runs off the end.
inline std::size_t scan_count(std::size_t n, std::size_t t, std::size_t stride) {
  std::size_t count = 0;
  for (std::size_t start = 0; start + t <= n; start += stride) ++count;
  return count;
}

/// Student t density and its CDF by composite Simpson integration from 0.
inline double t_pdf(double x, double nu) {
  const double lc = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) - 0.5 * std::log(nu * std::numbers::pi);
  return std::exp(lc - (nu + 1.0) / 2.0 * std::log1p(x * x / nu));
}

inline double t_cdf(double x, double nu, std::size_t intervals = 20000) {
  const double h = x / static_cast<double>(intervals);
  double s = t_pdf(0.0, nu) + t_pdf(x, nu);
  for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * t_pdf(h * static_cast<double>(i), nu);
  return 0.5 + s * h / 3.0;
}

/// Upper quantile by bisection on the Simpson CDF.
inline double t_quantile(double p, double nu) {
  double lo = 0.0, hi = 50.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, nu) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
