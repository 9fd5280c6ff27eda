#include "lhn/pls.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "lhn/binary_io.hpp"
#include "lhn/error.hpp"
#include "lhn/random.hpp"

namespace lhn {

namespace {

constexpr char kMagic[] = "LPLS";
constexpr std::uint32_t kVersion = 1;
// Fallback initialization when the first Y column carries no signal.
constexpr std::uint64_t kInitSeed = 0x5eed1e55;

double frobenius(const Tensor& a) { return l2_norm(a.data()); }

// out = A' v for A [n x m], v length n.
void at_times(const Tensor& a, std::span<const double> v, std::vector<double>& out) {
  out.assign(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += vi * r[j];
  }
}

// out = A v for A [n x m], v length m.
void a_times(const Tensor& a, std::span<const double> v, std::vector<double>& out) {
  out.assign(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v);
}

// A -= t p'
void subtract_outer(Tensor& a, std::span<const double> t, std::span<const double> p) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double ti = t[i];
    if (ti == 0.0) continue;
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= ti * p[j];
  }
}

void scale(std::vector<double>& v, double s) {
  for (auto& x : v) x *= s;
}

void require_finite(const Tensor& a, const char* what) {
  if (!a.all_finite()) throw NumericError(std::string(what) + " contains non-finite values");
}

}  // namespace

Standardizer standardize_fit(const Tensor& x, double epsilon) {
  if (x.rank() != 2) throw ShapeError("standardize_fit expects a matrix");
  const std::size_t n = x.rows(), m = x.cols();
  if (n < 2) throw InsufficientDataError("standardization needs at least 2 rows, got " + std::to_string(n));
  Standardizer s;
  s.epsilon = epsilon;
  s.means.assign(m, 0.0);
  s.stds.assign(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < m; ++j) s.means[j] += r[j];
  }
  for (auto& v : s.means) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double d = r[j] - s.means[j];
      s.stds[j] += d * d;
    }
  }
  for (auto& v : s.stds) v = std::max(std::sqrt(v / static_cast<double>(n)), epsilon);
  return s;
}

void standardize_apply_inplace(const Standardizer& s, std::span<double> row) {
  if (row.size() != s.dim()) {
    throw ShapeError("standardizer fitted on " + std::to_string(s.dim()) + " columns, got " +
                     std::to_string(row.size()));
  }
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - s.means[j]) / s.stds[j];
}

Tensor standardize_apply(const Standardizer& s, const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("standardize_apply expects a matrix");
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) standardize_apply_inplace(s, out.row(i));
  return out;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  if (labels.empty() || num_classes == 0) throw InputError("one_hot needs labels and at least one class");
  Tensor y({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw RangeError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    y.at(i, labels[i]) = 1.0;
  }
  return y;
}

std::size_t max_components(std::size_t n, std::size_t m) { return n < 2 ? 0 : std::min(m, n - 1); }

PlsFit nipals_fit(const Tensor& x, const Tensor& y, std::size_t c, const NipalsOptions& options) {
  if (x.rank() != 2 || y.rank() != 2) throw ShapeError("nipals_fit expects matrices");
  if (x.rows() != y.rows()) {
    throw ShapeError("X has " + std::to_string(x.rows()) + " rows but Y has " + std::to_string(y.rows()));
  }
  if (c == 0) throw ParameterError("component count must be at least 1");
  if (options.max_iters == 0) throw ParameterError("max_iters must be at least 1");
  require_finite(x, "X");
  require_finite(y, "Y");

  const std::size_t n = x.rows(), m = x.cols(), k = y.cols();
  PlsFit fit;
  fit.requested_components = c;
  const std::size_t limit = max_components(n, m);
  if (limit == 0) throw InsufficientDataError("PLS needs at least 2 rows");
  if (c > limit) {
    std::clog << "warning: PLS components clamped from " << c << " to " << limit << " (n=" << n << ", m=" << m
              << ")\n";
    c = limit;
  }

  fit.model.x_standardizer = standardize_fit(x, options.epsilon);
  fit.model.num_classes = k;
  Tensor xd = standardize_apply(fit.model.x_standardizer, x);

  // Y is centered only.
  Tensor yd = y;
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += yd.at(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) yd.at(i, j) -= mean;
  }

  fit.model.weights = Tensor({m, c});
  fit.scores = Tensor({n, c});
  fit.x_residual_norms.push_back(frobenius(xd));

  std::vector<double> u(n), w, w_old, t, q, p;
  Rng rng(kInitSeed);
  auto random_u = [&] {
    for (auto& v : u) v = rng.normal();
  };

  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t i = 0; i < n; ++i) u[i] = yd.at(i, 0);
    if (l2_norm(u) <= 1e-12 * std::sqrt(static_cast<double>(n))) random_u();

    const double x_norm = frobenius(xd);
    NipalsState state;
    state.component = a;
    bool converged = false;
    std::size_t iter = 0;
    bool retried = false;
    while (iter < options.max_iters) {
      ++iter;
      at_times(xd, u, w);
      double nw = l2_norm(w);
      if (nw <= 1e-12 * x_norm * l2_norm(u) || nw == 0.0) {
        if (!retried) {
          // u orthogonal to the remaining X: restart from a random direction.
          retried = true;
          random_u();
          --iter;
          continue;
        }
        // X is exhausted; any unit vector gives a zero score.
        w.assign(m, 0.0);
        w[a % m] = 1.0;
        nw = 1.0;
        a_times(xd, w, t);
        q.assign(k, 0.0);
        converged = true;
        break;
      }
      scale(w, 1.0 / nw);
      a_times(xd, w, t);
      at_times(yd, t, q);
      const double nq = l2_norm(q);
      if (nq > 0.0) {
        scale(q, 1.0 / nq);
        a_times(yd, q, u);
      } else {
        // Y exhausted: continue as power iteration on X'X.
        u = t;
      }
      if (!w_old.empty()) {
        double delta = 0.0;
        for (std::size_t j = 0; j < m; ++j) delta = std::max(delta, std::abs(w[j] - w_old[j]));
        if (delta < options.tol) {
          converged = true;
          break;
        }
      }
      w_old = w;
    }
    w_old.clear();

    // Deflation.
    const double tt = dot(t, t);
    if (options.deflation == Deflation::normalized) {
      at_times(xd, t, p);
      if (tt > 0.0) {
        scale(p, 1.0 / tt);
      }
    } else {
      at_times(xd, t, p);
    }

    if (options.observer) {
      state.inner_iterations = iter;
      state.converged = converged;
      state.x_deflated = &xd;
      state.y_deflated = &yd;
      state.u = u;
      state.w = w;
      state.t = t;
      state.q = q;
      state.p = p;
      options.observer(state);
    }

    for (std::size_t j = 0; j < m; ++j) fit.model.weights.at(j, a) = w[j];
    for (std::size_t i = 0; i < n; ++i) fit.scores.at(i, a) = t[i];

    if (options.deflation == Deflation::normalized) {
      if (tt > 0.0) {
        subtract_outer(xd, t, p);
        std::vector<double> c_a;
        at_times(yd, t, c_a);
        scale(c_a, 1.0 / tt);
        subtract_outer(yd, t, c_a);
      }
    } else {
      subtract_outer(xd, t, p);
      subtract_outer(yd, t, q);
    }
    if (!xd.all_finite() || !yd.all_finite()) {
      throw NumericError("NIPALS deflation produced non-finite values at component " + std::to_string(a + 1));
    }
    fit.x_residual_norms.push_back(frobenius(xd));
  }
  return fit;
}

void pls_transform_row(const PlsModel& model, std::span<const double> x_raw, std::span<double> out) {
  const std::size_t m = model.input_dim(), c = model.components();
  if (x_raw.size() != m) {
    throw ShapeError("PLS model expects " + std::to_string(m) + " features, got " + std::to_string(x_raw.size()));
  }
  if (out.size() != c) throw ShapeError("PLS output buffer has wrong length");
  const auto& s = model.x_standardizer;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double z = (x_raw[j] - s.means[j]) / s.stds[j];
    auto wrow = model.weights.row(j);
    for (std::size_t a = 0; a < c; ++a) out[a] += z * wrow[a];
  }
}

Tensor pls_transform(const PlsModel& model, const Tensor& x_raw) {
  if (x_raw.rank() != 2) throw ShapeError("pls_transform expects a matrix");
  if (x_raw.cols() != model.input_dim()) {
    throw ShapeError("PLS model expects " + std::to_string(model.input_dim()) + " features, got " +
                     std::to_string(x_raw.cols()));
  }
  return matmul(standardize_apply(model.x_standardizer, x_raw), model.weights);
}

std::vector<std::uint8_t> serialize_model(const PlsModel& model) {
  io::Writer w(kMagic, kVersion);
  const std::size_t m = model.input_dim(), c = model.components();
  w.u64(m);
  w.u64(model.num_classes);
  w.u64(c);
  w.f64(model.x_standardizer.epsilon);
  w.f64s(model.x_standardizer.means);
  w.f64s(model.x_standardizer.stds);
  w.f64s(model.weights.data());
  return w.buffer();
}

PlsModel deserialize_model(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes), kMagic, kVersion);
  PlsModel model;
  const auto m_at = r.offset();
  const auto m = r.u64();
  model.num_classes = r.u64();
  const auto c = r.u64();
  if (m == 0 || c == 0 || c > m) throw FormatError(m_at, "invalid PLS dimensions");
  model.x_standardizer.epsilon = r.f64();
  model.x_standardizer.means = r.f64s(m);
  model.x_standardizer.stds = r.f64s(m);
  model.weights = Tensor({m, c}, r.f64s(m * c));
  r.expect_end();
  return model;
}

void save_model(const PlsModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_model(model));
}

PlsModel load_model(const std::filesystem::path& path) { return deserialize_model(io::read_file(path)); }

}  // namespace lhn
