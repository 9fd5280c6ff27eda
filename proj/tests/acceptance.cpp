// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "lhn/binary_io.hpp"
#include "lhn/cli.hpp"
#include "lhn/convnet.hpp"
#include "lhn/eval.hpp"
#include "lhn/hypernet.hpp"
#include "lhn/ingest.hpp"
#include "lhn/pls.hpp"
#include "lhn/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lhn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::ostringstream line;
  line.precision(3);
  line << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << o.detail << " (" << secs << " s)";
  std::cout << line.str() << std::endl;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double elapsed_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t k, std::mt19937_64& gen) {
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % k;
  std::shuffle(y.begin(), y.end(), gen);
  return y;
}

double col_dot(const Tensor& a, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) s += a.at(r, i) * a.at(r, j);
  return s;
}

Outcome pls_closed_form() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 gen(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial), m = 3 + static_cast<std::size_t>(trial % 8);
    const auto xm = oracle::random_matrix(n, m, gen);
    const auto ym = oracle::center(oracle::random_matrix(n, 1, gen));
    const auto w = nipals_fit(testing::to_tensor(xm), testing::to_tensor(ym), 1).model.weights;
    const auto xty = oracle::matmul(oracle::transpose(oracle::zscore(xm)), ym);
    std::vector<double> closed(m);
    for (std::size_t j = 0; j < m; ++j) closed[j] = xty[j][0];
    const double norm = oracle::norm(closed);
    const double sign = w.at(0, 0) * closed[0] >= 0.0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(sign * w.at(j, 0) - closed[j] / norm));
  }
  const double secs = elapsed_since(start);
  return {worst <= 1e-10 && secs < 1.0,
          "max |w1 - X'y/||X'y||| = " + fmt(worst) + " (tol 1e-10), 20 problems in " + fmt(secs) + " s (limit 1 s)"};
}

Outcome pls_orthogonality() {
  std::mt19937_64 gen(102);
  const auto x = testing::to_tensor(oracle::random_matrix(50, 30, gen));
  const auto fit = nipals_fit(x, one_hot(balanced_labels(50, 4, gen), 4), 5);
  double worst_ratio = 0.0, worst_norm = 0.0;
  for (std::size_t a = 0; a < 5; ++a) {
    std::vector<double> col(30);
    for (std::size_t j = 0; j < 30; ++j) col[j] = fit.model.weights.at(j, a);
    worst_norm = std::max(worst_norm, std::abs(oracle::norm(col) - 1.0));
    for (std::size_t b = 0; b < a; ++b) {
      const double bound = std::sqrt(col_dot(fit.scores, a, a) * col_dot(fit.scores, b, b));
      worst_ratio = std::max(worst_ratio, std::abs(col_dot(fit.scores, a, b)) / bound);
    }
  }
  return {fit.scores.cols() == 5 && worst_ratio <= 1e-6 && worst_norm <= 1e-8,
          "max |ta.tb|/(|ta||tb|) = " + fmt(worst_ratio) + " (tol 1e-6), max | ||w|| - 1 | = " + fmt(worst_norm) +
              " (tol 1e-8)"};
}

Outcome pls_covariance() {
  std::mt19937_64 gen(103);
  std::normal_distribution<double> nd;
  double min_margin = 1e300;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 5);
    const auto xm = oracle::random_matrix(40, m, gen);
    const auto labels = balanced_labels(40, 3, gen);
    const auto fit = nipals_fit(testing::to_tensor(xm), one_hot(labels, 3), 1);
    const auto xz = oracle::zscore(xm);
    const auto yc = oracle::center(testing::one_hot(labels, 3));
    std::vector<double> w1(m);
    for (std::size_t j = 0; j < m; ++j) w1[j] = fit.model.weights.at(j, 0);
    const double best = oracle::covariance_objective(xz, yc, w1);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> v(m);
      for (auto& e : v) e = nd(gen);
      const double n = oracle::norm(v);
      for (auto& e : v) e /= n;
      min_margin = std::min(min_margin, best - oracle::covariance_objective(xz, yc, v));
    }
  }
  return {min_margin >= -1e-8, "min over 20x1000 of cov(w1) - cov(v) = " + fmt(min_margin) + " (must be >= -1e-8)"};
}

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 gen(104);
  std::normal_distribution<double> nd;
  auto random_input = [&](Shape s) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = nd(gen);
    return t;
  };
  const std::vector<NetworkConfig> nets{
      {"conv-pool-dense", 12, 2, 3,
       {LayerSpec::conv(3, 3, 2), LayerSpec::maxpool(), LayerSpec::flatten(), LayerSpec::dense(3),
        LayerSpec::softmax()}},
      {"two-stage", 20, 3, 4,
       {LayerSpec::conv(4, 4, 2), LayerSpec::maxpool(), LayerSpec::conv(3, 3, 2), LayerSpec::maxpool(),
        LayerSpec::flatten(), LayerSpec::dense(4), LayerSpec::softmax()}},
      linear_classifier(8, 3, "dense-only"),
  };
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& net : nets) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Tensor x = net.input_w == 1 ? random_input({net.input_h}) : random_input({net.input_h, net.input_w});
      const auto r = grad_check(net, init_params(net, seed), x, seed % net.num_classes);
      worst = std::max(worst, r.max_relative_error);
      checked += r.parameters_checked;
    }
  }
  const double secs = elapsed_since(start);
  return {worst <= 1e-4 && secs < 30.0, "max relative error " + fmt(worst) + " over " + std::to_string(checked) +
                                            " parameters (tol 1e-4), " + fmt(secs) + " s (limit 30 s)"};
}

Outcome shape_arithmetic() {
  const auto c1 = preset("convnet1", 500, 2, 4);
  const auto shapes = c1.propagate();
  const auto pools = c1.pool_layers();
  // Oracle: out = in - kernel + 1, pool = floor(out / 2).
  const std::size_t conv_h = 500 - 12 + 1, pool_h = conv_h / 2;
  const auto& p1 = shapes[pools.at(0)];
  const auto c3 = preset("convnet3", 500, 2, 4);
  const auto taps = forward_with_taps(init_params(c3, 1), c3, Tensor({500, 2}, 0.5)).pool_taps.size();
  const bool ok = p1.h == pool_h && pool_h == 244 && p1.w == 1 && p1.size() == 24 * 244 && p1.size() == 5856 &&
                  c3.pool_count() == 4 && taps == 4;
  return {ok, "convnet1 pool-1 " + std::to_string(p1.maps) + "x" + std::to_string(p1.h) + "x" + std::to_string(p1.w) +
                  " = " + std::to_string(p1.size()) + " (want 24x244x1 = 5856); convnet3 taps " +
                  std::to_string(taps) + " (want 4)"};
}

Outcome latent_width() {
  SyntheticSpec spec;
  spec.subjects = 1;
  spec.windows_per_recording = 10;
  spec.window_length = 128;
  spec.sampling_rate_hz = 128.0;
  const auto ds = build_dataset(synthetic_recordings(spec), 1.0);
  const auto cfg = preset("convnet3", ds.window_length, ds.channels, ds.num_classes());
  LhnOptions opts;
  opts.components = 19;
  opts.classifier_hyper.epochs = 1;
  const auto model = lhn_fit(init_params(cfg, 1), cfg, ds, opts);
  const bool ok = model.pls_models.size() == 4 && model.latent_dim() == 76 &&
                  model.classifier_config.input_h == 76;
  return {ok, "convnet3 with c=19 on " + std::to_string(ds.size()) + " windows: " +
                  std::to_string(model.pls_models.size()) + " PLS models, latent width " +
                  std::to_string(model.latent_dim()) + " (want 76)"};
}

Outcome windowing() {
  std::mt19937_64 gen(107);
  std::uniform_int_distribution<std::size_t> d(1, 1000);
  std::size_t mismatches = 0;
  const std::size_t cases = 20000;
  for (std::size_t i = 0; i < cases; ++i) {
    const std::size_t n = d(gen), t = d(gen), s = d(gen);
    if (window_count(n, t, s) != oracle::scan_count(n, t, s)) ++mismatches;
  }
  // Segmenting a real recording must agree with the count as well.
  SensorRecording rec{Tensor({1234, 1}), 100.0, "a", std::nullopt};
  const auto segs = segment(rec, 5.0, 37);
  const bool seg_ok = segs.size() == oracle::scan_count(1234, 500, 37);
  const std::size_t t500 = window_length(5.0, 100.0), t50 = window_length(1.0, 50.0);
  return {mismatches == 0 && seg_ok && t500 == 500 && t50 == 50,
          std::to_string(mismatches) + " mismatches in " + std::to_string(cases) +
              " random cases; 5 s @ 100 Hz -> " + std::to_string(t500) + ", 1 s @ 50 Hz -> " + std::to_string(t50)};
}

CvReport cv_report;
bool cv_ran = false;

Outcome end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticSpec spec;  // 4 classes x 4 subjects x 40 windows of 64 samples
  const auto ds = build_dataset(synthetic_recordings(spec), 1.0);
  CvOptions opts;
  opts.folds = 10;
  opts.seed = 1;
  opts.with_ablation = true;
  cv_report = run_cv(ds, "convnet1", opts);
  cv_ran = true;
  const double secs = elapsed_since(start);

  std::cout << "       fold  baseline  lhn       improvement_pp\n";
  for (const auto& f : cv_report.folds) {
    std::printf("       %4zu  %.4f    %.4f    %+.2f\n", f.fold, f.baseline_recall, f.lhn_recall, f.improvement_pp);
  }
  const bool ok = ds.size() >= 600 && cv_report.mean_baseline >= 0.80 &&
                  cv_report.mean_lhn >= cv_report.mean_baseline - 0.01 && secs < 300.0;
  return {ok, std::to_string(ds.size()) + " windows, baseline " + fmt(cv_report.mean_baseline) +
                  " (>= 0.80), LHN " + fmt(cv_report.mean_lhn) + ", improvement " +
                  fmt(cv_report.mean_improvement_pp) + " p.p. (>= -1), " + fmt(secs) + " s (limit 300 s)"};
}

Outcome freezing() {
  testing::TempDir dir("accept_freeze");
  const auto data = (dir / "d.csv").string(), out = (dir / "out").string();
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  if (run({"synth", "--out", data, "--windows", "6", "--subjects", "1"}) != 0) return {false, "synth failed"};
  const std::vector<std::string> common{"--data", data, "--rate", "64", "--window-seconds", "1", "--epochs", "3",
                                        "--out-dir", out};
  auto with = [&](std::string sub, std::vector<std::string> extra) {
    std::vector<std::string> a{std::move(sub)};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  if (run(with("train", {})) != 0) return {false, "train failed: " + sink.str()};
  const auto params = out + "/params.lcnn";
  const auto before = io::read_file(params);
  const int code = run(with("lhn-fit", {"--params", params}));
  const auto after = io::read_file(params);
  const auto h0 = io::fnv1a(before), h1 = io::fnv1a(after);
  return {code == 0 && before == after, "lhn-fit exit " + std::to_string(code) + ", checksum " + io::hex64(h0) +
                                            " -> " + io::hex64(h1) + ", bytes " +
                                            (before == after ? "identical" : "CHANGED")};
}

Outcome timing_harness() {
  std::vector<double> samples(30);
  std::mt19937_64 gen(110);
  std::normal_distribution<double> d(2e-4, 1e-6);
  for (auto& v : samples) v = d(gen);
  const auto r = compare_samples(samples, samples);
  const double crit = r.a.ci_half_width / (r.a.stddev / std::sqrt(30.0));
  const double numeric = oracle::t_quantile(0.975, 29);
  const bool ok = r.t_statistic == 0.0 && r.verdict() == "equivalent" && std::abs(crit - numeric) <= 1e-3 &&
                  std::abs(crit - 2.045) <= 1e-3;
  return {ok, "t = " + fmt(r.t_statistic) + ", verdict " + r.verdict() + ", CI critical value " + fmt(crit) +
                  " vs Simpson-CDF oracle " + fmt(numeric)};
}

Outcome fold_properties() {
  std::mt19937_64 gen(111);
  std::uniform_int_distribution<std::size_t> nd(10, 2000), kd(1, 12);
  std::size_t bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = nd(gen), k = kd(gen);
    const std::uint64_t seed = gen();
    std::uniform_int_distribution<std::size_t> ld(0, k - 1);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = ld(gen);
    const auto fa = kfold_split(labels, 10, seed);
    std::vector<int> seen(n, 0);
    std::vector<std::size_t> sizes;
    for (std::size_t f = 0; f < 10; ++f) {
      const auto test = fa.test_indices(f);
      sizes.push_back(test.size());
      for (auto i : test) ++seen[i];
    }
    const bool partition = std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    const bool deterministic = kfold_split(labels, 10, seed).fold_of_window == fa.fold_of_window;
    if (!partition || *hi - *lo > 1 || !deterministic) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 200 random (n, seed) pairs violate disjoint/cover/balance/determinism"};
}

Outcome ablation_direction() {
  if (!cv_ran || !cv_report.mean_ablation) return {false, "end-to-end run unavailable"};
  const double raw = *cv_report.mean_ablation, reduced = cv_report.mean_lhn;
  return {raw <= reduced + 0.01, "no-reduction " + fmt(raw) + " vs PLS-reduced " + fmt(reduced) + " (gap " +
                                     fmt(100.0 * (raw - reduced)) + " p.p., must be <= 1)"};
}

}  // namespace

int main() {
  report(1, "PLS closed form", pls_closed_form);
  report(2, "PLS score orthogonality", pls_orthogonality);
  report(3, "PLS covariance maximization", pls_covariance);
  report(4, "gradient check", gradient_check);
  report(5, "shape arithmetic", shape_arithmetic);
  report(6, "latent width", latent_width);
  report(7, "windowing", windowing);
  report(8, "end-to-end synthetic 10-fold CV", end_to_end);
  report(9, "freezing contract", freezing);
  report(10, "timing harness", timing_harness);
  report(11, "fold properties", fold_properties);
  report(12, "ablation direction", ablation_direction);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
