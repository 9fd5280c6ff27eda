#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhn/convnet.hpp"
#include "lhn/hypernet.hpp"
#include "lhn/ingest.hpp"
#include "lhn/metrics.hpp"

namespace lhn {

struct FoldAssignment {
  std::size_t folds = 0;
  std::vector<std::size_t> fold_of_window;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Stratified shuffled k-fold: each class is shuffled, the classes are laid
/// end to end and positions are dealt round-robin, so fold sizes differ by at
/// most one and every class with >= 2 windows lands in >= 2 folds.
FoldAssignment kfold_split(std::span<const std::size_t> labels, std::size_t folds, std::uint64_t seed);
FoldAssignment kfold_split(const Dataset& dataset, std::size_t folds = 10, std::uint64_t seed = 0);

struct CvOptions {
  std::size_t folds = 10;
  std::size_t components = 19;
  TrainHyper network_hyper;
  TrainHyper classifier_hyper;
  std::uint64_t seed = 0;
  /// Also evaluate the LHN without PLS (raw concatenated taps).
  bool with_ablation = false;
  /// Folds run concurrently on this many threads; results do not depend on it.
  std::size_t threads = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t test_size = 0;
  double baseline_recall = 0.0;
  double lhn_recall = 0.0;
  std::optional<double> ablation_recall;
  /// (lhn - baseline) in percentage points.
  double improvement_pp = 0.0;
};

struct CvReport {
  std::string architecture;
  std::vector<FoldResult> folds;
  double mean_baseline = 0.0;
  double mean_lhn = 0.0;
  std::optional<double> mean_ablation;
  double mean_improvement_pp = 0.0;
};

/// Per fold: train the network on the other folds, score it on the held-out
/// fold, fit the LHN on the same training folds with the network frozen and
/// score it on the same held-out windows.
CvReport run_cv(const Dataset& dataset, const std::string& architecture, const CvOptions& options);

/// `fold,system,recall` rows.
std::string cv_results_csv(const CvReport& report);
/// `system,mean_recall,improvement_pp` rows.
std::string cv_summary_csv(const CvReport& report);

// Timing statistics

/// Two-sided Student t critical value: quantile(1 - alpha/2, dof).
double t_critical(double confidence, double dof);

struct SampleSummary {
  std::vector<double> samples;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation
  double ci_half_width = 0.0;
  double ci_low() const { return mean - ci_half_width; }
  double ci_high() const { return mean + ci_half_width; }
};

SampleSummary summarize(std::vector<double> samples, double confidence = 0.95);

struct TimingReport {
  std::string name_a = "a";
  std::string name_b = "b";
  SampleSummary a;
  SampleSummary b;
  double confidence = 0.95;
  bool welch = false;
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double critical_value = 0.0;
  bool equivalent = true;

  std::string verdict() const { return equivalent ? "equivalent" : "not-equivalent"; }
};

/// Unpaired two-sample t-test; pooled variance unless welch.
TimingReport compare_samples(std::vector<double> a, std::vector<double> b, double confidence = 0.95,
                             bool welch = false);

using PredictFn = std::function<std::size_t(const Tensor&)>;

/// Runs each predictor over every window `runs` times, alternating a and b,
/// recording mean per-window wall time (seconds) per run.
TimingReport timing_benchmark(const PredictFn& a, const PredictFn& b, const Dataset& dataset, std::size_t runs = 30,
                              double confidence = 0.95, bool welch = false);

/// `system,run,seconds_per_window` rows followed by per-system summary rows.
std::string timing_csv(const TimingReport& report);
std::string timing_verdict_line(const TimingReport& report);

}  // namespace lhn
