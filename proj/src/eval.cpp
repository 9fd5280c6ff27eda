#include "lhn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "lhn/error.hpp"
#include "lhn/random.hpp"

namespace lhn {

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_window.size(); ++i)
    if (fold_of_window[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_window.size(); ++i)
    if (fold_of_window[i] != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(folds, 0);
  for (auto f : fold_of_window) ++sizes[f];
  return sizes;
}

FoldAssignment kfold_split(std::span<const std::size_t> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ParameterError("need at least 2 folds");
  if (labels.size() < folds) {
    throw InputError(std::to_string(labels.size()) + " windows cannot fill " + std::to_string(folds) + " folds");
  }
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  FoldAssignment fa;
  fa.folds = folds;
  fa.fold_of_window.assign(labels.size(), 0);
  // Random starting fold so small datasets do not always overfill fold 0.
  std::size_t position = rng.below(folds);
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto idx : members) fa.fold_of_window[idx] = position++ % folds;
  }
  return fa;
}

FoldAssignment kfold_split(const Dataset& dataset, std::size_t folds, std::uint64_t seed) {
  const auto labels = dataset.labels();
  return kfold_split(labels, folds, seed);
}

namespace {

double evaluate(const Dataset& test, std::size_t k, const std::function<std::size_t(const Tensor&)>& predict_fn) {
  ConfusionMatrix cm(k);
  for (const auto& w : test.windows) cm.add(w.label, predict_fn(w.values));
  // Stratification can leave a rare class out of a small fold.
  return recall_macro_observed(cm);
}

FoldResult run_fold(const Dataset& dataset, const NetworkConfig& config, const FoldAssignment& fa, std::size_t fold,
                    const CvOptions& options) {
  const Dataset train_set = dataset.subset(fa.train_indices(fold));
  const Dataset test_set = dataset.subset(fa.test_indices(fold));
  const std::size_t k = dataset.num_classes();

  TrainHyper net_hyper = options.network_hyper;
  net_hyper.seed = derive_seed(options.seed, 100 + fold);
  const NetworkParams params = train(config, train_set, net_hyper);

  FoldResult r;
  r.fold = fold;
  r.test_size = test_set.size();
  r.baseline_recall = evaluate(test_set, k, [&](const Tensor& x) { return predict(params, config, x); });

  LhnOptions lhn_opts;
  lhn_opts.components = options.components;
  lhn_opts.classifier_hyper = options.classifier_hyper;
  lhn_opts.classifier_hyper.seed = derive_seed(options.seed, 200 + fold);
  const LhnModel model = lhn_fit(params, config, train_set, lhn_opts);
  r.lhn_recall = evaluate(test_set, k, [&](const Tensor& x) { return lhn_predict(model, params, config, x); });
  r.improvement_pp = (r.lhn_recall - r.baseline_recall) * 100.0;

  if (options.with_ablation) {
    lhn_opts.reduce = false;
    const LhnModel raw = lhn_fit(params, config, train_set, lhn_opts);
    r.ablation_recall = evaluate(test_set, k, [&](const Tensor& x) { return lhn_predict(raw, params, config, x); });
  }
  return r;
}

}  // namespace

CvReport run_cv(const Dataset& dataset, const std::string& architecture, const CvOptions& options) {
  if (dataset.windows.empty()) throw InputError("cannot cross-validate an empty dataset");
  const NetworkConfig config =
      preset(architecture, dataset.window_length, dataset.channels, dataset.num_classes());
  const FoldAssignment fa = kfold_split(dataset, options.folds, options.seed);

  CvReport report;
  report.architecture = architecture;
  report.folds.resize(options.folds);

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, options.folds);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t f; (f = next++) < options.folds;) {
      try {
        report.folds[f] = run_fold(dataset, config, fa, f, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const double n = static_cast<double>(report.folds.size());
  double ablation_sum = 0.0;
  for (const auto& f : report.folds) {
    report.mean_baseline += f.baseline_recall / n;
    report.mean_lhn += f.lhn_recall / n;
    report.mean_improvement_pp += f.improvement_pp / n;
    if (f.ablation_recall) ablation_sum += *f.ablation_recall / n;
  }
  if (options.with_ablation) report.mean_ablation = ablation_sum;
  return report;
}

std::string cv_results_csv(const CvReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "fold,system,recall\n";
  for (const auto& f : report.folds) {
    os << f.fold << ",baseline," << f.baseline_recall << '\n';
    os << f.fold << ",lhn," << f.lhn_recall << '\n';
    if (f.ablation_recall) os << f.fold << ",lhn_no_reduction," << *f.ablation_recall << '\n';
  }
  return os.str();
}

std::string cv_summary_csv(const CvReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "system,mean_recall,improvement_pp\n";
  os << "baseline," << report.mean_baseline << ",0\n";
  os << "lhn," << report.mean_lhn << ',' << report.mean_improvement_pp << '\n';
  if (report.mean_ablation) {
    os << "lhn_no_reduction," << *report.mean_ablation << ',' << (*report.mean_ablation - report.mean_baseline) * 100.0
       << '\n';
  }
  return os.str();
}

double t_critical(double confidence, double dof) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ParameterError("confidence must lie in (0, 1)");
  if (!(dof > 0.0)) throw ParameterError("degrees of freedom must be positive");
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 1.0 - (1.0 - confidence) / 2.0);
}

SampleSummary summarize(std::vector<double> samples, double confidence) {
  if (samples.size() < 2) throw InputError("need at least 2 samples, got " + std::to_string(samples.size()));
  SampleSummary s;
  const double n = static_cast<double>(samples.size());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / (n - 1.0));
  s.ci_half_width = t_critical(confidence, n - 1.0) * s.stddev / std::sqrt(n);
  s.samples = std::move(samples);
  return s;
}

TimingReport compare_samples(std::vector<double> a, std::vector<double> b, double confidence, bool welch) {
  TimingReport r;
  r.confidence = confidence;
  r.welch = welch;
  r.a = summarize(std::move(a), confidence);
  r.b = summarize(std::move(b), confidence);
  const double na = static_cast<double>(r.a.samples.size());
  const double nb = static_cast<double>(r.b.samples.size());
  const double va = r.a.stddev * r.a.stddev, vb = r.b.stddev * r.b.stddev;
  double se2;
  if (welch) {
    se2 = va / na + vb / nb;
    const double num = se2 * se2;
    const double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
    r.degrees_of_freedom = den > 0.0 ? num / den : na + nb - 2.0;
  } else {
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    se2 = pooled * (1.0 / na + 1.0 / nb);
    r.degrees_of_freedom = na + nb - 2.0;
  }
  const double diff = r.a.mean - r.b.mean;
  if (se2 > 0.0) {
    r.t_statistic = diff / std::sqrt(se2);
  } else {
    // Zero spread: identical means are trivially equivalent, anything else is not.
    r.t_statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  r.critical_value = t_critical(confidence, r.degrees_of_freedom);
  r.equivalent = std::abs(r.t_statistic) < r.critical_value;
  return r;
}

TimingReport timing_benchmark(const PredictFn& a, const PredictFn& b, const Dataset& dataset, std::size_t runs,
                              double confidence, bool welch) {
  if (runs < 2) throw InputError("timing needs at least 2 runs");
  if (dataset.windows.empty()) throw InputError("timing needs a non-empty dataset");
  using clock = std::chrono::steady_clock;
  // Keeps predictions observable so the calls cannot be optimized away.
  volatile std::size_t sink = 0;
  auto time_once = [&](const PredictFn& fn) {
    const auto start = clock::now();
    std::size_t acc = 0;
    for (const auto& w : dataset.windows) acc += fn(w.values);
    const auto stop = clock::now();
    sink = sink + acc;
    return std::chrono::duration<double>(stop - start).count() / static_cast<double>(dataset.size());
  };
  std::vector<double> ta, tb;
  for (std::size_t r = 0; r < runs; ++r) {
    ta.push_back(time_once(a));
    tb.push_back(time_once(b));
  }
  return compare_samples(std::move(ta), std::move(tb), confidence, welch);
}

std::string timing_csv(const TimingReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "system,run,seconds_per_window\n";
  for (std::size_t i = 0; i < r.a.samples.size(); ++i) os << r.name_a << ',' << i << ',' << r.a.samples[i] << '\n';
  for (std::size_t i = 0; i < r.b.samples.size(); ++i) os << r.name_b << ',' << i << ',' << r.b.samples[i] << '\n';
  os << "\nsystem,runs,mean,ci_low,ci_high,ci_half_width\n";
  for (const auto* s : {&r.a, &r.b}) {
    os << (s == &r.a ? r.name_a : r.name_b) << ',' << s->samples.size() << ',' << s->mean << ',' << s->ci_low() << ','
       << s->ci_high() << ',' << s->ci_half_width << '\n';
  }
  os << "\nt_statistic,degrees_of_freedom,critical_value,verdict\n";
  os << r.t_statistic << ',' << r.degrees_of_freedom << ',' << r.critical_value << ',' << r.verdict() << '\n';
  return os.str();
}

std::string timing_verdict_line(const TimingReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << r.verdict() << ": " << r.name_a << " " << r.a.mean * 1e6 << " us +/- " << r.a.ci_half_width * 1e6 << " vs "
     << r.name_b << " " << r.b.mean * 1e6 << " us +/- " << r.b.ci_half_width * 1e6 << " (t = " << r.t_statistic
     << ", critical " << r.critical_value << ", " << (r.welch ? "Welch" : "pooled") << ", "
     << static_cast<int>(std::lround(r.confidence * 100)) << "% CI)";
  return os.str();
}

}  // namespace lhn
