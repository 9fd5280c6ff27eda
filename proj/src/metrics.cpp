#include "lhn/metrics.hpp"

#include <numeric>
#include <string>

#include "lhn/error.hpp"

namespace lhn {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ParameterError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= k_ || predicted >= k_) throw RangeError("class index out of range for confusion matrix");
  counts_[truth * k_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(truth * k_),
                         counts_.begin() + static_cast<std::ptrdiff_t>((truth + 1) * k_), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const std::size_t> truth,
                                                  std::span<const std::size_t> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double recall_macro(const ConfusionMatrix& cm) {
  double sum = 0.0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto row = cm.row_sum(c);
    if (row == 0) throw UndefinedClassError("class " + std::to_string(c) + " has no samples; recall undefined");
    sum += static_cast<double>(cm.count(c, c)) / static_cast<double>(row);
  }
  return sum / static_cast<double>(cm.num_classes());
}

double recall_macro_observed(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto row = cm.row_sum(c);
    if (row == 0) continue;
    sum += static_cast<double>(cm.count(c, c)) / static_cast<double>(row);
    ++seen;
  }
  return seen == 0 ? 0.0 : sum / static_cast<double>(seen);
}

}  // namespace lhn
