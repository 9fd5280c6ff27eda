#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lhn {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t count(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t total() const;
  std::size_t num_classes() const noexcept { return k_; }

  static ConfusionMatrix from_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                          std::size_t num_classes);

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

/// Unweighted mean of per-class recall. Throws UndefinedClassError when a
/// class has no true samples.
double recall_macro(const ConfusionMatrix& cm);
/// Macro recall over the classes that do occur; 0 for an empty matrix.
double recall_macro_observed(const ConfusionMatrix& cm);

}  // namespace lhn
