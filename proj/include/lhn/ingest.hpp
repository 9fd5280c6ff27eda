#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lhn/tensor.hpp"

namespace lhn {

/// One contiguous recording of a single activity: samples is [N x channels].
struct SensorRecording {
  Tensor samples;
  double sampling_rate_hz = 0.0;
  std::string label;
  std::optional<std::string> subject_id;

  std::size_t length() const { return samples.rows(); }
  std::size_t channels() const { return samples.cols(); }
};

/// A fixed-length slice [t x channels] of a recording, with its class index.
struct Window {
  Tensor values;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Window> windows;
  std::vector<std::string> class_names;
  std::size_t channels = 0;
  std::size_t window_length = 0;

  std::size_t size() const noexcept { return windows.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::vector<std::size_t> labels() const;
  /// Windows at the given indices; class names and shape are kept.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct CsvSchema {
  /// Empty: every column except the label and subject columns.
  std::vector<std::string> channel_columns;
  std::string label_column = "label";
  /// Used when the header has it; an empty name disables subject grouping.
  std::string subject_column = "subject";
  double sampling_rate_hz = 0.0;
};

/// Reads a header-first CSV and groups contiguous runs of identical
/// (label, subject) rows into recordings, in file order.
std::vector<SensorRecording> load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Number of samples per window: floor(window_seconds * rate).
std::size_t window_length(double window_seconds, double sampling_rate_hz);

/// Number of windows of length t with the given stride that fit in n samples.
std::size_t window_count(std::size_t n, std::size_t t, std::size_t stride);

/// Windows carry label index 0; build_dataset assigns real indices.
std::vector<Window> segment(const SensorRecording& rec, double window_seconds, std::size_t stride_samples);

/// stride_samples == 0 selects non-overlapping windows (stride = t).
Dataset build_dataset(const std::vector<SensorRecording>& recordings, double window_seconds,
                      std::size_t stride_samples = 0);

}  // namespace lhn
