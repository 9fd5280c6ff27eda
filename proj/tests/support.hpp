#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lhn/ingest.hpp"
#include "lhn/synthetic.hpp"
#include "lhn/tensor.hpp"
#include "oracles.hpp"

namespace testing {

inline lhn::Tensor to_tensor(const oracle::Matrix& m) {
  lhn::Tensor t({m.size(), m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t.at(i, j) = m[i][j];
  return t;
}

inline oracle::Matrix to_matrix(const lhn::Tensor& t) {
  oracle::Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline oracle::Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t k) {
  oracle::Matrix y(labels.size(), std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) y[i][labels[i]] = 1.0;
  return y;
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lhn_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small four-class synthetic dataset of 64-sample windows.
inline lhn::Dataset small_synthetic(std::size_t windows_per_recording = 6, std::size_t subjects = 2,
                                    std::uint64_t seed = 7) {
  lhn::SyntheticSpec spec;
  spec.subjects = subjects;
  spec.windows_per_recording = windows_per_recording;
  spec.window_length = 64;
  spec.sampling_rate_hz = 64.0;
  spec.seed = seed;
  return lhn::build_dataset(lhn::synthetic_recordings(spec), 1.0);
}

}  // namespace testing
