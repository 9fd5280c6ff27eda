#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lhn/convnet.hpp"
#include "lhn/error.hpp"

namespace lhn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, missing input files, infeasible architecture for the window.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Settings shared by every subcommand. Flags override config-file values.
struct RunConfig {
  std::filesystem::path data;
  /// Empty: every column other than the label and subject columns.
  std::vector<std::string> channels;
  std::string label_column = "label";
  std::string subject_column = "subject";
  double sampling_rate_hz = 100.0;
  double window_seconds = 5.0;
  /// 0 selects non-overlapping windows.
  std::size_t stride = 0;
  std::string arch = "convnet1";
  TrainHyper hyper;
  std::size_t components = 19;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  std::size_t threads = 1;

  /// Throws ConfigError naming the offending field or path.
  void validate(bool needs_data = true) const;
};

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lhn::cli
