#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lhn/ingest.hpp"

namespace lhn {

/// Two-channel, four-class toy activity data. The classes are the product of
/// two factors living at different time scales:
///   channel 0: a slow oscillation whose period is either one window or a
///              quarter window (long trend)
///   channel 1: sparse three-sample transients that are either positive or
///              negative (short events)
/// Both channels carry Gaussian noise.
struct SyntheticSpec {
  std::size_t subjects = 4;
  std::size_t windows_per_recording = 40;
  std::size_t window_length = 64;
  double sampling_rate_hz = 64.0;
  double noise = 0.5;
  /// Mean gap between transients in samples.
  double transient_spacing = 16.0;
  std::uint64_t seed = 7;
};

/// One recording per (class, subject), each windows_per_recording windows long.
std::vector<SensorRecording> synthetic_recordings(const SyntheticSpec& spec);

/// Header `ch0,ch1,label,subject`.
void write_recordings_csv(const std::vector<SensorRecording>& recordings, const std::filesystem::path& path);

}  // namespace lhn
