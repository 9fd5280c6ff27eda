#include "lhn/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "lhn/binary_io.hpp"
#include "lhn/error.hpp"
#include "lhn/random.hpp"

namespace lhn {

std::vector<SensorRecording> synthetic_recordings(const SyntheticSpec& spec) {
  if (spec.subjects == 0 || spec.windows_per_recording == 0 || spec.window_length < 4) {
    throw ParameterError("synthetic spec needs subjects, windows and a window of at least 4 samples");
  }
  struct ClassDef {
    const char* name;
    bool fast_trend;
    double transient_sign;
  };
  static constexpr std::array<ClassDef, 4> classes{{
      {"fast_neg", true, -1.0},
      {"fast_pos", true, 1.0},
      {"slow_neg", false, -1.0},
      {"slow_pos", false, 1.0},
  }};

  Rng rng(spec.seed);
  const std::size_t n = spec.window_length * spec.windows_per_recording;
  const double t = static_cast<double>(spec.window_length);
  std::vector<SensorRecording> out;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    for (const auto& cls : classes) {
      const double period = cls.fast_trend ? t / 4.0 : t;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double amplitude = rng.uniform(0.8, 1.2);
      Tensor samples({n, 2});
      for (std::size_t i = 0; i < n; ++i) {
        samples.at(i, 0) = amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + phase) +
                           spec.noise * rng.normal();
        samples.at(i, 1) = spec.noise * rng.normal();
      }
      // Transient positions from exponential gaps.
      double pos = rng.uniform(0.0, spec.transient_spacing);
      while (pos + 3 < static_cast<double>(n)) {
        const auto p = static_cast<std::size_t>(pos);
        const double height = cls.transient_sign * rng.uniform(1.5, 2.5);
        samples.at(p, 1) += 0.5 * height;
        samples.at(p + 1, 1) += height;
        samples.at(p + 2, 1) += 0.5 * height;
        double u;
        do u = rng.uniform();
        while (u <= 0.0);
        pos += 4.0 - spec.transient_spacing * std::log(u);
      }
      out.push_back(SensorRecording{std::move(samples), spec.sampling_rate_hz, cls.name, "s" + std::to_string(s)});
    }
  }
  return out;
}

void write_recordings_csv(const std::vector<SensorRecording>& recordings, const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t channels = recordings.empty() ? 0 : recordings.front().channels();
  for (std::size_t c = 0; c < channels; ++c) os << "ch" << c << ',';
  os << "label,subject\n";
  for (const auto& r : recordings) {
    if (r.channels() != channels) throw ShapeError("recordings have different channel counts");
    for (std::size_t i = 0; i < r.length(); ++i) {
      for (std::size_t c = 0; c < channels; ++c) os << r.samples.at(i, c) << ',';
      os << r.label << ',' << r.subject_id.value_or("") << '\n';
    }
  }
  io::write_text_atomic(path, os.str());
}

}  // namespace lhn
