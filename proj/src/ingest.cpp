#include "lhn/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string_view>

#include "lhn/error.hpp"

namespace lhn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::size_t find_column(const std::vector<std::string_view>& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double parse_number(std::string_view cell, std::size_t row, std::string_view column) {
  double v = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v)) {
    throw ParseError(row, "column '" + std::string(column) + "': not a number: '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.label);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.class_names = class_names;
  out.channels = channels;
  out.window_length = window_length;
  out.windows.reserve(indices.size());
  for (auto i : indices) out.windows.push_back(windows.at(i));
  return out;
}

std::vector<SensorRecording> load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  if (!(schema.sampling_rate_hz > 0.0)) throw ParameterError("sampling rate must be positive");

  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());

  std::string header_line;
  if (!std::getline(in, header_line) || trim(header_line).empty()) {
    throw InputError("empty input: " + path.string());
  }
  // Strip a UTF-8 byte-order mark.
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  const auto header = split_fields(header_line);

  const std::size_t label_idx = find_column(header, schema.label_column);
  std::optional<std::size_t> subject_idx;
  if (!schema.subject_column.empty()) {
    auto it = std::find(header.begin(), header.end(), std::string_view(schema.subject_column));
    if (it != header.end()) subject_idx = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<std::string> channel_names = schema.channel_columns;
  if (channel_names.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != label_idx && subject_idx != i) channel_names.emplace_back(header[i]);
    if (channel_names.empty()) throw SchemaError("no channel columns in " + path.string());
  }
  std::vector<std::size_t> channel_idx;
  for (const auto& name : channel_names) channel_idx.push_back(find_column(header, name));

  struct Run {
    std::string label;
    std::optional<std::string> subject;
    std::vector<double> values;
  };
  std::vector<Run> runs;
  const std::size_t channels = channel_idx.size();

  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, got " +
                                std::to_string(fields.size()));
    }
    std::string label(fields[label_idx]);
    if (label.empty()) throw ParseError(row, "empty label");
    std::optional<std::string> subject;
    if (subject_idx) subject = std::string(fields[*subject_idx]);

    if (runs.empty() || runs.back().label != label || runs.back().subject != subject) {
      runs.push_back(Run{std::move(label), std::move(subject), {}});
    }
    for (std::size_t c = 0; c < channels; ++c) {
      runs.back().values.push_back(parse_number(fields[channel_idx[c]], row, channel_names[c]));
    }
  }
  if (runs.empty()) throw InputError("empty input: " + path.string() + " has no data rows");

  std::vector<SensorRecording> out;
  out.reserve(runs.size());
  for (auto& r : runs) {
    const std::size_t n = r.values.size() / channels;
    out.push_back(SensorRecording{Tensor({n, channels}, std::move(r.values)), schema.sampling_rate_hz,
                                  std::move(r.label), std::move(r.subject)});
  }
  return out;
}

std::size_t window_length(double window_seconds, double sampling_rate_hz) {
  if (!(window_seconds > 0.0) || !(sampling_rate_hz > 0.0)) {
    throw ParameterError("window length and sampling rate must be positive");
  }
  // The small slack keeps products like 0.29 * 100 from flooring to 28.
  const double product = window_seconds * sampling_rate_hz;
  const auto t = static_cast<std::size_t>(std::floor(product * (1.0 + 1e-12)));
  if (t < 1) throw ParameterError("window shorter than one sample");
  return t;
}

std::size_t window_count(std::size_t n, std::size_t t, std::size_t stride) {
  if (t == 0 || stride == 0) throw ParameterError("window length and stride must be positive");
  if (n < t) return 0;
  return (n - t) / stride + 1;
}

std::vector<Window> segment(const SensorRecording& rec, double window_seconds, std::size_t stride_samples) {
  const std::size_t t = window_length(window_seconds, rec.sampling_rate_hz);
  const std::size_t count = window_count(rec.length(), t, stride_samples);
  const std::size_t ch = rec.channels();
  std::vector<Window> out;
  out.reserve(count);
  const auto& src = rec.samples.values();
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = src.begin() + static_cast<std::ptrdiff_t>(i * stride_samples * ch);
    out.push_back(Window{Tensor({t, ch}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(t * ch))), 0});
  }
  return out;
}

Dataset build_dataset(const std::vector<SensorRecording>& recordings, double window_seconds,
                      std::size_t stride_samples) {
  if (recordings.empty()) throw InputError("no recordings");
  const std::size_t channels = recordings.front().channels();
  const double rate = recordings.front().sampling_rate_hz;
  for (const auto& r : recordings) {
    if (r.channels() != channels) throw ShapeError("recordings have different channel counts");
    if (r.sampling_rate_hz != rate) throw ShapeError("recordings have different sampling rates");
  }
  const std::size_t t = window_length(window_seconds, rate);
  const std::size_t stride = stride_samples == 0 ? t : stride_samples;

  std::set<std::string> names;
  for (const auto& r : recordings) names.insert(r.label);
  Dataset ds;
  ds.class_names.assign(names.begin(), names.end());
  ds.channels = channels;
  ds.window_length = t;

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) index[ds.class_names[i]] = i;

  std::vector<std::size_t> per_class(ds.class_names.size(), 0);
  for (const auto& r : recordings) {
    auto windows = segment(r, window_seconds, stride);
    const std::size_t label = index.at(r.label);
    per_class[label] += windows.size();
    for (auto& w : windows) {
      w.label = label;
      ds.windows.push_back(std::move(w));
    }
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 0) {
      throw DegenerateClassError("class '" + ds.class_names[c] + "' has no windows of " + std::to_string(t) +
                                 " samples");
    }
  }
  return ds;
}

}  // namespace lhn
