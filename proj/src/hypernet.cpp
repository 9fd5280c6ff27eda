#include "lhn/hypernet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "lhn/binary_io.hpp"
#include "lhn/error.hpp"
#include "lhn/random.hpp"

namespace lhn {

namespace {

constexpr char kMagic[] = "LLHN";
constexpr std::uint32_t kVersion = 1;

void require_two_classes(const Dataset& ds) {
  std::vector<bool> seen(ds.num_classes(), false);
  std::size_t distinct = 0;
  for (const auto& w : ds.windows) {
    if (w.label >= seen.size()) throw RangeError("window label out of range");
    if (!seen[w.label]) {
      seen[w.label] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw DegenerateClassError("LHN needs at least two classes in the training data");
}

std::vector<double> concat(const std::vector<std::vector<double>>& parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void write_blob(io::Writer& w, const std::vector<std::uint8_t>& blob) {
  w.u64(blob.size());
  w.bytes(blob);
}

std::vector<std::uint8_t> read_blob(io::Reader& r) {
  const auto at = r.offset();
  const auto len = r.u64();
  if (len > (std::uint64_t{1} << 40)) throw FormatError(at, "implausible blob length");
  return r.bytes(len);
}

}  // namespace

std::vector<std::size_t> LhnModel::layer_widths() const {
  if (!reduced) return tap_dims;
  std::vector<std::size_t> out;
  for (const auto& p : pls_models) out.push_back(p.components());
  return out;
}

std::size_t LhnModel::latent_dim() const {
  std::size_t d = 0;
  for (auto w : layer_widths()) d += w;
  return d;
}

std::vector<Tensor> collect_pool_features(const NetworkParams& params, const NetworkConfig& config,
                                          const Dataset& dataset) {
  if (dataset.windows.empty()) throw InputError("cannot collect features from an empty dataset");
  const std::size_t d = config.pool_count();
  std::vector<std::vector<double>> data(d);
  std::vector<std::size_t> widths(d, 0);
  for (const auto& w : dataset.windows) {
    auto trace = forward_with_taps(params, config, w.values);
    for (std::size_t i = 0; i < d; ++i) {
      widths[i] = trace.pool_taps[i].size();
      data[i].insert(data[i].end(), trace.pool_taps[i].begin(), trace.pool_taps[i].end());
    }
  }
  std::vector<Tensor> out;
  out.reserve(d);
  for (std::size_t i = 0; i < d; ++i) out.emplace_back(Shape{dataset.size(), widths[i]}, std::move(data[i]));
  return out;
}

LhnModel lhn_fit(const NetworkParams& params, const NetworkConfig& config, const Dataset& train,
                 const LhnOptions& options) {
  if (train.windows.empty()) throw InputError("cannot fit an LHN on an empty dataset");
  if (options.components == 0) throw ParameterError("component count must be at least 1");
  if (config.pool_count() == 0) throw ParameterError("network '" + config.name + "' has no pooling layers");
  require_two_classes(train);

  LhnModel model;
  model.network_name = config.name;
  model.network_hash = network_hash(config, params);
  model.reduced = options.reduce;
  model.requested_components = options.components;

  const auto features = collect_pool_features(params, config, train);
  for (const auto& f : features) model.tap_dims.push_back(f.cols());
  const auto labels = train.labels();

  Tensor latent;
  if (options.reduce) {
    const Tensor y = one_hot(labels, train.num_classes());
    std::vector<Tensor> projected;
    for (const auto& x : features) {
      auto fit = nipals_fit(x, y, options.components, options.nipals);
      projected.push_back(pls_transform(fit.model, x));
      model.pls_models.push_back(std::move(fit.model));
    }
    latent = hconcat(projected);
  } else {
    latent = hconcat(features);
  }

  model.latent_standardizer = standardize_fit(latent);
  const Tensor z = standardize_apply(model.latent_standardizer, latent);
  std::vector<Tensor> inputs;
  inputs.reserve(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    inputs.push_back(Tensor::vector(std::vector<double>(z.row(i).begin(), z.row(i).end())));
  }
  model.classifier_config = linear_classifier(z.cols(), train.num_classes());
  model.classifier_params = train_samples(model.classifier_config, inputs, labels, options.classifier_hyper);
  return model;
}

std::vector<double> lhn_transform_taps(const LhnModel& model, const std::vector<std::vector<double>>& taps) {
  if (taps.size() != model.pool_layers()) {
    throw ShapeError("LHN expects " + std::to_string(model.pool_layers()) + " pooling taps, got " +
                     std::to_string(taps.size()));
  }
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (taps[i].size() != model.tap_dims[i]) {
      throw ShapeError("pool tap " + std::to_string(i) + " has width " + std::to_string(taps[i].size()) +
                       ", LHN expects " + std::to_string(model.tap_dims[i]));
    }
  }
  if (!model.reduced) return concat(taps);
  std::vector<double> out(model.latent_dim());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const auto c = model.pls_models[i].components();
    pls_transform_row(model.pls_models[i], taps[i], std::span<double>(out).subspan(offset, c));
    offset += c;
  }
  return out;
}

std::vector<double> lhn_transform(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                                  const Tensor& window) {
  return lhn_transform_taps(model, forward_with_taps(params, config, window).pool_taps);
}

Tensor lhn_transform_dataset(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                             const Dataset& dataset) {
  if (dataset.windows.empty()) throw InputError("empty dataset");
  std::vector<std::vector<double>> rows;
  rows.reserve(dataset.size());
  for (const auto& w : dataset.windows) rows.push_back(lhn_transform(model, params, config, w.values));
  return stack_rows(rows);
}

std::vector<double> lhn_logits(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                               const Tensor& window) {
  auto latent = lhn_transform(model, params, config, window);
  standardize_apply_inplace(model.latent_standardizer, latent);
  const auto n = latent.size();
  return forward_with_taps(model.classifier_params, model.classifier_config, Tensor({n}, std::move(latent))).logits;
}

std::size_t lhn_predict(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                        const Tensor& window) {
  return argmax(lhn_logits(model, params, config, window));
}

std::vector<ProjectionRow> export_projection(const LhnModel& model, const NetworkParams& params,
                                             const NetworkConfig& config, const Dataset& dataset,
                                             ProjectionLayers layers) {
  if (dataset.windows.empty()) throw InputError("empty dataset");
  if (!model.reduced) throw ParameterError("projection export needs a PLS-reduced LHN");
  if (model.requested_components < 2) throw ParameterError("projection export needs at least 2 components");

  Tensor scores;
  if (layers == ProjectionLayers::last) {
    const auto& pls = model.pls_models.back();
    if (pls.components() < 2) throw ParameterError("last pooling layer has fewer than 2 components");
    auto features = collect_pool_features(params, config, dataset);
    scores = pls_transform(pls, features.back());
  } else {
    const Tensor x = hconcat(collect_pool_features(params, config, dataset));
    const auto labels = dataset.labels();
    auto fit = nipals_fit(x, one_hot(labels, dataset.num_classes()), 2);
    if (fit.model.components() < 2) throw ParameterError("dataset too small for a 2-component projection");
    scores = pls_transform(fit.model, x);
  }
  std::vector<ProjectionRow> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    rows.push_back({scores.at(i, 0), scores.at(i, 1), dataset.class_names.at(dataset.windows[i].label)});
  }
  return rows;
}

std::string projection_csv(const std::vector<ProjectionRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "comp1,comp2,label\n";
  for (const auto& r : rows) os << r.comp1 << ',' << r.comp2 << ',' << r.label << '\n';
  return os.str();
}

double centroid_separation(const std::vector<ProjectionRow>& rows) {
  std::map<std::string, std::array<double, 3>> acc;
  for (const auto& r : rows) {
    auto& a = acc[r.label];
    a[0] += r.comp1;
    a[1] += r.comp2;
    a[2] += 1.0;
  }
  std::vector<std::pair<double, double>> centroids;
  for (const auto& [_, a] : acc) centroids.emplace_back(a[0] / a[2], a[1] / a[2]);
  if (centroids.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      sum += std::hypot(centroids[i].first - centroids[j].first, centroids[i].second - centroids[j].second);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<std::uint8_t> serialize_lhn(const LhnModel& model) {
  io::Writer w(kMagic, kVersion);
  w.str(model.network_name);
  w.u64(model.network_hash);
  w.u8(model.reduced ? 1 : 0);
  w.u64(model.requested_components);
  w.u64(model.tap_dims.size());
  for (auto d : model.tap_dims) w.u64(d);
  w.u64(model.pls_models.size());
  for (const auto& p : model.pls_models) write_blob(w, serialize_model(p));
  const auto& s = model.latent_standardizer;
  w.u64(s.dim());
  w.f64(s.epsilon);
  w.f64s(s.means);
  w.f64s(s.stds);
  write_blob(w, serialize_network(model.classifier_config, model.classifier_params));
  return w.buffer();
}

LhnModel deserialize_lhn(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes), kMagic, kVersion);
  LhnModel m;
  m.network_name = r.str();
  m.network_hash = r.u64();
  const auto reduced_at = r.offset();
  const auto reduced = r.u8();
  if (reduced > 1) throw FormatError(reduced_at, "bad reduction flag");
  m.reduced = reduced == 1;
  m.requested_components = r.u64();
  const auto d_at = r.offset();
  const auto d = r.u64();
  if (d == 0 || d > 1024) throw FormatError(d_at, "implausible pooling layer count");
  for (std::uint64_t i = 0; i < d; ++i) m.tap_dims.push_back(r.u64());
  const auto pls_at = r.offset();
  const auto pls_count = r.u64();
  if (pls_count != (m.reduced ? d : 0)) throw FormatError(pls_at, "PLS model count does not match layers");
  for (std::uint64_t i = 0; i < pls_count; ++i) {
    const auto at = r.offset();
    m.pls_models.push_back(deserialize_model(read_blob(r)));
    if (m.pls_models.back().input_dim() != m.tap_dims[i]) throw FormatError(at, "PLS input width mismatch");
  }
  const auto std_at = r.offset();
  const auto dim = r.u64();
  if (dim != m.latent_dim()) throw FormatError(std_at, "latent standardizer width mismatch");
  m.latent_standardizer.epsilon = r.f64();
  m.latent_standardizer.means = r.f64s(dim);
  m.latent_standardizer.stds = r.f64s(dim);
  const auto clf_at = r.offset();
  deserialize_network(read_blob(r), m.classifier_config, m.classifier_params);
  if (m.classifier_config.input_h != dim) throw FormatError(clf_at, "classifier width mismatch");
  r.expect_end();
  return m;
}

void save_lhn(const std::filesystem::path& path, const LhnModel& model) {
  io::write_file_atomic(path, serialize_lhn(model));
}

LhnModel load_lhn(const std::filesystem::path& path) { return deserialize_lhn(io::read_file(path)); }

}  // namespace lhn
