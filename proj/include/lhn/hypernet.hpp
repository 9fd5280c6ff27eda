#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lhn/convnet.hpp"
#include "lhn/ingest.hpp"
#include "lhn/pls.hpp"

namespace lhn {

struct LhnOptions {
  /// Components per pooling layer; clamped per layer to min(m_i, n - 1).
  std::size_t components = 19;
  /// false feeds the raw concatenated taps to the classifier (no PLS).
  bool reduce = true;
  TrainHyper classifier_hyper;
  NipalsOptions nipals;
};

/// Latent HyperNet attached to a frozen network: one PLS model per
/// max-pooling layer plus a softmax classifier over the concatenated
/// latent features.
struct LhnModel {
  std::string network_name;
  std::uint64_t network_hash = 0;
  bool reduced = true;
  std::size_t requested_components = 0;
  /// Flattened width of each pooling tap.
  std::vector<std::size_t> tap_dims;
  /// One per pooling layer when reduced, empty otherwise.
  std::vector<PlsModel> pls_models;
  /// z-scores the latent vector before the classifier.
  Standardizer latent_standardizer;
  NetworkConfig classifier_config;
  NetworkParams classifier_params;

  std::size_t pool_layers() const noexcept { return tap_dims.size(); }
  /// Per-layer latent width (c_i, or m_i without reduction).
  std::vector<std::size_t> layer_widths() const;
  std::size_t latent_dim() const;
  std::size_t num_classes() const noexcept { return classifier_config.num_classes; }
};

/// Row j of matrix i is the flattened pool-i output of window j.
std::vector<Tensor> collect_pool_features(const NetworkParams& params, const NetworkConfig& config,
                                          const Dataset& dataset);

LhnModel lhn_fit(const NetworkParams& params, const NetworkConfig& config, const Dataset& train,
                 const LhnOptions& options = {});

/// Latent vector of one window: per-layer projections concatenated in layer order.
std::vector<double> lhn_transform(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                                  const Tensor& window);
std::vector<double> lhn_transform_taps(const LhnModel& model, const std::vector<std::vector<double>>& taps);
/// [n x latent_dim] latent matrix of a dataset.
Tensor lhn_transform_dataset(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                             const Dataset& dataset);

std::vector<double> lhn_logits(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                               const Tensor& window);
std::size_t lhn_predict(const LhnModel& model, const NetworkParams& params, const NetworkConfig& config,
                        const Tensor& window);

enum class ProjectionLayers { last, all };

struct ProjectionRow {
  double comp1 = 0.0;
  double comp2 = 0.0;
  std::string label;
};

/// Two-component scatter of a dataset. `last` uses the final pool layer's
/// PLS model from the fitted LHN; `all` fits a two-component PLS on the
/// concatenated taps of this dataset.
std::vector<ProjectionRow> export_projection(const LhnModel& model, const NetworkParams& params,
                                             const NetworkConfig& config, const Dataset& dataset,
                                             ProjectionLayers layers);
/// Header `comp1,comp2,label`, one row per window.
std::string projection_csv(const std::vector<ProjectionRow>& rows);
/// Mean pairwise distance between class centroids of a projection.
double centroid_separation(const std::vector<ProjectionRow>& rows);

// Model file "LLHN" v1. See README for the layout.
std::vector<std::uint8_t> serialize_lhn(const LhnModel& model);
LhnModel deserialize_lhn(std::vector<std::uint8_t> bytes);
void save_lhn(const std::filesystem::path& path, const LhnModel& model);
LhnModel load_lhn(const std::filesystem::path& path);

}  // namespace lhn
