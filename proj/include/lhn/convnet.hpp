#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lhn/ingest.hpp"
#include "lhn/tensor.hpp"

namespace lhn {

enum class LayerKind : std::uint8_t { conv = 0, maxpool = 1, flatten = 2, dense = 3, softmax = 4 };

std::string_view to_string(LayerKind kind);

/// One layer of a sequential network. Convolutions are valid (no padding),
/// stride 1, and followed by ReLU; pooling is 2x1 with stride 2 in height.
struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t units = 0;

  static LayerSpec conv(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w) {
    return {LayerKind::conv, filters, kernel_h, kernel_w, 0};
  }
  static LayerSpec maxpool() { return {LayerKind::maxpool, 0, 2, 1, 0}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 0, 0}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::dense, 0, 0, 0, units}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Activation volume [maps x h x w]; flat layers use maps = size, h = w = 1.
struct FeatureShape {
  std::size_t maps = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t size() const noexcept { return maps * h * w; }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

/// Sequential architecture over a single-map input of height input_h (time)
/// and width input_w (channels).
struct NetworkConfig {
  std::string name;
  std::size_t input_h = 0;
  std::size_t input_w = 0;
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;

  /// Output shape of every layer. Throws ArchitectureInfeasibleError naming
  /// the first layer whose output would be empty, or ParameterError for a
  /// malformed layer sequence.
  std::vector<FeatureShape> propagate() const;
  std::size_t pool_count() const;
  /// Layer indices of the max-pooling layers, in order.
  std::vector<std::size_t> pool_layers() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Architectures convnet1..3. A kernel wider than the feature map it meets
/// is narrowed to the map width, so ConvNet1's second 12x2 kernel becomes
/// 12x1 after the first layer has consumed the channel axis of a 2-channel
/// input. Height is never adapted: a window too short for the stack is
/// rejected with ArchitectureInfeasibleError.
NetworkConfig preset(std::string_view name, std::size_t input_h, std::size_t input_w, std::size_t num_classes);
const std::vector<std::string>& preset_names();

/// Softmax classifier over a flat feature vector: flatten, dense(k), softmax.
NetworkConfig linear_classifier(std::size_t input_dim, std::size_t num_classes, std::string name = "latent");

struct ConvParams {
  Tensor kernels;  // [filters x in_maps x kh x kw]
  Tensor bias;     // [filters]
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct DenseParams {
  Tensor weights;  // [in x out]
  Tensor bias;     // [out]
  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

/// Learned weights, one entry per conv / dense layer in layer order.
struct NetworkParams {
  std::vector<ConvParams> conv;
  std::vector<DenseParams> dense;

  std::size_t parameter_count() const;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Fan-in scaled uniform weights, zero biases.
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);
NetworkParams zeros_like(const NetworkParams& params);
/// Throws ShapeError / NumericError if params do not fit config or are non-finite.
void check_params(const NetworkConfig& config, const NetworkParams& params);

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct PoolResult {
  Tensor output;
  /// Flat input index feeding each output element.
  std::vector<std::size_t> argmax;
};

PoolResult maxpool_forward(const Tensor& input);

struct ForwardTrace {
  /// Output of every layer, index-aligned with config.layers. Conv outputs
  /// are post-ReLU; the softmax output holds probabilities.
  std::vector<Tensor> outputs;
  /// Argmax routing of each pooling layer, aligned with pool_taps.
  std::vector<std::vector<std::size_t>> pool_argmax;
  /// Flattened (map, row, column) output of each max-pooling layer.
  std::vector<std::vector<double>> pool_taps;
  std::vector<double> logits;
};

/// Accepts a [h x w] window or a [1 x h x w] volume.
ForwardTrace forward_with_taps(const NetworkParams& params, const NetworkConfig& config, const Tensor& input);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
std::vector<double> softmax(std::span<const double> logits);

std::size_t predict(const NetworkParams& params, const NetworkConfig& config, const Tensor& input);

/// Cross-entropy loss of one sample; gradients are added into grads.
double backward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, std::size_t label,
                NetworkParams& grads);
double sample_loss(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, std::size_t label);

struct TrainHyper {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 42;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  /// Macro recall of the predictions made during the epoch, before each update.
  double train_recall = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch SGD with momentum on softmax cross-entropy.
NetworkParams train(const NetworkConfig& config, const Dataset& dataset, const TrainHyper& hyper,
                    const EpochCallback& on_epoch = {});
/// Same, over arbitrary inputs shaped for config.
NetworkParams train_samples(const NetworkConfig& config, std::span<const Tensor> inputs,
                            std::span<const std::size_t> labels, const TrainHyper& hyper,
                            const EpochCallback& on_epoch = {});

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
};

/// Central finite differences against backward() for every parameter.
/// Relative error is |a - n| / max(|a|, |n|, 1e-7).
GradCheckResult grad_check(const NetworkConfig& config, const NetworkParams& params, const Tensor& input,
                           std::size_t label, double step = 1e-5);

// Parameter file "LCNN" v1: config then tensors. See docs in README.
std::vector<std::uint8_t> serialize_network(const NetworkConfig& config, const NetworkParams& params);
void deserialize_network(std::vector<std::uint8_t> bytes, NetworkConfig& config, NetworkParams& params);
void save_network(const std::filesystem::path& path, const NetworkConfig& config, const NetworkParams& params);
void load_network(const std::filesystem::path& path, NetworkConfig& config, NetworkParams& params);

/// FNV-1a over the serialized network; used to prove weights stay frozen.
std::uint64_t network_hash(const NetworkConfig& config, const NetworkParams& params);

}  // namespace lhn
