#include "lhn/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lhn/binary_io.hpp"
#include "lhn/error.hpp"
#include "lhn/metrics.hpp"
#include "lhn/random.hpp"

namespace lhn {

namespace {

constexpr char kMagic[] = "LCNN";
constexpr std::uint32_t kVersion = 1;

std::string describe(const LayerSpec& l) {
  std::string s(to_string(l.kind));
  if (l.kind == LayerKind::conv) {
    s += "(" + std::to_string(l.filters) + ", " + std::to_string(l.kernel_h) + "x" + std::to_string(l.kernel_w) + ")";
  } else if (l.kind == LayerKind::dense) {
    s += "(" + std::to_string(l.units) + ")";
  }
  return s;
}

Tensor as_volume(const NetworkConfig& config, const Tensor& input) {
  if (input.rank() == 2 && input.extent(0) == config.input_h && input.extent(1) == config.input_w) {
    return input.reshaped({1, config.input_h, config.input_w});
  }
  if (input.rank() == 3 && input.extent(0) == 1 && input.extent(1) == config.input_h &&
      input.extent(2) == config.input_w) {
    return input;
  }
  if (input.rank() == 1 && config.input_w == 1 && input.extent(0) == config.input_h) {
    return input.reshaped({1, config.input_h, 1});
  }
  throw ShapeError("network '" + config.name + "' expects input " +
                   shape_string({config.input_h, config.input_w}) + ", got " + shape_string(input.shape()));
}

void check_param_shapes(const NetworkConfig& config, const NetworkParams& params,
                        const std::vector<FeatureShape>& shapes) {
  std::size_t ci = 0, di = 0;
  FeatureShape in{1, config.input_h, config.input_w};
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    if (l.kind == LayerKind::conv) {
      if (ci >= params.conv.size()) throw ShapeError("missing parameters for conv layer " + std::to_string(i));
      const auto& p = params.conv[ci++];
      const Shape want{l.filters, in.maps, l.kernel_h, l.kernel_w};
      if (p.kernels.shape() != want || p.bias.shape() != Shape{l.filters}) {
        throw ShapeError("conv layer " + std::to_string(i) + " expects kernels " + shape_string(want));
      }
    } else if (l.kind == LayerKind::dense) {
      if (di >= params.dense.size()) throw ShapeError("missing parameters for dense layer " + std::to_string(i));
      const auto& p = params.dense[di++];
      const Shape want{in.size(), l.units};
      if (p.weights.shape() != want || p.bias.shape() != Shape{l.units}) {
        throw ShapeError("dense layer " + std::to_string(i) + " expects weights " + shape_string(want));
      }
    }
    in = shapes[i];
  }
  if (ci != params.conv.size() || di != params.dense.size()) {
    throw ShapeError("parameter count does not match network '" + config.name + "'");
  }
}

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
  const std::size_t in = p.weights.rows(), out = p.weights.cols();
  std::vector<double> y(p.bias.values());
  const auto xs = x.data();
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = xs[i];
    if (xi == 0.0) continue;
    auto wrow = p.weights.row(i);
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * wrow[o];
  }
  return Tensor({out}, std::move(y));
}

struct Evaluation {
  ForwardTrace trace;
  double loss = 0.0;
  std::size_t predicted = 0;
};

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return std::log(s) + mx - logits[label];
}

// Forward + backward for one sample; grads accumulate.
Evaluation backprop(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, std::size_t label,
                    NetworkParams& grads) {
  if (label >= config.num_classes) throw RangeError("label out of range for network '" + config.name + "'");
  Evaluation ev;
  ev.trace = forward_with_taps(params, config, input);
  const auto& trace = ev.trace;
  ev.loss = cross_entropy(trace.logits, label);
  ev.predicted = argmax(trace.logits);

  const Tensor volume = as_volume(config, input);
  const auto& layers = config.layers;
  std::size_t ci = params.conv.size(), di = params.dense.size(), pi = trace.pool_argmax.size();

  // Gradient w.r.t. the current layer's output, flat.
  std::vector<double> g;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const Tensor& layer_in = li == 0 ? volume : trace.outputs[li - 1];
    switch (layer.kind) {
      case LayerKind::softmax: {
        g = trace.outputs[li].values();
        g[label] -= 1.0;
        break;
      }
      case LayerKind::dense: {
        const auto& p = params.dense[--di];
        auto& gp = grads.dense[di];
        const std::size_t in = p.weights.rows(), out = p.weights.cols();
        const auto x = layer_in.data();
        std::vector<double> gx(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
          auto wrow = p.weights.row(i);
          auto grow = gp.weights.row(i);
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) {
            grow[o] += x[i] * g[o];
            acc += wrow[o] * g[o];
          }
          gx[i] = acc;
        }
        for (std::size_t o = 0; o < out; ++o) gp.bias[o] += g[o];
        g = std::move(gx);
        break;
      }
      case LayerKind::flatten:
        break;
      case LayerKind::maxpool: {
        const auto& route = trace.pool_argmax[--pi];
        std::vector<double> gx(layer_in.size(), 0.0);
        for (std::size_t j = 0; j < route.size(); ++j) gx[route[j]] += g[j];
        g = std::move(gx);
        break;
      }
      case LayerKind::conv: {
        const auto& p = params.conv[--ci];
        auto& gp = grads.conv[ci];
        const auto& out = trace.outputs[li];
        // ReLU mask.
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (out[j] <= 0.0) g[j] = 0.0;
        }
        const std::size_t F = out.extent(0), OH = out.extent(1), OW = out.extent(2);
        const std::size_t C = layer_in.extent(0), H = layer_in.extent(1), W = layer_in.extent(2);
        const std::size_t KH = layer.kernel_h, KW = layer.kernel_w;
        const bool need_dx = li > 0;
        std::vector<double> gx(need_dx ? C * H * W : 0, 0.0);
        const double* in = layer_in.data().data();
        for (std::size_t f = 0; f < F; ++f) {
          const double* gf = g.data() + f * OH * OW;
          double bsum = 0.0;
          for (std::size_t j = 0; j < OH * OW; ++j) bsum += gf[j];
          gp.bias[f] += bsum;
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t ki = 0; ki < KH; ++ki) {
              for (std::size_t kj = 0; kj < KW; ++kj) {
                const std::size_t kidx = ((f * C + c) * KH + ki) * KW + kj;
                const double kv = p.kernels[kidx];
                double acc = 0.0;
                if (W == 1) {
                  const double* ip = in + c * H + ki;
                  for (std::size_t oh = 0; oh < OH; ++oh) acc += gf[oh] * ip[oh];
                  if (need_dx) {
                    double* xp = gx.data() + c * H + ki;
                    for (std::size_t oh = 0; oh < OH; ++oh) xp[oh] += kv * gf[oh];
                  }
                  gp.kernels[kidx] += acc;
                  continue;
                }
                for (std::size_t ow = 0; ow < OW; ++ow) {
                  const double* ip = in + (c * H + ki) * W + kj + ow;
                  const double* gp_col = gf + ow;
                  for (std::size_t oh = 0; oh < OH; ++oh) acc += gp_col[oh * OW] * ip[oh * W];
                  if (need_dx) {
                    double* xp = gx.data() + (c * H + ki) * W + kj + ow;
                    for (std::size_t oh = 0; oh < OH; ++oh) xp[oh * W] += kv * gp_col[oh * OW];
                  }
                }
                gp.kernels[kidx] += acc;
              }
            }
          }
        }
        g = std::move(gx);
        break;
      }
    }
  }
  return ev;
}

void fill_zero(NetworkParams& p) {
  for (auto& c : p.conv) {
    std::fill(c.kernels.data().begin(), c.kernels.data().end(), 0.0);
    std::fill(c.bias.data().begin(), c.bias.data().end(), 0.0);
  }
  for (auto& d : p.dense) {
    std::fill(d.weights.data().begin(), d.weights.data().end(), 0.0);
    std::fill(d.bias.data().begin(), d.bias.data().end(), 0.0);
  }
}

bool all_finite(const NetworkParams& p) {
  for (const auto& c : p.conv)
    if (!c.kernels.all_finite() || !c.bias.all_finite()) return false;
  for (const auto& d : p.dense)
    if (!d.weights.all_finite() || !d.bias.all_finite()) return false;
  return true;
}

// Visits every parameter tensor of a and the matching tensor of b.
template <class A, class B, class Fn>
void zip_tensors(A& a, B& b, Fn&& fn) {
  for (std::size_t i = 0; i < a.conv.size(); ++i) {
    fn(a.conv[i].kernels, b.conv[i].kernels);
    fn(a.conv[i].bias, b.conv[i].bias);
  }
  for (std::size_t i = 0; i < a.dense.size(); ++i) {
    fn(a.dense[i].weights, b.dense[i].weights);
    fn(a.dense[i].bias, b.dense[i].bias);
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

std::vector<FeatureShape> NetworkConfig::propagate() const {
  if (layers.empty()) throw ParameterError("network '" + name + "' has no layers");
  if (input_h == 0 || input_w == 0) throw ParameterError("network '" + name + "' has an empty input shape");
  if (num_classes == 0) throw ParameterError("network '" + name + "' has no classes");

  std::vector<FeatureShape> shapes;
  shapes.reserve(layers.size());
  FeatureShape s{1, input_h, input_w};
  bool flat = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "network '" + name + "' layer " + std::to_string(i) + " " + describe(l);
    switch (l.kind) {
      case LayerKind::conv:
        if (flat) throw ParameterError(where + " follows flatten");
        if (l.filters == 0 || l.kernel_h == 0 || l.kernel_w == 0) throw ParameterError(where + " has a zero extent");
        if (i + 1 >= layers.size() || layers[i + 1].kind != LayerKind::maxpool) {
          throw ParameterError(where + " is not followed by a max-pooling layer");
        }
        if (l.kernel_h > s.h || l.kernel_w > s.w) {
          throw ArchitectureInfeasibleError(i, where + ": kernel does not fit the " + std::to_string(s.h) + "x" +
                                                   std::to_string(s.w) + " feature map");
        }
        s = {l.filters, s.h - l.kernel_h + 1, s.w - l.kernel_w + 1};
        break;
      case LayerKind::maxpool:
        if (flat) throw ParameterError(where + " follows flatten");
        if (s.h < 2) {
          throw ArchitectureInfeasibleError(i, where + ": feature map height " + std::to_string(s.h) +
                                                   " is too small for 2x1 pooling");
        }
        s.h /= 2;
        break;
      case LayerKind::flatten:
        if (flat) throw ParameterError(where + ": already flat");
        s = {s.size(), 1, 1};
        flat = true;
        break;
      case LayerKind::dense:
        if (!flat) throw ParameterError(where + " needs a preceding flatten");
        if (l.units == 0) throw ParameterError(where + " has zero units");
        s = {l.units, 1, 1};
        break;
      case LayerKind::softmax:
        if (i + 1 != layers.size()) throw ParameterError(where + " must be the last layer");
        if (i == 0 || layers[i - 1].kind != LayerKind::dense) throw ParameterError(where + " must follow a dense layer");
        if (s.maps != num_classes) {
          throw ParameterError(where + ": expects " + std::to_string(num_classes) + " logits, got " +
                               std::to_string(s.maps));
        }
        break;
    }
    shapes.push_back(s);
  }
  if (layers.back().kind != LayerKind::softmax) throw ParameterError("network '" + name + "' must end in softmax");
  return shapes;
}

std::size_t NetworkConfig::pool_count() const { return pool_layers().size(); }

std::vector<std::size_t> NetworkConfig::pool_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::maxpool) out.push_back(i);
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"convnet1", "convnet2", "convnet3"};
  return names;
}

NetworkConfig preset(std::string_view name, std::size_t input_h, std::size_t input_w, std::size_t num_classes) {
  struct ConvRow {
    std::size_t filters, kh, kw;
  };
  std::vector<ConvRow> rows;
  if (name == "convnet1") {
    rows = {{24, 12, 2}, {32, 12, 2}};
  } else if (name == "convnet2") {
    rows = {{24, 6, 1}, {32, 8, 1}, {40, 10, 1}};
  } else if (name == "convnet3") {
    rows = {{24, 12, 1}, {32, 12, 1}, {40, 6, 1}, {48, 2, 1}};
  } else {
    throw ParameterError("unknown architecture '" + std::string(name) + "'");
  }
  NetworkConfig config{std::string(name), input_h, input_w, num_classes, {}};
  std::size_t width = input_w;
  for (const auto& r : rows) {
    const std::size_t kw = std::min(r.kw, std::max<std::size_t>(width, 1));
    config.layers.push_back(LayerSpec::conv(r.filters, r.kh, kw));
    config.layers.push_back(LayerSpec::maxpool());
    width = width >= kw ? width - kw + 1 : 0;
  }
  config.layers.push_back(LayerSpec::flatten());
  config.layers.push_back(LayerSpec::dense(num_classes));
  config.layers.push_back(LayerSpec::softmax());
  config.propagate();
  return config;
}

NetworkConfig linear_classifier(std::size_t input_dim, std::size_t num_classes, std::string name) {
  NetworkConfig config{std::move(name), input_dim, 1, num_classes,
                       {LayerSpec::flatten(), LayerSpec::dense(num_classes), LayerSpec::softmax()}};
  config.propagate();
  return config;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : conv) n += c.kernels.size() + c.bias.size();
  for (const auto& d : dense) n += d.weights.size() + d.bias.size();
  return n;
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  const auto shapes = config.propagate();
  Rng rng(seed);
  NetworkParams params;
  FeatureShape in{1, config.input_h, config.input_w};
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    if (l.kind == LayerKind::conv) {
      const std::size_t fan_in = in.maps * l.kernel_h * l.kernel_w;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      Tensor k({l.filters, in.maps, l.kernel_h, l.kernel_w});
      for (auto& v : k.data()) v = rng.uniform(-limit, limit);
      params.conv.push_back({std::move(k), Tensor({l.filters}, 0.0)});
    } else if (l.kind == LayerKind::dense) {
      const double limit = std::sqrt(3.0 / static_cast<double>(in.size()));
      Tensor w({in.size(), l.units});
      for (auto& v : w.data()) v = rng.uniform(-limit, limit);
      params.dense.push_back({std::move(w), Tensor({l.units}, 0.0)});
    }
    in = shapes[i];
  }
  return params;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams z = params;
  fill_zero(z);
  return z;
}

void check_params(const NetworkConfig& config, const NetworkParams& params) {
  check_param_shapes(config, params, config.propagate());
  if (!all_finite(params)) throw NumericError("network '" + config.name + "' has non-finite parameters");
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 4 || bias.rank() != 1) {
    throw ShapeError("conv2d_forward expects input [maps x h x w], kernels [f x maps x kh x kw], bias [f]");
  }
  const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const std::size_t F = kernels.extent(0), KH = kernels.extent(2), KW = kernels.extent(3);
  if (kernels.extent(1) != C) throw ShapeError("kernel input maps do not match input maps");
  if (bias.extent(0) != F) throw ShapeError("bias length does not match filter count");
  if (KH > H || KW > W) {
    throw ShapeError("kernel " + std::to_string(KH) + "x" + std::to_string(KW) + " larger than input " +
                     std::to_string(H) + "x" + std::to_string(W));
  }
  const std::size_t OH = H - KH + 1, OW = W - KW + 1;
  Tensor out({F, OH, OW});
  const double* in = input.data().data();
  double* o = out.data().data();
  for (std::size_t f = 0; f < F; ++f) {
    double* of = o + f * OH * OW;
    std::fill(of, of + OH * OW, bias[f]);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t ki = 0; ki < KH; ++ki) {
        for (std::size_t kj = 0; kj < KW; ++kj) {
          const double kv = kernels[((f * C + c) * KH + ki) * KW + kj];
          // Time runs down the columns; sensor maps are usually 1-2 wide, so
          // the long loop is over rows.
          if (W == 1) {
            const double* ip = in + c * H + ki;
            for (std::size_t oh = 0; oh < OH; ++oh) of[oh] += kv * ip[oh];
            continue;
          }
          for (std::size_t ow = 0; ow < OW; ++ow) {
            const double* ip = in + (c * H + ki) * W + kj + ow;
            double* op = of + ow;
            for (std::size_t oh = 0; oh < OH; ++oh) op[oh * OW] += kv * ip[oh * W];
          }
        }
      }
    }
  }
  return out;
}

PoolResult maxpool_forward(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool_forward expects [maps x h x w]");
  const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
  if (H < 2) throw ShapeError("maxpool needs height >= 2, got " + std::to_string(H));
  const std::size_t OH = H / 2;
  PoolResult r{Tensor({C, OH, W}), std::vector<std::size_t>(C * OH * W)};
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t top = (c * H + 2 * oh) * W + w;
        const std::size_t bottom = top + W;
        // Ties route to the top element.
        const std::size_t pick = input[bottom] > input[top] ? bottom : top;
        const std::size_t o = (c * OH + oh) * W + w;
        r.output[o] = input[pick];
        r.argmax[o] = pick;
      }
    }
  }
  return r;
}

ForwardTrace forward_with_taps(const NetworkParams& params, const NetworkConfig& config, const Tensor& input) {
  const auto shapes = config.propagate();
  check_param_shapes(config, params, shapes);
  Tensor x = as_volume(config, input);
  ForwardTrace trace;
  trace.outputs.reserve(config.layers.size());
  std::size_t ci = 0, di = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    Tensor y;
    switch (l.kind) {
      case LayerKind::conv: {
        const auto& p = params.conv[ci++];
        y = conv2d_forward(x, p.kernels, p.bias);
        for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerKind::maxpool: {
        auto r = maxpool_forward(x);
        trace.pool_taps.push_back(r.output.values());
        trace.pool_argmax.push_back(std::move(r.argmax));
        y = std::move(r.output);
        break;
      }
      case LayerKind::flatten:
        y = x.reshaped({x.size()});
        break;
      case LayerKind::dense:
        y = dense_forward(x, params.dense[di++]);
        break;
      case LayerKind::softmax:
        trace.logits = x.values();
        y = Tensor({x.size()}, softmax(trace.logits));
        break;
    }
    trace.outputs.push_back(y);
    x = std::move(y);
  }
  return trace;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InputError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InputError("softmax of an empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= s;
  return p;
}

std::size_t predict(const NetworkParams& params, const NetworkConfig& config, const Tensor& input) {
  return argmax(forward_with_taps(params, config, input).logits);
}

double backward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, std::size_t label,
                NetworkParams& grads) {
  return backprop(params, config, input, label, grads).loss;
}

double sample_loss(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, std::size_t label) {
  if (label >= config.num_classes) throw RangeError("label out of range");
  return cross_entropy(forward_with_taps(params, config, input).logits, label);
}

NetworkParams train_samples(const NetworkConfig& config, std::span<const Tensor> inputs,
                            std::span<const std::size_t> labels, const TrainHyper& hyper,
                            const EpochCallback& on_epoch) {
  if (inputs.empty()) throw InputError("cannot train on an empty dataset");
  if (inputs.size() != labels.size()) throw ShapeError("inputs and labels differ in length");
  if (hyper.batch_size == 0) throw ParameterError("batch size must be positive");
  if (!(hyper.learning_rate >= 0.0) || !(hyper.momentum >= 0.0) || hyper.momentum >= 1.0) {
    throw ParameterError("learning rate must be >= 0 and momentum in [0, 1)");
  }
  for (auto l : labels)
    if (l >= config.num_classes) throw RangeError("label " + std::to_string(l) + " out of range");

  NetworkParams params = init_params(config, derive_seed(hyper.seed, 0));
  NetworkParams velocity = zeros_like(params);
  NetworkParams grads = zeros_like(params);
  Rng rng(derive_seed(hyper.seed, 1));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = inputs.size();

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    ConfusionMatrix cm(config.num_classes);
    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
      const std::size_t end = std::min(n, start + hyper.batch_size);
      fill_zero(grads);
      for (std::size_t b = start; b < end; ++b) {
        const auto idx = order[b];
        const auto ev = backprop(params, config, inputs[idx], labels[idx], grads);
        if (!std::isfinite(ev.loss)) {
          throw TrainingDivergedError("loss became non-finite in epoch " + std::to_string(epoch));
        }
        loss_sum += ev.loss;
        cm.add(labels[idx], ev.predicted);
      }
      const double step = hyper.learning_rate / static_cast<double>(end - start);
      const double mu = hyper.momentum;
      zip_tensors(velocity, grads, [&](Tensor& v, const Tensor& g) {
        auto vd = v.data();
        auto gd = g.data();
        for (std::size_t j = 0; j < vd.size(); ++j) vd[j] = mu * vd[j] - step * gd[j];
      });
      zip_tensors(params, velocity, [&](Tensor& p, const Tensor& v) {
        auto pd = p.data();
        auto vd = v.data();
        for (std::size_t j = 0; j < pd.size(); ++j) pd[j] += vd[j];
      });
    }
    if (!all_finite(params)) throw TrainingDivergedError("parameters became non-finite in epoch " + std::to_string(epoch));
    if (on_epoch) {
      on_epoch(EpochStats{epoch, loss_sum / static_cast<double>(n), recall_macro_observed(cm)});
    }
  }
  return params;
}

NetworkParams train(const NetworkConfig& config, const Dataset& dataset, const TrainHyper& hyper,
                    const EpochCallback& on_epoch) {
  if (dataset.windows.empty()) throw InputError("cannot train on an empty dataset");
  if (dataset.num_classes() != config.num_classes) {
    throw ShapeError("dataset has " + std::to_string(dataset.num_classes()) + " classes, network expects " +
                     std::to_string(config.num_classes));
  }
  std::vector<Tensor> inputs;
  inputs.reserve(dataset.size());
  for (const auto& w : dataset.windows) inputs.push_back(w.values);
  const auto labels = dataset.labels();
  return train_samples(config, inputs, labels, hyper, on_epoch);
}

GradCheckResult grad_check(const NetworkConfig& config, const NetworkParams& params, const Tensor& input,
                           std::size_t label, double step) {
  NetworkParams analytic = zeros_like(params);
  backward(params, config, input, label, analytic);

  NetworkParams probe = params;
  GradCheckResult result;
  zip_tensors(probe, analytic, [&](Tensor& p, const Tensor& a) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double saved = p[j];
      p[j] = saved + step;
      const double plus = sample_loss(probe, config, input, label);
      p[j] = saved - step;
      const double minus = sample_loss(probe, config, input, label);
      p[j] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(a[j]), std::abs(numeric), 1e-7});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a[j] - numeric) / denom);
      ++result.parameters_checked;
    }
  });
  return result;
}

std::vector<std::uint8_t> serialize_network(const NetworkConfig& config, const NetworkParams& params) {
  check_param_shapes(config, params, config.propagate());
  io::Writer w(kMagic, kVersion);
  w.str(config.name);
  w.u64(config.input_h);
  w.u64(config.input_w);
  w.u64(config.num_classes);
  w.u64(config.layers.size());
  for (const auto& l : config.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u64(l.filters);
    w.u64(l.kernel_h);
    w.u64(l.kernel_w);
    w.u64(l.units);
  }
  w.u64(params.conv.size());
  for (const auto& c : params.conv) {
    w.tensor(c.kernels);
    w.tensor(c.bias);
  }
  w.u64(params.dense.size());
  for (const auto& d : params.dense) {
    w.tensor(d.weights);
    w.tensor(d.bias);
  }
  return w.buffer();
}

void deserialize_network(std::vector<std::uint8_t> bytes, NetworkConfig& config, NetworkParams& params) {
  io::Reader r(std::move(bytes), kMagic, kVersion);
  NetworkConfig cfg;
  cfg.name = r.str();
  cfg.input_h = r.u64();
  cfg.input_w = r.u64();
  cfg.num_classes = r.u64();
  const auto layers_at = r.offset();
  const auto layer_count = r.u64();
  if (layer_count > 1024) throw FormatError(layers_at, "implausible layer count");
  for (std::uint64_t i = 0; i < layer_count; ++i) {
    const auto kind_at = r.offset();
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::softmax)) throw FormatError(kind_at, "unknown layer kind");
    LayerSpec l;
    l.kind = static_cast<LayerKind>(kind);
    l.filters = r.u64();
    l.kernel_h = r.u64();
    l.kernel_w = r.u64();
    l.units = r.u64();
    cfg.layers.push_back(l);
  }
  NetworkParams p;
  const auto conv_at = r.offset();
  const auto conv_count = r.u64();
  if (conv_count > layer_count) throw FormatError(conv_at, "implausible conv count");
  for (std::uint64_t i = 0; i < conv_count; ++i) {
    ConvParams c;
    c.kernels = r.tensor();
    c.bias = r.tensor();
    p.conv.push_back(std::move(c));
  }
  const auto dense_at = r.offset();
  const auto dense_count = r.u64();
  if (dense_count > layer_count) throw FormatError(dense_at, "implausible dense count");
  for (std::uint64_t i = 0; i < dense_count; ++i) {
    DenseParams d;
    d.weights = r.tensor();
    d.bias = r.tensor();
    p.dense.push_back(std::move(d));
  }
  r.expect_end();
  try {
    check_params(cfg, p);
  } catch (const Error& e) {
    throw FormatError(r.offset(), std::string("inconsistent network file: ") + e.what());
  }
  config = std::move(cfg);
  params = std::move(p);
}

void save_network(const std::filesystem::path& path, const NetworkConfig& config, const NetworkParams& params) {
  io::write_file_atomic(path, serialize_network(config, params));
}

void load_network(const std::filesystem::path& path, NetworkConfig& config, NetworkParams& params) {
  deserialize_network(io::read_file(path), config, params);
}

std::uint64_t network_hash(const NetworkConfig& config, const NetworkParams& params) {
  return io::fnv1a(serialize_network(config, params));
}

}  // namespace lhn
