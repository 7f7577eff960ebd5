// Copyright 2026 The privex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense feed-forward networks: deterministic initialization, batched forward
// passes, cross-entropy training and input gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "privex/dataset.hpp"
#include "privex/rng.hpp"

namespace privex {

enum class Activation { kTanh, kRelu, kSigmoid, kIdentity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

struct LayerSpec {
  std::size_t width = 1;
  Activation activation = Activation::kIdentity;
};

enum class Optimizer { kAdagrad, kAdam, kGradientAscent };

inline std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::kAdagrad: return "adagrad";
    case Optimizer::kAdam: return "adam";
    case Optimizer::kGradientAscent: return "gradient_ascent";
  }
  return "adagrad";
}

inline Optimizer optimizer_from_string(std::string_view s) {
  if (s == "adagrad") return Optimizer::kAdagrad;
  if (s == "adam") return Optimizer::kAdam;
  if (s == "gradient_ascent" || s == "gd") return Optimizer::kGradientAscent;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
  Optimizer optimizer = Optimizer::kAdagrad;
  double lr = 0.01;
  // Step-wise decay: lr_t = lr / (1 + lr_decay * t), t counted in mini-batches.
  double lr_decay = 0.0;
  int epochs = 1;
  std::size_t batch_size = 0;  // 0 means full batch
  std::uint64_t seed = 0;
  double init_scale = 1.0;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (lr_decay < 0.0) throw std::invalid_argument("train config: lr_decay must be >= 0");
  }
};

// Weights are stored fan_in x fan_out so a batch X (rows = points) maps to
// X * W + 1 b^T.
struct DenseLayer {
  Mat weights;
  Vec bias;
  Activation activation = Activation::kIdentity;
};

// The last layer produces the class scores. A final width of 1 is a
// single-logit binary model whose probability vector is [1 - s(z), s(z)];
// wider outputs go through a softmax.
struct MlpModel {
  std::size_t input_dim = 0;
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;
  TrainConfig train_config;

  bool single_logit() const { return layers.back().weights.cols() == 1; }
  std::size_t output_width() const { return static_cast<std::size_t>(layers.back().weights.cols()); }
  std::size_t num_classes() const { return single_logit() ? 2 : output_width(); }

  std::vector<LayerSpec> arch() const {
    std::vector<LayerSpec> a;
    for (const auto& l : layers)
      a.push_back({static_cast<std::size_t>(l.weights.cols()), l.activation});
    return a;
  }
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Mat activate(const Mat& z, Activation a) {
  switch (a) {
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kRelu: return z.array().max(0.0).matrix();
    case Activation::kSigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::kIdentity: return z;
  }
  return z;
}

// Local derivative of the activation, expressed through pre- and
// post-activation values.
inline Mat activation_derivative(const Mat& pre, const Mat& post, Activation a) {
  switch (a) {
    case Activation::kTanh: return (1.0 - post.array().square()).matrix();
    case Activation::kRelu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::kSigmoid: return (post.array() * (1.0 - post.array())).matrix();
    case Activation::kIdentity: return Mat::Ones(pre.rows(), pre.cols());
  }
  return Mat::Ones(pre.rows(), pre.cols());
}

inline Mat output_probabilities(const Mat& scores, bool single_logit) {
  if (single_logit) {
    Mat p(scores.rows(), 2);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      p(r, 1) = sigmoid(scores(r, 0));
      p(r, 0) = sigmoid(-scores(r, 0));
    }
    return p;
  }
  Mat p(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      p(r, c) = std::exp(scores(r, c) - m);
      total += p(r, c);
    }
    p.row(r) /= total;
  }
  return p;
}

}  // namespace detail

// Intermediate values of a batched forward pass. acts[0] is the input batch
// and acts[l + 1] the output of layer l; pre[l] is layer l's pre-activation.
struct ForwardTrace {
  std::vector<Mat> pre;
  std::vector<Mat> acts;
  Mat probs;
};

inline MlpModel init_model(const std::vector<LayerSpec>& arch, std::size_t input_dim,
                           std::uint64_t seed, double init_scale = 1.0) {
  if (input_dim == 0) throw std::invalid_argument("init_model: input_dim must be >= 1");
  if (arch.empty()) throw std::invalid_argument("init_model: architecture is empty");
  MlpModel m;
  m.input_dim = input_dim;
  m.seed = seed;
  m.train_config.init_scale = init_scale;
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  for (const auto& spec : arch) {
    if (spec.width == 0) throw std::invalid_argument("init_model: layer width must be >= 1");
    DenseLayer layer;
    layer.activation = spec.activation;
    const double bound = init_scale / std::sqrt(static_cast<double>(fan_in));
    layer.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(spec.width));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = rng.uniform(-bound, bound);
    layer.bias = Vec::Zero(static_cast<Eigen::Index>(spec.width));
    m.layers.push_back(std::move(layer));
    fan_in = spec.width;
  }
  return m;
}

inline ForwardTrace trace_forward(const MlpModel& model, const Mat& batch) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim)
    throw std::invalid_argument("forward: expected " + std::to_string(model.input_dim) +
                                " features, got " + std::to_string(batch.cols()));
  ForwardTrace t;
  t.acts.reserve(model.layers.size() + 1);
  t.pre.reserve(model.layers.size());
  t.acts.push_back(batch);
  for (const auto& layer : model.layers) {
    Mat z = t.acts.back() * layer.weights;
    z.rowwise() += layer.bias.transpose();
    t.acts.push_back(detail::activate(z, layer.activation));
    t.pre.push_back(std::move(z));
  }
  t.probs = detail::output_probabilities(t.acts.back(), model.single_logit());
  return t;
}

// Class probabilities for every row of `batch`.
inline Mat forward_batch(const MlpModel& model, const Mat& batch) {
  return trace_forward(model, batch).probs;
}

inline Vec forward(const MlpModel& model, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim)
    throw std::invalid_argument("forward: expected " + std::to_string(model.input_dim) +
                                " features, got " + std::to_string(x.size()));
  return trace_forward(model, x.transpose()).probs.row(0).transpose();
}

inline std::size_t argmax(const Vec& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<std::size_t>(i);
}

inline double cross_entropy(const Vec& probs, int label) {
  if (label < 0 || label >= probs.size()) throw std::invalid_argument("loss: label out of range");
  return -std::log(std::max(probs(label), 1e-12));
}

inline double loss(const MlpModel& model, const Vec& x, int label) {
  return cross_entropy(forward(model, x), label);
}

struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

namespace detail {

// Gradient of the mean cross-entropy with respect to the last layer's output.
inline Mat output_loss_gradient(const MlpModel& model, const Mat& probs,
                                std::span<const int> labels) {
  const Eigen::Index b = probs.rows();
  if (model.single_logit()) {
    Mat g(b, 1);
    for (Eigen::Index r = 0; r < b; ++r) g(r, 0) = probs(r, 1) - (labels[r] == 1 ? 1.0 : 0.0);
    return g;
  }
  Mat g = probs;
  for (Eigen::Index r = 0; r < b; ++r) g(r, labels[r]) -= 1.0;
  return g;
}

}  // namespace detail

// Gradient of the mean cross-entropy over `batch` with respect to all
// parameters.
inline Gradients grad_params(const MlpModel& model, const Mat& batch, std::span<const int> labels) {
  if (batch.rows() == 0) throw std::invalid_argument("grad_params: empty batch");
  if (static_cast<std::size_t>(batch.rows()) != labels.size())
    throw std::invalid_argument("grad_params: label count does not match batch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= model.num_classes())
      throw std::invalid_argument("grad_params: label out of range");
  const ForwardTrace t = trace_forward(model, batch);
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  Mat upstream = detail::output_loss_gradient(model, t.probs, labels);
  Gradients g;
  const std::size_t n_layers = model.layers.size();
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = model.layers[l];
    // Softmax cross-entropy already folds the output nonlinearity in; the
    // layer's own activation still applies.
    const Mat dpre = upstream.cwiseProduct(
        detail::activation_derivative(t.pre[l], t.acts[l + 1], layer.activation));
    g.weights[l] = (t.acts[l].transpose() * dpre) * inv_b;
    g.biases[l] = dpre.colwise().sum().transpose() * inv_b;
    if (l > 0) upstream = dpre * layer.weights.transpose();
  }
  return g;
}

// Derivative of the probability of class `cls` with respect to the last
// layer's output, for one point.
inline Vec probability_output_gradient(const MlpModel& model, const Vec& probs, std::size_t cls) {
  if (model.single_logit()) {
    Vec g(1);
    const double s = probs(1) * probs(0);
    g(0) = cls == 1 ? s : -s;
    return g;
  }
  Vec g = -probs(static_cast<Eigen::Index>(cls)) * probs;
  g(static_cast<Eigen::Index>(cls)) += probs(static_cast<Eigen::Index>(cls));
  return g;
}

// Backpropagates `out_grad` (gradient w.r.t. the last layer's output) of a
// single-point trace to the input. `gate(l, pre, upstream)` may rewrite the
// upstream gradient of layer l before the local derivative is applied.
template <class Gate>
Vec backprop_to_input(const MlpModel& model, const ForwardTrace& t, const Vec& out_grad,
                      Gate&& gate) {
  Vec upstream = out_grad;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    const Vec pre = t.pre[l].row(0).transpose();
    const Vec post = t.acts[l + 1].row(0).transpose();
    gate(l, pre, upstream);
    Vec dpre;
    switch (layer.activation) {
      case Activation::kTanh: dpre = upstream.cwiseProduct((1.0 - post.array().square()).matrix()); break;
      case Activation::kRelu: dpre = upstream.cwiseProduct((pre.array() > 0.0).cast<double>().matrix()); break;
      case Activation::kSigmoid: dpre = upstream.cwiseProduct((post.array() * (1.0 - post.array())).matrix()); break;
      case Activation::kIdentity: dpre = upstream; break;
    }
    upstream = layer.weights * dpre;
  }
  return upstream;
}

// Gradient of the post-softmax probability of `target_class` (default: the
// predicted class) with respect to the input.
inline Vec grad_input(const MlpModel& model, const Vec& x,
                      std::optional<std::size_t> target_class = std::nullopt) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim)
    throw std::invalid_argument("grad_input: dimension mismatch");
  const ForwardTrace t = trace_forward(model, x.transpose());
  const Vec probs = t.probs.row(0).transpose();
  const std::size_t cls = target_class.value_or(argmax(probs));
  if (cls >= model.num_classes()) throw std::invalid_argument("grad_input: target class out of range");
  return backprop_to_input(model, t, probability_output_gradient(model, probs, cls),
                           [](std::size_t, const Vec&, Vec&) {});
}

namespace detail {

struct OptimizerState {
  std::vector<Mat> w1, w2;
  std::vector<Vec> b1, b2;
  long step = 0;

  explicit OptimizerState(const MlpModel& m) {
    for (const auto& l : m.layers) {
      w1.push_back(Mat::Zero(l.weights.rows(), l.weights.cols()));
      w2.push_back(Mat::Zero(l.weights.rows(), l.weights.cols()));
      b1.push_back(Vec::Zero(l.bias.size()));
      b2.push_back(Vec::Zero(l.bias.size()));
    }
  }
};

template <class P>
void apply_update(const TrainConfig& cfg, double lr_t, long t, P& param, const P& grad, P& m1, P& m2) {
  switch (cfg.optimizer) {
    case Optimizer::kAdagrad: {
      constexpr double kEps = 1e-7;
      m2.array() += grad.array().square();
      param.array() -= lr_t * grad.array() / (m2.array().sqrt() + kEps);
      break;
    }
    case Optimizer::kAdam: {
      constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
      m1 = kB1 * m1 + (1.0 - kB1) * grad;
      m2.array() = kB2 * m2.array() + (1.0 - kB2) * grad.array().square();
      const double c1 = 1.0 - std::pow(kB1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(kB2, static_cast<double>(t));
      param.array() -= lr_t * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kEps);
      break;
    }
    case Optimizer::kGradientAscent:
      param -= lr_t * grad;
      break;
  }
}

}  // namespace detail

// Mini-batch training on mean cross-entropy. Row order is a fresh seeded
// permutation each epoch.
inline MlpModel train(MlpModel model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.dim() != model.input_dim) throw std::invalid_argument("train: dataset dimension mismatch");
  if (data.num_classes > model.num_classes())
    throw std::invalid_argument("train: dataset has more classes than the model outputs");
  const std::size_t n = data.size();
  const std::size_t bs = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  Rng rng(cfg.seed);
  detail::OptimizerState state(model);
  Mat batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (bs < n) order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(start + bs, n);
      const auto rows = static_cast<Eigen::Index>(end - start);
      batch.resize(rows, data.features.cols());
      batch_labels.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.row(static_cast<Eigen::Index>(i - start)) =
            data.features.row(static_cast<Eigen::Index>(order[i]));
        batch_labels[i - start] = data.labels[order[i]];
      }
      const Gradients g = grad_params(model, batch, batch_labels);
      for (const auto& gw : g.weights) {
        if (!gw.allFinite())
          throw TrainingError("train: non-finite gradient at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(state.step));
      }
      const double lr_t = cfg.lr / (1.0 + cfg.lr_decay * static_cast<double>(state.step));
      ++state.step;
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        detail::apply_update(cfg, lr_t, state.step, model.layers[l].weights, g.weights[l],
                             state.w1[l], state.w2[l]);
        detail::apply_update(cfg, lr_t, state.step, model.layers[l].bias, g.biases[l],
                             state.b1[l], state.b2[l]);
      }
    }
  }
  for (const auto& l : model.layers)
    if (!l.weights.allFinite() || !l.bias.allFinite())
      throw TrainingError("train: parameters diverged to non-finite values");
  model.train_config = cfg;
  return model;
}

inline double mean_loss(const MlpModel& model, const Dataset& data) {
  const Mat p = forward_batch(model, data.features);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += -std::log(std::max(p(static_cast<Eigen::Index>(i), data.labels[i]), 1e-12));
  return total / static_cast<double>(data.size());
}

inline double accuracy(const MlpModel& model, const Dataset& data) {
  const Mat p = forward_batch(model, data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Eigen::Index c = 0;
    p.row(static_cast<Eigen::Index>(i)).maxCoeff(&c);
    if (c == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// JSON form: {arch, input_dim, weights (row-major), biases, seed, train_config}.
inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"optimizer", std::string(to_string(c.optimizer))},
          {"lr", c.lr},
          {"lr_decay", c.lr_decay},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"init_scale", c.init_scale}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  c.lr = j.value("lr", c.lr);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

inline nlohmann::json model_to_json(const MlpModel& m) {
  nlohmann::json arch = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& l : m.layers) {
    arch.push_back({{"width", l.weights.cols()}, {"activation", std::string(to_string(l.activation))}});
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    weights.push_back(w);
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  return {{"arch", arch},
          {"input_dim", m.input_dim},
          {"weights", weights},
          {"biases", biases},
          {"seed", m.seed},
          {"train_config", train_config_to_json(m.train_config)}};
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  MlpModel m;
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("train_config")) m.train_config = train_config_from_json(j.at("train_config"));
  const auto& arch = j.at("arch");
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (arch.size() != weights.size() || arch.size() != biases.size())
    throw std::invalid_argument("model json: arch/weights/biases length mismatch");
  std::size_t fan_in = m.input_dim;
  for (std::size_t l = 0; l < arch.size(); ++l) {
    DenseLayer layer;
    const auto width = arch[l].at("width").get<std::size_t>();
    layer.activation = activation_from_string(arch[l].at("activation").get<std::string>());
    const auto w = weights[l].get<std::vector<double>>();
    const auto b = biases[l].get<std::vector<double>>();
    if (w.size() != fan_in * width || b.size() != width)
      throw std::invalid_argument("model json: parameter shape mismatch in layer " + std::to_string(l));
    layer.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < fan_in; ++r)
      for (std::size_t c = 0; c < width; ++c)
        layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * width + c];
    layer.bias = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    m.layers.push_back(std::move(layer));
    fan_in = width;
  }
  return m;
}

}  // namespace privex
