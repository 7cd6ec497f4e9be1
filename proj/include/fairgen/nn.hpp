#ifndef FAIRGEN_NN_HPP
#define FAIRGEN_NN_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairgen/numerics.hpp"
#include "json.hpp"

namespace fairgen::nn {

enum class Activation { ReLU, Linear };

enum class HeadKind { Sigmoid, Softmax, Linear, MixedTabular };

struct CategoricalBlock {
  std::string name;
  std::size_t cardinality = 0;
  friend bool operator==(const CategoricalBlock&, const CategoricalBlock&) = default;
};

/// Output head for tabular generators: `numeric_width` identity outputs,
/// then one Gumbel-Softmax block per categorical column.
struct MixedTabularHead {
  std::size_t numeric_width = 0;
  std::vector<CategoricalBlock> categorical_blocks;
  double temperature = 0.5;

  std::size_t categorical_width() const {
    std::size_t w = 0;
    for (const auto& b : categorical_blocks) w += b.cardinality;
    return w;
  }
  std::size_t width() const { return numeric_width + categorical_width(); }

  friend bool operator==(const MixedTabularHead&, const MixedTabularHead&) = default;
};

struct OutputHead {
  HeadKind kind = HeadKind::Linear;
  MixedTabularHead mixed;  // only meaningful for HeadKind::MixedTabular

  static OutputHead sigmoid() { return {HeadKind::Sigmoid, {}}; }
  static OutputHead softmax() { return {HeadKind::Softmax, {}}; }
  static OutputHead linear() { return {HeadKind::Linear, {}}; }
  static OutputHead mixed_tabular(MixedTabularHead h) { return {HeadKind::MixedTabular, std::move(h)}; }

  friend bool operator==(const OutputHead&, const OutputHead&) = default;
};

inline constexpr std::size_t kDefaultHiddenLayers = 3;

/// Dense feed-forward network. weights[i] is layer_dims[i] x layer_dims[i+1].
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Activation hidden_activation = Activation::ReLU;
  OutputHead head;
  /// Bumped by every optimizer step; forward caches remember it.
  std::uint64_t revision = 0;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t hidden_layer_count() const { return layer_dims.size() - 2; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void validate() const {
    if (layer_dims.size() < 2) throw ShapeError("MlpModel needs at least input and output dims");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
      throw ShapeError("MlpModel layer count mismatch");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != layer_dims[l] || weights[l].cols() != layer_dims[l + 1] ||
          biases[l].size() != layer_dims[l + 1]) {
        throw ShapeError("MlpModel layer " + std::to_string(l) + " has weights " +
                         weights[l].shape() + " and bias length " +
                         std::to_string(biases[l].size()) + ", expected " +
                         Matrix::shape_string(layer_dims[l], layer_dims[l + 1]));
      }
    }
    if (head.kind == HeadKind::MixedTabular) {
      if (head.mixed.width() != output_dim()) {
        throw ShapeError("MixedTabularHead width " + std::to_string(head.mixed.width()) +
                         " does not match output dim " + std::to_string(output_dim()));
      }
      if (!(head.mixed.temperature > 0.0)) throw ParameterError("head temperature must be positive");
    }
  }
};

/// Fan-in scaled uniform init: U(-sqrt(6/fan_in), +) before ReLU layers,
/// U(-sqrt(3/fan_in), +) for the output layer. Biases start at zero.
inline MlpModel make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t output_dim, OutputHead head, SeededRng& rng) {
  MlpModel m;
  m.layer_dims.push_back(input_dim);
  m.layer_dims.insert(m.layer_dims.end(), hidden.begin(), hidden.end());
  m.layer_dims.push_back(output_dim);
  for (auto d : m.layer_dims) {
    if (d == 0) throw ParameterError("make_mlp: layer widths must be positive");
  }
  m.head = std::move(head);
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const std::size_t fan_in = m.layer_dims[l];
    const bool last = l + 2 == m.layer_dims.size();
    const double limit = std::sqrt((last ? 3.0 : 6.0) / static_cast<double>(fan_in));
    Matrix w(fan_in, m.layer_dims[l + 1]);
    for (auto& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(m.layer_dims[l + 1], 0.0);
  }
  m.validate();
  return m;
}

/// Three equal hidden layers, the default topology for every network here.
inline MlpModel make_default_mlp(std::size_t input_dim, std::size_t hidden_units,
                                 std::size_t output_dim, OutputHead head, SeededRng& rng) {
  return make_mlp(input_dim, std::vector<std::size_t>(kDefaultHiddenLayers, hidden_units),
                  output_dim, std::move(head), rng);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// In-place numerically stable softmax of `values` scaled by 1/temperature.
inline void softmax_inplace(std::span<double> values, double temperature = 1.0) {
  double hi = -INFINITY;
  for (double v : values) hi = std::max(hi, v / temperature);
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v / temperature - hi);
    total += v;
  }
  for (double& v : values) v /= total;
}

/// softmax((logits + noise) / temperature). An empty `noise` means zero noise.
inline std::vector<double> gumbel_softmax(std::span<const double> logits, double temperature,
                                          std::span<const double> noise) {
  if (!(temperature > 0.0)) {
    throw ParameterError("gumbel_softmax: temperature must be positive, got " +
                         std::to_string(temperature));
  }
  if (!noise.empty() && noise.size() != logits.size()) {
    throw ShapeError("gumbel_softmax: noise length " + std::to_string(noise.size()) +
                     " differs from logits length " + std::to_string(logits.size()));
  }
  std::vector<double> out(logits.begin(), logits.end());
  if (!noise.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
  }
  softmax_inplace(out, temperature);
  return out;
}

inline std::vector<double> gumbel_softmax(std::span<const double> logits, double temperature,
                                          SeededRng& rng) {
  if (!(temperature > 0.0)) {
    throw ParameterError("gumbel_softmax: temperature must be positive, got " +
                         std::to_string(temperature));
  }
  const auto noise = sample_gumbel(rng, logits.size());
  return gumbel_softmax(logits, temperature, noise);
}

/// Gumbel noise for every categorical logit of a MixedTabular head, one row
/// per batch row. Empty for other heads.
inline Matrix sample_head_noise(const MlpModel& model, std::size_t rows, SeededRng& rng) {
  if (model.head.kind != HeadKind::MixedTabular) return {};
  const std::size_t width = model.head.mixed.categorical_width();
  if (width == 0) return {};
  Matrix noise(rows, width);
  for (auto& v : noise.data()) v = gumbel_from_uniform(rng.uniform());
  return noise;
}

/// Intermediates of one forward pass. activations[0] is the input batch and
/// activations[l+1] the post-activation of layer l (before the head for the
/// last layer, whose logits live in pre_activations.back()).
struct ForwardCache {
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  Matrix output;
  Matrix head_noise;
  std::vector<std::size_t> layer_dims;
  std::uint64_t revision = 0;
};

inline void apply_head(const OutputHead& head, const Matrix& logits, const Matrix& noise,
                       Matrix& out) {
  out = logits;
  switch (head.kind) {
    case HeadKind::Linear:
      return;
    case HeadKind::Sigmoid:
      for (auto& v : out.data()) v = sigmoid(v);
      return;
    case HeadKind::Softmax:
      for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
      return;
    case HeadKind::MixedTabular: {
      const auto& mixed = head.mixed;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        std::size_t offset = mixed.numeric_width;
        std::size_t noise_offset = 0;
        for (const auto& block : mixed.categorical_blocks) {
          auto seg = row.subspan(offset, block.cardinality);
          if (!noise.empty()) {
            for (std::size_t k = 0; k < block.cardinality; ++k) seg[k] += noise(r, noise_offset + k);
          }
          softmax_inplace(seg, mixed.temperature);
          offset += block.cardinality;
          noise_offset += block.cardinality;
        }
      }
      return;
    }
  }
}

/// Forward pass. `head_noise` (rows x categorical width) perturbs the
/// Gumbel-Softmax blocks of a MixedTabular head; empty means no noise.
inline ForwardCache forward(const MlpModel& model, const Matrix& batch, const Matrix& head_noise = {}) {
  if (batch.cols() != model.input_dim()) {
    throw ShapeError("forward: batch " + batch.shape() + " does not match input dim " +
                     std::to_string(model.input_dim()));
  }
  if (!head_noise.empty()) {
    const std::size_t width =
        model.head.kind == HeadKind::MixedTabular ? model.head.mixed.categorical_width() : 0;
    if (head_noise.rows() != batch.rows() || head_noise.cols() != width) {
      throw ShapeError("forward: head noise " + head_noise.shape() + " expected " +
                       Matrix::shape_string(batch.rows(), width));
    }
  }
  ForwardCache cache;
  cache.layer_dims = model.layer_dims;
  cache.revision = model.revision;
  cache.head_noise = head_noise;
  cache.activations.push_back(batch);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    Matrix z = matmul(cache.activations.back(), model.weights[l]);
    const auto& b = model.biases[l];
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
    }
    const bool last = l + 1 == model.layer_count();
    if (!last) {
      Matrix a = z;
      if (model.hidden_activation == Activation::ReLU) {
        for (auto& v : a.data()) v = v > 0.0 ? v : 0.0;
      }
      cache.pre_activations.push_back(std::move(z));
      cache.activations.push_back(std::move(a));
    } else {
      cache.pre_activations.push_back(std::move(z));
    }
  }
  apply_head(model.head, cache.pre_activations.back(), head_noise, cache.output);
  return cache;
}

inline Matrix predict(const MlpModel& model, const Matrix& batch) { return forward(model, batch).output; }

/// Parameter-shaped gradient container; also used for optimizer accumulators.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;  // d loss / d batch, filled by backward

  static Gradients zeros_like(const MlpModel& model) {
    Gradients g;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
      g.biases.emplace_back(model.biases[l].size(), 0.0);
    }
    return g;
  }
};

/// Backpropagates `loss_grad` (d loss / d model output) through the head and
/// every layer. The cache must come from a forward call on this exact model.
inline Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& loss_grad) {
  if (cache.layer_dims != model.layer_dims || cache.revision != model.revision ||
      cache.pre_activations.size() != model.layer_count()) {
    throw UsageError("backward: forward cache is stale or belongs to a different model");
  }
  if (loss_grad.rows() != cache.output.rows() || loss_grad.cols() != cache.output.cols()) {
    throw ShapeError("backward: loss gradient " + loss_grad.shape() + " does not match output " +
                     cache.output.shape());
  }

  // d loss / d logits
  Matrix delta = loss_grad;
  const Matrix& y = cache.output;
  switch (model.head.kind) {
    case HeadKind::Linear:
      break;
    case HeadKind::Sigmoid:
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta.data()[i] *= y.data()[i] * (1.0 - y.data()[i]);
      }
      break;
    case HeadKind::Softmax:
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        auto d = delta.row(r);
        auto p = y.row(r);
        double dot = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) dot += d[k] * p[k];
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = p[k] * (d[k] - dot);
      }
      break;
    case HeadKind::MixedTabular: {
      const auto& mixed = model.head.mixed;
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        auto d = delta.row(r);
        auto p = y.row(r);
        std::size_t offset = mixed.numeric_width;
        for (const auto& block : mixed.categorical_blocks) {
          double dot = 0.0;
          for (std::size_t k = 0; k < block.cardinality; ++k) dot += d[offset + k] * p[offset + k];
          for (std::size_t k = 0; k < block.cardinality; ++k) {
            d[offset + k] = p[offset + k] * (d[offset + k] - dot) / mixed.temperature;
          }
          offset += block.cardinality;
        }
      }
      break;
    }
  }

  Gradients grads = Gradients::zeros_like(model);
  for (std::size_t l = model.layer_count(); l-- > 0;) {
    grads.weights[l] = matmul_transpose_a(cache.activations[l], delta);
    auto& gb = grads.biases[l];
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
    }
    Matrix upstream = matmul_transpose_b(delta, model.weights[l]);
    if (l > 0 && model.hidden_activation == Activation::ReLU) {
      const Matrix& z = cache.pre_activations[l - 1];
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (!(z.data()[i] > 0.0)) upstream.data()[i] = 0.0;
      }
    }
    delta = std::move(upstream);
  }
  grads.input = std::move(delta);
  return grads;
}

/// Discriminator-style probabilities are clamped here before any log.
inline constexpr double kProbClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred
};

/// Mean binary cross-entropy on clamped predictions. Entries that hit the
/// clamp get zero gradient (the derivative of the clamped function).
inline LossResult bce_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw ParameterError("bce_loss: empty input");
  if (pred.size() != target.size()) {
    throw ShapeError("bce_loss: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  const double n = static_cast<double>(pred.size());
  LossResult r;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
    const double t = target[i];
    r.loss -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    const bool clamped = raw < kProbClamp || raw > 1.0 - kProbClamp;
    r.grad[i] = clamped ? 0.0 : (-t / p + (1.0 - t) / (1.0 - p)) / n;
  }
  r.loss /= n;
  return r;
}

enum class OptimizerKind { SGD, Adam };
enum class Direction { Descend, Ascend };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig adam(double lr = 1e-3) { return {OptimizerKind::Adam, lr}; }
  static OptimizerConfig sgd(double lr, double momentum = 0.9) {
    OptimizerConfig c;
    c.kind = OptimizerKind::SGD;
    c.learning_rate = lr;
    c.momentum = momentum;
    return c;
  }
};

/// Optimizer accumulators. For SGD `first` holds the velocity; for Adam
/// `first`/`second` are the moment estimates.
struct OptimizerState {
  OptimizerConfig config;
  Gradients first;
  Gradients second;
  std::uint64_t steps = 0;

  OptimizerState() = default;
  OptimizerState(OptimizerConfig cfg, const MlpModel& model)
      : config(cfg), first(Gradients::zeros_like(model)), second(Gradients::zeros_like(model)) {
    if (!(cfg.learning_rate >= 0.0)) throw ParameterError("learning rate must be non-negative");
  }
};

namespace detail {
template <typename F>
void for_each_param(MlpModel& model, const Gradients& grads, OptimizerState& opt, F&& fn) {
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    auto& w = model.weights[l].data();
    const auto& gw = grads.weights[l].data();
    auto& m1 = opt.first.weights[l].data();
    auto& m2 = opt.second.weights[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) fn(w[i], gw[i], m1[i], m2[i]);
    auto& b = model.biases[l];
    const auto& gb = grads.biases[l];
    auto& b1 = opt.first.biases[l];
    auto& b2 = opt.second.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) fn(b[i], gb[i], b1[i], b2[i]);
  }
}
}  // namespace detail

/// One optimizer update; Ascend moves along +gradient.
inline void optimizer_step(OptimizerState& opt, MlpModel& model, const Gradients& grads,
                           Direction direction) {
  if (grads.weights.size() != model.layer_count() || grads.biases.size() != model.layer_count() ||
      opt.first.weights.size() != model.layer_count()) {
    throw ShapeError("optimizer_step: gradient layer count does not match model");
  }
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    if (grads.weights[l].rows() != model.weights[l].rows() ||
        grads.weights[l].cols() != model.weights[l].cols() ||
        grads.biases[l].size() != model.biases[l].size() ||
        opt.first.weights[l].size() != model.weights[l].size()) {
      throw ShapeError("optimizer_step: gradient for layer " + std::to_string(l) + " has shape " +
                       grads.weights[l].shape() + ", parameters are " + model.weights[l].shape());
    }
  }
  const double sign = direction == Direction::Ascend ? -1.0 : 1.0;
  const auto& cfg = opt.config;
  ++opt.steps;
  if (cfg.kind == OptimizerKind::SGD) {
    detail::for_each_param(model, grads, opt, [&](double& w, double g, double& vel, double&) {
      vel = cfg.momentum * vel + sign * g;
      w -= cfg.learning_rate * vel;
    });
  } else {
    const double t = static_cast<double>(opt.steps);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    detail::for_each_param(model, grads, opt, [&](double& w, double g, double& m, double& v) {
      const double sg = sign * g;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * sg;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * sg * sg;
      w -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
    });
  }
  ++model.revision;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointFormatVersion = 1;

inline std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Sigmoid: return "sigmoid";
    case HeadKind::Softmax: return "softmax";
    case HeadKind::Linear: return "linear";
    case HeadKind::MixedTabular: return "mixed_tabular";
  }
  return "linear";
}

inline HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sigmoid") return HeadKind::Sigmoid;
  if (s == "softmax") return HeadKind::Softmax;
  if (s == "linear") return HeadKind::Linear;
  if (s == "mixed_tabular") return HeadKind::MixedTabular;
  throw ParameterError("unknown output head '" + s + "'");
}

inline nlohmann::json head_to_json(const OutputHead& head) {
  nlohmann::json j{{"kind", to_string(head.kind)}};
  if (head.kind == HeadKind::MixedTabular) {
    j["numeric_width"] = head.mixed.numeric_width;
    j["temperature"] = head.mixed.temperature;
    auto blocks = nlohmann::json::array();
    for (const auto& b : head.mixed.categorical_blocks) {
      blocks.push_back({{"name", b.name}, {"cardinality", b.cardinality}});
    }
    j["categorical_blocks"] = std::move(blocks);
  }
  return j;
}

inline OutputHead head_from_json(const nlohmann::json& j) {
  OutputHead head;
  head.kind = head_kind_from_string(j.at("kind").get<std::string>());
  if (head.kind == HeadKind::MixedTabular) {
    head.mixed.numeric_width = j.at("numeric_width").get<std::size_t>();
    head.mixed.temperature = j.at("temperature").get<double>();
    for (const auto& b : j.at("categorical_blocks")) {
      head.mixed.categorical_blocks.push_back(
          {b.at("name").get<std::string>(), b.at("cardinality").get<std::size_t>()});
    }
  }
  return head;
}

/// Versioned checkpoint. Doubles are written in shortest round-trip form,
/// so loading reproduces every parameter bit for bit.
inline nlohmann::json checkpoint_to_json(const MlpModel& model, std::uint64_t seed) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["layer_dims"] = model.layer_dims;
  j["hidden_activation"] = model.hidden_activation == Activation::ReLU ? "relu" : "linear";
  j["output_head"] = head_to_json(model.head);
  auto weights = nlohmann::json::array();
  for (const auto& w : model.weights) weights.push_back(w.data());
  j["weights"] = std::move(weights);
  j["biases"] = model.biases;
  j["seed"] = seed;
  return j;
}

inline MlpModel checkpoint_from_json(const nlohmann::json& j, std::uint64_t* seed_out = nullptr) {
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw ParameterError("unsupported checkpoint format_version " + std::to_string(version));
  }
  MlpModel m;
  m.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  const auto act = j.at("hidden_activation").get<std::string>();
  if (act == "relu") {
    m.hidden_activation = Activation::ReLU;
  } else if (act == "linear") {
    m.hidden_activation = Activation::Linear;
  } else {
    throw ParameterError("unknown hidden activation '" + act + "'");
  }
  m.head = head_from_json(j.at("output_head"));
  const auto& weights = j.at("weights");
  if (weights.size() + 1 != m.layer_dims.size()) throw ShapeError("checkpoint weight count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    m.weights.emplace_back(m.layer_dims[l], m.layer_dims[l + 1], weights[l].get<std::vector<double>>());
  }
  m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  m.validate();
  if (seed_out) *seed_out = j.at("seed").get<std::uint64_t>();
  return m;
}

}  // namespace fairgen::nn

#endif  // FAIRGEN_NN_HPP
