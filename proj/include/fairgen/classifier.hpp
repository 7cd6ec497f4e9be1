#ifndef FAIRGEN_CLASSIFIER_HPP
#define FAIRGEN_CLASSIFIER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "fairgen/bias_analysis.hpp"
#include "fairgen/dataset.hpp"
#include "fairgen/nn.hpp"
#include "json.hpp"

namespace fairgen::clf {

struct ClassifierConfig {
  std::size_t hidden_units = 300;
  std::size_t epochs = 20;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  /// Early stopping: epochs without a validation-accuracy improvement.
  std::size_t patience = 10;

  nlohmann::json to_json() const {
    return {{"hidden_units", hidden_units}, {"epochs", epochs},     {"learning_rate", learning_rate},
            {"momentum", momentum},         {"batch_size", batch_size}, {"seed", seed},
            {"patience", patience}};
  }
  static ClassifierConfig from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    c.hidden_units = j.at("hidden_units").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.patience = j.at("patience").get<std::size_t>();
    return c;
  }
};

/// Trained network plus the encoder that maps table rows to its inputs.
struct Classifier {
  data::TableEncoder encoder;
  nn::MlpModel model;
  ClassifierConfig config;

  std::vector<double> predict_proba(const data::DatasetTable& table) const {
    if (model.head.kind != nn::HeadKind::Sigmoid || model.output_dim() != 1) {
      throw UsageError("classifier must have a single sigmoid output");
    }
    const Matrix out = nn::predict(model, encoder.encode(table));
    return out.data();
  }

  double accuracy(const data::DatasetTable& table) const {
    const auto p = predict_proba(table);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < table.size(); ++r) correct += ((p[r] >= 0.5 ? 1 : 0) == table.label(r)) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(table.size());
  }

  nlohmann::json to_json() const {
    return {{"model", nn::checkpoint_to_json(model, config.seed)},
            {"encoder", encoder.to_json()},
            {"schema", encoder.schema().to_json()},
            {"schema_hash", encoder.schema().hash()},
            {"config", config.to_json()}};
  }

  static Classifier from_json(const nlohmann::json& j) {
    const auto schema = data::Schema::from_json(j.at("schema"));
    if (schema.hash() != j.at("schema_hash").get<std::string>()) {
      throw ParameterError("classifier checkpoint schema hash mismatch");
    }
    Classifier c;
    c.encoder = data::TableEncoder::from_json(j.at("encoder"), schema);
    c.model = nn::checkpoint_from_json(j.at("model"));
    c.config = ClassifierConfig::from_json(j.at("config"));
    return c;
  }
};

/// Three hidden ReLU layers of `hidden_units`, sigmoid output, minibatch
/// cross-entropy with SGD + momentum. With a validation table, the model of
/// the best validation epoch is returned and training stops after
/// `patience` epochs without improvement.
inline Classifier train_classifier(const data::DatasetTable& train, const ClassifierConfig& config,
                                   const data::DatasetTable* validation = nullptr) {
  if (train.empty()) throw ParameterError("train_classifier: empty training table");
  if (config.hidden_units == 0) throw ParameterError("train_classifier: hidden_units must be >= 1");
  if (config.batch_size == 0) throw ParameterError("train_classifier: batch_size must be >= 1");

  Classifier c;
  c.config = config;
  c.encoder = data::TableEncoder::fit(train, data::ColumnSet::Features);
  SeededRng rng(config.seed);
  c.model = nn::make_default_mlp(c.encoder.width(), config.hidden_units, 1, nn::OutputHead::sigmoid(), rng);
  if (config.epochs == 0) return c;

  const Matrix x = c.encoder.encode(train);
  std::vector<double> y(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) y[r] = train.label(r);

  nn::OptimizerState opt(nn::OptimizerConfig::sgd(config.learning_rate, config.momentum), c.model);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  nn::MlpModel best = c.model;
  double best_acc = -1.0;
  std::size_t stale = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      Matrix xb(n, x.cols());
      std::vector<double> yb(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = x.row(order[start + i]);
        std::copy(src.begin(), src.end(), xb.row(i).begin());
        yb[i] = y[order[start + i]];
      }
      const auto cache = nn::forward(c.model, xb);
      const auto loss = nn::bce_loss(cache.output.data(), yb);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("classifier training diverged (loss NaN) at step " + std::to_string(step) +
                            " of epoch " + std::to_string(epoch));
      }
      const auto grads = nn::backward(c.model, cache, Matrix(n, 1, loss.grad));
      nn::optimizer_step(opt, c.model, grads, nn::Direction::Descend);
      ++step;
    }
    if (!all_finite(c.model.weights.back().data())) {
      throw TrainingError("classifier training diverged at epoch " + std::to_string(epoch));
    }
    if (validation) {
      const double acc = c.accuracy(*validation);
      if (acc > best_acc) {
        best_acc = acc;
        best = c.model;
        stale = 0;
      } else if (++stale >= config.patience) {
        break;
      }
    }
  }
  if (validation) c.model = std::move(best);
  return c;
}

// ---------------------------------------------------------------------------
// Repeated evaluation

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Mean and 95% normal-approximation half-width 1.96 * s / sqrt(r), with s the
/// sample standard deviation.
inline MeanCi mean_ci(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("a confidence interval needs at least 2 values");
  const double r = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= r;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (r - 1.0));
  return {mean, 1.96 * s / std::sqrt(r)};
}

struct GroupEval {
  data::GroupPredicate group;
  std::size_t rows = 0;
  std::vector<double> accuracies;      // one per repeat
  std::vector<double> mean_positives;  // one per repeat
  MeanCi accuracy;
  MeanCi mean_positive;
};

struct EvalResult {
  data::Schema schema;
  ClassifierConfig config;
  std::size_t repeats = 0;
  std::vector<double> accuracies;  // overall, one per repeat
  MeanCi overall;
  std::vector<GroupEval> groups;

  const GroupEval& group(const data::GroupPredicate& g) const {
    for (const auto& e : groups) {
      if (e.group == g) return e;
    }
    throw ParameterError("group '" + g.to_string(schema) + "' not evaluated");
  }

  nlohmann::json to_json() const {
    auto gs = nlohmann::json::array();
    for (const auto& g : groups) {
      gs.push_back({{"group", g.group.to_string(schema)},
                    {"rows", g.rows},
                    {"accuracies", g.accuracies},
                    {"accuracy_mean", g.accuracy.mean},
                    {"accuracy_ci_half_width", g.accuracy.half_width},
                    {"mean_positive_probabilities", g.mean_positives},
                    {"mean_positive_mean", g.mean_positive.mean},
                    {"mean_positive_ci_half_width", g.mean_positive.half_width}});
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t r = 0; r < repeats; ++r) seeds.push_back(config.seed + r);
    return {{"config", config.to_json()},
            {"repeats", repeats},
            {"seeds", seeds},
            {"accuracies", accuracies},
            {"accuracy_mean", overall.mean},
            {"accuracy_ci_half_width", overall.half_width},
            {"groups", std::move(gs)}};
  }
};

/// Trains `repeats` classifiers with seeds seed+0 .. seed+repeats-1 and
/// aggregates overall and per-group test accuracy. Repeats may run on up to
/// `threads` threads; results are keyed by repeat index, so the outcome does
/// not depend on completion order.
inline EvalResult evaluate_ci(const data::DatasetTable& train, const data::DatasetTable& test,
                              const ClassifierConfig& config, std::size_t repeats,
                              const data::DatasetTable* validation = nullptr,
                              std::vector<data::GroupPredicate> groups = {}, std::size_t threads = 1) {
  if (repeats < 2) throw ParameterError("evaluate_ci: repeats must be at least 2");
  if (groups.empty()) groups = data::single_attribute_groups(test.schema);
  std::sort(groups.begin(), groups.end());
  std::erase_if(groups, [&](const data::GroupPredicate& g) { return data::group_count(test, g) == 0; });

  std::vector<std::vector<double>> scores(repeats);
  std::vector<std::string> errors(repeats);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < repeats; r = next++) {
      try {
        ClassifierConfig cfg = config;
        cfg.seed = config.seed + r;
        scores[r] = train_classifier(train, cfg, validation).predict_proba(test);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  const std::size_t pool = std::max<std::size_t>(1, std::min(threads, repeats));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
  }
  for (std::size_t r = 0; r < repeats; ++r) {
    if (!errors[r].empty()) throw TrainingError("repeat " + std::to_string(r) + ": " + errors[r]);
  }

  EvalResult result;
  result.schema = test.schema;
  result.config = config;
  result.repeats = repeats;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      correct += ((scores[r][i] >= 0.5 ? 1 : 0) == test.label(i)) ? 1 : 0;
    }
    result.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  result.overall = mean_ci(result.accuracies);
  for (const auto& g : groups) {
    GroupEval ge;
    ge.group = g;
    ge.rows = data::group_count(test, g);
    for (std::size_t r = 0; r < repeats; ++r) {
      ge.accuracies.push_back(bias::group_accuracy(scores[r], test, g));
      ge.mean_positives.push_back(bias::mean_positive_probability(scores[r], test, g));
    }
    ge.accuracy = mean_ci(ge.accuracies);
    ge.mean_positive = mean_ci(ge.mean_positives);
    result.groups.push_back(std::move(ge));
  }
  return result;
}

/// One EvalResult per hidden-unit count, in the given order.
inline std::vector<EvalResult> evaluate_sweep(const data::DatasetTable& train, const data::DatasetTable& test,
                                              ClassifierConfig config, const std::vector<std::size_t>& hidden_units,
                                              std::size_t repeats, const data::DatasetTable* validation = nullptr,
                                              std::size_t threads = 1) {
  std::vector<EvalResult> out;
  for (auto hu : hidden_units) {
    config.hidden_units = hu;
    out.push_back(evaluate_ci(train, test, config, repeats, validation, {}, threads));
  }
  return out;
}

/// "84.90 ± 1.14" style cell, in percent.
inline std::string format_cell(const MeanCi& ci) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f \xC2\xB1 %.2f", 100.0 * ci.mean, 100.0 * ci.half_width);
  return buf;
}

}  // namespace fairgen::clf

#endif  // FAIRGEN_CLASSIFIER_HPP
