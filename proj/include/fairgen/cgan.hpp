#ifndef FAIRGEN_CGAN_HPP
#define FAIRGEN_CGAN_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fairgen/dataset.hpp"
#include "fairgen/nn.hpp"
#include "fairgen/numerics.hpp"
#include "json.hpp"

// Conditional GAN over encoded table rows, trained either with the
// primal-dual subgradient scheme (discriminator ascent, per-sample dual
// update from a kernel density estimate, generator descent on the
// adversarial term plus the squared dual residual) or as a plain cGAN.

namespace fairgen::gan {

enum class TrainingMode { PrimalDual, StandardCgan };
enum class KernelForm { Unnormalized, Normalized };

inline std::string to_string(TrainingMode m) {
  return m == TrainingMode::PrimalDual ? "primal-dual" : "standard";
}
inline TrainingMode training_mode_from_string(const std::string& s) {
  if (s == "primal-dual") return TrainingMode::PrimalDual;
  if (s == "standard") return TrainingMode::StandardCgan;
  throw ParameterError("unknown training mode '" + s + "' (expected primal-dual or standard)");
}

struct GanHyper {
  std::size_t n1 = 64;         // real minibatch
  std::size_t n2 = 64;         // noise minibatch
  std::size_t dis_steps = 1;   // discriminator steps per round
  double beta = 0.1;           // dual step size
  std::optional<double> sigma; // kernel bandwidth; unset = median heuristic
  std::size_t rounds = 2000;   // outer repetitions
  std::size_t noise_dim = 32;
  std::size_t hidden_units = 32;
  double temperature = 0.5;
  double gen_lr = 5e-4;
  double dis_lr = 5e-4;
  double adam_beta1 = 0.5;
  KernelForm kernel = KernelForm::Unnormalized;

  void validate() const {
    if (n1 == 0 || n2 == 0 || dis_steps == 0 || noise_dim == 0 || hidden_units == 0) {
      throw ParameterError("GAN batch sizes, discriminator steps, noise dim and hidden units must be >= 1");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be positive");
    if (sigma && (!(*sigma > 0.0) || !std::isfinite(*sigma))) throw ParameterError("sigma must be positive");
    if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
    if (!(gen_lr >= 0.0) || !(dis_lr >= 0.0)) throw ParameterError("learning rates must be non-negative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ParameterError("adam_beta1 must lie in [0, 1)");
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"n1", n1},
                     {"n2", n2},
                     {"dis_steps", dis_steps},
                     {"beta", beta},
                     {"rounds", rounds},
                     {"noise_dim", noise_dim},
                     {"hidden_units", hidden_units},
                     {"temperature", temperature},
                     {"gen_lr", gen_lr},
                     {"dis_lr", dis_lr},
                     {"adam_beta1", adam_beta1},
                     {"kernel", kernel == KernelForm::Unnormalized ? "unnormalized" : "normalized"}};
    j["sigma"] = sigma ? nlohmann::json(*sigma) : nlohmann::json("median");
    return j;
  }

  static GanHyper from_json(const nlohmann::json& j) {
    GanHyper h;
    h.n1 = j.at("n1").get<std::size_t>();
    h.n2 = j.at("n2").get<std::size_t>();
    h.dis_steps = j.at("dis_steps").get<std::size_t>();
    h.beta = j.at("beta").get<double>();
    h.rounds = j.at("rounds").get<std::size_t>();
    h.noise_dim = j.at("noise_dim").get<std::size_t>();
    h.hidden_units = j.at("hidden_units").get<std::size_t>();
    h.temperature = j.at("temperature").get<double>();
    h.gen_lr = j.at("gen_lr").get<double>();
    h.dis_lr = j.at("dis_lr").get<double>();
    h.adam_beta1 = j.at("adam_beta1").get<double>();
    h.kernel = j.at("kernel").get<std::string>() == "normalized" ? KernelForm::Normalized
                                                                 : KernelForm::Unnormalized;
    if (j.at("sigma").is_number()) h.sigma = j.at("sigma").get<double>();
    h.validate();
    return h;
  }

  nn::OptimizerConfig optimizer(double lr) const {
    auto cfg = nn::OptimizerConfig::adam(lr);
    cfg.beta1 = adam_beta1;
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Kernel density estimate and dual update

struct Kde {
  double sigma = 1.0;
  KernelForm form = KernelForm::Unnormalized;

  /// Multiplier in front of exp(-|u|^2 / 2 sigma^2) for a `dim`-wide vector.
  double scale(std::size_t dim) const {
    if (form == KernelForm::Unnormalized) return 1.0;
    return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * static_cast<double>(dim));
  }
};

/// exp(-|u|^2 / (2 sigma^2)).
inline double gaussian_kernel(std::span<const double> u, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel: sigma must be positive");
  double sq = 0.0;
  for (double v : u) sq += v * v;
  return std::exp(-sq / (2.0 * sigma * sigma));
}

namespace detail {
inline double kernel_between(std::span<const double> a, std::span<const double> b, const Kde& kde) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sq += d * d;
  }
  return kde.scale(a.size()) * std::exp(-sq / (2.0 * kde.sigma * kde.sigma));
}
}  // namespace detail

/// p_gen(x_i) = (1/n2) * sum_j k(fake_j - x_i) for every real row i.
inline std::vector<double> estimate_pgen(const Matrix& real, const Matrix& fake, const Kde& kde) {
  if (fake.rows() == 0) throw ParameterError("estimate_pgen: empty fake batch");
  if (real.cols() != fake.cols()) {
    throw ShapeError("estimate_pgen: real " + real.shape() + " vs fake " + fake.shape());
  }
  if (!(kde.sigma > 0.0)) throw ParameterError("estimate_pgen: sigma must be positive");
  std::vector<double> p(real.rows(), 0.0);
  for (std::size_t i = 0; i < real.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < fake.rows(); ++j) acc += detail::kernel_between(fake.row(j), real.row(i), kde);
    p[i] = acc / static_cast<double>(fake.rows());
  }
  return p;
}

inline std::vector<double> estimate_pgen(const Matrix& real, const Matrix& fake, double sigma) {
  return estimate_pgen(real, fake, Kde{sigma, KernelForm::Unnormalized});
}

/// Condition-aware variant: row i only averages over fake rows carrying the
/// same condition id. With a single condition this is exactly estimate_pgen.
/// Rows whose condition has no fake partner get 0.
inline std::vector<double> estimate_pgen_conditional(const Matrix& real, const Matrix& fake,
                                                     std::span<const std::size_t> real_ids,
                                                     std::span<const std::size_t> fake_ids,
                                                     const Kde& kde) {
  if (fake.rows() == 0) throw ParameterError("estimate_pgen: empty fake batch");
  if (real.cols() != fake.cols() || real_ids.size() != real.rows() || fake_ids.size() != fake.rows()) {
    throw ShapeError("estimate_pgen_conditional: batch/id shape mismatch");
  }
  std::vector<double> p(real.rows(), 0.0);
  for (std::size_t i = 0; i < real.rows(); ++i) {
    double acc = 0.0;
    std::size_t partners = 0;
    for (std::size_t j = 0; j < fake.rows(); ++j) {
      if (fake_ids[j] != real_ids[i]) continue;
      acc += detail::kernel_between(fake.row(j), real.row(i), kde);
      ++partners;
    }
    p[i] = partners ? acc / static_cast<double>(partners) : 0.0;
  }
  return p;
}

/// p~_i = p_i - beta * log(2 (1 - D(x_i))). Discriminator values are clamped
/// to [1e-7, 1 - 1e-7] first.
inline std::vector<double> dual_update(std::span<const double> p_gen, std::span<const double> dis_on_real,
                                       double beta) {
  if (p_gen.size() != dis_on_real.size()) {
    throw ShapeError("dual_update: " + std::to_string(p_gen.size()) + " densities vs " +
                     std::to_string(dis_on_real.size()) + " discriminator outputs");
  }
  std::vector<double> out(p_gen.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = std::clamp(dis_on_real[i], nn::kProbClamp, 1.0 - nn::kProbClamp);
    out[i] = p_gen[i] - beta * std::log(2.0 * (1.0 - d));
  }
  return out;
}

/// Median pairwise Euclidean distance between rows; 1.0 if every pair
/// coincides or there are fewer than two rows. With `ids`, only pairs sharing
/// an id count (the pairs a conditional KDE actually compares).
inline double median_pairwise_distance(const Matrix& rows, std::span<const std::size_t> ids = {}) {
  std::vector<double> d;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (std::size_t j = i + 1; j < rows.rows(); ++j) {
      if (!ids.empty() && ids[i] != ids[j]) continue;
      double sq = 0.0;
      for (std::size_t k = 0; k < rows.cols(); ++k) {
        const double diff = rows(i, k) - rows(j, k);
        sq += diff * diff;
      }
      d.push_back(std::sqrt(sq));
    }
  }
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double median = *mid;
  if (d.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(d.begin(), mid));
  }
  return median > 0.0 ? median : 1.0;
}

// ---------------------------------------------------------------------------
// Conditions

/// One-hot layout of the sensitive columns; a condition is a tuple holding
/// one value index per sensitive column.
class ConditionSpace {
public:
  ConditionSpace() = default;
  explicit ConditionSpace(const data::Schema& schema) : columns_(schema.sensitive_indices()) {
    for (auto c : columns_) cardinalities_.push_back(schema.columns[c].values.size());
  }

  const std::vector<std::size_t>& columns() const { return columns_; }
  std::size_t width() const {
    std::size_t w = 0;
    for (auto k : cardinalities_) w += k;
    return w;
  }

  std::vector<std::size_t> tuple_of(const data::Row& row) const {
    std::vector<std::size_t> t;
    for (auto c : columns_) t.push_back(std::get<data::Category>(row[c]).index);
    return t;
  }

  std::size_t id_of(const std::vector<std::size_t>& tuple) const {
    std::size_t id = 0;
    for (std::size_t i = 0; i < tuple.size(); ++i) id = id * cardinalities_[i] + tuple[i];
    return id;
  }

  void one_hot(const std::vector<std::size_t>& tuple, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
      out[offset + tuple[i]] = 1.0;
      offset += cardinalities_[i];
    }
  }

  bool satisfies(const std::vector<std::size_t>& tuple, const data::GroupPredicate& group) const {
    for (const auto& term : group.terms) {
      auto it = std::find(columns_.begin(), columns_.end(), term.column);
      if (it == columns_.end()) return false;
      if (tuple[static_cast<std::size_t>(it - columns_.begin())] != term.value) return false;
    }
    return true;
  }

private:
  std::vector<std::size_t> columns_;
  std::vector<std::size_t> cardinalities_;
};

// ---------------------------------------------------------------------------
// State

struct TraceRow {
  std::size_t round = 0;
  double dis_loss = 0.0;
  double gen_loss = 0.0;
  double mean_dis_real = 0.0;
  double mean_dis_fake = 0.0;
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  bool empty() const { return rows.empty(); }
  friend bool operator==(const TrainingTrace&, const TrainingTrace&) = default;

  void write_csv(std::ostream& out) const {
    out << "round,dis_loss,gen_loss,mean_dis_real,mean_dis_fake\n";
    for (const auto& r : rows) {
      out << r.round << ',' << data::format_real(r.dis_loss) << ',' << data::format_real(r.gen_loss) << ','
          << data::format_real(r.mean_dis_real) << ',' << data::format_real(r.mean_dis_fake) << '\n';
    }
  }
};

struct GanState {
  data::Schema schema;
  data::TableEncoder encoder;  // non-sensitive columns
  ConditionSpace conditions;
  nn::MlpModel gen;            // [noise | condition] -> encoded row
  nn::MlpModel dis;            // [encoded row | condition] -> P(real)
  nn::OptimizerState gen_opt;
  nn::OptimizerState dis_opt;
  GanHyper hyper;
  TrainingMode mode = TrainingMode::PrimalDual;
  std::vector<double> dual;    // p~ for the current real minibatch
  double sigma = 0.0;          // resolved bandwidth, 0 until the first round
  std::uint64_t seed = 0;
  bool trained = false;
  /// Condition tuples seen in training with their row counts; generation
  /// draws unspecified sensitive values from these.
  std::map<std::vector<std::size_t>, std::size_t> observed_conditions;

  Kde kde() const { return Kde{sigma, hyper.kernel}; }
  std::size_t row_width() const { return encoder.width(); }
};

/// Builds untrained networks sized for `table`. The encoder is fitted on the
/// table's non-sensitive columns.
inline GanState make_gan_state(const data::DatasetTable& table, const GanHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  GanState s;
  s.schema = table.schema;
  s.encoder = data::TableEncoder::fit(table, data::ColumnSet::NonSensitive);
  s.conditions = ConditionSpace(table.schema);
  s.hyper = hyper;
  s.seed = seed;
  if (hyper.sigma) s.sigma = *hyper.sigma;
  SeededRng init(seed);
  const std::size_t cw = s.conditions.width();
  s.gen = nn::make_default_mlp(hyper.noise_dim + cw, hyper.hidden_units, s.encoder.width(),
                               nn::OutputHead::mixed_tabular(s.encoder.mixed_head(hyper.temperature)), init);
  s.dis = nn::make_default_mlp(s.encoder.width() + cw, hyper.hidden_units, 1, nn::OutputHead::sigmoid(), init);
  s.gen_opt = nn::OptimizerState(hyper.optimizer(hyper.gen_lr), s.gen);
  s.dis_opt = nn::OptimizerState(hyper.optimizer(hyper.dis_lr), s.dis);
  return s;
}

/// One round's minibatches. noise_input is [z | fake condition one-hot].
struct GanBatch {
  Matrix real_x;
  Matrix real_cond;
  std::vector<std::size_t> real_ids;
  Matrix noise_input;
  Matrix fake_cond;
  std::vector<std::size_t> fake_ids;
  Matrix head_noise;
};

/// Draws n1 real rows (with replacement) from `pool` and n2 noise vectors;
/// fake row j borrows the condition of real row j mod n1.
inline GanBatch sample_batch(const GanState& state, const Matrix& encoded_pool,
                             const std::vector<std::vector<std::size_t>>& pool_conditions, SeededRng& rng) {
  const auto& h = state.hyper;
  const std::size_t d = encoded_pool.cols();
  const std::size_t cw = state.conditions.width();
  GanBatch b;
  b.real_x = Matrix(h.n1, d);
  b.real_cond = Matrix(h.n1, cw);
  std::vector<const std::vector<std::size_t>*> tuples;
  for (std::size_t i = 0; i < h.n1; ++i) {
    const std::size_t r = rng.below(encoded_pool.rows());
    std::copy(encoded_pool.row(r).begin(), encoded_pool.row(r).end(), b.real_x.row(i).begin());
    state.conditions.one_hot(pool_conditions[r], b.real_cond.row(i));
    b.real_ids.push_back(state.conditions.id_of(pool_conditions[r]));
    tuples.push_back(&pool_conditions[r]);
  }
  const Matrix z = sample_gaussian(rng, h.n2, h.noise_dim, 0.0, 1.0);
  b.fake_cond = Matrix(h.n2, cw);
  for (std::size_t j = 0; j < h.n2; ++j) {
    state.conditions.one_hot(*tuples[j % h.n1], b.fake_cond.row(j));
    b.fake_ids.push_back(b.real_ids[j % h.n1]);
  }
  b.noise_input = hconcat(z, b.fake_cond);
  b.head_noise = nn::sample_head_noise(state.gen, h.n2, rng);
  return b;
}

inline Matrix generate_encoded(const nn::MlpModel& gen, const GanBatch& batch) {
  return nn::forward(gen, batch.noise_input, batch.head_noise).output;
}

// ---------------------------------------------------------------------------
// Discriminator objective: mean log D(real) + mean log(1 - D(fake))

namespace detail {
inline double clamped(double d) { return std::clamp(d, nn::kProbClamp, 1.0 - nn::kProbClamp); }
inline bool inside_clamp(double d) { return d >= nn::kProbClamp && d <= 1.0 - nn::kProbClamp; }
}  // namespace detail

inline double dis_objective(const nn::MlpModel& dis, const nn::MlpModel& gen, const GanBatch& batch) {
  const Matrix fake = generate_encoded(gen, batch);
  const Matrix dr = nn::predict(dis, hconcat(batch.real_x, batch.real_cond));
  const Matrix df = nn::predict(dis, hconcat(fake, batch.fake_cond));
  double real_term = 0.0;
  for (double d : dr.data()) real_term += std::log(detail::clamped(d));
  double fake_term = 0.0;
  for (double d : df.data()) fake_term += std::log(1.0 - detail::clamped(d));
  return real_term / static_cast<double>(dr.rows()) + fake_term / static_cast<double>(df.rows());
}

/// Gradient of dis_objective with respect to the discriminator parameters.
inline nn::Gradients dis_objective_gradients(const nn::MlpModel& dis, const nn::MlpModel& gen,
                                             const GanBatch& batch) {
  if (batch.real_x.rows() == 0 || batch.noise_input.rows() == 0) {
    throw ParameterError("discriminator step on an empty batch");
  }
  const Matrix fake = generate_encoded(gen, batch);
  const Matrix input = vconcat(hconcat(batch.real_x, batch.real_cond), hconcat(fake, batch.fake_cond));
  const auto cache = nn::forward(dis, input);
  const std::size_t n1 = batch.real_x.rows();
  const std::size_t n2 = fake.rows();
  Matrix upstream(input.rows(), 1);
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const double d = cache.output(i, 0);
    if (!detail::inside_clamp(d)) continue;
    upstream(i, 0) = i < n1 ? 1.0 / (static_cast<double>(n1) * d)
                            : -1.0 / (static_cast<double>(n2) * (1.0 - d));
  }
  return nn::backward(dis, cache, upstream);
}

/// One ascent step of the discriminator on this round's batch.
inline void dis_step(GanState& state, const GanBatch& batch) {
  const auto grads = dis_objective_gradients(state.dis, state.gen, batch);
  nn::optimizer_step(state.dis_opt, state.dis, grads, nn::Direction::Ascend);
}

// ---------------------------------------------------------------------------
// Generator objective:
//   (1/n2) sum_j log(1 - D(G(z_j)))  +  (1/n1) sum_i (p~_i - p_i)^2
// where p~ is held fixed and p_i depends on the generator through the KDE.

struct GenObjective {
  double adversarial = 0.0;
  double dual_residual = 0.0;
  double total() const { return adversarial + dual_residual; }
};

struct GenObjectiveInputs {
  const std::vector<double>* dual = nullptr;  // required in primal-dual mode
  Kde kde;
  TrainingMode mode = TrainingMode::PrimalDual;
};

inline GenObjective gen_objective(const nn::MlpModel& gen, const nn::MlpModel& dis, const GanBatch& batch,
                                  const GenObjectiveInputs& in) {
  const Matrix fake = generate_encoded(gen, batch);
  const Matrix df = nn::predict(dis, hconcat(fake, batch.fake_cond));
  GenObjective obj;
  for (double d : df.data()) obj.adversarial += std::log(1.0 - detail::clamped(d));
  obj.adversarial /= static_cast<double>(df.rows());
  if (in.mode == TrainingMode::PrimalDual) {
    if (!in.dual || in.dual->size() != batch.real_x.rows()) {
      throw UsageError("generator objective needs a dual vector for the current real batch");
    }
    const auto p = estimate_pgen_conditional(batch.real_x, fake, batch.real_ids, batch.fake_ids, in.kde);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double r = (*in.dual)[i] - p[i];
      obj.dual_residual += r * r;
    }
    obj.dual_residual /= static_cast<double>(p.size());
  }
  return obj;
}

/// Gradient of gen_objective with respect to the generator parameters.
inline nn::Gradients gen_objective_gradients(const nn::MlpModel& gen, const nn::MlpModel& dis,
                                             const GanBatch& batch, const GenObjectiveInputs& in) {
  if (in.mode == TrainingMode::PrimalDual && (!in.dual || in.dual->size() != batch.real_x.rows())) {
    throw UsageError("generator step needs a populated dual vector for the current real batch");
  }
  const auto gen_cache = nn::forward(gen, batch.noise_input, batch.head_noise);
  const Matrix& fake = gen_cache.output;
  const std::size_t n2 = fake.rows();
  const std::size_t d = fake.cols();

  const auto dis_cache = nn::forward(dis, hconcat(fake, batch.fake_cond));
  Matrix upstream(n2, 1);
  for (std::size_t j = 0; j < n2; ++j) {
    const double dj = dis_cache.output(j, 0);
    if (detail::inside_clamp(dj)) upstream(j, 0) = -1.0 / (static_cast<double>(n2) * (1.0 - dj));
  }
  const auto dis_grads = nn::backward(dis, dis_cache, upstream);
  Matrix d_fake = column_slice(dis_grads.input, 0, d);

  if (in.mode == TrainingMode::PrimalDual) {
    const auto& real = batch.real_x;
    const std::size_t n1 = real.rows();
    const auto p = estimate_pgen_conditional(real, fake, batch.real_ids, batch.fake_ids, in.kde);
    const double inv_var = 1.0 / (in.kde.sigma * in.kde.sigma);
    for (std::size_t i = 0; i < n1; ++i) {
      std::size_t partners = 0;
      for (std::size_t j = 0; j < n2; ++j) partners += batch.fake_ids[j] == batch.real_ids[i] ? 1 : 0;
      if (partners == 0) continue;
      // d/dp_i of (1/n1)(p~_i - p_i)^2, times dp_i/dk_ij = 1/partners
      const double coeff = 2.0 * (p[i] - (*in.dual)[i]) / (static_cast<double>(n1) * static_cast<double>(partners));
      if (coeff == 0.0) continue;
      for (std::size_t j = 0; j < n2; ++j) {
        if (batch.fake_ids[j] != batch.real_ids[i]) continue;
        const double k = detail::kernel_between(fake.row(j), real.row(i), in.kde);
        auto g = d_fake.row(j);
        for (std::size_t c = 0; c < d; ++c) g[c] += coeff * k * (-(fake(j, c) - real(i, c)) * inv_var);
      }
    }
  }
  return nn::backward(gen, gen_cache, d_fake);
}

inline GenObjectiveInputs objective_inputs(const GanState& state) {
  return {&state.dual, state.kde(), state.mode};
}

/// One descent step of the generator. In primal-dual mode the dual vector
/// must already hold p~ for this batch's real rows.
inline void gen_step(GanState& state, const GanBatch& batch) {
  if (state.mode == TrainingMode::PrimalDual && state.dual.size() != batch.real_x.rows()) {
    throw UsageError("gen_step: dual vector not populated for this round");
  }
  const auto grads = gen_objective_gradients(state.gen, state.dis, batch, objective_inputs(state));
  nn::optimizer_step(state.gen_opt, state.gen, grads, nn::Direction::Descend);
}

// ---------------------------------------------------------------------------
// Training and generation

/// Runs `hyper.rounds` outer rounds on the rows of `table` matching `tpg`
/// (an empty predicate trains on every row, each conditioned on its own
/// sensitive values). Each round: sample n1 real rows and n2 noise vectors,
/// take K discriminator ascent steps, estimate p_gen by KDE, update the dual
/// vector, take one generator descent step.
inline TrainingTrace train(GanState& state, const data::DatasetTable& table, const data::GroupPredicate& tpg,
                           SeededRng& rng, TrainingMode mode = TrainingMode::PrimalDual) {
  if (!(table.schema == state.schema)) throw ShapeError("train: table schema differs from GAN schema");
  const auto& h = state.hyper;
  const auto members = data::group_rows(table, tpg);
  if (members.size() < h.n1) {
    throw ParameterError("train: group '" + tpg.to_string(table.schema) + "' has " +
                         std::to_string(members.size()) + " rows, need at least n1 = " + std::to_string(h.n1));
  }
  TrainingTrace trace;
  if (h.rounds == 0) return trace;

  state.mode = mode;
  const auto pool_table = table.subset(members);
  const Matrix pool = state.encoder.encode(pool_table);
  std::vector<std::vector<std::size_t>> pool_conditions;
  state.observed_conditions.clear();
  for (const auto& row : pool_table.rows) {
    pool_conditions.push_back(state.conditions.tuple_of(row));
    ++state.observed_conditions[pool_conditions.back()];
  }

  for (std::size_t round = 0; round < h.rounds; ++round) {
    const GanBatch batch = sample_batch(state, pool, pool_conditions, rng);
    if (round == 0 && !h.sigma) state.sigma = median_pairwise_distance(batch.real_x, batch.real_ids);

    double dis_obj = 0.0;
    for (std::size_t k = 0; k < h.dis_steps; ++k) dis_step(state, batch);
    dis_obj = dis_objective(state.dis, state.gen, batch);

    const Matrix fake = generate_encoded(state.gen, batch);
    const Matrix d_real = nn::predict(state.dis, hconcat(batch.real_x, batch.real_cond));
    const Matrix d_fake = nn::predict(state.dis, hconcat(fake, batch.fake_cond));

    if (mode == TrainingMode::PrimalDual) {
      const auto p = estimate_pgen_conditional(batch.real_x, fake, batch.real_ids, batch.fake_ids, state.kde());
      state.dual = dual_update(p, d_real.data(), h.beta);
    }
    const double gen_loss = gen_objective(state.gen, state.dis, batch, objective_inputs(state)).total();
    gen_step(state, batch);

    TraceRow row;
    row.round = round;
    row.dis_loss = -dis_obj;
    row.gen_loss = gen_loss;
    for (double v : d_real.data()) row.mean_dis_real += v;
    for (double v : d_fake.data()) row.mean_dis_fake += v;
    row.mean_dis_real /= static_cast<double>(d_real.rows());
    row.mean_dis_fake /= static_cast<double>(d_fake.rows());
    if (!std::isfinite(row.dis_loss) || !std::isfinite(row.gen_loss)) {
      throw TrainingError("GAN training diverged at round " + std::to_string(round));
    }
    trace.rows.push_back(row);
  }
  state.trained = true;
  return trace;
}

/// Decodes `count` generator samples for `tpg`. Sensitive columns are
/// stamped from the sampled condition, so every row satisfies `tpg`.
inline data::DatasetTable generate(const GanState& state, const data::GroupPredicate& tpg, std::size_t count,
                                   SeededRng& rng) {
  if (!state.trained) throw UsageError("generate: GAN state has not been trained");
  if (count == 0) throw ParameterError("generate: count must be at least 1");

  std::vector<std::vector<std::size_t>> candidates;
  std::vector<std::size_t> weights;
  for (const auto& [tuple, n] : state.observed_conditions) {
    if (state.conditions.satisfies(tuple, tpg)) {
      candidates.push_back(tuple);
      weights.push_back(n);
    }
  }
  if (candidates.empty()) {
    // Unseen group: only usable when the predicate pins every sensitive column.
    if (tpg.terms.size() != state.conditions.columns().size()) {
      throw UsageError("generate: no training rows for group '" + tpg.to_string(state.schema) + "'");
    }
    std::vector<std::size_t> tuple;
    for (auto c : state.conditions.columns()) {
      for (const auto& t : tpg.terms) {
        if (t.column == c) tuple.push_back(t.value);
      }
    }
    candidates.push_back(tuple);
    weights.push_back(1);
  }
  std::size_t total_weight = 0;
  for (auto w : weights) total_weight += w;

  const std::size_t cw = state.conditions.width();
  std::vector<const std::vector<std::size_t>*> chosen;
  Matrix cond(count, cw);
  for (std::size_t r = 0; r < count; ++r) {
    std::size_t pick = rng.below(total_weight);
    std::size_t idx = 0;
    while (pick >= weights[idx]) pick -= weights[idx++];
    chosen.push_back(&candidates[idx]);
    state.conditions.one_hot(candidates[idx], cond.row(r));
  }
  const Matrix z = sample_gaussian(rng, count, state.hyper.noise_dim, 0.0, 1.0);
  const Matrix head_noise = nn::sample_head_noise(state.gen, count, rng);
  const Matrix encoded = nn::forward(state.gen, hconcat(z, cond), head_noise).output;

  data::DatasetTable out{state.schema, {}, {}};
  const auto& sensitive = state.conditions.columns();
  for (std::size_t r = 0; r < count; ++r) {
    data::Row row(state.schema.size(), data::Cell{0.0});
    state.encoder.decode_row(encoded.row(r), row, /*clamp=*/true);
    for (std::size_t s = 0; s < sensitive.size(); ++s) row[sensitive[s]] = data::Category{(*chosen[r])[s]};
    out.push_back(std::move(row), data::Provenance::Synthetic);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline nlohmann::json gan_to_json(const GanState& s) {
  nlohmann::json j;
  j["format_version"] = nn::kCheckpointFormatVersion;
  j["generator"] = nn::checkpoint_to_json(s.gen, s.seed);
  j["discriminator"] = nn::checkpoint_to_json(s.dis, s.seed);
  j["hyper"] = s.hyper.to_json();
  j["mode"] = to_string(s.mode);
  j["sigma"] = s.sigma;
  j["trained"] = s.trained;
  j["seed"] = s.seed;
  j["schema"] = s.schema.to_json();
  j["schema_hash"] = s.schema.hash();
  j["encoder"] = s.encoder.to_json();
  auto conds = nlohmann::json::object();
  auto cols = nlohmann::json::array();
  for (auto c : s.conditions.columns()) {
    cols.push_back({{"column", s.schema.columns[c].name}, {"values", s.schema.columns[c].values}});
  }
  conds["columns"] = std::move(cols);
  auto observed = nlohmann::json::array();
  for (const auto& [tuple, n] : s.observed_conditions) observed.push_back({{"tuple", tuple}, {"rows", n}});
  conds["observed"] = std::move(observed);
  j["conditions"] = std::move(conds);
  return j;
}

inline GanState gan_from_json(const nlohmann::json& j) {
  GanState s;
  s.schema = data::Schema::from_json(j.at("schema"));
  if (s.schema.hash() != j.at("schema_hash").get<std::string>()) {
    throw ParameterError("GAN checkpoint schema hash mismatch");
  }
  s.hyper = GanHyper::from_json(j.at("hyper"));
  s.mode = training_mode_from_string(j.at("mode").get<std::string>());
  s.sigma = j.at("sigma").get<double>();
  s.trained = j.at("trained").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.encoder = data::TableEncoder::from_json(j.at("encoder"), s.schema);
  s.conditions = ConditionSpace(s.schema);
  s.gen = nn::checkpoint_from_json(j.at("generator"));
  s.dis = nn::checkpoint_from_json(j.at("discriminator"));
  for (const auto& o : j.at("conditions").at("observed")) {
    s.observed_conditions[o.at("tuple").get<std::vector<std::size_t>>()] = o.at("rows").get<std::size_t>();
  }
  s.gen_opt = nn::OptimizerState(s.hyper.optimizer(s.hyper.gen_lr), s.gen);
  s.dis_opt = nn::OptimizerState(s.hyper.optimizer(s.hyper.dis_lr), s.dis);
  return s;
}

}  // namespace fairgen::gan

#endif  // FAIRGEN_CGAN_HPP
