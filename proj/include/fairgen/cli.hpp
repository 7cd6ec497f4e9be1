#ifndef FAIRGEN_CLI_HPP
#define FAIRGEN_CLI_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairgen/bias_analysis.hpp"
#include "fairgen/cgan.hpp"
#include "fairgen/classifier.hpp"
#include "fairgen/dataset.hpp"
#include "json.hpp"

#ifndef FAIRGEN_VERSION
#define FAIRGEN_VERSION "0.1.0"
#endif

namespace fairgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitUsage = 64;

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Seed fallback: FAIRGEN_SEED if set and numeric, otherwise kDefaultSeed.
inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("FAIRGEN_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ParameterError("FAIRGEN_SEED is not an unsigned integer: '" + std::string(env) + "'");
  }
  return kDefaultSeed;
}

/// Writes through a temp file in the destination directory, then renames.
inline void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw IngestionError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// {tool, version, command, seed, config, config_hash}; config excludes paths.
inline nlohmann::json metadata(const std::string& command, std::uint64_t seed, const nlohmann::json& config) {
  return {{"tool", "fairgen"},
          {"version", FAIRGEN_VERSION},
          {"command", command},
          {"seed", seed},
          {"config", config},
          {"config_hash", hex64(fnv1a64(config.dump()))}};
}

/// CSV artifacts carry their metadata in a `<path>.meta.json` sidecar.
inline void write_csv_artifact(const std::string& path, const std::string& csv, const nlohmann::json& meta) {
  write_atomic(path, csv);
  write_atomic(path + ".meta.json", dump(meta));
}

struct CsvFlags {
  bool skip_invalid = false;
  bool trim = false;
  data::CsvOptions options() const { return {skip_invalid, trim}; }
};

inline data::DatasetTable load_table(const std::string& path, const data::Schema& schema, const CsvFlags& flags,
                                     std::ostream& err) {
  std::vector<data::RejectedRow> rejected;
  auto t = data::load_csv(path, schema, flags.options(), &rejected);
  if (!rejected.empty()) {
    err << "fairgen: warning: skipped " << rejected.size() << " invalid rows in '" << path << "' (first at line "
        << rejected.front().line << ": " << rejected.front().reason << ")\n";
  }
  return t;
}

inline void add_classifier_options(CLI::App* app, clf::ClassifierConfig& cfg) {
  app->add_option("--hidden-units", cfg.hidden_units, "Units per hidden layer (3 hidden layers)")
      ->capture_default_str();
  app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
  app->add_option("--momentum", cfg.momentum, "SGD momentum")->capture_default_str();
  app->add_option("--batch-size", cfg.batch_size, "Minibatch size")->capture_default_str();
  app->add_option("--patience", cfg.patience, "Early-stopping patience (epochs)")->capture_default_str();
}

inline void add_csv_flags(CLI::App* app, CsvFlags& flags) {
  app->add_flag("--skip-invalid", flags.skip_invalid, "Drop malformed data rows instead of failing");
  app->add_flag("--trim", flags.trim, "Trim blanks around CSV fields");
}

inline data::GroupPredicate parse_group(const std::string& text, const data::Schema& schema) {
  return data::GroupPredicate::parse(text, schema);
}

// ---------------------------------------------------------------------------

struct Options {
  std::uint64_t seed = 0;
  std::string schema, data, test, validation, out, model_out, histogram_csv, plot, trace, gan, synthetic;
  std::vector<std::string> groups;
  std::vector<double> fractions;
  std::vector<std::string> evals;
  std::vector<std::size_t> hidden_sweep;
  std::string label;
  std::string bias;
  std::string per_group;
  std::string mode = "primal-dual";
  std::string kernel = "unnormalized";
  double gap_threshold = bias::kDefaultGapThreshold;
  std::size_t bins = bias::kDefaultBins;
  std::size_t count = 0;
  std::size_t repeats = 10;
  std::size_t threads = 1;
  double sigma = 0.0;
  clf::ClassifierConfig clf;
  gan::GanHyper hyper;
  CsvFlags csv;
};

inline nlohmann::json classifier_config_json(const clf::ClassifierConfig& c) {
  auto j = c.to_json();
  j.erase("seed");
  return j;
}

inline int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
  const auto schema = data::load_schema(o.schema);
  const auto table = load_table(o.data, schema, o.csv, err);
  SeededRng rng(o.seed);
  auto cfg = o.clf;
  cfg.seed = o.seed;

  clf::Classifier model;
  data::DatasetTable audit;
  if (!o.test.empty()) {
    audit = load_table(o.test, schema, o.csv, err);
    if (!o.validation.empty()) {
      const auto val = load_table(o.validation, schema, o.csv, err);
      model = clf::train_classifier(table, cfg, &val);
    } else {
      model = clf::train_classifier(table, cfg);
    }
  } else {
    auto parts = data::split(table, {0.7, 0.15, 0.15}, rng);
    model = clf::train_classifier(parts.train, cfg, &parts.validation);
    audit = std::move(parts.test);
  }

  std::vector<data::GroupPredicate> groups = data::single_attribute_groups(schema);
  for (const auto& g : o.groups) groups.push_back(parse_group(g, schema));
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  const auto report = bias::analyze(model, audit, o.gap_threshold, groups, o.bins);

  nlohmann::json config{{"classifier", classifier_config_json(o.clf)},
                        {"gap_threshold", o.gap_threshold},
                        {"bins", o.bins},
                        {"extra_groups", o.groups},
                        {"audit_rows", audit.size()}};
  auto j = report.to_json();
  j["meta"] = metadata("analyze", o.seed, config);
  j["overall_accuracy"] = model.accuracy(audit);
  write_atomic(o.out, dump(j));
  if (!o.histogram_csv.empty()) {
    std::ostringstream csv;
    report.write_histogram_csv(csv);
    write_csv_artifact(o.histogram_csv, csv.str(), metadata("analyze", o.seed, config));
  }
  if (!o.plot.empty()) {
    std::ostringstream svg;
    report.write_svg(svg);
    write_atomic(o.plot, svg.str());
  }
  if (!o.model_out.empty()) {
    auto mj = model.to_json();
    mj["meta"] = metadata("analyze", o.seed, config);
    write_atomic(o.model_out, dump(mj));
  }
  for (const auto& w : report.warnings) err << "fairgen: warning: " << w << "\n";
  for (const auto& f : report.flags) out << "flagged " << f.group.to_string(schema) << "\n";
  return kExitOk;
}

inline int cmd_train_gan(const Options& o, std::ostream& out, std::ostream& err) {
  const auto schema = data::load_schema(o.schema);
  const auto table = load_table(o.data, schema, o.csv, err);
  const auto group = o.groups.empty() ? data::GroupPredicate{} : parse_group(o.groups.front(), schema);
  auto hyper = o.hyper;
  if (o.sigma > 0.0) hyper.sigma = o.sigma;
  if (o.kernel == "normalized") {
    hyper.kernel = gan::KernelForm::Normalized;
  } else if (o.kernel != "unnormalized") {
    throw ParameterError("unknown kernel '" + o.kernel + "'");
  }
  const auto mode = gan::training_mode_from_string(o.mode);

  auto state = gan::make_gan_state(table, hyper, o.seed);
  SeededRng rng(o.seed + 1);
  const auto trace = gan::train(state, table, group, rng, mode);

  nlohmann::json config{{"hyper", hyper.to_json()}, {"mode", o.mode}, {"group", group.to_string(schema)}};
  auto j = gan::gan_to_json(state);
  j["group"] = group.to_string(schema);
  j["meta"] = metadata("train-gan", o.seed, config);
  write_atomic(o.out, dump(j));
  if (!o.trace.empty()) {
    std::ostringstream csv;
    trace.write_csv(csv);
    write_csv_artifact(o.trace, csv.str(), metadata("train-gan", o.seed, config));
  }
  out << "trained " << trace.rows.size() << " rounds on " << data::group_count(table, group) << " rows\n";
  return kExitOk;
}

inline int cmd_generate(const Options& o, std::ostream& out, std::ostream&) {
  const auto state = gan::gan_from_json(read_json(o.gan));
  const auto group = o.groups.empty() ? data::GroupPredicate{} : parse_group(o.groups.front(), state.schema);
  SeededRng rng(o.seed);
  const auto synth = gan::generate(state, group, o.count, rng);
  std::ostringstream csv;
  data::write_csv(csv, synth, /*provenance=*/true);
  nlohmann::json config{{"group", group.to_string(state.schema)}, {"count", o.count}};
  write_csv_artifact(o.out, csv.str(), metadata("generate", o.seed, config));
  out << "generated " << synth.size() << " rows\n";
  return kExitOk;
}

inline int cmd_augment(const Options& o, std::ostream& out, std::ostream& err) {
  const auto schema = data::load_schema(o.schema);
  const auto table = load_table(o.data, schema, o.csv, err);
  if (o.groups.size() != o.fractions.size()) {
    throw ParameterError("augment needs one --fraction per --group (" + std::to_string(o.groups.size()) +
                         " groups, " + std::to_string(o.fractions.size()) + " fractions)");
  }
  data::AugmentationPlan plan;
  for (std::size_t i = 0; i < o.groups.size(); ++i) plan.entries.push_back({parse_group(o.groups[i], schema), o.fractions[i]});

  bool need_pool = false;
  for (const auto& e : plan.entries) {
    if (data::augmentation_count(e.fraction, data::group_count(table, e.group)) > 0) need_pool = true;
  }
  data::DatasetTable pool{schema, {}, {}};
  if (!o.synthetic.empty()) {
    pool = load_table(o.synthetic, schema, o.csv, err);
  } else if (need_pool) {
    throw ParameterError("augment: --synthetic is required for a non-zero fraction");
  }
  const auto result = data::augment(table, pool, plan);
  std::ostringstream csv;
  data::write_csv(csv, result, /*provenance=*/true);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : plan.entries) entries.push_back({{"group", e.group.to_string(schema)}, {"fraction", e.fraction}});
  write_csv_artifact(o.out, csv.str(), metadata("augment", o.seed, {{"plan", entries}}));
  out << "wrote " << result.size() << " rows (" << result.size() - table.size() << " synthetic added)\n";
  return kExitOk;
}

inline int cmd_train_clf(const Options& o, std::ostream& out, std::ostream& err) {
  const auto schema = data::load_schema(o.schema);
  const auto table = load_table(o.data, schema, o.csv, err);
  auto cfg = o.clf;
  cfg.seed = o.seed;
  clf::Classifier model;
  if (!o.validation.empty()) {
    const auto val = load_table(o.validation, schema, o.csv, err);
    model = clf::train_classifier(table, cfg, &val);
  } else {
    model = clf::train_classifier(table, cfg);
  }
  auto j = model.to_json();
  j["meta"] = metadata("train-clf", o.seed, {{"classifier", classifier_config_json(o.clf)}});
  j["train_accuracy"] = model.accuracy(table);
  write_atomic(o.out, dump(j));
  out << "train accuracy " << data::format_real(model.accuracy(table)) << "\n";
  return kExitOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto schema = data::load_schema(o.schema);
  const auto train = load_table(o.data, schema, o.csv, err);
  const auto test = load_table(o.test, schema, o.csv, err);
  std::optional<data::DatasetTable> val;
  if (!o.validation.empty()) val = load_table(o.validation, schema, o.csv, err);
  auto cfg = o.clf;
  cfg.seed = o.seed;
  std::vector<std::size_t> sweep = o.hidden_sweep.empty() ? std::vector<std::size_t>{cfg.hidden_units} : o.hidden_sweep;
  const auto results = clf::evaluate_sweep(train, test, cfg, sweep, o.repeats, val ? &*val : nullptr, o.threads);

  auto rs = nlohmann::json::array();
  for (const auto& r : results) rs.push_back(r.to_json());
  nlohmann::json config{{"classifier", classifier_config_json(o.clf)},
                        {"hidden_units", sweep},
                        {"repeats", o.repeats},
                        {"label", o.label}};
  nlohmann::json j{{"label", o.label.empty() ? std::string("configuration") : o.label},
                   {"results", std::move(rs)},
                   {"meta", metadata("evaluate", o.seed, config)}};
  write_atomic(o.out, dump(j));
  for (const auto& r : results) {
    out << r.config.hidden_units << " HUs: " << clf::format_cell(r.overall) << "\n";
  }
  return kExitOk;
}

inline int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  if (o.evals.empty() && o.bias.empty()) throw ParameterError("report needs --eval and/or --bias inputs");
  nlohmann::json config{{"evals", o.evals.size()}, {"bias", !o.bias.empty()}};
  const auto meta = metadata("report", o.seed, config);
  if (!o.evals.empty()) {
    if (o.out.empty()) throw ParameterError("report: --out is required with --eval");
    std::set<std::size_t> columns;
    std::vector<nlohmann::json> docs;
    for (const auto& path : o.evals) {
      docs.push_back(read_json(path));
      for (const auto& r : docs.back().at("results")) columns.insert(r.at("config").at("hidden_units").get<std::size_t>());
    }
    auto cell = [](const nlohmann::json& mean, const nlohmann::json& hw) {
      return clf::format_cell({mean.get<double>(), hw.get<double>()});
    };
    std::ostringstream csv;
    csv << "configuration";
    for (auto hu : columns) csv << ",Acc. (" << hu << " HUs)";
    csv << '\n';
    std::ostringstream groups_csv;
    groups_csv << "configuration,group";
    for (auto hu : columns) groups_csv << ",Acc. (" << hu << " HUs)";
    groups_csv << '\n';
    for (const auto& d : docs) {
      const auto label = d.at("label").get<std::string>();
      csv << data::csv_escape(label);
      std::map<std::size_t, const nlohmann::json*> by_hu;
      for (const auto& r : d.at("results")) by_hu[r.at("config").at("hidden_units").get<std::size_t>()] = &r;
      for (auto hu : columns) {
        csv << ',';
        if (by_hu.count(hu)) csv << cell(by_hu[hu]->at("accuracy_mean"), by_hu[hu]->at("accuracy_ci_half_width"));
      }
      csv << '\n';
      std::vector<std::string> group_names;
      for (const auto& r : d.at("results")) {
        for (const auto& g : r.at("groups")) {
          const auto name = g.at("group").get<std::string>();
          if (std::find(group_names.begin(), group_names.end(), name) == group_names.end()) group_names.push_back(name);
        }
      }
      for (const auto& name : group_names) {
        groups_csv << data::csv_escape(label) << ',' << data::csv_escape(name);
        for (auto hu : columns) {
          groups_csv << ',';
          if (!by_hu.count(hu)) continue;
          for (const auto& g : by_hu[hu]->at("groups")) {
            if (g.at("group").get<std::string>() == name) {
              groups_csv << cell(g.at("accuracy_mean"), g.at("accuracy_ci_half_width"));
            }
          }
        }
        groups_csv << '\n';
      }
    }
    write_csv_artifact(o.out, csv.str(), meta);
    if (!o.per_group.empty()) write_csv_artifact(o.per_group, groups_csv.str(), meta);
    out << "wrote comparison table for " << docs.size() << " configurations\n";
  }
  if (!o.bias.empty()) {
    const auto report = bias::BiasReport::from_json(read_json(o.bias));
    if (!o.histogram_csv.empty()) {
      std::ostringstream csv;
      report.write_histogram_csv(csv);
      write_csv_artifact(o.histogram_csv, csv.str(), meta);
    }
    if (!o.plot.empty()) {
      std::ostringstream svg;
      report.write_svg(svg);
      write_atomic(o.plot, svg.str());
    }
    out << "rendered bias report with " << report.groups.size() << " groups\n";
  }
  return kExitOk;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"fairgen: bias audit and conditional-GAN data augmentation for tabular classifiers", "fairgen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FAIRGEN_VERSION);
  Options o;
  bool seed_given = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Run seed (default: $FAIRGEN_SEED, else 42)")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* analyze = app.add_subcommand("analyze", "Train a classifier and audit per-group predictions");
  common(analyze);
  analyze->add_option("--data", o.data, "Training CSV")->required();
  analyze->add_option("--schema", o.schema, "Schema JSON")->required();
  analyze->add_option("--out", o.out, "Bias report JSON")->required();
  analyze->add_option("--test", o.test, "Audit CSV (default: hold out 15% of --data)");
  analyze->add_option("--validation", o.validation, "Validation CSV for early stopping (with --test)");
  analyze->add_option("--group", o.groups, "Extra group to audit, e.g. race=Black,sex=Female");
  analyze->add_option("--gap-threshold", o.gap_threshold, "Flag gap threshold")->capture_default_str();
  analyze->add_option("--bins", o.bins, "Histogram bins")->capture_default_str();
  analyze->add_option("--histogram-csv", o.histogram_csv, "Also write histograms as CSV");
  analyze->add_option("--plot", o.plot, "Also write an SVG bar chart");
  analyze->add_option("--model-out", o.model_out, "Also write the audited classifier");
  add_classifier_options(analyze, o.clf);
  add_csv_flags(analyze, o.csv);

  auto* train_gan = app.add_subcommand("train-gan", "Train the conditional GAN on a targeted group");
  common(train_gan);
  train_gan->add_option("--data", o.data, "Training CSV")->required();
  train_gan->add_option("--schema", o.schema, "Schema JSON")->required();
  train_gan->add_option("--out", o.out, "GAN checkpoint JSON")->required();
  train_gan->add_option("--group", o.groups, "Targeted group (default: all rows)")->expected(0, 1);
  train_gan->add_option("--trace", o.trace, "Training trace CSV");
  train_gan->add_option("--mode", o.mode, "primal-dual | standard")->capture_default_str();
  train_gan->add_option("--rounds", o.hyper.rounds, "Outer rounds")->capture_default_str();
  train_gan->add_option("--n1", o.hyper.n1, "Real minibatch size")->capture_default_str();
  train_gan->add_option("--n2", o.hyper.n2, "Noise minibatch size")->capture_default_str();
  train_gan->add_option("--dis-steps", o.hyper.dis_steps, "Discriminator steps per round")->capture_default_str();
  train_gan->add_option("--beta", o.hyper.beta, "Dual step size")->capture_default_str();
  train_gan->add_option("--sigma", o.sigma, "Kernel bandwidth (default: median heuristic)");
  train_gan->add_option("--kernel", o.kernel, "unnormalized | normalized")->capture_default_str();
  train_gan->add_option("--noise-dim", o.hyper.noise_dim, "Noise dimension")->capture_default_str();
  train_gan->add_option("--hidden-units", o.hyper.hidden_units, "Hidden units per layer")->capture_default_str();
  train_gan->add_option("--temperature", o.hyper.temperature, "Gumbel-Softmax temperature")->capture_default_str();
  train_gan->add_option("--gen-lr", o.hyper.gen_lr, "Generator Adam learning rate")->capture_default_str();
  train_gan->add_option("--dis-lr", o.hyper.dis_lr, "Discriminator Adam learning rate")->capture_default_str();
  train_gan->add_option("--adam-beta1", o.hyper.adam_beta1, "Adam beta1 for both networks")->capture_default_str();
  add_csv_flags(train_gan, o.csv);

  auto* generate = app.add_subcommand("generate", "Sample synthetic rows for a group");
  common(generate);
  generate->add_option("--gan", o.gan, "GAN checkpoint JSON")->required();
  generate->add_option("--group", o.groups, "Group to synthesize (default: any trained condition)")->expected(0, 1);
  generate->add_option("--count", o.count, "Number of rows")->required();
  generate->add_option("--out", o.out, "Synthetic CSV")->required();

  auto* augment = app.add_subcommand("augment", "Append synthetic rows per group and fraction");
  common(augment);
  augment->add_option("--data", o.data, "Original CSV")->required();
  augment->add_option("--schema", o.schema, "Schema JSON")->required();
  augment->add_option("--synthetic", o.synthetic, "Synthetic pool CSV");
  augment->add_option("--group", o.groups, "Group to augment (repeatable)")->required();
  augment->add_option("--fraction", o.fractions, "Fraction of the group's original size (repeatable)")->required();
  augment->add_option("--out", o.out, "Augmented CSV")->required();
  add_csv_flags(augment, o.csv);

  auto* train_clf = app.add_subcommand("train-clf", "Train the downstream classifier");
  common(train_clf);
  train_clf->add_option("--data", o.data, "Training CSV")->required();
  train_clf->add_option("--schema", o.schema, "Schema JSON")->required();
  train_clf->add_option("--validation", o.validation, "Validation CSV for early stopping");
  train_clf->add_option("--out", o.out, "Classifier JSON")->required();
  add_classifier_options(train_clf, o.clf);
  add_csv_flags(train_clf, o.csv);

  auto* evaluate = app.add_subcommand("evaluate", "Repeated training with 95% confidence intervals");
  common(evaluate);
  evaluate->add_option("--train", o.data, "Training CSV")->required();
  evaluate->add_option("--test", o.test, "Test CSV")->required();
  evaluate->add_option("--schema", o.schema, "Schema JSON")->required();
  evaluate->add_option("--validation", o.validation, "Validation CSV for early stopping");
  evaluate->add_option("--repeats", o.repeats, "Seeded repeats per configuration")->capture_default_str();
  evaluate->add_option("--sweep", o.hidden_sweep, "Hidden-unit sweep, e.g. 300,500,700,900")->delimiter(',');
  evaluate->add_option("--threads", o.threads, "Worker threads for repeats")->capture_default_str();
  evaluate->add_option("--label", o.label, "Configuration name for reports");
  evaluate->add_option("--out", o.out, "Evaluation JSON")->required();
  add_classifier_options(evaluate, o.clf);
  add_csv_flags(evaluate, o.csv);

  auto* report = app.add_subcommand("report", "Render comparison tables and bias charts");
  common(report);
  report->add_option("--eval", o.evals, "Evaluation JSON (repeatable), one table row each");
  report->add_option("--out", o.out, "Comparison table CSV");
  report->add_option("--per-group", o.per_group, "Per-group accuracy table CSV");
  report->add_option("--bias", o.bias, "Bias report JSON to render");
  report->add_option("--histogram-csv", o.histogram_csv, "Histogram CSV output");
  report->add_option("--plot", o.plot, "SVG output");

  std::vector<std::string> argv_store{"fairgen"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << FAIRGEN_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fairgen: usage error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (!seed_given) o.seed = default_seed();
    if (analyze->parsed()) return cmd_analyze(o, out, err);
    if (train_gan->parsed()) return cmd_train_gan(o, out, err);
    if (generate->parsed()) return cmd_generate(o, out, err);
    if (augment->parsed()) return cmd_augment(o, out, err);
    if (train_clf->parsed()) return cmd_train_clf(o, out, err);
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (report->parsed()) return cmd_report(o, out, err);
  } catch (const Error& e) {
    err << "fairgen: error: " << e.kind() << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "fairgen: error: format: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "fairgen: error: io: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "fairgen: error: internal: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace fairgen::cli

#endif  // FAIRGEN_CLI_HPP
