#ifndef FAIRGEN_BIAS_ANALYSIS_HPP
#define FAIRGEN_BIAS_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fairgen/dataset.hpp"
#include "json.hpp"

namespace fairgen::bias {

inline constexpr std::size_t kDefaultBins = 10;
inline constexpr double kDefaultGapThreshold = 0.1;

/// Histogram of predicted positive-class probabilities over one group.
struct GroupHistogram {
  data::GroupPredicate group;
  std::vector<double> bin_edges;  // bins + 1 edges partitioning [0, 1]
  std::vector<std::size_t> counts;
  std::vector<double> normalized;

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

/// Bin b covers [b/bins, (b+1)/bins); the last bin also takes 1.0.
inline std::size_t bin_of(double p, std::size_t bins) {
  const double clamped = std::clamp(p, 0.0, 1.0);
  return std::min(static_cast<std::size_t>(clamped * static_cast<double>(bins)), bins - 1);
}

inline std::vector<double> uniform_edges(std::size_t bins) {
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  return edges;
}

namespace detail {
inline std::vector<std::size_t> require_group(const data::DatasetTable& table, const data::GroupPredicate& group) {
  auto rows = data::group_rows(table, group);
  if (rows.empty()) {
    throw ParameterError("group '" + group.to_string(table.schema) + "' matches no rows");
  }
  return rows;
}

inline void check_scores(const data::DatasetTable& table, std::span<const double> scores) {
  if (scores.size() != table.size()) {
    throw ShapeError(std::to_string(scores.size()) + " scores for " + std::to_string(table.size()) + " rows");
  }
}
}  // namespace detail

/// `scores[r]` is the predicted positive probability of table row r.
inline GroupHistogram prediction_distribution(std::span<const double> scores, const data::DatasetTable& table,
                                              const data::GroupPredicate& group, std::size_t bins = kDefaultBins) {
  detail::check_scores(table, scores);
  if (bins == 0) throw ParameterError("histogram needs at least one bin");
  const auto rows = detail::require_group(table, group);
  GroupHistogram h{group, uniform_edges(bins), std::vector<std::size_t>(bins, 0), std::vector<double>(bins, 0.0)};
  for (auto r : rows) ++h.counts[bin_of(scores[r], bins)];
  for (std::size_t b = 0; b < bins; ++b) {
    h.normalized[b] = static_cast<double>(h.counts[b]) / static_cast<double>(rows.size());
  }
  return h;
}

/// Fraction of group rows whose thresholded score (>= 0.5 is positive)
/// equals the label.
inline double group_accuracy(std::span<const double> scores, const data::DatasetTable& table,
                             const data::GroupPredicate& group) {
  detail::check_scores(table, scores);
  const auto rows = detail::require_group(table, group);
  std::size_t correct = 0;
  for (auto r : rows) {
    const int predicted = scores[r] >= 0.5 ? 1 : 0;
    correct += predicted == table.label(r) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

inline double mean_positive_probability(std::span<const double> scores, const data::DatasetTable& table,
                                        const data::GroupPredicate& group) {
  detail::check_scores(table, scores);
  const auto rows = detail::require_group(table, group);
  double total = 0.0;
  for (auto r : rows) total += scores[r];
  return total / static_cast<double>(rows.size());
}

/// Anything with `std::vector<double> predict_proba(const DatasetTable&)`.
template <typename C>
concept Scorer = requires(const C& c, const data::DatasetTable& t) {
  { c.predict_proba(t) } -> std::convertible_to<std::vector<double>>;
};

template <Scorer C>
GroupHistogram prediction_distribution(const C& clf, const data::DatasetTable& table,
                                       const data::GroupPredicate& group, std::size_t bins = kDefaultBins) {
  return prediction_distribution(clf.predict_proba(table), table, group, bins);
}

template <Scorer C>
double group_accuracy(const C& clf, const data::DatasetTable& table, const data::GroupPredicate& group) {
  return group_accuracy(clf.predict_proba(table), table, group);
}

// ---------------------------------------------------------------------------
// Flagging

struct GroupSummary {
  data::GroupPredicate group;
  std::size_t rows = 0;
  double accuracy = 0.0;
  double accuracy_half_width = 0.0;  // 95% normal-approximation binomial CI
  double mean_positive = 0.0;
  GroupHistogram histogram;
};

struct Flag {
  data::GroupPredicate group;
  data::GroupPredicate reference;  // best group of the same attribute
  double mean_gap = 0.0;
  double accuracy_gap = 0.0;
  std::vector<std::string> triggered_by;
};

/// Groups compete with others that constrain the same set of columns. Within
/// each such attribute a group is flagged when its mean predicted positive
/// probability, or its accuracy, trails the attribute's best by more than
/// `gap_threshold`. Attributes with fewer than two groups are skipped and
/// reported through `warnings`.
inline std::vector<Flag> flag_tpgs(std::vector<GroupSummary> groups, double gap_threshold,
                                   std::vector<std::string>* warnings = nullptr,
                                   const data::Schema* schema = nullptr) {
  if (!(gap_threshold >= 0.0)) throw ParameterError("gap threshold must be non-negative");
  std::sort(groups.begin(), groups.end(),
            [](const GroupSummary& a, const GroupSummary& b) { return a.group < b.group; });
  std::map<std::vector<std::size_t>, std::vector<const GroupSummary*>> by_attribute;
  for (const auto& g : groups) {
    std::vector<std::size_t> cols;
    for (const auto& t : g.group.terms) cols.push_back(t.column);
    by_attribute[cols].push_back(&g);
  }
  std::vector<Flag> flags;
  for (const auto& [cols, members] : by_attribute) {
    if (members.size() < 2) {
      if (warnings) {
        std::string name;
        for (auto c : cols) name += (name.empty() ? "" : "+") + (schema ? schema->columns[c].name : std::to_string(c));
        warnings->push_back("attribute '" + name + "' has a single group; skipped");
      }
      continue;
    }
    const GroupSummary* best_mean = members.front();
    const GroupSummary* best_acc = members.front();
    for (const auto* g : members) {
      if (g->mean_positive > best_mean->mean_positive) best_mean = g;
      if (g->accuracy > best_acc->accuracy) best_acc = g;
    }
    for (const auto* g : members) {
      Flag f;
      f.group = g->group;
      f.mean_gap = best_mean->mean_positive - g->mean_positive;
      f.accuracy_gap = best_acc->accuracy - g->accuracy;
      if (f.mean_gap > gap_threshold) {
        f.triggered_by.push_back("mean_positive_probability");
        f.reference = best_mean->group;
      }
      if (f.accuracy_gap > gap_threshold) {
        f.triggered_by.push_back("accuracy");
        if (f.triggered_by.size() == 1) f.reference = best_acc->group;
      }
      if (!f.triggered_by.empty()) flags.push_back(std::move(f));
    }
  }
  return flags;
}

inline double binomial_half_width(double accuracy, std::size_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(accuracy * (1.0 - accuracy) / static_cast<double>(n));
}

inline GroupSummary summarize(std::span<const double> scores, const data::DatasetTable& table,
                              const data::GroupPredicate& group, std::size_t bins = kDefaultBins) {
  GroupSummary s;
  s.group = group;
  s.histogram = prediction_distribution(scores, table, group, bins);
  s.rows = s.histogram.total();
  s.accuracy = group_accuracy(scores, table, group);
  s.accuracy_half_width = binomial_half_width(s.accuracy, s.rows);
  s.mean_positive = mean_positive_probability(scores, table, group);
  return s;
}

struct BiasReport {
  data::Schema schema;
  double gap_threshold = kDefaultGapThreshold;
  std::vector<GroupSummary> groups;
  std::vector<Flag> flags;
  std::vector<std::string> warnings;

  bool is_flagged(const data::GroupPredicate& g) const {
    return std::any_of(flags.begin(), flags.end(), [&](const Flag& f) { return f.group == g; });
  }

  const GroupSummary& summary(const data::GroupPredicate& g) const {
    for (const auto& s : groups) {
      if (s.group == g) return s;
    }
    throw ParameterError("group '" + g.to_string(schema) + "' is not in the report");
  }

  nlohmann::json to_json() const {
    auto gs = nlohmann::json::array();
    for (const auto& s : groups) {
      gs.push_back({{"group", s.group.to_string(schema)},
                    {"rows", s.rows},
                    {"accuracy", s.accuracy},
                    {"accuracy_ci_half_width", s.accuracy_half_width},
                    {"mean_positive_probability", s.mean_positive},
                    {"histogram",
                     {{"bin_edges", s.histogram.bin_edges},
                      {"counts", s.histogram.counts},
                      {"normalized", s.histogram.normalized}}}});
    }
    auto fs = nlohmann::json::array();
    for (const auto& f : flags) {
      fs.push_back({{"group", f.group.to_string(schema)},
                    {"reference_group", f.reference.to_string(schema)},
                    {"mean_gap", f.mean_gap},
                    {"accuracy_gap", f.accuracy_gap},
                    {"triggered_by", f.triggered_by}});
    }
    return {{"schema", schema.to_json()},
            {"gap_threshold", gap_threshold},
            {"flag_rule",
             "flag a group when its mean predicted positive probability or its accuracy trails the "
             "best group of the same attribute by more than gap_threshold"},
            {"groups", std::move(gs)},
            {"flagged", std::move(fs)},
            {"warnings", warnings}};
  }

  static BiasReport from_json(const nlohmann::json& j) {
    BiasReport r;
    r.schema = data::Schema::from_json(j.at("schema"));
    r.gap_threshold = j.at("gap_threshold").get<double>();
    for (const auto& g : j.at("groups")) {
      GroupSummary s;
      s.group = data::GroupPredicate::parse(g.at("group").get<std::string>(), r.schema);
      s.rows = g.at("rows").get<std::size_t>();
      s.accuracy = g.at("accuracy").get<double>();
      s.accuracy_half_width = g.at("accuracy_ci_half_width").get<double>();
      s.mean_positive = g.at("mean_positive_probability").get<double>();
      s.histogram.group = s.group;
      s.histogram.bin_edges = g.at("histogram").at("bin_edges").get<std::vector<double>>();
      s.histogram.counts = g.at("histogram").at("counts").get<std::vector<std::size_t>>();
      s.histogram.normalized = g.at("histogram").at("normalized").get<std::vector<double>>();
      if (s.histogram.bin_edges.size() != s.histogram.counts.size() + 1 ||
          s.histogram.normalized.size() != s.histogram.counts.size()) {
        throw IngestionError("histogram for group '" + g.at("group").get<std::string>() + "' is inconsistent");
      }
      r.groups.push_back(std::move(s));
    }
    for (const auto& f : j.at("flagged")) {
      Flag fl;
      fl.group = data::GroupPredicate::parse(f.at("group").get<std::string>(), r.schema);
      fl.reference = data::GroupPredicate::parse(f.at("reference_group").get<std::string>(), r.schema);
      fl.mean_gap = f.at("mean_gap").get<double>();
      fl.accuracy_gap = f.at("accuracy_gap").get<double>();
      fl.triggered_by = f.at("triggered_by").get<std::vector<std::string>>();
      r.flags.push_back(std::move(fl));
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  }

  /// group,bin_lo,bin_hi,count,normalized
  void write_histogram_csv(std::ostream& out) const {
    out << "group,bin_lo,bin_hi,count,normalized\n";
    for (const auto& s : groups) {
      const auto& h = s.histogram;
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << data::csv_escape(s.group.to_string(schema)) << ',' << data::format_real(h.bin_edges[b]) << ','
            << data::format_real(h.bin_edges[b + 1]) << ',' << h.counts[b] << ','
            << data::format_real(h.normalized[b]) << '\n';
      }
    }
  }

  /// Grouped bar chart of normalized histograms, one panel per attribute.
  void write_svg(std::ostream& out) const {
    std::map<std::vector<std::size_t>, std::vector<const GroupSummary*>> panels;
    for (const auto& s : groups) {
      std::vector<std::size_t> cols;
      for (const auto& t : s.group.terms) cols.push_back(t.column);
      panels[cols].push_back(&s);
    }
    static constexpr const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    const int panel_w = 420, panel_h = 260, margin = 40;
    const int width = panel_w + 2 * margin;
    const int height = static_cast<int>(panels.size()) * (panel_h + 2 * margin);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    int py = 0;
    for (const auto& [cols, members] : panels) {
      const int x0 = margin, y0 = py + margin;
      const std::size_t bins = members.front()->histogram.counts.size();
      const double slot = static_cast<double>(panel_w) / static_cast<double>(bins);
      const double bar = slot * 0.8 / static_cast<double>(members.size());
      out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
          << "\" fill=\"none\" stroke=\"#444\"/>\n";
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto& h = members[m]->histogram;
        for (std::size_t b = 0; b < bins; ++b) {
          const double bh = h.normalized[b] * panel_h;
          const double bx = x0 + slot * static_cast<double>(b) + slot * 0.1 + bar * static_cast<double>(m);
          out << "<rect x=\"" << data::format_real(bx) << "\" y=\"" << data::format_real(y0 + panel_h - bh)
              << "\" width=\"" << data::format_real(bar) << "\" height=\"" << data::format_real(bh)
              << "\" fill=\"" << palette[m % 6] << "\"/>\n";
        }
        out << "<text x=\"" << x0 + 5 << "\" y=\"" << y0 + 15 + 14 * static_cast<int>(m) << "\" fill=\""
            << palette[m % 6] << "\" font-size=\"12\">" << members[m]->group.to_string(schema) << "</text>\n";
      }
      out << "<text x=\"" << x0 << "\" y=\"" << y0 + panel_h + 16
          << "\" font-size=\"12\">predicted P(positive), " << bins << " bins on [0,1]</text>\n";
      py += panel_h + 2 * margin;
    }
    out << "</svg>\n";
  }
};

/// Summarizes every requested group (default: each value of each sensitive
/// column) and flags the disadvantaged ones.
inline BiasReport analyze(std::span<const double> scores, const data::DatasetTable& table,
                          double gap_threshold = kDefaultGapThreshold,
                          std::vector<data::GroupPredicate> groups = {}, std::size_t bins = kDefaultBins) {
  BiasReport report;
  report.schema = table.schema;
  report.gap_threshold = gap_threshold;
  if (groups.empty()) groups = data::single_attribute_groups(table.schema);
  std::sort(groups.begin(), groups.end());
  for (const auto& g : groups) {
    if (data::group_count(table, g) == 0) {
      report.warnings.push_back("group '" + g.to_string(table.schema) + "' has no rows; skipped");
      continue;
    }
    report.groups.push_back(summarize(scores, table, g, bins));
  }
  report.flags = flag_tpgs(report.groups, gap_threshold, &report.warnings, &table.schema);
  return report;
}

template <Scorer C>
BiasReport analyze(const C& clf, const data::DatasetTable& table, double gap_threshold = kDefaultGapThreshold,
                   std::vector<data::GroupPredicate> groups = {}, std::size_t bins = kDefaultBins) {
  const auto scores = clf.predict_proba(table);
  return analyze(std::span<const double>(scores), table, gap_threshold, std::move(groups), bins);
}

}  // namespace fairgen::bias

#endif  // FAIRGEN_BIAS_ANALYSIS_HPP
