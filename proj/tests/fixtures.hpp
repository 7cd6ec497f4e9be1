// Synthetic datasets shared by unit, CLI and acceptance tests.
#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "fairgen/dataset.hpp"

namespace fixtures {

using namespace fairgen;
using data::Category;
using data::Column;
using data::ColumnKind;

/// x, y numeric; `cond` sensitive with `modes` values; label positive when
/// y > 0 (balanced by symmetry).
inline data::Schema blob_schema(std::size_t modes = 2) {
  Column cond{"cond", ColumnKind::Categorical, {}, true, false};
  for (std::size_t m = 0; m < modes; ++m) cond.values.push_back("c" + std::to_string(m));
  data::Schema s;
  s.columns = {{"x", ColumnKind::Numeric, {}, false, false},
               {"y", ColumnKind::Numeric, {}, false, false},
               cond,
               {"label", ColumnKind::Categorical, {"no", "yes"}, false, true}};
  return s;
}

/// Two blobs at (-2, 0) and (2, 0) keyed by the condition bit.
inline constexpr std::array<std::array<double, 2>, 2> kBlobCenters{{{-2.0, 0.0}, {2.0, 0.0}}};
inline constexpr double kBlobStd = 0.3;

inline data::DatasetTable two_blobs(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  data::DatasetTable t{blob_schema(2), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 2;
    const double x = kBlobCenters[c][0] + kBlobStd * rng.normal();
    const double y = kBlobCenters[c][1] + kBlobStd * rng.normal();
    t.push_back({x, y, Category{c}, Category{y > 0.0 ? 1u : 0u}});
  }
  return t;
}

/// Four modes at (+-2, +-2) under a single condition value.
inline constexpr std::array<std::array<double, 2>, 4> kFourModeCenters{
    {{-2.0, -2.0}, {-2.0, 2.0}, {2.0, -2.0}, {2.0, 2.0}}};

inline data::DatasetTable four_modes(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  data::DatasetTable t{blob_schema(1), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = kFourModeCenters[i % 4];
    const double x = c[0] + kBlobStd * rng.normal();
    const double y = c[1] + kBlobStd * rng.normal();
    t.push_back({x, y, Category{0}, Category{y > 0.0 ? 1u : 0u}});
  }
  return t;
}

/// Index of the nearest center.
template <std::size_t N>
std::size_t nearest(const std::array<std::array<double, 2>, N>& centers, double x, double y) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t k = 0; k < N; ++k) {
    const double d = std::hypot(x - centers[k][0], y - centers[k][1]);
    if (d < best_d) best_d = d, best = k;
  }
  return best;
}

/// Features x1, x2; sensitive `group` in {A, B}; label `y` in {neg, pos}.
inline data::Schema bias_schema() {
  data::Schema s;
  s.columns = {{"x1", ColumnKind::Numeric, {}, false, false},
               {"x2", ColumnKind::Numeric, {}, false, false},
               {"group", ColumnKind::Categorical, {"A", "B"}, true, false},
               {"y", ColumnKind::Categorical, {"neg", "pos"}, false, true}};
  return s;
}

/// Label rule shared by both groups.
inline bool bias_label(double x1, double x2) { return x1 + 0.5 * x2 > 0.0; }

/// Group A (share 1 - minority) has x1 ~ N(0, 1); group B has x1 ~ N(-1, 1).
/// x2 ~ N(0, 1) for both. The label rule is identical, so the positive rates
/// differ only through x1: about 0.50 for A and 0.19 for B.
inline data::DatasetTable biased_population(std::size_t n, double minority, std::uint64_t seed) {
  SeededRng rng(seed);
  data::DatasetTable t{bias_schema(), {}, {}};
  const auto n_b = static_cast<std::size_t>(std::llround(minority * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    const bool b = i < n_b;
    const double x1 = (b ? -1.0 : 0.0) + rng.normal();
    const double x2 = rng.normal();
    t.push_back({x1, x2, Category{b ? 1u : 0u}, Category{bias_label(x1, x2) ? 1u : 0u}});
  }
  return t;
}

inline constexpr std::size_t kPipelineRows = 1500;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::size_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fairgen_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline void save_table(const std::string& path, const data::DatasetTable& t) {
  std::ofstream out(path);
  data::write_csv(out, t, /*provenance=*/false);
}

inline void save_schema(const std::string& path, const data::Schema& s) { write_file(path, s.to_json().dump(2)); }

}  // namespace fixtures
