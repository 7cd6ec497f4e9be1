#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "fairgen/cli.hpp"
#include "fixtures.hpp"

using namespace fairgen;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run fairgen_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  fixtures::TempDir dir{"cli"};
  std::string schema = dir.file("schema.json");
  std::string data = dir.file("data.csv");
  std::string test = dir.file("test.csv");

  void SetUp() override {
    fixtures::save_schema(schema, fixtures::bias_schema());
    fixtures::save_table(data, fixtures::biased_population(1500, 0.1, 21));
    fixtures::save_table(test, fixtures::biased_population(600, 0.1, 22));
  }
  std::vector<std::string> clf_flags() const { return {"--hidden-units", "16", "--epochs", "15", "--lr", "0.05"}; }
};

}  // namespace

TEST_F(Cli, HelpAndVersionExitZero) {
  auto r = fairgen_run({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  for (const char* sub : {"analyze", "train-gan", "generate", "augment", "train-clf", "evaluate", "report"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  r = fairgen_run({"--version"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find(FAIRGEN_VERSION), std::string::npos);
}

TEST_F(Cli, UsageErrorsExit64) {
  EXPECT_EQ(fairgen_run({}).code, cli::kExitUsage);
  EXPECT_EQ(fairgen_run({"train-clf", "--data", data, "--schema", schema, "--out", dir.file("m.json"), "--bogus"}).code,
            cli::kExitUsage);
  const auto r = fairgen_run({"augment", "--data", data});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
}

TEST_F(Cli, SchemaMismatchIsSingleLineValidationError) {
  data::Schema other = fixtures::bias_schema();
  other.columns[0].name = "height";
  const auto other_path = dir.file("other.json");
  fixtures::save_schema(other_path, other);
  const auto r = fairgen_run({"train-clf", "--data", data, "--schema", other_path, "--out", dir.file("m.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  ASSERT_EQ(lines_of(r.err).size(), 1u) << r.err;
  EXPECT_EQ(r.err.rfind("fairgen: error: ", 0), 0u);
  EXPECT_FALSE(std::filesystem::exists(dir.file("m.json")));
}

TEST_F(Cli, MissingInputFileIsValidationError) {
  const auto r = fairgen_run({"train-clf", "--data", dir.file("nope.csv"), "--schema", schema, "--out", dir.file("m.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
}

TEST_F(Cli, AugmentWithZeroFractionCopiesInput) {
  const auto out = dir.file("aug.csv");
  const auto r = fairgen_run({"augment", "--data", data, "--schema", schema, "--group", "group=B", "--fraction", "0",
                              "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto in_lines = lines_of(fixtures::slurp(data));
  const auto out_lines = lines_of(fixtures::slurp(out));
  ASSERT_EQ(in_lines.size(), out_lines.size());
  EXPECT_EQ(out_lines[0], in_lines[0] + ",provenance");
  for (std::size_t i = 1; i < in_lines.size(); ++i) EXPECT_EQ(out_lines[i], in_lines[i] + ",original");
  const auto meta = nlohmann::json::parse(fixtures::slurp(out + ".meta.json"));
  EXPECT_EQ(meta.at("command"), "augment");
}

TEST_F(Cli, AugmentArgumentChecks) {
  auto r = fairgen_run({"augment", "--data", data, "--schema", schema, "--group", "group=B", "--fraction", "0.5",
                        "--out", dir.file("a.csv")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("--synthetic"), std::string::npos);
  r = fairgen_run({"augment", "--data", data, "--schema", schema, "--group", "group=B", "--group", "group=A",
                   "--fraction", "0", "--out", dir.file("a.csv")});
  EXPECT_EQ(r.code, cli::kExitValidation);
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
  const auto out = dir.file("m.json");
  std::vector<std::string> args{"train-clf", "--data", data, "--schema", schema, "--out", out, "--epochs", "1",
                                "--hidden-units", "4"};
  ::setenv("FAIRGEN_SEED", "1234", 1);
  ASSERT_EQ(fairgen_run(args).code, 0);
  EXPECT_EQ(nlohmann::json::parse(fixtures::slurp(out))["meta"]["seed"], 1234);
  ::setenv("FAIRGEN_SEED", "abc", 1);
  EXPECT_EQ(fairgen_run(args).code, cli::kExitValidation);
  ::unsetenv("FAIRGEN_SEED");
  ASSERT_EQ(fairgen_run(args).code, 0);
  EXPECT_EQ(nlohmann::json::parse(fixtures::slurp(out))["meta"]["seed"], cli::kDefaultSeed);
  args.insert(args.end(), {"--seed", "7"});
  ASSERT_EQ(fairgen_run(args).code, 0);
  const auto j = nlohmann::json::parse(fixtures::slurp(out));
  EXPECT_EQ(j["meta"]["seed"], 7);
  EXPECT_EQ(j["meta"]["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(j["meta"]["tool"], "fairgen");
}

TEST_F(Cli, AnalyzeFlagsMinority) {
  auto args = std::vector<std::string>{"analyze", "--data", data, "--test", test, "--schema", schema, "--out",
                                       dir.file("bias.json"), "--histogram-csv", dir.file("h.csv"), "--plot",
                                       dir.file("h.svg"), "--seed", "3"};
  for (const auto& f : clf_flags()) args.push_back(f);
  const auto r = fairgen_run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("flagged group=B"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(fixtures::slurp(dir.file("bias.json")));
  EXPECT_TRUE(j.contains("meta"));
  EXPECT_TRUE(j.contains("overall_accuracy"));
  EXPECT_TRUE(std::filesystem::exists(dir.file("h.csv.meta.json")));
  EXPECT_EQ(fixtures::slurp(dir.file("h.svg")).rfind("<svg", 0), 0u);
}

TEST_F(Cli, FullPipeline) {
  const auto seed = std::vector<std::string>{"--seed", "5"};
  auto with = [&](std::vector<std::string> a, const std::vector<std::string>& extra) {
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  auto r = fairgen_run(with({"train-gan", "--data", data, "--schema", schema, "--group", "group=B", "--out",
                             dir.file("gan.json"), "--rounds", "30", "--n1", "32", "--n2", "32", "--hidden-units", "16",
                             "--trace", dir.file("trace.csv")},
                            seed));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(fixtures::slurp(dir.file("trace.csv"))).size(), 31u);

  r = fairgen_run(with({"generate", "--gan", dir.file("gan.json"), "--group", "group=B", "--count", "300", "--out",
                        dir.file("synth.csv")},
                       seed));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto synth = data::load_csv(dir.file("synth.csv"), fixtures::bias_schema());
  ASSERT_EQ(synth.size(), 300u);
  for (std::size_t i = 0; i < synth.size(); ++i) {
    EXPECT_EQ(synth.category(i, 2), 1u);
    EXPECT_EQ(synth.provenance[i], data::Provenance::Synthetic);
  }

  r = fairgen_run(with({"augment", "--data", data, "--schema", schema, "--synthetic", dir.file("synth.csv"), "--group",
                        "group=B", "--fraction", "1.5", "--out", dir.file("aug.csv")},
                       seed));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data::load_csv(dir.file("aug.csv"), fixtures::bias_schema()).size(), 1500u + 225u);

  r = fairgen_run(with(with({"train-clf", "--data", dir.file("aug.csv"), "--schema", schema, "--out",
                             dir.file("clf.json")},
                            clf_flags()),
                       seed));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(clf::Classifier::from_json(nlohmann::json::parse(fixtures::slurp(dir.file("clf.json")))).accuracy(
                  data::load_csv(test, fixtures::bias_schema())) > 0.8);

  for (const auto& [name, train] : {std::pair{"baseline", data}, std::pair{"augmented", dir.file("aug.csv")}}) {
    r = fairgen_run(with({"evaluate", "--train", train, "--test", test, "--schema", schema, "--repeats", "2", "--sweep",
                          "8,16", "--epochs", "5", "--label", name, "--out", dir.file(std::string(name) + ".json")},
                         seed));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("16 HUs: "), std::string::npos);
  }

  r = fairgen_run({"report", "--eval", dir.file("baseline.json"), "--eval", dir.file("augmented.json"), "--out",
                   dir.file("table.csv"), "--per-group", dir.file("groups.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = lines_of(fixtures::slurp(dir.file("table.csv")));
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[0], "configuration,Acc. (8 HUs),Acc. (16 HUs)");
  EXPECT_EQ(table[1].rfind("baseline,", 0), 0u);
  EXPECT_EQ(table[2].rfind("augmented,", 0), 0u);
  EXPECT_NE(table[1].find("\xC2\xB1"), std::string::npos);
  const auto groups = lines_of(fixtures::slurp(dir.file("groups.csv")));
  EXPECT_EQ(groups.size(), 5u);
  EXPECT_EQ(groups[0], "configuration,group,Acc. (8 HUs),Acc. (16 HUs)");
}

TEST_F(Cli, ReportRendersBiasJson) {
  auto args = std::vector<std::string>{"analyze", "--data", data, "--schema", schema, "--out", dir.file("bias.json"),
                                       "--epochs", "2", "--hidden-units", "8"};
  ASSERT_EQ(fairgen_run(args).code, 0);
  const auto r = fairgen_run({"report", "--bias", dir.file("bias.json"), "--histogram-csv", dir.file("h.csv"), "--plot",
                              dir.file("p.svg")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(fixtures::slurp(dir.file("h.csv"))).size(), 1u + 2u * 10u);
  EXPECT_TRUE(std::filesystem::exists(dir.file("p.svg")));
  EXPECT_EQ(fairgen_run({"report"}).code, cli::kExitValidation);
}
