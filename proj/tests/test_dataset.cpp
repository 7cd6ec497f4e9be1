#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fairgen/dataset.hpp"
#include "fixtures.hpp"

using namespace fairgen;
using data::Category;
using data::Provenance;

namespace {

data::Schema people_schema() {
  data::Schema s;
  s.columns = {{"age", data::ColumnKind::Numeric, {}, false, false},
               {"sex", data::ColumnKind::Categorical, {"F", "M"}, true, false},
               {"race", data::ColumnKind::Categorical, {"Black", "White", "Other"}, true, false},
               {"job", data::ColumnKind::Categorical, {"a", "b", "c"}, false, false},
               {"income", data::ColumnKind::Categorical, {"low", "high"}, false, true}};
  return s;
}

data::DatasetTable random_people(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  data::DatasetTable t{people_schema(), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({18.0 + 60.0 * rng.uniform(), Category{rng.below(2)}, Category{rng.below(3)},
                 Category{rng.below(3)}, Category{rng.below(2)}});
  }
  return t;
}

data::DatasetTable parse(const std::string& csv, const data::Schema& s, data::CsvOptions opts = {},
                         std::vector<data::RejectedRow>* rejected = nullptr) {
  std::istringstream in(csv);
  return data::read_csv(in, s, opts, rejected);
}

}  // namespace

TEST(Schema, ValidationRules) {
  auto s = people_schema();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.label_index(), 4u);
  EXPECT_EQ(s.sensitive_indices(), (std::vector<std::size_t>{1, 2}));

  auto no_label = s;
  no_label.columns[4].label = false;
  EXPECT_THROW(no_label.validate(), ParameterError);

  auto dup_values = s;
  dup_values.columns[3].values = {"a", "a"};
  EXPECT_THROW(dup_values.validate(), ParameterError);

  auto empty_values = s;
  empty_values.columns[3].values.clear();
  EXPECT_THROW(empty_values.validate(), ParameterError);

  auto three_way_label = s;
  three_way_label.columns[4].values = {"x", "y", "z"};
  EXPECT_THROW(three_way_label.validate(), ParameterError);

  auto numeric_sensitive = s;
  numeric_sensitive.columns[0].sensitive = true;
  EXPECT_THROW(numeric_sensitive.validate(), ParameterError);
}

TEST(Schema, JsonRoundTripAndHash) {
  const auto s = people_schema();
  const auto back = data::Schema::from_json(nlohmann::json::parse(s.to_json().dump()));
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.hash(), s.hash());
  auto other = s;
  other.columns[3].values.push_back("d");
  EXPECT_NE(other.hash(), s.hash());
}

TEST(LoadCsv, ParsesTypedRowsWithProvenance) {
  const auto t = parse("age,sex,race,job,income,provenance\n30,F,Black,a,high,original\n41.5,M,White,c,low,synthetic\n",
                       people_schema());
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.numeric(1, 0), 41.5);
  EXPECT_EQ(t.category(0, 2), 0u);
  EXPECT_EQ(t.label(0), 1);
  EXPECT_EQ(t.provenance[1], Provenance::Synthetic);
}

TEST(LoadCsv, EmptyDataSectionIsNoRowsError) {
  try {
    parse("age,sex,race,job,income\n", people_schema());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("no rows"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, UnknownCategoryCitesColumnValueAndLine) {
  try {
    parse("age,sex,race,job,income\n30,F,Black,a,high\n31,X,Black,a,high\n", people_schema());
    FAIL();
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("sex"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'X'"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, HeaderMustMatchSchema) {
  EXPECT_THROW(parse("age,gender,race,job,income\n30,F,Black,a,high\n", people_schema()), IngestionError);
  EXPECT_THROW(parse("age,sex,race,job\n30,F,Black,a\n", people_schema()), IngestionError);
}

TEST(LoadCsv, MalformedNumbersAndWidths) {
  EXPECT_THROW(parse("age,sex,race,job,income\nold,F,Black,a,high\n", people_schema()), IngestionError);
  EXPECT_THROW(parse("age,sex,race,job,income\n30,F,Black,a\n", people_schema()), IngestionError);
  EXPECT_THROW(parse("age,sex,race,job,income\nnan,F,Black,a,high\n", people_schema()), IngestionError);
}

TEST(LoadCsv, SkipInvalidCollectsRejections) {
  std::vector<data::RejectedRow> rejected;
  const auto t = parse("age,sex,race,job,income\n30,F,Black,a,high\n?,M,White,b,low\n25,M,?,b,low\n40,M,Other,c,low\n",
                       people_schema(), {true, false}, &rejected);
  EXPECT_EQ(t.size(), 2u);
  ASSERT_EQ(rejected.size(), 2u);
  EXPECT_EQ(rejected[0].line, 3u);
  EXPECT_EQ(rejected[1].line, 4u);
}

TEST(LoadCsv, QuotedFieldsAndCrLf) {
  auto s = people_schema();
  s.columns[3].values = {"a,b", "say \"hi\"", "c"};
  const auto t = parse("age,sex,race,job,income\r\n30,F,Black,\"a,b\",high\r\n31,M,White,\"say \"\"hi\"\"\",low\r\n", s);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.category(0, 3), 0u);
  EXPECT_EQ(t.category(1, 3), 1u);
}

TEST(LoadCsv, AdultFormatSample) {
  const auto schema = data::load_schema(std::string(FAIRGEN_TEST_DATA) + "/adult_schema.json");
  const auto t = data::load_csv(std::string(FAIRGEN_TEST_DATA) + "/adult_sample.csv", schema, {false, true});
  EXPECT_EQ(t.size(), 100u);
  const auto sensitive = schema.sensitive_indices();
  ASSERT_EQ(sensitive.size(), 2u);
  EXPECT_EQ(schema.columns[sensitive[0]].name, "Ethnicity");
  EXPECT_EQ(schema.columns[sensitive[1]].name, "Gender");
  EXPECT_EQ(schema.columns[schema.label_index()].name, "income");
  const auto female = data::GroupPredicate::parse("Gender=Female", schema);
  const auto male = data::GroupPredicate::parse("Gender=Male", schema);
  EXPECT_EQ(data::group_count(t, female) + data::group_count(t, male), 100u);
}

TEST(WriteCsv, RoundTripsThroughReader) {
  const auto t = random_people(50, 3);
  std::ostringstream out;
  data::write_csv(out, t, true);
  const auto back = parse(out.str(), t.schema);
  EXPECT_EQ(back, t);
}

TEST(GroupPredicate, ParseNormalizesAndValidates) {
  const auto s = people_schema();
  const auto a = data::GroupPredicate::parse("race=Black,sex=F", s);
  const auto b = data::GroupPredicate::parse("sex=F,race=Black", s);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.to_string(s), "sex=F,race=Black");
  EXPECT_TRUE(data::GroupPredicate::parse("", s).terms.empty());
  EXPECT_THROW(data::GroupPredicate::parse("job=a", s), ParameterError);
  EXPECT_THROW(data::GroupPredicate::parse("sex=Q", s), ParameterError);
  EXPECT_THROW(data::GroupPredicate::parse("nope=F", s), ParameterError);
  EXPECT_THROW(data::GroupPredicate::parse("sex", s), ParameterError);
  EXPECT_THROW(data::GroupPredicate::parse("sex=F,sex=M", s), ParameterError);
}

TEST(GroupPredicate, CountMatchesBruteForceScan) {
  const auto t = random_people(500, 4);
  for (std::size_t sex = 0; sex < 3; ++sex) {
    for (std::size_t race = 0; race < 4; ++race) {
      data::GroupPredicate p;
      if (sex < 2) p.terms.push_back({1, sex});
      if (race < 3) p.terms.push_back({2, race});
      std::size_t brute = 0;
      for (std::size_t r = 0; r < t.size(); ++r) {
        const bool ok = (sex == 2 || t.category(r, 1) == sex) && (race == 3 || t.category(r, 2) == race);
        brute += ok ? 1 : 0;
      }
      EXPECT_EQ(data::group_count(t, p), brute);
      EXPECT_EQ(data::group_rows(t, p).size(), brute);
    }
  }
}

TEST(Encoder, OneHotFollowsDeclaredOrder) {
  data::DatasetTable t{people_schema(), {}, {}};
  t.push_back({20.0, Category{0}, Category{0}, Category{0}, Category{0}});
  t.push_back({60.0, Category{1}, Category{2}, Category{1}, Category{1}});
  const auto enc = data::TableEncoder::fit(t, std::vector<std::size_t>{1});
  const auto m = enc.encode(t);
  EXPECT_EQ(m, Matrix::from_rows({{1, 0}, {0, 1}}));
}

TEST(Encoder, NumericEndpointsMapToZeroAndOne) {
  const auto t = random_people(200, 5);
  const auto enc = data::TableEncoder::fit(t, data::ColumnSet::All);
  const auto m = enc.encode(t);
  double lo = 1.0, hi = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) lo = std::min(lo, m(r, 0)), hi = std::max(hi, m(r, 0));
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  EXPECT_EQ(enc.width(), 1u + 2u + 3u + 3u + 2u);
}

TEST(Encoder, RoundTripThousandRows) {
  const auto t = random_people(1000, 6);
  const auto enc = data::TableEncoder::fit(t, data::ColumnSet::All);
  const auto back = enc.decode(enc.encode(t));
  ASSERT_EQ(back.size(), t.size());
  double worst = 0.0;
  for (std::size_t r = 0; r < t.size(); ++r) {
    worst = std::max(worst, std::fabs(back.numeric(r, 0) - t.numeric(r, 0)));
    for (std::size_t c = 1; c < 5; ++c) ASSERT_EQ(back.category(r, c), t.category(r, c));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Encoder, ConstantColumnScalesToZeroWithWarning) {
  data::DatasetTable t{people_schema(), {}, {}};
  for (int i = 0; i < 3; ++i) t.push_back({42.0, Category{0}, Category{0}, Category{0}, Category{0}});
  const auto enc = data::TableEncoder::fit(t, data::ColumnSet::All);
  EXPECT_EQ(enc.warnings().size(), 1u);
  EXPECT_EQ(enc.encode(t)(0, 0), 0.0);
  EXPECT_EQ(enc.decode(enc.encode(t)).numeric(0, 0), 42.0);
}

TEST(Encoder, JsonRoundTripPreservesEncoding) {
  const auto t = random_people(100, 7);
  const auto enc = data::TableEncoder::fit(t, data::ColumnSet::Features);
  const auto back = data::TableEncoder::from_json(nlohmann::json::parse(enc.to_json().dump()), t.schema);
  EXPECT_EQ(back.encode(t), enc.encode(t));
}

TEST(Split, ExactSizesDisjointAndExhaustive) {
  const auto t = random_people(100, 8);
  SeededRng rng(1);
  const auto s = data::split(t, {0.6, 0.2, 0.2}, rng);
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.validation.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
  std::multiset<std::vector<std::string>> all, parts;
  auto key = [&](const data::DatasetTable& tab, std::size_t r) {
    std::vector<std::string> k;
    for (std::size_t c = 0; c < tab.schema.size(); ++c) k.push_back(data::cell_to_string(tab.schema.columns[c], tab.rows[r][c]));
    return k;
  };
  for (std::size_t r = 0; r < t.size(); ++r) all.insert(key(t, r));
  for (const auto* p : {&s.train, &s.validation, &s.test})
    for (std::size_t r = 0; r < p->size(); ++r) parts.insert(key(*p, r));
  EXPECT_EQ(all, parts);
}

TEST(Split, StratifiedByLabel) {
  const auto t = random_people(1000, 9);
  SeededRng rng(2);
  const auto s = data::split(t, {0.7, 0.15, 0.15}, rng);
  auto rate = [](const data::DatasetTable& tab) {
    double pos = 0;
    for (std::size_t r = 0; r < tab.size(); ++r) pos += tab.label(r);
    return pos / static_cast<double>(tab.size());
  };
  EXPECT_NEAR(rate(s.train), rate(t), 0.01);
  EXPECT_NEAR(rate(s.test), rate(t), 0.02);
}

TEST(Split, SameSeedSamePartition) {
  const auto t = random_people(77, 10);
  SeededRng a(5), b(5);
  const auto x = data::split(t, {0.5, 0.25, 0.25}, a);
  const auto y = data::split(t, {0.5, 0.25, 0.25}, b);
  EXPECT_EQ(x.train, y.train);
  EXPECT_EQ(x.validation, y.validation);
  EXPECT_EQ(x.test, y.test);
}

TEST(Split, RejectsEmptyPartsAndBadFractions) {
  const auto t = random_people(10, 11);
  SeededRng rng(1);
  EXPECT_THROW(data::split(t, {1.0, 0.0, 0.0}, rng), ParameterError);
  EXPECT_THROW(data::split(t, {0.5, 0.2, 0.2}, rng), ParameterError);
  EXPECT_THROW(data::split(random_people(2, 1), {0.8, 0.1, 0.1}, rng), ParameterError);
}

namespace {

data::DatasetTable synthetic_pool(std::size_t n, std::size_t sex) {
  auto t = random_people(n, 100 + sex);
  for (auto& row : t.rows) row[1] = Category{sex};
  for (auto& p : t.provenance) p = Provenance::Synthetic;
  return t;
}

data::DatasetTable with_group_size(std::size_t females, std::size_t males) {
  auto t = random_people(females + males, 12);
  for (std::size_t r = 0; r < t.size(); ++r) t.rows[r][1] = Category{r < females ? 0u : 1u};
  return t;
}

}  // namespace

TEST(Augment, ZeroFractionIsNoOp) {
  const auto t = random_people(40, 13);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 0.0}}};
  EXPECT_EQ(data::augment(t, synthetic_pool(5, 0), plan), t);
}

TEST(Augment, EightyFivePercentOfTwoHundred) {
  const auto t = with_group_size(200, 300);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 0.85}}};
  const auto out = data::augment(t, synthetic_pool(400, 0), plan);
  EXPECT_EQ(out.size(), 500u + 170u);
}

TEST(Augment, ThreeHundredPercentOfFifty) {
  const auto t = with_group_size(50, 100);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 3.0}}};
  const auto out = data::augment(t, synthetic_pool(200, 0), plan);
  EXPECT_EQ(out.size(), 150u + 150u);
}

TEST(Augment, OriginalRowsUntouchedAndSyntheticTagged) {
  const auto t = with_group_size(30, 30);
  const auto pool = synthetic_pool(40, 0);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 0.5}}};
  const auto out = data::augment(t, pool, plan);
  ASSERT_EQ(out.size(), 75u);
  for (std::size_t r = 0; r < t.size(); ++r) {
    EXPECT_EQ(out.rows[r], t.rows[r]);
    EXPECT_EQ(out.provenance[r], Provenance::Original);
  }
  for (std::size_t r = t.size(); r < out.size(); ++r) {
    EXPECT_EQ(out.provenance[r], Provenance::Synthetic);
    EXPECT_EQ(out.rows[r], pool.rows[r - t.size()]);  // drawn in pool order
  }
}

TEST(Augment, SizeLawAcrossRandomPlans) {
  SeededRng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_people(50 + rng.below(100), trial);
    auto pool = synthetic_pool(300, 0);
    const auto more = synthetic_pool(300, 1);
    pool.rows.insert(pool.rows.end(), more.rows.begin(), more.rows.end());
    pool.provenance.insert(pool.provenance.end(), more.provenance.begin(), more.provenance.end());
    data::AugmentationPlan plan;
    std::size_t expected = t.size();
    for (const char* g : {"sex=F", "sex=M"}) {
      const double a = 2.0 * rng.uniform();
      const auto p = data::GroupPredicate::parse(g, t.schema);
      plan.entries.push_back({p, a});
      expected += data::augmentation_count(a, data::group_count(t, p));
    }
    EXPECT_EQ(data::augment(t, pool, plan).size(), expected);
  }
}

TEST(Augment, ShortfallIsReported) {
  const auto t = with_group_size(100, 10);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 0.5}}};
  try {
    data::augment(t, synthetic_pool(20, 0), plan);
    FAIL();
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("needs 50"), std::string::npos) << msg;
    EXPECT_NE(msg.find("shortfall 30"), std::string::npos) << msg;
  }
}

TEST(Augment, RejectsUntaggedPoolAndSchemaMismatch) {
  const auto t = random_people(10, 15);
  const data::AugmentationPlan plan{{{data::GroupPredicate::parse("sex=F", t.schema), 0.5}}};
  EXPECT_THROW(data::augment(t, random_people(10, 16), plan), ParameterError);
  auto other = synthetic_pool(10, 0);
  other.schema.columns[3].values.push_back("d");
  EXPECT_THROW(data::augment(t, other, plan), ShapeError);
}
