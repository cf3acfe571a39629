#include <gtest/gtest.h>

#include "gen.hpp"

using namespace her2;

namespace {

CellClassCounts make(std::int64_t ic, std::int64_t ii, std::int64_t wc, std::int64_t wi, std::int64_t ns) {
  CellClassCounts c;
  c.add(CellClass::IntenseComplete, ic);
  c.add(CellClass::IntenseIncomplete, ii);
  c.add(CellClass::WeakComplete, wc);
  c.add(CellClass::WeakIncomplete, wi);
  c.add(CellClass::NoStaining, ns);
  return c;
}

Her2Value score_of(const CellClassCounts& c, const ScoreRules& rules = breast_rules()) {
  SlideCounts s;
  s.counts = c;
  return score(s, rules).value;
}

}  // namespace

TEST(Aggregate, SumsIncludedFovsOnly) {
  gen::Rng r(81);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<FovCounts> fovs;
    std::set<std::string> included;
    std::array<std::int64_t, kCellClassCount> want{};
    std::int64_t total = 0;
    for (int f = 0; f < r.integer(1, 10); ++f) {
      FovCounts fc{"fov-" + std::to_string(f), {}};
      for (CellClass c : kAllCellClasses) fc.counts.add(c, r.integer(0, 30));
      if (r.coin(0.7)) {
        included.insert(fc.fov_id);
        for (int i = 0; i < kCellClassCount; ++i) want[i] += fc.counts.by_class[i];
        total += fc.counts.total;
      }
      fovs.push_back(fc);
    }
    if (included.empty() || total == 0) {
      EXPECT_THROW(aggregate(fovs, included), IndeterminateScore);
      continue;
    }
    const SlideCounts s = aggregate(fovs, included);
    EXPECT_EQ(s.counts.by_class, want);
    EXPECT_EQ(s.counts.total, total);
    double sum = 0;
    for (int i = 0; i < kCellClassCount; ++i) {
      EXPECT_DOUBLE_EQ(s.proportions[i], static_cast<double>(want[i]) / static_cast<double>(total));
      sum += s.proportions[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(s.fov_ids.size(), included.size());
  }
}

TEST(Score, ThresholdBoundaries) {
  EXPECT_EQ(score_of(make(10, 0, 0, 0, 90)), Her2Value::ThreePlus);  // exactly 10%
  EXPECT_EQ(score_of(make(999, 0, 0, 0, 9001)), Her2Value::Zero);    // 9.99%
  EXPECT_EQ(score_of(make(0, 0, 10, 0, 90)), Her2Value::TwoPlus);
  EXPECT_EQ(score_of(make(0, 0, 999, 0, 9001)), Her2Value::Zero);
  EXPECT_EQ(score_of(make(0, 0, 0, 10, 90)), Her2Value::OnePlus);
  EXPECT_EQ(score_of(make(0, 0, 0, 999, 9001)), Her2Value::Zero);
  EXPECT_EQ(score_of(make(0, 0, 0, 0, 1)), Her2Value::Zero);
}

TEST(Score, HigherRowWinsWhenSeveralFire) {
  EXPECT_EQ(score_of(make(20, 20, 20, 20, 20)), Her2Value::ThreePlus);
  EXPECT_EQ(score_of(make(5, 0, 30, 30, 35)), Her2Value::TwoPlus);
}

TEST(Score, IntenseIncompleteCountsTowardTwoPlus) {
  const auto c = make(0, 6, 5, 0, 89);  // 11% in the 2+ bucket only with II
  EXPECT_EQ(score_of(c), Her2Value::TwoPlus);
  EXPECT_EQ(score_of(c, breast_rules_intense_incomplete_excluded()), Her2Value::Zero);
  const ScoreReport rep = build_report(std::vector<FovCounts>{{"a", c}}, {"a"}, breast_rules());
  ASSERT_TRUE(rep.scored);
  EXPECT_TRUE(std::any_of(rep.warnings.begin(), rep.warnings.end(),
                          [](const std::string& w) { return w.find("intense-incomplete") != std::string::npos; }));
}

TEST(Score, CategoriesAndNames) {
  EXPECT_EQ(category_of(Her2Value::Zero), Her2Category::Negative);
  EXPECT_EQ(category_of(Her2Value::OnePlus), Her2Category::Negative);
  EXPECT_EQ(category_of(Her2Value::TwoPlus), Her2Category::Equivocal);
  EXPECT_EQ(category_of(Her2Value::ThreePlus), Her2Category::Positive);
  for (Her2Value v : {Her2Value::Zero, Her2Value::OnePlus, Her2Value::TwoPlus, Her2Value::ThreePlus}) {
    EXPECT_EQ(her2_value_from_string(to_string(v)), v);
  }
}

TEST(Score, ProportionRandomizedAgainstDirectComparison) {
  gen::Rng r(82);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto c = make(r.integer(0, 50), r.integer(0, 50), r.integer(0, 50), r.integer(0, 50), r.integer(0, 400));
    if (c.total == 0) continue;
    // Integer cross-multiplication: n / total >= 1 / 10 iff 10 n >= total.
    auto fires = [&](std::int64_t n) { return 10 * n >= c.total; };
    Her2Value want = Her2Value::Zero;
    if (fires(c[CellClass::IntenseComplete])) {
      want = Her2Value::ThreePlus;
    } else if (fires(c[CellClass::WeakComplete] + c[CellClass::IntenseIncomplete])) {
      want = Her2Value::TwoPlus;
    } else if (fires(c[CellClass::WeakIncomplete])) {
      want = Her2Value::OnePlus;
    }
    EXPECT_EQ(score_of(c), want);
  }
}

TEST(Report, IndeterminateOutcomesAreReported) {
  const ScoreReport none = build_report({}, {}, breast_rules());
  EXPECT_FALSE(none.scored);
  EXPECT_FALSE(none.score.has_value());
  const ScoreReport empty = build_report(std::vector<FovCounts>{{"a", {}}}, {"a"}, breast_rules());
  EXPECT_FALSE(empty.scored);
  EXPECT_EQ(empty.included_fovs, std::vector<std::string>{"a"});
}

TEST(Report, FewFovsWarn) {
  std::vector<FovCounts> fovs;
  std::set<std::string> inc;
  for (int i = 0; i < 5; ++i) {
    fovs.push_back({"f" + std::to_string(i), make(1, 0, 0, 0, 1)});
    inc.insert(fovs.back().fov_id);
  }
  EXPECT_TRUE(build_report(fovs, inc, breast_rules()).warnings.empty());
  inc.erase("f0");
  EXPECT_EQ(build_report(fovs, inc, breast_rules()).warnings.size(), 1u);
}

TEST(Rules, ParseMatchesBuiltInTables) {
  const ScoreRules parsed = parse_rules("breast", "3+:IC>=0.10; 2+:WC,II>=0.10; 1+:WI>=0.10");
  EXPECT_EQ(parsed, breast_rules());
  const ScoreRules ii = parse_rules("breast-ii-excluded", " 3+ : IC >= 0.1 ;2+:WC>=0.1;1+:WI>=0.1;");
  EXPECT_EQ(ii, breast_rules_intense_incomplete_excluded());
  for (CellClass c : kAllCellClasses) EXPECT_FALSE(class_code(c).empty());
}

TEST(Rules, MalformedTablesAreRejected) {
  EXPECT_THROW(parse_rules("x", ""), ConfigError);
  EXPECT_THROW(parse_rules("x", "3+:IC"), ConfigError);
  EXPECT_THROW(parse_rules("x", "3+:ZZ>=0.1"), ConfigError);
  EXPECT_THROW(parse_rules("x", "3+:IC>=abc"), ConfigError);
  EXPECT_THROW(parse_rules("x", "3+:IC>=1.5"), ConfigError);
  EXPECT_THROW(parse_rules("x", "1+:WI>=0.1; 3+:IC>=0.1"), ConfigError);
}

TEST(Rules, RegistryLookup) {
  RuleRegistry reg;
  EXPECT_TRUE(reg.contains("breast"));
  EXPECT_TRUE(reg.contains("breast-ii-excluded"));
  EXPECT_THROW(reg.get("gastric"), ConfigError);
  reg.add(parse_rules("strict", "3+:IC>=0.30; 2+:WC,II>=0.10; 1+:WI>=0.10"));
  EXPECT_EQ(reg.get("strict").rows[0].threshold, 0.30);
  EXPECT_EQ(reg.ids().size(), 3u);
}
