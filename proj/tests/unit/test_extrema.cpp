#include <gtest/gtest.h>

#include "gen.hpp"
#include "oracles.hpp"

using namespace her2;

namespace {

std::vector<Point> points(const std::vector<Extremum>& es) {
  std::vector<Point> out;
  for (const auto& e : es) out.push_back(e.at);
  return out;
}

}  // namespace

TEST(Extrema, MatchesExhaustiveSearchWithTies) {
  gen::Rng r(41);
  for (int trial = 0; trial < 60; ++trial) {
    const ScalarChannel c = gen::quantized_channel(r, r.integer(1, 40), r.integer(1, 40), r.integer(2, 8));
    const int md = r.integer(1, 5);
    const double thr = r.real(0.0, 0.8);
    EXPECT_EQ(points(find_extrema(c, ExtremaMode::Maxima, md, thr)), oracle::extrema(c, true, md, thr)) << trial;
    EXPECT_EQ(points(find_extrema(c, ExtremaMode::Minima, md, thr)), oracle::extrema(c, false, md, thr)) << trial;
  }
}

TEST(Extrema, MinimaAreMaximaOfNegation) {
  gen::Rng r(42);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarChannel c = gen::random_channel(r, 30, 25);
    ScalarChannel neg = c;
    for (float& v : neg.values()) v = -v;
    EXPECT_EQ(points(find_extrema(c, ExtremaMode::Minima, 3, 0.4)), points(find_extrema(neg, ExtremaMode::Maxima, 3, -0.4)));
  }
}

TEST(Extrema, SurvivorsAreSeparatedAndPassThreshold) {
  gen::Rng r(43);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarChannel c = gen::random_channel(r, 50, 50);
    const int md = r.integer(1, 6);
    const auto found = find_extrema(c, ExtremaMode::Maxima, md, 0.3);
    for (std::size_t i = 0; i < found.size(); ++i) {
      EXPECT_GE(found[i].value, 0.3f);
      if (i) {
        EXPECT_GE(found[i - 1].value, found[i].value);
      }
      for (std::size_t j = 0; j < i; ++j) EXPECT_GE(squared_distance(found[i].at, found[j].at), md * md);
    }
  }
}

TEST(Extrema, FlatImageHasNone) {
  ScalarChannel c(20, 20, 1.0, 0.5f);
  EXPECT_TRUE(find_extrema(c, ExtremaMode::Maxima, 2, 0.0).empty());
  EXPECT_TRUE(find_extrema(c, ExtremaMode::Minima, 2, 1.0).empty());
}

TEST(Extrema, EqualPeaksResolveToLowestRasterPosition) {
  ScalarChannel c(10, 10, 1.0);
  c(3, 5) = 1.0f;
  c(5, 5) = 1.0f;
  const auto found = find_extrema(c, ExtremaMode::Maxima, 3, 0.5);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].at, (Point{3, 5}));
  c(4, 2) = 1.0f;
  EXPECT_EQ(points(find_extrema(c, ExtremaMode::Maxima, 3, 0.5)).front(), (Point{4, 2}));
}

TEST(Extrema, SinglePeakAndRejectsBadDistance) {
  ScalarChannel c(9, 9, 1.0);
  c(4, 4) = 2.0f;
  const auto found = find_extrema(c, ExtremaMode::Maxima, 2, 1.0);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].at, (Point{4, 4}));
  EXPECT_TRUE(find_extrema(c, ExtremaMode::Maxima, 2, 2.5).empty());
  EXPECT_THROW(find_extrema(c, ExtremaMode::Maxima, 0, 0.0), ValidationError);
  const PointSet ps = local_extrema(c, ExtremaMode::Maxima, 2, 1.0);
  EXPECT_TRUE(ps.contains({4, 4}));
  EXPECT_EQ(ps.points().size(), 1u);
}
