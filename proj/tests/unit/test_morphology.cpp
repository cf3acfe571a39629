#include <gtest/gtest.h>

#include "gen.hpp"
#include "oracles.hpp"

using namespace her2;

TEST(Threshold, BitSetIffAtLeastThreshold) {
  gen::Rng r(31);
  const ScalarChannel c = gen::quantized_channel(r, 30, 30, 10);
  for (double t : {0.0, 0.3, 0.30000001, 0.5, 0.9, 1.0}) {
    const BinaryMask m = threshold_mask(c, t);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(m[i] != 0, static_cast<double>(c[i]) >= t);
  }
}

TEST(Dilate, MatchesBruteForceDisk) {
  gen::Rng r(32);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryMask m = gen::noise_mask(r, r.integer(1, 30), r.integer(1, 30), r.real(0.0, 0.1));
    const int d = r.integer(0, 6);
    EXPECT_EQ(dilate(m, d), oracle::dilate(m, d)) << "trial " << trial << " d " << d;
  }
}

TEST(Dilate, ZeroIsIdentityAndOutputContainsInput) {
  gen::Rng r(33);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask m = gen::shapes_mask(r, 40, 40);
    EXPECT_EQ(dilate(m, 0), m);
    EXPECT_TRUE(m.subset_of(dilate(m, r.integer(1, 5))));
  }
  EXPECT_THROW(dilate(BinaryMask(3, 3), -1), ValidationError);
}

TEST(Dilate, EmptyMaskStaysEmpty) { EXPECT_EQ(dilate(BinaryMask(9, 7), 3).count(), 0u); }

TEST(FillEnclosed, MatchesBreadthFirstOracle) {
  gen::Rng r(34);
  for (int trial = 0; trial < 60; ++trial) {
    const BinaryMask m = trial % 2 ? gen::shapes_mask(r, 48, 40) : gen::noise_mask(r, 25, 31, r.real(0.2, 0.6));
    const BinaryMask f = fill_enclosed(m);
    EXPECT_EQ(f, oracle::fill_enclosed(m));
    EXPECT_TRUE(m.subset_of(f));
    EXPECT_EQ(fill_enclosed(f), f);
  }
}

TEST(FillEnclosed, ClosedRingFillsAndOpenArcDoesNot) {
  BinaryMask ring(40, 40);
  gen::draw_ring(ring, 20, 20, 10, 2);
  EXPECT_TRUE(fill_enclosed(ring).test(20, 20));
  BinaryMask arc(40, 40);
  gen::draw_ring(arc, 20, 20, 10, 2, 1.0, 2.0);
  EXPECT_FALSE(fill_enclosed(arc).test(20, 20));
}

TEST(FillEnclosed, DiagonalWallStillEncloses) {
  // Background steps are 4-connected, so a diamond of diagonal wall pixels is closed.
  BinaryMask m(5, 5);
  for (Point p : {Point{2, 1}, Point{1, 2}, Point{3, 2}, Point{2, 3}}) m.set(p);
  EXPECT_TRUE(fill_enclosed(m).test(2, 2));
  m.set(2, 3, false);
  EXPECT_FALSE(fill_enclosed(m).test(2, 2));
}

TEST(Components, SamePartitionAsUnionFind) {
  gen::Rng r(35);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryMask m = gen::noise_mask(r, r.integer(1, 35), r.integer(1, 35), r.real(0.1, 0.7));
    for (bool eight : {false, true}) {
      const Components c = connected_components(m, eight ? Connectivity::Eight : Connectivity::Four);
      const auto uf = oracle::components(m, eight);
      std::map<int, int> a2b, b2a;
      std::vector<std::int64_t> areas(static_cast<std::size_t>(c.count()) + 1, 0);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const int a = c.labels[i];
        ASSERT_EQ(a == 0, uf[i] < 0);
        if (a == 0) continue;
        ++areas[a];
        EXPECT_EQ(a2b.emplace(a, uf[i]).first->second, uf[i]);
        EXPECT_EQ(b2a.emplace(uf[i], a).first->second, a);
      }
      ASSERT_EQ(static_cast<int>(a2b.size()), c.count());
      for (int k = 1; k <= c.count(); ++k) EXPECT_EQ(c.areas[k - 1], areas[k]);
    }
  }
}

namespace {

bool has_2x2_block(const BinaryMask& m) {
  for (int y = 0; y + 1 < m.height(); ++y) {
    for (int x = 0; x + 1 < m.width(); ++x) {
      if (m.test(x, y) && m.test(x + 1, y) && m.test(x, y + 1) && m.test(x + 1, y + 1)) return true;
    }
  }
  return false;
}

}  // namespace

TEST(Skeleton, ThinSubsetAndTopologyPreserved) {
  gen::Rng r(36);
  for (int trial = 0; trial < 80; ++trial) {
    const BinaryMask m = trial % 3 ? gen::shapes_mask(r, 50, 44) : gen::noise_mask(r, 30, 30, r.real(0.3, 0.8));
    const BinaryMask s = skeletonize(m);
    EXPECT_TRUE(s.subset_of(m)) << trial;
    EXPECT_FALSE(has_2x2_block(s)) << trial;
    EXPECT_EQ(oracle::component_count(s, true), oracle::component_count(m, true)) << trial;
  }
}

TEST(Skeleton, RingKeepsItsHole) {
  gen::Rng r(37);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask m(60, 60);
    gen::draw_ring(m, r.real(25, 35), r.real(25, 35), r.real(8, 20), r.real(2, 6));
    const BinaryMask s = skeletonize(m);
    EXPECT_EQ(oracle::hole_count(s), 1) << trial;
    EXPECT_EQ(oracle::component_count(s, true), 1);
  }
}

TEST(Skeleton, TwoByTwoSquareKeepsOnePixelAtLeast) {
  BinaryMask m(4, 4);
  m.set(1, 1);
  m.set(2, 1);
  m.set(1, 2);
  m.set(2, 2);
  const BinaryMask s = skeletonize(m);
  EXPECT_GE(s.count(), 1u);
  EXPECT_FALSE(has_2x2_block(s));
}

TEST(Skeleton, AlreadyThinLineUnchanged) {
  BinaryMask m(20, 5);
  for (int x = 2; x < 18; ++x) m.set(x, 2);
  EXPECT_EQ(skeletonize(m), m);
}
