#include <gtest/gtest.h>

#include "gen.hpp"
#include "oracles.hpp"

using namespace her2;

namespace {

BinaryMask thin_ring(int w, int h, double cx, double cy, double radius) {
  BinaryMask m(w, h);
  gen::draw_ring(m, cx, cy, radius, 3.0);
  return skeletonize(m);
}

std::vector<bool> library_completeness(const BinaryMask& skel) {
  std::vector<bool> out;
  for (const auto& l : label_contours(skel)) out.push_back(l.complete);
  return out;
}

}  // namespace

TEST(Percentile, LinearInterpolationBetweenOrderStatistics) {
  gen::Rng r(61);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> v(static_cast<std::size_t>(r.integer(1, 40)));
    for (float& x : v) x = static_cast<float>(r.real(-1, 1));
    const double pct = r.real(0, 100);
    std::vector<float> s = v;
    std::sort(s.begin(), s.end());
    const double pos = pct / 100.0 * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double want = i + 1 < s.size() ? s[i] + (pos - static_cast<double>(i)) * (s[i + 1] - s[i]) : s[i];
    EXPECT_NEAR(percentile(v, pct), want, 1e-6);
  }
  EXPECT_THROW(percentile({}, 50), ValidationError);
}

TEST(Enhance, AffineStretchOntoUnitInterval) {
  ScalarChannel c(10, 1, 1.0);
  for (int x = 0; x < 10; ++x) c(x, 0) = 0.2f + 0.6f * static_cast<float>(x) / 9.0f;
  const EnhancedChannel e = enhance_dab(c, {0.0, 100.0, 0.0});
  EXPECT_FALSE(e.degenerate);
  for (int x = 0; x < 10; ++x) EXPECT_NEAR(e.channel(x, 0), static_cast<float>(x) / 9.0f, 1e-6);
}

TEST(Enhance, MinimumSpanKeepsOpticalDensityScale) {
  ScalarChannel c(10, 1, 1.0);
  for (int x = 0; x < 10; ++x) c(x, 0) = 0.1f + 0.05f * static_cast<float>(x);
  const EnhancedChannel e = enhance_dab(c, {0.0, 100.0, 1.0});
  for (int x = 0; x < 10; ++x) EXPECT_NEAR(e.channel(x, 0), 0.05f * static_cast<float>(x), 1e-6);
}

TEST(Enhance, ConstantChannelIsDegenerateAndUnchanged) {
  ScalarChannel c(6, 6, 1.0, 0.4f);
  const EnhancedChannel e = enhance_dab(c, {});
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.channel, c);
}

TEST(Segment, UniformChannelsAgainstThresholds) {
  const MembraneParams p;
  const auto below = segment_membranes(ScalarChannel(8, 8, 1.0, 0.1f), p);
  EXPECT_EQ(below.m_weak.count(), 0u);
  EXPECT_EQ(below.m_intense.count(), 0u);
  const auto between = segment_membranes(ScalarChannel(8, 8, 1.0, 0.3f), p);
  EXPECT_EQ(between.m_weak.count(), 64u);
  EXPECT_EQ(between.m_intense.count(), 0u);
  MembraneParams bad;
  bad.t_weak = 0.6;
  EXPECT_THROW(segment_membranes(ScalarChannel(8, 8, 1.0), bad), ValidationError);
}

TEST(Segment, IntenseMaskInsideWeakMask) {
  gen::Rng r(62);
  for (int trial = 0; trial < 100; ++trial) {
    const ScalarChannel c = gen::random_channel(r, 20, 20);
    MembraneParams p;
    p.t_weak = r.real(0.01, 0.9);
    p.t_intense = r.real(p.t_weak + 1e-6, 1.0);
    const auto m = segment_membranes(c, p);
    EXPECT_TRUE(m.m_intense.subset_of(m.m_weak));
  }
}

TEST(Contours, RejectsIntenseOutsideWeak) {
  BinaryMask w(4, 4), i(4, 4);
  i.set(1, 1);
  EXPECT_THROW(extract_contours(w, i), ValidationError);
}

TEST(Contours, CompletenessMatchesPerComponentOracle) {
  gen::Rng r(63);
  for (int trial = 0; trial < 120; ++trial) {
    const BinaryMask skel = skeletonize(gen::shapes_mask(r, 64, 56));
    EXPECT_EQ(library_completeness(skel), oracle::completeness(skel)) << trial;
  }
  for (int trial = 0; trial < 60; ++trial) {
    const BinaryMask skel = skeletonize(gen::noise_mask(r, 24, 24, r.real(0.3, 0.7)));
    EXPECT_EQ(library_completeness(skel), oracle::completeness(skel)) << "noise " << trial;
  }
}

TEST(Contours, ClosedRingCompleteOpenArcIncomplete) {
  BinaryMask m(80, 40);
  gen::draw_ring(m, 20, 20, 12, 3);
  gen::draw_ring(m, 60, 20, 12, 3, 0.5, 1.5);
  const auto labels = label_contours(skeletonize(m));
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_TRUE(labels[0].complete);
  EXPECT_FALSE(labels[1].complete);
  EXPECT_FALSE(labels[0].polyline.empty());
}

TEST(Contours, ArcInsideRingKeepsRingComplete) {
  BinaryMask m(60, 60);
  gen::draw_ring(m, 30, 30, 20, 3);
  gen::draw_ring(m, 30, 30, 8, 3, 0.5, 2.0);
  const auto labels = label_contours(skeletonize(m));
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_TRUE(labels[0].complete);
  EXPECT_FALSE(labels[1].complete);
}

TEST(Contours, OnlyInnermostOfNestedRingsIsComplete) {
  const BinaryMask outer = thin_ring(60, 60, 30, 30, 22);
  const BinaryMask inner = thin_ring(60, 60, 30, 30, 9);
  const auto labels = label_contours(mask_or(outer, inner));
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_FALSE(labels[0].complete);
  EXPECT_TRUE(labels[1].complete);
}

TEST(Contours, PolylineCoversItsComponent) {
  const BinaryMask skel = thin_ring(40, 40, 20, 20, 10);
  const auto labels = label_contours(skel);
  ASSERT_EQ(labels.size(), 1u);
  std::set<Point> pts(labels[0].polyline.begin(), labels[0].polyline.end());
  EXPECT_EQ(pts.size(), skel.count());
  for (Point p : pts) EXPECT_TRUE(skel.test(p));
}

TEST(MaskBundle, DilationRadiusGrowsWeakPointSet) {
  const auto fx = gen::archetype();
  const ScalarChannel dab = downsample2(rgb_to_hed(fx.image).dab);
  MembraneParams p;
  p.d_um = 0.0;
  const auto b0 = describe_membranes(dab, p);
  p.d_um = 2.5;
  const auto b1 = describe_membranes(dab, p);
  EXPECT_EQ(b0.d_px, 0);
  EXPECT_GT(b1.d_px, 0);
  EXPECT_EQ(b0.p_weak.mask(), b0.m_weak);
  EXPECT_TRUE(b0.p_weak.subset_of(b1.p_weak));
  EXPECT_GT(b1.p_weak.mask().count(), b0.p_weak.mask().count());
}

TEST(MaskBundle, RaisingWeakThresholdNeverGrowsPointSets) {
  gen::Rng r(64);
  const auto fx = synth::generate_fov([] {
    synth::FixtureSpec s;
    s.random_counts = {3, 3, 3, 3, 3};
    s.width = s.height = synth::frame_side_for(15, s);
    s.texture_amplitude = 0.05;
    return s;
  }());
  const ScalarChannel dab = downsample2(rgb_to_hed(fx.image).dab);
  for (int trial = 0; trial < 8; ++trial) {
    MembraneParams lo;
    lo.t_weak = r.real(0.05, 0.3);
    MembraneParams hi = lo;
    hi.t_weak = r.real(lo.t_weak, 0.45);
    const auto a = describe_membranes(dab, lo);
    const auto b = describe_membranes(dab, hi);
    EXPECT_LE(b.p_weak.mask().count(), a.p_weak.mask().count());
    EXPECT_TRUE(b.m_weak.subset_of(a.m_weak));
  }
}

TEST(MaskBundle, SetsAreFillsAndDilationsOfMasks) {
  const auto fx = gen::archetype();
  const ScalarChannel dab = downsample2(rgb_to_hed(fx.image).dab);
  const MembraneParams p;
  const auto b = describe_membranes(dab, p);
  EXPECT_EQ(b.p_weak_enclosed.mask(), oracle::fill_enclosed(b.c_weak));
  EXPECT_EQ(b.p_intense_enclosed.mask(), oracle::fill_enclosed(b.c_intense));
  EXPECT_EQ(b.p_weak.mask(), oracle::dilate(b.m_weak, b.d_px));
  EXPECT_EQ(b.p_intense.mask(), oracle::dilate(b.m_intense, b.d_px));
  EXPECT_TRUE(b.c_intense.subset_of(b.c_weak));
  EXPECT_TRUE(b.p_intense.subset_of(b.p_weak));
  EXPECT_DOUBLE_EQ(b.working_pixel_size, 2 * kPixelSize40x);
}
