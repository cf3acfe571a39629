#include <gtest/gtest.h>

#include "gen.hpp"

using namespace her2;

namespace {

synth::SlideSpec slide(std::array<double, kCellClassCount> mix, std::uint64_t seed) {
  synth::SlideSpec s;
  s.seed = seed;
  s.fov_count = 5;
  s.cells_per_fov = 40;
  s.proportions = mix;
  s.base.width = s.base.height = synth::frame_side_for(s.cells_per_fov, s.base);
  return s;
}

ScoreReport analyse(const synth::SlideBundle& b) {
  std::vector<FovCounts> fovs;
  std::set<std::string> inc;
  const ClassicalDetector det{DetectorParams{}};
  for (std::size_t i = 0; i < b.fovs.size(); ++i) {
    const auto a = analyze_fov(b.fovs[i].image, det, PipelineParams{});
    fovs.push_back({"fov-" + std::to_string(i), a.counts});
    inc.insert(fovs.back().fov_id);
  }
  return build_report(fovs, inc, breast_rules());
}

}  // namespace

TEST(Synth, SameSpecSameBytes) {
  auto spec = synth::archetype_spec(4);
  spec.texture_amplitude = 0.05;
  const auto a = synth::generate_fov(spec);
  const auto b = synth::generate_fov(spec);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.heatmap, b.heatmap);
  spec.seed = 5;
  EXPECT_NE(synth::generate_fov(spec).image, a.image);
}

TEST(Synth, ArchetypeHasOneCellPerClass) {
  const auto fx = gen::archetype();
  ASSERT_EQ(fx.truth.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(fx.truth[i].cls, kAllCellClasses[i]);
  for (CellClass c : kAllCellClasses) EXPECT_EQ(fx.truth_counts()[c], 1);
}

TEST(Synth, RenderedStainsDeconvolveBack) {
  // Ring pixel on the stained side (angle 0) of each archetype cell.
  const auto fx = gen::archetype();
  const StainChannels hed = rgb_to_hed(fx.image);
  const int ring_px = static_cast<int>(std::lround(fx.spec.ring_radius_um / fx.spec.pixel_size));
  for (const auto& t : fx.truth) {
    const Point p{t.at.x + ring_px, t.at.y};
    double want = 0.0;
    if (t.cls != CellClass::NoStaining) want = synth::is_intense(t.cls) ? fx.spec.od_intense : fx.spec.od_weak;
    EXPECT_NEAR(hed.dab(p.x, p.y), want, 0.05) << to_string(t.cls);
    EXPECT_NEAR(hed.h(p.x, p.y), fx.spec.background_h, 0.05);
    EXPECT_NEAR(hed.h(t.at.x, t.at.y), fx.spec.background_h + fx.spec.nucleus_od, 0.05);
  }
}

TEST(Synth, EmptyFixtureScoresIndeterminate) {
  synth::FixtureSpec s;
  s.width = s.height = 256;
  const auto fx = synth::generate_fov(s);
  EXPECT_TRUE(fx.truth.empty());
  const auto a = analyze_fov(fx.image, ClassicalDetector(DetectorParams{}), PipelineParams{});
  EXPECT_EQ(a.counts.total, 0);
  const auto rep = build_report(std::vector<FovCounts>{{"a", a.counts}}, {"a"}, breast_rules());
  EXPECT_FALSE(rep.scored);
}

TEST(Synth, SpecValidation) {
  synth::FixtureSpec s;
  s.od_weak = 0.8;
  EXPECT_THROW(synth::generate_fov(s), ValidationError);
  s = {};
  s.width = s.height = 100;
  s.random_counts[0] = 50;
  EXPECT_THROW(synth::generate_fov(s), ValidationError);
  s = {};
  s.cells = {{{100, 100}, CellClass::NoStaining, 0}, {{110, 100}, CellClass::NoStaining, 0}};
  EXPECT_THROW(synth::generate_fov(s), ValidationError);
}

TEST(Synth, DcisRegionRelabelsCellsInside) {
  synth::FixtureSpec s;
  s.random_counts = {0, 0, 0, 0, 16};
  s.width = s.height = synth::frame_side_for(16, s);
  const double half = s.width / 2.0;
  s.dcis_region = {{0, 0}, {half, 0}, {half, half}, {0, half}, {0, 0}};
  const auto fx = synth::generate_fov(s);
  int inside = 0;
  for (const auto& t : fx.truth) {
    if (t.in_dcis) {
      ++inside;
      EXPECT_EQ(t.cls, CellClass::IntenseComplete);
    }
  }
  EXPECT_GT(inside, 0);
  EXPECT_EQ(fx.truth_counts(false).total, static_cast<std::int64_t>(fx.truth.size()) - inside);
}

TEST(Synth, SlideExpectedScoresFollowTheMix) {
  const auto three = synth::generate_slide(slide({0.35, 0, 0.05, 0.2, 0}, 1));
  EXPECT_EQ(three.expected.value, Her2Value::ThreePlus);
  const auto zero = synth::generate_slide(slide({0, 0, 0, 0, 1}, 2));
  EXPECT_EQ(zero.expected.value, Her2Value::Zero);
  const auto two = synth::generate_slide(slide({0, 0, 0.12, 0.3, 0}, 3));
  EXPECT_EQ(two.expected.value, Her2Value::TwoPlus);
  EXPECT_EQ(two.truth_counts.total, 200);
  EXPECT_EQ(two.truth_counts[CellClass::WeakComplete], 24);
  std::int64_t rendered = 0;
  for (const auto& f : two.fovs) rendered += static_cast<std::int64_t>(f.truth.size());
  EXPECT_EQ(rendered, 200);
}

TEST(Synth, BoundaryMixesAreRefusedUnlessAllowed) {
  auto s = slide({0.10, 0, 0, 0, 0.9}, 4);
  EXPECT_THROW(synth::generate_slide(s), ValidationError);
  s.allow_boundary = true;
  EXPECT_EQ(synth::generate_slide(s).expected.value, Her2Value::ThreePlus);
}

TEST(Synth, PipelineRecoversSlideScores) {
  for (const auto& [mix, want] : std::vector<std::pair<std::array<double, 5>, Her2Value>>{
           {{0.35, 0, 0, 0, 0.65}, Her2Value::ThreePlus},
           {{0, 0, 0, 0, 1}, Her2Value::Zero},
           {{0, 0, 0.12, 0, 0.88}, Her2Value::TwoPlus}}) {
    const auto b = synth::generate_slide(slide(mix, 7));
    const auto rep = analyse(b);
    ASSERT_TRUE(rep.scored);
    EXPECT_EQ(rep.score->value, want);
    EXPECT_EQ(rep.score->value, b.expected.value);
  }
}
