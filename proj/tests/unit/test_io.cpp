#include <gtest/gtest.h>

#include "gen.hpp"

using namespace her2;

TEST(ImageCodec, PngAndTiffRoundTripExactly) {
  gen::Rng r(91);
  RasterImage img(17, 9, kPixelSize40x);
  for (auto& p : img.values()) {
    p = {static_cast<std::uint8_t>(r.integer(0, 255)), static_cast<std::uint8_t>(r.integer(0, 255)),
         static_cast<std::uint8_t>(r.integer(0, 255))};
  }
  EXPECT_EQ(io::decode_image(io::encode_png(img), kPixelSize40x), img);
  EXPECT_EQ(io::decode_image(io::encode_tiff(img), kPixelSize40x), img);
  const RasterImage jpg = io::decode_image(io::encode_jpeg(img), kPixelSize20x);
  EXPECT_EQ(jpg.width(), 17);
  EXPECT_DOUBLE_EQ(jpg.pixel_size(), kPixelSize20x);
}

TEST(ImageCodec, GarbageIsADecodeError) {
  EXPECT_THROW(io::decode_image({}, 1.0), DecodeError);
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_THROW(io::decode_image(junk, 1.0), DecodeError);
  auto png = io::encode_png(RasterImage(8, 8, 1.0));
  png.resize(png.size() / 2);
  EXPECT_THROW(io::decode_image(png, 1.0), DecodeError);
}

TEST(MaskCodec, RoundTrip) {
  gen::Rng r(92);
  const BinaryMask m = gen::noise_mask(r, 23, 11, 0.4);
  EXPECT_EQ(io::decode_mask_png(io::encode_mask_png(m)), m);
}

TEST(Heatmap, BinarySidecarRoundTrip) {
  gen::Rng r(93);
  const ScalarChannel hm = gen::random_channel(r, 13, 7);
  const auto bytes = io::encode_heatmap_binary(hm, 2.0);
  EXPECT_EQ(bytes.size(), 16u + 13 * 7 * 4);
  const io::Heatmap back = io::decode_heatmap(bytes, 26, 14, kPixelSize40x);
  EXPECT_DOUBLE_EQ(back.scale, 2.0);
  for (std::size_t i = 0; i < hm.size(); ++i) EXPECT_EQ(back.values[i], hm[i]);
  EXPECT_DOUBLE_EQ(back.values.pixel_size(), 2 * kPixelSize40x);
}

TEST(Heatmap, SixteenBitPngInfersScale) {
  gen::Rng r(94);
  const ScalarChannel hm = gen::random_channel(r, 10, 6);
  const io::Heatmap back = io::decode_heatmap(io::encode_heatmap_png16(hm), 40, 24, 1.0);
  EXPECT_DOUBLE_EQ(back.scale, 4.0);
  for (std::size_t i = 0; i < hm.size(); ++i) EXPECT_NEAR(back.values[i], hm[i], 1.0 / 65535);
  EXPECT_THROW(io::decode_heatmap(io::encode_heatmap_png16(hm), 40, 80, 1.0), DecodeError);
}

TEST(Heatmap, CorruptSidecarsAreRejected) {
  const ScalarChannel hm(4, 4, 1.0);
  auto bytes = io::encode_heatmap_binary(hm, 1.0);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(io::decode_heatmap(truncated, 4, 4, 1.0), DecodeError);
  auto header_only = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  EXPECT_THROW(io::decode_heatmap(header_only, 4, 4, 1.0), DecodeError);
  auto nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16, &q, 4);
  EXPECT_THROW(io::decode_heatmap(nan, 4, 4, 1.0), DecodeError);
  auto zero_scale = io::encode_heatmap_binary(hm, 0.0);
  EXPECT_THROW(io::decode_heatmap(zero_scale, 4, 4, 1.0), DecodeError);
}

TEST(Files, WriteAndReadBack) {
  gen::TempDir dir;
  const auto p = dir.path() / "sub" / "x.txt";
  io::write_text(p, "hello");
  const auto bytes = io::read_file(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "hello");
  EXPECT_THROW(io::read_file(dir.path() / "missing"), Error);
}

TEST(Config, ParsesKeysCommentsAndRules) {
  const AppConfig cfg = parse_config(
      "# defaults\n"
      "membrane.t_weak = 0.2   # inline\n"
      "membrane.t_intense=0.6\n"
      "membrane.d_um = 4\n"
      "detector.min_distance_um = 5.5\n"
      "classifier.literal_weak_incomplete = yes\n"
      "stain.dab = 0.27 0.57 0.78\n"
      "rules.strict = 3+:IC>=0.30; 2+:WC,II>=0.10; 1+:WI>=0.10\n"
      "rules.default = strict\n"
      "service.workers = 3\n"
      "service.storage_root = /tmp/x\n"
      "service.listen = 0.0.0.0:9000\n");
  EXPECT_DOUBLE_EQ(cfg.params.membrane.t_weak, 0.2);
  EXPECT_DOUBLE_EQ(cfg.params.membrane.t_intense, 0.6);
  EXPECT_DOUBLE_EQ(cfg.params.membrane.d_um, 4.0);
  EXPECT_DOUBLE_EQ(cfg.params.detector.min_distance_um, 5.5);
  EXPECT_TRUE(cfg.params.classifier.literal_weak_incomplete);
  EXPECT_EQ(cfg.default_rules, "strict");
  EXPECT_DOUBLE_EQ(cfg.rules.get("strict").rows[0].threshold, 0.30);
  EXPECT_EQ(cfg.workers, 3);
  EXPECT_EQ(cfg.storage_root, "/tmp/x");
  EXPECT_EQ(cfg.listen, "0.0.0.0:9000");
  double norm = 0;
  for (double v : cfg.params.stains[kDab]) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(Config, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("\nbogus.key = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("membrane.t_weak = abc\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("just words\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("service.workers = 0\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("membrane.t_weak = 0.9\n"), "no error");
  EXPECT_NE(message("rules.default = nope\n"), "no error");
  EXPECT_NE(message("stain.dab = 1 2\n"), "no error");
}

TEST(Config, EnvironmentOverridesStorageAndListen) {
  AppConfig cfg;
  ::setenv("HER2_STORAGE_ROOT", "/tmp/env-root", 1);
  ::setenv("HER2_LISTEN", "127.0.0.1:1234", 1);
  apply_environment(cfg);
  ::unsetenv("HER2_STORAGE_ROOT");
  ::unsetenv("HER2_LISTEN");
  EXPECT_EQ(cfg.storage_root, "/tmp/env-root");
  EXPECT_EQ(cfg.listen, "127.0.0.1:1234");
}

TEST(Config, LoadFromFile) {
  gen::TempDir dir;
  io::write_text(dir.path() / "a.conf", "membrane.t_weak = 0.1\n");
  EXPECT_DOUBLE_EQ(load_config(dir.path() / "a.conf").params.membrane.t_weak, 0.1);
  EXPECT_THROW(load_config(dir.path() / "none.conf"), ConfigError);
}

TEST(Serialize, ParamsRoundTripAndPatch) {
  PipelineParams p;
  p.membrane.t_weak = 0.21;
  p.detector.area_level = 0.4;
  EXPECT_EQ(json::params_from(json::params(p)).membrane, p.membrane);
  EXPECT_EQ(json::params_from(json::params(p)).detector, p.detector);
  const auto q = json::patched(p, {{"t_weak", 0.1}, {"d", 3}, {"detector.min_distance_um", "7"}});
  EXPECT_DOUBLE_EQ(q.membrane.t_weak, 0.1);
  EXPECT_DOUBLE_EQ(q.membrane.d_um, 3.0);
  EXPECT_DOUBLE_EQ(q.detector.min_distance_um, 7.0);
  EXPECT_THROW(json::patched(p, {{"nope", 1}}), ConfigError);
  EXPECT_THROW(json::patched(p, {{"t_weak", 0.9}}), ValidationError);
  EXPECT_THROW(json::patched(p, json::Json::array()), ConfigError);
}

TEST(Serialize, ReportFieldsAndFixtureSpec) {
  CellClassCounts c;
  c.add(CellClass::IntenseComplete, 3);
  c.add(CellClass::NoStaining, 7);
  const auto rep = build_report(std::vector<FovCounts>{{"a", c}}, {"a"}, breast_rules());
  const json::Json j = json::score_report(rep);
  EXPECT_EQ(j.at("status"), "scored");
  EXPECT_EQ(j.at("score"), "3+");
  EXPECT_EQ(j.at("category"), "positive");
  EXPECT_EQ(json::counts_from(j.at("counts")), c);
  const json::Json none = json::score_report(build_report({}, {}, breast_rules()));
  EXPECT_EQ(none.at("status"), "indeterminate");
  EXPECT_TRUE(none.at("score").is_null());

  auto spec = synth::archetype_spec(3);
  spec.random_counts[2] = 4;
  spec.dcis_region = {{0, 0}, {5, 0}, {5, 5}, {0, 0}};
  const auto back = json::fixture_spec_from(json::fixture_spec(spec));
  EXPECT_EQ(json::fixture_spec(back), json::fixture_spec(spec));
}

TEST(Serialize, PolygonsRoundTripAndReject) {
  const Polygon p({{1, 1}, {5, 1}, {5, 4}, {1, 1}});
  EXPECT_EQ(json::polygon_from(json::polygon(p)).ring(), p.ring());
  EXPECT_THROW(json::polygons_from(json::Json::parse(R"([[[1,1],[2,"x"]]])")), ValidationError);
  EXPECT_THROW(json::polygons_from(json::Json::parse(R"({"a":1})")), ValidationError);
  EXPECT_THROW(json::polygon_from(json::Json::parse(R"([[1,2,3]])")), ValidationError);
}
