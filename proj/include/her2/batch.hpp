#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "her2/config.hpp"
#include "her2/io.hpp"
#include "her2/pipeline.hpp"
#include "her2/scorer.hpp"
#include "her2/serialize.hpp"

namespace her2::batch {

namespace fs = std::filesystem;
using Json = nlohmann::json;

enum class DetectorKind { Classical, Heatmap };

inline DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "classical") return DetectorKind::Classical;
  if (s == "heatmap") return DetectorKind::Heatmap;
  throw ConfigError("detector must be classical or heatmap, got '" + s + "'");
}

struct BatchConfig {
  fs::path input;
  fs::path output;
  std::optional<Objective> objective;
  fs::path manifest;  // optional CSV: filename,objective
  PipelineParams params;
  RuleRegistry rules;
  std::string rule_table = std::string(kBreastRulesId);
  bool overlay = false;
  DetectorKind detector = DetectorKind::Classical;
  double heatmap_peak_threshold = 0.5;
};

struct BatchInput {
  fs::path image;
  Objective objective = Objective::X40;
  fs::path heatmap;
};

struct BatchFailure {
  std::string file;
  std::string error;
};

inline bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff";
}

/// Manifest lines are "filename,objective"; a "filename,..." header and # comments are skipped.
inline std::map<std::string, Objective> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot read manifest " + path.string());
  std::map<std::string, Objective> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = her2::detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": expected filename,objective");
    }
    const std::string name = her2::detail::trim(line.substr(0, comma));
    const std::string obj = her2::detail::trim(line.substr(comma + 1));
    if (lineno == 1 && name == "filename") continue;
    try {
      out[name] = objective_from_string(obj);
    } catch (const ValidationError& e) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Heatmap sidecar for an image: <stem>.heatmap (H2HM) or <stem>.heatmap.png.
inline std::optional<fs::path> find_heatmap(const fs::path& image) {
  for (const char* suffix : {".heatmap", ".heatmap.png"}) {
    fs::path p = image.parent_path() / (image.stem().string() + suffix);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

/// Images in the input directory, sorted by name, with their objectives.
/// Without an explicit manifest, <input>/manifest.csv is used when present.
/// Files that cannot be resolved are reported in failures.
inline std::vector<BatchInput> collect_inputs(const BatchConfig& cfg, std::vector<BatchFailure>& failures) {
  if (!fs::is_directory(cfg.input)) throw NotFound("input directory " + cfg.input.string() + " does not exist");
  std::map<std::string, Objective> manifest;
  if (!cfg.manifest.empty()) {
    manifest = read_manifest(cfg.manifest);
  } else if (fs::exists(cfg.input / "manifest.csv")) {
    manifest = read_manifest(cfg.input / "manifest.csv");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.input)) {
    if (e.is_regular_file() && is_image_file(e.path()) && e.path().string().find(".heatmap") == std::string::npos) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& [name, obj] : manifest) {
    if (!fs::exists(cfg.input / name)) failures.push_back({name, "listed in manifest but not found"});
  }
  std::vector<BatchInput> out;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    BatchInput in{f, Objective::X40, {}};
    if (auto it = manifest.find(name); it != manifest.end()) {
      in.objective = it->second;
    } else if (cfg.objective) {
      in.objective = *cfg.objective;
    } else {
      failures.push_back({name, "no objective given (use --objective or a manifest entry)"});
      continue;
    }
    if (cfg.detector == DetectorKind::Heatmap) {
      const auto hm = find_heatmap(f);
      if (!hm) {
        failures.push_back({name, "heatmap detector selected but no heatmap sidecar found"});
        continue;
      }
      in.heatmap = *hm;
    }
    out.push_back(std::move(in));
  }
  return out;
}

inline std::unique_ptr<Detector> make_detector(const BatchConfig& cfg, const BatchInput& in, const RasterImage& image) {
  if (cfg.detector == DetectorKind::Classical) return std::make_unique<ClassicalDetector>(cfg.params.detector);
  io::Heatmap hm = io::decode_heatmap(io::read_file(in.heatmap), image.width(), image.height(), image.pixel_size());
  return std::make_unique<HeatmapDetector>(std::move(hm.values), hm.scale, cfg.heatmap_peak_threshold,
                                           cfg.params.detector.min_distance_um);
}

struct FovOutcome {
  std::string id;  // file name
  Objective objective = Objective::X40;
  int width = 0;
  int height = 0;
  std::vector<std::string> warnings;
  FovAnalysis analysis;
};

inline FovOutcome analyse_input(const BatchConfig& cfg, const BatchInput& in, ThreadPool* pool,
                                std::optional<RasterImage>* keep_image = nullptr) {
  FovOutcome o;
  o.id = in.image.filename().string();
  o.objective = in.objective;
  RasterImage image = io::read_image(in.image, pixel_size_of(in.objective));
  o.width = image.width();
  o.height = image.height();
  if (auto w = fov_size_warning(o.width, o.height, in.objective); !w.empty()) o.warnings.push_back(std::move(w));
  const auto det = make_detector(cfg, in, image);
  o.analysis = analyze_fov(image, *det, cfg.params, {}, {}, pool);
  if (o.analysis.membranes.enhance_degenerate) o.warnings.push_back("DAB channel is constant; no membranes");
  if (keep_image) *keep_image = std::move(image);
  return o;
}

inline Json fov_json(const FovOutcome& o) {
  return {{"id", o.id},
          {"objective", std::string(to_string(o.objective))},
          {"width", o.width},
          {"height", o.height},
          {"counts", json::counts(o.analysis.counts)},
          {"cells", json::cells(o.analysis.cells)},
          {"warnings", o.warnings}};
}

struct BatchResult {
  int exit_code = 1;  // 0 success, 2 some FOVs failed, 1 fatal
  Json report;
  std::vector<FovOutcome> fovs;
  std::vector<BatchFailure> failures;
};

/// Processes every image in cfg.input as one slide and writes report.json,
/// fovs/<file>.json and, with overlay on, overlays/<file>.png under cfg.output.
/// Outputs contain no timings, so identical inputs give identical bytes.
inline BatchResult run_batch(const BatchConfig& cfg, ThreadPool* pool = nullptr) {
  cfg.params.validate();
  const ScoreRules& rules = cfg.rules.get(cfg.rule_table);
  BatchResult r;
  const auto inputs = collect_inputs(cfg, r.failures);
  if (!cfg.output.empty()) {
    fs::create_directories(cfg.output / "fovs");
    if (cfg.overlay) fs::create_directories(cfg.output / "overlays");
  }

  std::vector<std::optional<FovOutcome>> outcomes(inputs.size());
  std::vector<std::string> errors(inputs.size());
  parallel_for(
      pool, 0, static_cast<int>(inputs.size()),
      [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
          const auto k = static_cast<std::size_t>(i);
          try {
            std::optional<RasterImage> image;
            FovOutcome o = analyse_input(cfg, inputs[k], pool, cfg.overlay ? &image : nullptr);
            if (!cfg.output.empty()) {
              io::write_text(cfg.output / "fovs" / (o.id + ".json"), fov_json(o).dump(2) + "\n");
              if (cfg.overlay) {
                io::write_png(cfg.output / "overlays" / (o.id + ".png"), render_overlay(*image, o.analysis));
              }
            }
            outcomes[k] = std::move(o);
          } catch (const std::exception& e) {
            errors[k] = e.what();
          }
        }
      },
      1);

  std::vector<FovCounts> counts;
  std::set<std::string> included;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (outcomes[k]) {
      counts.push_back({outcomes[k]->id, outcomes[k]->analysis.counts});
      included.insert(outcomes[k]->id);
      r.fovs.push_back(std::move(*outcomes[k]));
    } else {
      r.failures.push_back({inputs[k].image.filename().string(), errors[k]});
    }
  }
  std::sort(r.failures.begin(), r.failures.end(),
            [](const BatchFailure& a, const BatchFailure& b) { return a.file < b.file; });

  const ScoreReport rep = build_report(counts, included, rules);
  Json fovs = Json::array();
  for (const auto& o : r.fovs) {
    fovs.push_back({{"id", o.id},
                    {"objective", std::string(to_string(o.objective))},
                    {"counts", json::counts(o.analysis.counts)},
                    {"warnings", o.warnings}});
  }
  Json failures = Json::array();
  for (const auto& f : r.failures) failures.push_back({{"file", f.file}, {"error", f.error}});
  r.report = {{"report", json::score_report(rep)},
              {"params", json::params(cfg.params)},
              {"fovs", fovs},
              {"failures", failures}};
  if (!cfg.output.empty()) io::write_text(cfg.output / "report.json", r.report.dump(2) + "\n");

  if (r.fovs.empty()) {
    r.exit_code = 1;
  } else {
    r.exit_code = r.failures.empty() ? 0 : 2;
  }
  return r;
}

struct StageStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double max = 0.0;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

inline StageStats stage_stats(const std::vector<double>& v) {
  StageStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.p50 = quantile(v, 0.5);
  s.p90 = quantile(v, 0.9);
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

struct BenchResult {
  std::size_t runs = 0;
  StageStats detection, membrane, classification, total;
  std::vector<BatchFailure> failures;
};

/// Times each FOV `repeats` times, one FOV at a time so every run gets the whole pool.
inline BenchResult bench(const BatchConfig& cfg, int repeats, ThreadPool* pool) {
  if (repeats < 1) throw ConfigError("bench repeat count must be >= 1");
  cfg.params.validate();
  BenchResult r;
  const auto inputs = collect_inputs(cfg, r.failures);
  std::vector<double> det, mem, cls, tot;
  for (const auto& in : inputs) {
    try {
      const RasterImage image = io::read_image(in.image, pixel_size_of(in.objective));
      const auto d = make_detector(cfg, in, image);
      for (int k = 0; k < repeats; ++k) {
        const FovAnalysis a = analyze_fov(image, *d, cfg.params, {}, {}, pool);
        det.push_back(a.timings.detection_s);
        mem.push_back(a.timings.membrane_s);
        cls.push_back(a.timings.classification_s);
        tot.push_back(a.timings.total_s);
      }
    } catch (const std::exception& e) {
      r.failures.push_back({in.image.filename().string(), e.what()});
    }
  }
  r.runs = tot.size();
  r.detection = stage_stats(det);
  r.membrane = stage_stats(mem);
  r.classification = stage_stats(cls);
  r.total = stage_stats(tot);
  return r;
}

inline Json bench_json(const BenchResult& b) {
  auto stats = [](const StageStats& s) {
    return Json{{"mean_s", s.mean}, {"p50_s", s.p50}, {"p90_s", s.p90}, {"max_s", s.max}};
  };
  return {{"runs", b.runs},
          {"stages",
           {{"detection", stats(b.detection)},
            {"membrane", stats(b.membrane)},
            {"classification", stats(b.classification)}}},
          {"total", stats(b.total)}};
}

inline std::string bench_table(const BenchResult& b) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s\n", "stage", "mean_s", "p50_s", "p90_s", "max_s");
  out << line;
  const std::pair<const char*, const StageStats*> rows[] = {
      {"detection", &b.detection}, {"membrane", &b.membrane}, {"classification", &b.classification},
      {"total", &b.total}};
  for (const auto& [name, s] : rows) {
    std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10.4f %10.4f\n", name, s->mean, s->p50, s->p90, s->max);
    out << line;
  }
  out << "runs: " << b.runs << "\n";
  return out.str();
}

/// A fixture with per-cell truth, as written by her2-synth.
struct CalibrationFixture {
  std::string name;
  ScalarChannel dab_enhanced;  // working resolution
  std::vector<Point> centers;  // full resolution
  std::vector<CellClass> truth;
};

inline CalibrationFixture load_fixture(const fs::path& manifest_path, const PipelineParams& params) {
  const auto bytes = io::read_file(manifest_path);
  const Json m = Json::parse(bytes.begin(), bytes.end());
  const synth::FixtureSpec spec = json::fixture_spec_from(m.at("spec"));
  const RasterImage image =
      io::read_image(manifest_path.parent_path() / m.at("image").get<std::string>(), spec.pixel_size);
  CalibrationFixture f;
  f.name = manifest_path.filename().string();
  f.dab_enhanced = enhance_dab(working_dab(rgb_to_hed(image, params.stains)), params.membrane.enhance).channel;
  for (const auto& t : m.at("truth")) {
    f.centers.push_back({t.at("x").get<int>(), t.at("y").get<int>()});
    f.truth.push_back(cell_class_from_string(t.at("class").get<std::string>()));
  }
  return f;
}

/// Fixture manifests (*.json with a "truth" list) in a directory, sorted by name.
inline std::vector<fs::path> fixture_manifests(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFound("fixture directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const auto bytes = io::read_file(e.path());
    const Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("truth") && j.contains("image")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct CalibrationResult {
  double t_weak = 0.0;
  double t_intense = 0.0;
  double accuracy = 0.0;
  std::size_t cells = 0;
  std::size_t grid_points = 0;
  std::size_t optimal_points = 0;
  std::vector<std::string> warnings;

  std::string config_fragment() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "membrane.t_weak = %.3f\nmembrane.t_intense = %.3f\n", t_weak, t_intense);
    return buf;
  }
};

/// Grid search over (t_weak, t_intense) for per-cell accuracy at the true nucleus
/// centres, so detection errors do not leak into the thresholds. The grid is
/// t_weak = 0.050..0.600 step 0.025 and t_intense = 0.10..1.20 step 0.05 with
/// t_weak < t_intense. Among equally accurate points the median one (in
/// (t_weak, t_intense) order) is returned.
inline CalibrationResult calibrate(const std::vector<CalibrationFixture>& fixtures, const PipelineParams& params,
                                   ThreadPool* pool = nullptr) {
  std::size_t cells = 0;
  std::set<CellClass> classes;
  for (const auto& f : fixtures) {
    cells += f.centers.size();
    classes.insert(f.truth.begin(), f.truth.end());
  }
  if (fixtures.empty() || cells == 0) throw ValidationError("calibration needs at least one fixture with cells");

  struct GridPoint {
    int wi, ii;  // thousandths
    std::size_t correct = 0;
  };
  std::vector<GridPoint> grid;
  for (int w = 50; w <= 600; w += 25) {
    for (int i = 100; i <= 1200; i += 50) {
      if (w < i) grid.push_back({w, i});
    }
  }
  parallel_for(
      pool, 0, static_cast<int>(grid.size()),
      [&](int lo, int hi) {
        for (int g = lo; g < hi; ++g) {
          GridPoint& gp = grid[static_cast<std::size_t>(g)];
          MembraneParams mp = params.membrane;
          mp.t_weak = gp.wi / 1000.0;
          mp.t_intense = gp.ii / 1000.0;
          for (const auto& f : fixtures) {
            MembraneMasks masks = segment_membranes(f.dab_enhanced, mp);
            Contours contours = extract_contours(masks.m_weak, masks.m_intense);
            const MembraneMaskBundle b =
                build_masks(std::move(contours), std::move(masks), mp, f.dab_enhanced.pixel_size());
            const auto got = classify_cells(std::span<const Point>(f.centers), b, params.classifier);
            for (std::size_t k = 0; k < f.truth.size(); ++k) gp.correct += got.cells[k].cls == f.truth[k];
          }
        }
      },
      1);

  std::size_t best = 0;
  for (const auto& gp : grid) best = std::max(best, gp.correct);
  std::vector<const GridPoint*> optimal;
  for (const auto& gp : grid) {
    if (gp.correct == best) optimal.push_back(&gp);
  }
  const GridPoint& pick = *optimal[(optimal.size() - 1) / 2];

  CalibrationResult r;
  r.t_weak = pick.wi / 1000.0;
  r.t_intense = pick.ii / 1000.0;
  r.accuracy = static_cast<double>(best) / static_cast<double>(cells);
  r.cells = cells;
  r.grid_points = grid.size();
  r.optimal_points = optimal.size();
  if (classes.size() < 2) {
    r.warnings.push_back("degenerate: all fixture cells share one class, thresholds are poorly constrained");
  }
  return r;
}

}  // namespace her2::batch
