#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "her2/config.hpp"
#include "her2/io.hpp"
#include "her2/pipeline.hpp"
#include "her2/scorer.hpp"
#include "her2/serialize.hpp"

namespace her2 {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct SessionParams {
  PipelineParams pipeline;
  std::string rule_table = std::string(kBreastRulesId);
};

/// One field of view in a session. Everything except the runtime cache is persisted.
struct FovRecord {
  std::string id;
  std::string image_file;    // relative to the session directory
  std::string heatmap_file;  // empty: classical detection
  Objective objective = Objective::X40;
  int width = 0;
  int height = 0;
  bool included = true;
  std::vector<Polygon> exclusions;
  ClassOverrides overrides;
  std::vector<std::string> warnings;
  NucleusSet detected;
  std::vector<std::size_t> detected_index;
  ClassifiedCells cells;
  CellClassCounts counts;
  StageTimings timings;

  double pixel_size() const { return pixel_size_of(objective); }
};

namespace detail {

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string image_extension(std::span<const std::uint8_t> b) {
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G') return ".png";
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ".jpg";
  if (b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I' && b[2] == 42) || (b[0] == 'M' && b[1] == 'M' && b[3] == 42))) {
    return ".tif";
  }
  return ".img";
}

// Write to a temporary name and rename, so a crash never leaves a torn state file.
inline void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  io::write_text(tmp, text);
  fs::rename(tmp, path);
}

inline Json fov_to_json(const FovRecord& f) {
  Json overrides = Json::object();
  for (const auto& [idx, cls] : f.overrides) overrides[std::to_string(idx)] = std::string(to_string(cls));
  Json exclusions = Json::array();
  for (const auto& p : f.exclusions) exclusions.push_back(json::polygon(p));
  return {{"id", f.id},
          {"image_file", f.image_file},
          {"heatmap_file", f.heatmap_file},
          {"objective", std::string(to_string(f.objective))},
          {"width", f.width},
          {"height", f.height},
          {"included", f.included},
          {"exclusions", exclusions},
          {"overrides", overrides},
          {"warnings", f.warnings},
          {"detected", json::nuclei(f.detected)},
          {"detected_index", f.detected_index},
          {"cells", json::cells(f.cells)},
          {"counts", json::counts(f.counts)}};
}

inline FovRecord fov_from_json(const Json& j) {
  FovRecord f;
  f.id = j.at("id");
  f.image_file = j.at("image_file");
  f.heatmap_file = j.at("heatmap_file");
  f.objective = objective_from_string(j.at("objective").get<std::string>());
  f.width = j.at("width");
  f.height = j.at("height");
  f.included = j.at("included");
  f.exclusions = json::polygons_from(j.at("exclusions"));
  for (const auto& [k, v] : j.at("overrides").items()) {
    f.overrides[std::stoul(k)] = cell_class_from_string(v.get<std::string>());
  }
  f.warnings = j.at("warnings").get<std::vector<std::string>>();
  f.detected = json::nuclei_from(j.at("detected"), f.width, f.height, f.pixel_size());
  f.detected_index = j.at("detected_index").get<std::vector<std::size_t>>();
  for (const auto& c : j.at("cells")) {
    f.cells.cells.push_back({{c.at("x").get<int>(), c.at("y").get<int>()},
                             cell_class_from_string(c.at("class").get<std::string>())});
  }
  f.counts = json::counts_from(j.at("counts"));
  return f;
}

}  // namespace detail

/// A slide under review: its FOVs, parameters and current score.
///
/// Mutations are serialized per session; reads share the lock. Every mutation
/// appends a full state snapshot (state/<seq>.json) and a line to events.log.
class Session {
 public:
  Session(std::string id, fs::path dir, SessionParams params, AppConfig cfg, ThreadPool* pool)
      : id_(std::move(id)), dir_(std::move(dir)), params_(std::move(params)), cfg_(std::move(cfg)), pool_(pool) {
    params_.pipeline.validate();
    (void)cfg_.rules.get(params_.rule_table);
    created_at_ = detail::utc_now();
    fs::create_directories(dir_ / "images");
    fs::create_directories(dir_ / "state");
    recompute_report();
    persist("create");
  }

  /// Restores the latest snapshot in dir.
  static std::shared_ptr<Session> load(const fs::path& dir, const AppConfig& cfg, ThreadPool* pool) {
    std::optional<fs::path> latest;
    for (const auto& e : fs::directory_iterator(dir / "state")) {
      if (e.path().extension() != ".json") continue;
      if (!latest || e.path().filename() > latest->filename()) latest = e.path();
    }
    if (!latest) throw NotFound("no state snapshot in " + dir.string());
    const auto bytes = io::read_file(*latest);
    const Json j = Json::parse(bytes.begin(), bytes.end());
    std::shared_ptr<Session> s(new Session(cfg, pool));
    s->id_ = j.at("id");
    s->dir_ = dir;
    s->created_at_ = j.at("created_at");
    s->seq_ = j.at("seq");
    s->next_fov_ = j.at("next_fov");
    s->params_.pipeline = json::params_from(j.at("params"));
    s->params_.rule_table = j.at("rule_table");
    (void)s->cfg_.rules.get(s->params_.rule_table);
    for (const auto& f : j.at("fovs")) s->fovs_.push_back(detail::fov_from_json(f));
    s->recompute_report();
    return s;
  }

  const std::string& id() const { return id_; }
  const fs::path& dir() const { return dir_; }

  SessionParams params() const {
    std::shared_lock lock(mu_);
    return params_;
  }

  std::vector<FovRecord> fovs() const {
    std::shared_lock lock(mu_);
    return fovs_;
  }

  ScoreReport score_report() const {
    std::shared_lock lock(mu_);
    return report_;
  }

  /// Full report: slide score plus per-FOV summaries. Contains no timings, so it
  /// is a pure function of the persisted state.
  Json report() const {
    std::shared_lock lock(mu_);
    return report_locked();
  }

  Json fov_summary(const std::string& fid) const {
    std::shared_lock lock(mu_);
    return summary(find(fid));
  }

  /// Decodes, stores and analyses a new FOV. A heatmap switches that FOV to heatmap detection.
  Json add_fov(std::span<const std::uint8_t> image_bytes, Objective objective,
               std::span<const std::uint8_t> heatmap_bytes = {}) {
    std::unique_lock lock(mu_);
    FovRecord f;
    f.objective = objective;
    RasterImage image = io::decode_image(image_bytes, f.pixel_size());
    f.width = image.width();
    f.height = image.height();
    if (f.width < 2 || f.height < 2) throw ValidationError("image must be at least 2x2 pixels");
    if (auto w = fov_size_warning(f.width, f.height, objective); !w.empty()) f.warnings.push_back(std::move(w));
    std::optional<io::Heatmap> heatmap;
    if (!heatmap_bytes.empty()) heatmap = io::decode_heatmap(heatmap_bytes, f.width, f.height, f.pixel_size());

    f.id = "fov-" + std::to_string(next_fov_);
    f.image_file = "images/" + f.id + detail::image_extension(image_bytes);
    io::write_file(dir_ / f.image_file, image_bytes);
    if (heatmap) {
      f.heatmap_file = "images/" + f.id + ".heatmap";
      io::write_file(dir_ / f.heatmap_file, heatmap_bytes);
    }
    analyse(f, image, heatmap);
    ++next_fov_;
    fovs_.push_back(std::move(f));
    recompute_report();
    persist("add_fov " + fovs_.back().id);
    return summary(fovs_.back());
  }

  /// Applies a flat parameter patch. Detection is rerun only when detector or
  /// stain parameters change. Invalid patches leave the session untouched.
  Json update_params(const Json& patch) {
    std::unique_lock lock(mu_);
    Json rest = patch;
    SessionParams next = params_;
    if (rest.contains("rule_table")) {
      next.rule_table = rest.at("rule_table").get<std::string>();
      (void)cfg_.rules.get(next.rule_table);
      rest.erase("rule_table");
    }
    next.pipeline = json::patched(params_.pipeline, rest);
    const bool redetect =
        next.pipeline.detector != params_.pipeline.detector || next.pipeline.stains != params_.pipeline.stains;
    const bool redescribe = redetect || next.pipeline.membrane != params_.pipeline.membrane ||
                            next.pipeline.classifier != params_.pipeline.classifier;

    std::vector<FovRecord> updated = fovs_;
    if (redescribe) {
      parallel_for(
          pool_, 0, static_cast<int>(updated.size()),
          [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) rerun(updated[static_cast<std::size_t>(i)], next.pipeline, redetect);
          },
          1);
    }
    params_ = std::move(next);
    fovs_ = std::move(updated);
    if (redetect) runtime_.clear();
    recompute_report();
    persist("update_params " + patch.dump());
    return report_locked();
  }

  Json set_exclusions(const std::string& fid, std::vector<Polygon> polygons) {
    std::unique_lock lock(mu_);
    FovRecord& f = find(fid);
    check_exclusions(polygons, f.width, f.height);
    FovRecord next = f;
    next.exclusions = std::move(polygons);
    reclassify(next);
    f = std::move(next);
    recompute_report();
    persist("set_exclusions " + fid);
    return summary(f);
  }

  Json set_included(const std::string& fid, bool included) {
    std::unique_lock lock(mu_);
    find(fid).included = included;
    recompute_report();
    persist("set_included " + fid + (included ? " true" : " false"));
    return report_locked();
  }

  /// Manual class for one detected nucleus (index into the detected list); nullopt reverts it.
  Json set_cell_class(const std::string& fid, std::size_t nucleus, std::optional<CellClass> cls) {
    std::unique_lock lock(mu_);
    FovRecord& f = find(fid);
    if (nucleus >= f.detected.size()) {
      throw NotFound(fid + " has " + std::to_string(f.detected.size()) + " nuclei, no index " +
                     std::to_string(nucleus));
    }
    if (cls) {
      f.overrides[nucleus] = *cls;
    } else {
      f.overrides.erase(nucleus);
    }
    // Overrides replace computed classes, so only the stored cells need touching.
    auto it = std::find(f.detected_index.begin(), f.detected_index.end(), nucleus);
    if (it != f.detected_index.end()) {
      const auto pos = static_cast<std::size_t>(it - f.detected_index.begin());
      if (cls) {
        f.cells.cells[pos].cls = *cls;
      } else {
        reclassify(f);
      }
    }
    f.counts = counts(f.cells);
    recompute_report();
    persist("set_cell_class " + fid + " " + std::to_string(nucleus));
    return summary(f);
  }

  Json overlay_json(const std::string& fid) const {
    std::shared_lock lock(mu_);
    const FovRecord& f = find(fid);
    const FovAnalysis a = analysis_of(f);
    return json::overlay(a, f.width, f.height);
  }

  std::vector<std::uint8_t> overlay_png(const std::string& fid) const {
    std::shared_lock lock(mu_);
    const FovRecord& f = find(fid);
    const FovAnalysis a = analysis_of(f);
    return io::encode_png(render_overlay(read_image(f), a));
  }

 private:
  struct Runtime {
    std::shared_ptr<const ScalarChannel> dab_working;
    std::shared_ptr<const MembraneMaskBundle> membranes;
    MembraneParams membrane_params;
  };

  Session(AppConfig cfg, ThreadPool* pool) : cfg_(std::move(cfg)), pool_(pool) {}

  FovRecord& find(const std::string& fid) {
    for (auto& f : fovs_) {
      if (f.id == fid) return f;
    }
    throw NotFound("session " + id_ + " has no FOV '" + fid + "'");
  }
  const FovRecord& find(const std::string& fid) const { return const_cast<Session*>(this)->find(fid); }

  RasterImage read_image(const FovRecord& f) const { return io::read_image(dir_ / f.image_file, f.pixel_size()); }

  std::unique_ptr<Detector> detector_for(const FovRecord& f, const PipelineParams& p,
                                         const std::optional<io::Heatmap>& heatmap) const {
    if (heatmap) {
      return std::make_unique<HeatmapDetector>(heatmap->values, heatmap->scale, cfg_.heatmap_peak_threshold,
                                               p.detector.min_distance_um);
    }
    (void)f;
    return std::make_unique<ClassicalDetector>(p.detector);
  }

  std::optional<io::Heatmap> read_heatmap(const FovRecord& f) const {
    if (f.heatmap_file.empty()) return std::nullopt;
    return io::decode_heatmap(io::read_file(dir_ / f.heatmap_file), f.width, f.height, f.pixel_size());
  }

  // Full pipeline on a decoded image; fills detections, cells, counts and the runtime cache.
  void analyse(FovRecord& f, const RasterImage& image, const std::optional<io::Heatmap>& heatmap) {
    const auto det = detector_for(f, params_.pipeline, heatmap);
    detail::Stopwatch sw;
    const StainChannels hed = rgb_to_hed(image, params_.pipeline.stains, pool_);
    FovAnalysis a;
    a.detected = det->detect(image, hed, pool_);
    a.timings.detection_s = sw.lap();
    auto dab = std::make_shared<const ScalarChannel>(working_dab(hed));
    a.membranes = describe_membranes(*dab, params_.pipeline.membrane);
    a.timings.membrane_s = sw.lap();
    classify_fov(a, f.exclusions, f.overrides, params_.pipeline.classifier);
    a.timings.classification_s = sw.lap();
    a.timings.total_s = a.timings.detection_s + a.timings.membrane_s + a.timings.classification_s;
    store(f, a);
    std::lock_guard lock(cache_mu_);
    runtime_[f.id] = {dab, std::make_shared<const MembraneMaskBundle>(std::move(a.membranes)),
                      params_.pipeline.membrane};
  }

  static void store(FovRecord& f, const FovAnalysis& a) {
    f.detected = a.detected;
    f.detected_index = a.detected_index;
    f.cells = a.cells;
    f.counts = a.counts;
    f.timings = a.timings;
  }

  // Rerun after a parameter change; p is the new parameter set.
  void rerun(FovRecord& f, const PipelineParams& p, bool redetect) const {
    const RasterImage image = read_image(f);
    const StainChannels hed = rgb_to_hed(image, p.stains, nullptr);
    FovAnalysis a;
    if (redetect) {
      a.detected = detector_for(f, p, read_heatmap(f))->detect(image, hed, nullptr);
      if (!f.overrides.empty()) {
        f.overrides.clear();
        f.warnings.push_back("class overrides cleared after re-detection");
      }
    } else {
      a.detected = f.detected;
    }
    auto dab = std::make_shared<const ScalarChannel>(working_dab(hed));
    a.membranes = describe_membranes(*dab, p.membrane);
    classify_fov(a, f.exclusions, f.overrides, p.classifier);
    store(f, a);
    std::lock_guard lock(cache_mu_);
    runtime_[f.id] = {dab, std::make_shared<const MembraneMaskBundle>(a.membranes), p.membrane};
  }

  // Membrane description for the current parameters, rebuilt from disk when not cached.
  std::shared_ptr<const MembraneMaskBundle> membranes_of(const FovRecord& f) const {
    std::shared_ptr<const ScalarChannel> dab;
    {
      std::lock_guard lock(cache_mu_);
      auto it = runtime_.find(f.id);
      if (it != runtime_.end()) {
        if (it->second.membranes && it->second.membrane_params == params_.pipeline.membrane) {
          return it->second.membranes;
        }
        dab = it->second.dab_working;
      }
    }
    if (!dab) {
      dab = std::make_shared<const ScalarChannel>(
          working_dab(rgb_to_hed(read_image(f), params_.pipeline.stains, pool_)));
    }
    auto bundle = std::make_shared<const MembraneMaskBundle>(describe_membranes(*dab, params_.pipeline.membrane));
    std::lock_guard lock(cache_mu_);
    runtime_[f.id] = {dab, bundle, params_.pipeline.membrane};
    return bundle;
  }

  FovAnalysis analysis_of(const FovRecord& f) const {
    FovAnalysis a;
    a.detected = f.detected;
    a.nuclei = NucleusSet{f.width, f.height, f.pixel_size(), {}};
    for (std::size_t i : f.detected_index) a.nuclei.nuclei.push_back(f.detected.nuclei[i]);
    a.detected_index = f.detected_index;
    a.cells = f.cells;
    a.counts = f.counts;
    a.membranes = *membranes_of(f);
    return a;
  }

  void reclassify(FovRecord& f) const {
    FovAnalysis a;
    a.detected = f.detected;
    a.membranes = *membranes_of(f);
    classify_fov(a, f.exclusions, f.overrides, params_.pipeline.classifier);
    f.detected_index = a.detected_index;
    f.cells = a.cells;
    f.counts = a.counts;
  }

  void recompute_report() {
    std::vector<FovCounts> counts_list;
    std::set<std::string> included;
    for (const auto& f : fovs_) {
      counts_list.push_back({f.id, f.counts});
      if (f.included) included.insert(f.id);
    }
    report_ = build_report(counts_list, included, cfg_.rules.get(params_.rule_table));
  }

  Json summary(const FovRecord& f) const {
    Json exclusions = Json::array();
    for (const auto& p : f.exclusions) exclusions.push_back(json::polygon(p));
    Json overrides = Json::object();
    for (const auto& [idx, cls] : f.overrides) overrides[std::to_string(idx)] = std::string(to_string(cls));
    return {{"id", f.id},
            {"objective", std::string(to_string(f.objective))},
            {"pixel_size", f.pixel_size()},
            {"width", f.width},
            {"height", f.height},
            {"included", f.included},
            {"detector", f.heatmap_file.empty() ? "classical" : "heatmap"},
            {"nuclei_detected", f.detected.size()},
            {"counts", json::counts(f.counts)},
            {"exclusions", exclusions},
            {"overrides", overrides},
            {"warnings", f.warnings}};
  }

  Json report_locked() const {
    Json fovs = Json::array();
    for (const auto& f : fovs_) fovs.push_back(summary(f));
    return {{"session", id_},
            {"report", json::score_report(report_)},
            {"params", json::params(params_.pipeline)},
            {"fovs", fovs}};
  }

  Json state() const {
    Json fovs = Json::array();
    for (const auto& f : fovs_) fovs.push_back(detail::fov_to_json(f));
    return {{"id", id_},
            {"created_at", created_at_},
            {"seq", seq_},
            {"next_fov", next_fov_},
            {"params", json::params(params_.pipeline)},
            {"rule_table", params_.rule_table},
            {"fovs", fovs}};
  }

  void persist(const std::string& event) {
    ++seq_;
    char name[32];
    std::snprintf(name, sizeof name, "%08d.json", seq_);
    detail::write_atomically(dir_ / "state" / name, state().dump());
    std::ofstream log(dir_ / "events.log", std::ios::app);
    log << Json{{"seq", seq_}, {"at", detail::utc_now()}, {"event", event}}.dump() << '\n';
  }

  mutable std::shared_mutex mu_;
  std::string id_;
  fs::path dir_;
  std::string created_at_;
  int seq_ = 0;
  int next_fov_ = 1;
  SessionParams params_;
  std::vector<FovRecord> fovs_;
  ScoreReport report_;
  AppConfig cfg_;
  ThreadPool* pool_ = nullptr;

  mutable std::mutex cache_mu_;
  mutable std::map<std::string, Runtime> runtime_;
};

/// All sessions under one storage root. Sessions found on disk are loaded on first access.
class SessionStore {
 public:
  SessionStore(AppConfig cfg, ThreadPool* pool = nullptr) : cfg_(std::move(cfg)), pool_(pool) {
    validate(cfg_);
    root_ = cfg_.storage_root;
    fs::create_directories(root_);
  }

  const AppConfig& config() const { return cfg_; }

  std::shared_ptr<Session> create(const std::string& rule_table = {}) {
    SessionParams params;
    params.pipeline = cfg_.params;
    params.rule_table = rule_table.empty() ? cfg_.default_rules : rule_table;
    (void)cfg_.rules.get(params.rule_table);
    std::lock_guard lock(mu_);
    std::string id;
    do {
      id = new_id();
    } while (sessions_.count(id) || fs::exists(root_ / id));
    auto s = std::make_shared<Session>(id, root_ / id, std::move(params), cfg_, pool_);
    sessions_[id] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    const bool safe = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(c); });
    if (!safe || !fs::exists(root_ / id / "state")) throw NotFound("no session '" + id + "'");
    auto s = Session::load(root_ / id, cfg_, pool_);
    sessions_[id] = s;
    return s;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(root_)) {
      if (e.is_directory() && fs::exists(e.path() / "state")) out.push_back(e.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::string new_id() {
    static constexpr char hex[] = "0123456789abcdef";
    std::string id(16, '0');
    for (char& c : id) c = hex[rng_() & 15];
    return id;
  }

  AppConfig cfg_;
  ThreadPool* pool_;
  fs::path root_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace her2
