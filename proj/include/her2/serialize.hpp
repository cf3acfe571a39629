#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "her2/classifier.hpp"
#include "her2/config.hpp"
#include "her2/geometry.hpp"
#include "her2/nucleus.hpp"
#include "her2/pipeline.hpp"
#include "her2/scorer.hpp"
#include "her2/synth.hpp"

/// JSON forms of the library types. Objects use sorted keys, so equal values
/// always dump to equal bytes.
namespace her2::json {

using Json = nlohmann::json;

inline Json counts(const CellClassCounts& c) {
  Json j = Json::object();
  for (CellClass cls : kAllCellClasses) j[std::string(to_string(cls))] = c[cls];
  j["total"] = c.total;
  return j;
}

inline CellClassCounts counts_from(const Json& j) {
  CellClassCounts c;
  for (CellClass cls : kAllCellClasses) c.add(cls, j.at(std::string(to_string(cls))).get<std::int64_t>());
  if (c.total != j.at("total").get<std::int64_t>()) throw ValidationError("counts do not sum to total");
  return c;
}

inline Json proportions(const std::array<double, kCellClassCount>& p) {
  Json j = Json::object();
  for (CellClass cls : kAllCellClasses) j[std::string(to_string(cls))] = p[static_cast<int>(cls)];
  return j;
}

inline Json rule_table(const ScoreRules& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json classes = Json::array();
    for (CellClass c : kAllCellClasses) {
      if (row.classes[static_cast<int>(c)]) classes.push_back(std::string(to_string(c)));
    }
    rows.push_back({{"id", row.id}, {"classes", classes}, {"threshold", row.threshold},
                    {"score", std::string(to_string(row.value))}});
  }
  return {{"id", r.id}, {"rows", rows}, {"fallback", std::string(to_string(r.fallback))}};
}

/// Slide-level report shared by the CLI and the service.
inline Json score_report(const ScoreReport& rep) {
  Json j;
  j["status"] = rep.scored ? "scored" : "indeterminate";
  if (rep.score) {
    j["score"] = std::string(to_string(rep.score->value));
    j["category"] = std::string(to_string(rep.score->category));
    j["triggering_proportion"] = rep.score->triggering_proportion;
    j["rule_id"] = rep.score->rule_id;
  } else {
    j["score"] = nullptr;
    j["category"] = nullptr;
    j["triggering_proportion"] = nullptr;
    j["rule_id"] = nullptr;
  }
  j["rule_table"] = rep.rule_table;
  j["counts"] = counts(rep.counts);
  j["proportions"] = proportions(rep.proportions);
  j["included_fovs"] = rep.included_fovs;
  j["warnings"] = rep.warnings;
  return j;
}

inline Json params(const PipelineParams& p) {
  const auto& d = p.detector;
  const auto& m = p.membrane;
  return {
      {"detector",
       {{"h_spatial_sigma_um", d.h_spatial_sigma_um},
        {"h_range_sigma", d.h_range_sigma},
        {"dab_spatial_sigma_um", d.dab_spatial_sigma_um},
        {"dab_range_sigma", d.dab_range_sigma},
        {"min_distance_um", d.min_distance_um},
        {"h_max_threshold", d.h_max_threshold},
        {"dab_min_threshold", d.dab_min_threshold},
        {"min_nucleus_area_um2", d.min_nucleus_area_um2},
        {"dab_region_threshold", d.dab_region_threshold},
        {"area_level", d.area_level}}},
      {"membrane",
       {{"t_weak", m.t_weak},
        {"t_intense", m.t_intense},
        {"d_um", m.d_um},
        {"enhance",
         {{"lo_percentile", m.enhance.lo_percentile},
          {"hi_percentile", m.enhance.hi_percentile},
          {"min_span", m.enhance.min_span}}}}},
      {"classifier", {{"literal_weak_incomplete", p.classifier.literal_weak_incomplete}}},
      {"stains", p.stains},
  };
}

inline PipelineParams params_from(const Json& j) {
  PipelineParams p;
  const auto& d = j.at("detector");
  p.detector.h_spatial_sigma_um = d.at("h_spatial_sigma_um");
  p.detector.h_range_sigma = d.at("h_range_sigma");
  p.detector.dab_spatial_sigma_um = d.at("dab_spatial_sigma_um");
  p.detector.dab_range_sigma = d.at("dab_range_sigma");
  p.detector.min_distance_um = d.at("min_distance_um");
  p.detector.h_max_threshold = d.at("h_max_threshold");
  p.detector.dab_min_threshold = d.at("dab_min_threshold");
  p.detector.min_nucleus_area_um2 = d.at("min_nucleus_area_um2");
  p.detector.dab_region_threshold = d.at("dab_region_threshold");
  p.detector.area_level = d.at("area_level");
  const auto& m = j.at("membrane");
  p.membrane.t_weak = m.at("t_weak");
  p.membrane.t_intense = m.at("t_intense");
  p.membrane.d_um = m.at("d_um");
  p.membrane.enhance.lo_percentile = m.at("enhance").at("lo_percentile");
  p.membrane.enhance.hi_percentile = m.at("enhance").at("hi_percentile");
  p.membrane.enhance.min_span = m.at("enhance").at("min_span");
  p.classifier.literal_weak_incomplete = j.at("classifier").at("literal_weak_incomplete");
  p.stains = j.at("stains").get<StainMatrix>();
  p.validate();
  return p;
}

/// Applies a flat patch of config keys ({"membrane.t_weak": 0.2}); t_weak, t_intense,
/// d and d_um are accepted as short names. Unknown keys throw ConfigError.
inline PipelineParams patched(PipelineParams p, const Json& patch) {
  if (!patch.is_object()) throw ConfigError("parameter patch must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    std::string full = key;
    if (key == "t_weak" || key == "t_intense" || key == "d_um") full = "membrane." + key;
    if (key == "d") full = "membrane.d_um";
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      text = value.dump();
    } else {
      throw ConfigError(key + ": expected a number, boolean or string");
    }
    if (!set_pipeline_param(p, full, text)) throw ConfigError("unknown parameter '" + key + "'");
  }
  p.validate();
  return p;
}

inline Json point(Point p) { return Json::array({p.x, p.y}); }

inline Json nuclei(const NucleusSet& s) {
  Json arr = Json::array();
  for (const auto& n : s.nuclei) arr.push_back({{"x", n.at.x}, {"y", n.at.y}, {"source", to_string(n.source)}});
  return arr;
}

inline NucleusSource nucleus_source_from(const std::string& s) {
  for (NucleusSource src : {NucleusSource::Haematoxylin, NucleusSource::Dab, NucleusSource::Heatmap}) {
    if (s == to_string(src)) return src;
  }
  throw ValidationError("unknown nucleus source '" + s + "'");
}

inline NucleusSet nuclei_from(const Json& arr, int width, int height, double pixel_size) {
  NucleusSet s{width, height, pixel_size, {}};
  for (const auto& n : arr) {
    s.nuclei.push_back({{n.at("x").get<int>(), n.at("y").get<int>()},
                        nucleus_source_from(n.at("source").get<std::string>())});
  }
  return s;
}

inline Json cells(const ClassifiedCells& c) {
  Json arr = Json::array();
  for (const auto& cell : c.cells) {
    arr.push_back({{"x", cell.at.x}, {"y", cell.at.y}, {"class", std::string(to_string(cell.cls))}});
  }
  return arr;
}

inline Json polygon(const Polygon& p) {
  Json arr = Json::array();
  for (const auto& v : p.ring()) arr.push_back(Json::array({v.x, v.y}));
  return arr;
}

inline Polygon polygon_from(const Json& arr) {
  if (!arr.is_array()) throw ValidationError("polygon must be an array of [x, y] vertices");
  std::vector<Vertex> ring;
  for (const auto& v : arr) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ValidationError("polygon vertices must be [x, y] number pairs");
    }
    ring.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return Polygon(std::move(ring));
}

inline std::vector<Polygon> polygons_from(const Json& arr) {
  if (!arr.is_array()) throw ValidationError("polygons must be an array");
  std::vector<Polygon> out;
  for (const auto& p : arr) out.push_back(polygon_from(p));
  return out;
}

inline Json timings(const StageTimings& t) {
  return {{"detection_s", t.detection_s},
          {"membrane_s", t.membrane_s},
          {"classification_s", t.classification_s},
          {"total_s", t.total_s}};
}

/// Contour-label sidecar: skeleton components with completeness and their pixel chains
/// in full-resolution coordinates (working pixel times scale).
inline Json contours(const MembraneMaskBundle& b) {
  Json arr = Json::array();
  for (const auto& c : b.contour_labels) {
    Json pts = Json::array();
    for (Point p : c.polyline) pts.push_back(Json::array({p.x * b.scale, p.y * b.scale}));
    arr.push_back({{"id", c.id}, {"complete", c.complete}, {"points", pts}});
  }
  return arr;
}

/// Geometry the overlay viewer draws: class-coloured nuclei and membrane contours.
inline Json overlay(const FovAnalysis& a, int width, int height) {
  Json nuclei_arr = Json::array();
  for (std::size_t i = 0; i < a.cells.cells.size(); ++i) {
    const auto& c = a.cells.cells[i];
    nuclei_arr.push_back({{"index", a.detected_index[i]},
                          {"x", c.at.x},
                          {"y", c.at.y},
                          {"class", std::string(to_string(c.cls))}});
  }
  return {{"width", width},
          {"height", height},
          {"working_scale", a.membranes.scale},
          {"nuclei", nuclei_arr},
          {"contours", contours(a.membranes)}};
}

inline Json fixture_spec(const synth::FixtureSpec& s) {
  Json cells_arr = Json::array();
  for (const auto& c : s.cells) {
    cells_arr.push_back(
        {{"x", c.center.x}, {"y", c.center.y}, {"class", std::string(to_string(c.cls))}, {"gap_start", c.gap_start}});
  }
  Json random = Json::object();
  for (CellClass c : kAllCellClasses) random[std::string(to_string(c))] = s.random_counts[static_cast<int>(c)];
  Json dcis = Json::array();
  for (const auto& v : s.dcis_region) dcis.push_back(Json::array({v.x, v.y}));
  return {{"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"pixel_size", s.pixel_size},
          {"cells", cells_arr},
          {"random_counts", random},
          {"od_weak", s.od_weak},
          {"od_intense", s.od_intense},
          {"nucleus_radius_um", s.nucleus_radius_um},
          {"nucleus_od", s.nucleus_od},
          {"ring_radius_um", s.ring_radius_um},
          {"ring_thickness_um", s.ring_thickness_um},
          {"ring_edge_um", s.ring_edge_um},
          {"arc_gap_fraction", s.arc_gap_fraction},
          {"texture_amplitude", s.texture_amplitude},
          {"texture_scale_um", s.texture_scale_um},
          {"background_h", s.background_h},
          {"background_e", s.background_e},
          {"grid_spacing_um", s.grid_spacing_um},
          {"grid_jitter_um", s.grid_jitter_um},
          {"distractors", s.distractors},
          {"distractor_radius_um", s.distractor_radius_um},
          {"distractor_od", s.distractor_od},
          {"dcis_region", dcis},
          {"dcis_class", std::string(to_string(s.dcis_class))},
          {"heatmap_scale", s.heatmap_scale}};
}

/// Reads a fixture spec; missing keys keep their defaults.
inline synth::FixtureSpec fixture_spec_from(const Json& j) {
  synth::FixtureSpec s;
  auto get = [&](const char* k, auto& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::remove_reference_t<decltype(dst)>>();
  };
  get("seed", s.seed);
  get("width", s.width);
  get("height", s.height);
  get("pixel_size", s.pixel_size);
  get("od_weak", s.od_weak);
  get("od_intense", s.od_intense);
  get("nucleus_radius_um", s.nucleus_radius_um);
  get("nucleus_od", s.nucleus_od);
  get("ring_radius_um", s.ring_radius_um);
  get("ring_thickness_um", s.ring_thickness_um);
  get("ring_edge_um", s.ring_edge_um);
  get("arc_gap_fraction", s.arc_gap_fraction);
  get("texture_amplitude", s.texture_amplitude);
  get("texture_scale_um", s.texture_scale_um);
  get("background_h", s.background_h);
  get("background_e", s.background_e);
  get("grid_spacing_um", s.grid_spacing_um);
  get("grid_jitter_um", s.grid_jitter_um);
  get("distractors", s.distractors);
  get("distractor_radius_um", s.distractor_radius_um);
  get("distractor_od", s.distractor_od);
  get("heatmap_scale", s.heatmap_scale);
  if (j.contains("cells")) {
    for (const auto& c : j.at("cells")) {
      s.cells.push_back({{c.at("x").get<int>(), c.at("y").get<int>()},
                         cell_class_from_string(c.at("class").get<std::string>()),
                         c.value("gap_start", 0.0)});
    }
  }
  if (j.contains("random_counts")) {
    for (const auto& [k, v] : j.at("random_counts").items()) {
      s.random_counts[static_cast<int>(cell_class_from_string(k))] = v.get<int>();
    }
  }
  if (j.contains("dcis_region")) {
    for (const auto& v : j.at("dcis_region")) s.dcis_region.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  }
  if (j.contains("dcis_class")) s.dcis_class = cell_class_from_string(j.at("dcis_class").get<std::string>());
  return s;
}

inline Json fixture_truth(const synth::Fixture& f) {
  Json arr = Json::array();
  for (const auto& t : f.truth) {
    arr.push_back({{"x", t.at.x}, {"y", t.at.y}, {"class", std::string(to_string(t.cls))}, {"in_dcis", t.in_dcis}});
  }
  return arr;
}

/// Manifest written next to a fixture image: fixture parameters, per-cell truth and file names.
inline Json fixture_manifest(const synth::Fixture& f, const std::string& image_file, const std::string& heatmap_file) {
  Json distractors = Json::array();
  for (Point p : f.distractors) distractors.push_back(point(p));
  return {{"image", image_file},
          {"heatmap", heatmap_file},
          {"objective", f.spec.pixel_size == kPixelSize20x ? "20x" : "40x"},
          {"spec", fixture_spec(f.spec)},
          {"truth", fixture_truth(f)},
          {"truth_counts", counts(f.truth_counts())},
          {"distractors", distractors}};
}

}  // namespace her2::json
