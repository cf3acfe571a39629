#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "her2/error.hpp"
#include "her2/pipeline.hpp"
#include "her2/scorer.hpp"

namespace her2 {

/// Service and batch defaults. Loaded from a key = value text file:
///
///   # comment
///   detector.min_distance_um = 6
///   membrane.t_weak = 0.18
///   stain.dab = 0.27 0.57 0.78
///   rules.gastric-draft = 3+:IC>=0.10; 2+:WC,II>=0.10; 1+:WI>=0.10
///   rules.default = breast
///   service.workers = 8
///
/// Every key is listed in README.md. Unknown keys are errors.
struct AppConfig {
  PipelineParams params;
  RuleRegistry rules;
  std::string default_rules = std::string(kBreastRulesId);
  double heatmap_peak_threshold = 0.5;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string storage_root = "her2-data";
  std::string listen = "127.0.0.1:8080";
  std::string token;  // empty: no bearer token required
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::array<double, 3> parse_vector3(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  std::array<double, 3> out{};
  std::string tok;
  for (double& d : out) {
    if (!(in >> tok)) throw ConfigError(key + ": expected three numbers");
    d = parse_double(key, tok);
  }
  if (in >> tok) throw ConfigError(key + ": expected three numbers");
  return out;
}

}  // namespace detail

/// Sets one pipeline parameter by its config key. Returns false for keys outside the pipeline.
inline bool set_pipeline_param(PipelineParams& p, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  auto& d = p.detector;
  auto& m = p.membrane;
  const std::pair<const char*, double*> doubles[] = {
      {"detector.h_spatial_sigma_um", &d.h_spatial_sigma_um},
      {"detector.h_range_sigma", &d.h_range_sigma},
      {"detector.dab_spatial_sigma_um", &d.dab_spatial_sigma_um},
      {"detector.dab_range_sigma", &d.dab_range_sigma},
      {"detector.min_distance_um", &d.min_distance_um},
      {"detector.h_max_threshold", &d.h_max_threshold},
      {"detector.dab_min_threshold", &d.dab_min_threshold},
      {"detector.min_nucleus_area_um2", &d.min_nucleus_area_um2},
      {"detector.dab_region_threshold", &d.dab_region_threshold},
      {"detector.area_level", &d.area_level},
      {"membrane.t_weak", &m.t_weak},
      {"membrane.t_intense", &m.t_intense},
      {"membrane.d_um", &m.d_um},
      {"membrane.enhance.lo_percentile", &m.enhance.lo_percentile},
      {"membrane.enhance.hi_percentile", &m.enhance.hi_percentile},
      {"membrane.enhance.min_span", &m.enhance.min_span},
  };
  for (const auto& [name, dst] : doubles) {
    if (key == name) {
      *dst = parse_double(key, value);
      return true;
    }
  }
  if (key == "classifier.literal_weak_incomplete") {
    p.classifier.literal_weak_incomplete = parse_bool(key, value);
    return true;
  }
  const std::pair<const char*, int> stains[] = {{"stain.h", kHaematoxylin}, {"stain.e", kEosin}, {"stain.dab", kDab}};
  for (const auto& [name, row] : stains) {
    if (key == name) {
      StainMatrix raw = p.stains;
      raw[row] = detail::parse_vector3(key, value);
      p.stains = normalized_rows(raw);
      return true;
    }
  }
  return false;
}

inline void apply_config_line(AppConfig& cfg, const std::string& key, const std::string& value) {
  if (set_pipeline_param(cfg.params, key, value)) return;
  if (key == "rules.default") {
    cfg.default_rules = value;
  } else if (key.rfind("rules.", 0) == 0) {
    cfg.rules.add(parse_rules(key.substr(6), value));
  } else if (key == "detector.heatmap_peak_threshold") {
    cfg.heatmap_peak_threshold = detail::parse_double(key, value);
  } else if (key == "service.workers") {
    cfg.workers = detail::parse_int(key, value);
    if (cfg.workers < 1) throw ConfigError("service.workers must be >= 1");
  } else if (key == "service.storage_root") {
    cfg.storage_root = value;
  } else if (key == "service.listen") {
    cfg.listen = value;
  } else if (key == "service.token") {
    cfg.token = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline void validate(const AppConfig& cfg) {
  cfg.params.validate();
  (void)cfg.rules.get(cfg.default_rules);
  if (!(cfg.heatmap_peak_threshold > 0.0)) throw ConfigError("detector.heatmap_peak_threshold must be positive");
}

inline AppConfig parse_config(const std::string& text, AppConfig cfg = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_line(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// HER2_STORAGE_ROOT and HER2_LISTEN override the file.
inline void apply_environment(AppConfig& cfg) {
  if (const char* root = std::getenv("HER2_STORAGE_ROOT"); root && *root) cfg.storage_root = root;
  if (const char* listen = std::getenv("HER2_LISTEN"); listen && *listen) cfg.listen = listen;
}

}  // namespace her2
