#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "her2/classifier.hpp"
#include "her2/error.hpp"

namespace her2 {

enum class Her2Value { Zero = 0, OnePlus = 1, TwoPlus = 2, ThreePlus = 3 };
enum class Her2Category { Negative, Equivocal, Positive };

inline std::string_view to_string(Her2Value v) {
  switch (v) {
    case Her2Value::Zero: return "0";
    case Her2Value::OnePlus: return "1+";
    case Her2Value::TwoPlus: return "2+";
    case Her2Value::ThreePlus: return "3+";
  }
  return "?";
}

inline Her2Value her2_value_from_string(std::string_view s) {
  for (Her2Value v : {Her2Value::Zero, Her2Value::OnePlus, Her2Value::TwoPlus, Her2Value::ThreePlus}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown HER2 score: " + std::string(s));
}

inline std::string_view to_string(Her2Category c) {
  switch (c) {
    case Her2Category::Negative: return "negative";
    case Her2Category::Equivocal: return "equivocal";
    case Her2Category::Positive: return "positive";
  }
  return "?";
}

inline Her2Category category_of(Her2Value v) {
  switch (v) {
    case Her2Value::ThreePlus: return Her2Category::Positive;
    case Her2Value::TwoPlus: return Her2Category::Equivocal;
    default: return Her2Category::Negative;
  }
}

using ClassSelection = std::array<bool, kCellClassCount>;

/// Fires when the summed proportion of the selected classes reaches threshold.
struct ScoreRule {
  std::string id;
  ClassSelection classes{};
  double threshold = 0.10;
  Her2Value value = Her2Value::Zero;
  friend bool operator==(const ScoreRule&, const ScoreRule&) = default;
};

/// Ordered rule rows, strongest score first; falls through to the fallback score.
struct ScoreRules {
  std::string id;
  std::vector<ScoreRule> rows;
  Her2Value fallback = Her2Value::Zero;
  std::string fallback_id = "0";

  void validate() const {
    if (rows.empty()) throw ConfigError("rule table '" + id + "' has no rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (!(r.threshold > 0.0 && r.threshold <= 1.0)) {
        throw ConfigError("rule '" + r.id + "' threshold must lie in (0, 1]");
      }
      if (std::none_of(r.classes.begin(), r.classes.end(), [](bool b) { return b; })) {
        throw ConfigError("rule '" + r.id + "' counts no classes");
      }
      if (i > 0 && !(static_cast<int>(r.value) < static_cast<int>(rows[i - 1].value))) {
        throw ConfigError("rule table '" + id + "' must be ordered from 3+ down to 1+");
      }
    }
    if (static_cast<int>(fallback) >= static_cast<int>(rows.back().value)) {
      throw ConfigError("rule table '" + id + "' fallback must be below its last row");
    }
  }

  friend bool operator==(const ScoreRules&, const ScoreRules&) = default;
};

inline ClassSelection select(std::initializer_list<CellClass> cs) {
  ClassSelection s{};
  for (CellClass c : cs) s[static_cast<int>(c)] = true;
  return s;
}

inline constexpr std::string_view kBreastRulesId = "breast";
inline constexpr std::string_view kBreastNoIntenseIncompleteId = "breast-ii-excluded";

/// Breast guideline table. Intense-incomplete cells count toward the 2+ row.
inline ScoreRules breast_rules() {
  return {std::string(kBreastRulesId),
          {{"3+", select({CellClass::IntenseComplete}), 0.10, Her2Value::ThreePlus},
           {"2+", select({CellClass::WeakComplete, CellClass::IntenseIncomplete}), 0.10, Her2Value::TwoPlus},
           {"1+", select({CellClass::WeakIncomplete}), 0.10, Her2Value::OnePlus}},
          Her2Value::Zero,
          "0"};
}

/// Same table with intense-incomplete cells left out of every row.
inline ScoreRules breast_rules_intense_incomplete_excluded() {
  ScoreRules r = breast_rules();
  r.id = std::string(kBreastNoIntenseIncompleteId);
  r.rows[1].classes = select({CellClass::WeakComplete});
  return r;
}

inline std::string_view class_code(CellClass c) {
  switch (c) {
    case CellClass::IntenseComplete: return "IC";
    case CellClass::IntenseIncomplete: return "II";
    case CellClass::WeakComplete: return "WC";
    case CellClass::WeakIncomplete: return "WI";
    case CellClass::NoStaining: return "NS";
  }
  return "?";
}

/// Parses "3+:IC>=0.10; 2+:WC,II>=0.10; 1+:WI>=0.10".
inline ScoreRules parse_rules(const std::string& id, std::string_view text) {
  ScoreRules rules;
  rules.id = id;
  std::string body(text);
  std::stringstream rows(body);
  std::string row;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(rows, row, ';')) {
    row = trim(row);
    if (row.empty()) continue;
    const auto colon = row.find(':');
    const auto ge = row.find(">=");
    if (colon == std::string::npos || ge == std::string::npos || ge < colon) {
      throw ConfigError("malformed rule row '" + row + "'");
    }
    ScoreRule r;
    r.id = trim(row.substr(0, colon));
    r.value = her2_value_from_string(r.id);
    std::stringstream cls(row.substr(colon + 1, ge - colon - 1));
    std::string code;
    while (std::getline(cls, code, ',')) {
      code = trim(code);
      bool found = false;
      for (CellClass c : kAllCellClasses) {
        if (class_code(c) == code) {
          r.classes[static_cast<int>(c)] = true;
          found = true;
        }
      }
      if (!found) throw ConfigError("unknown class code '" + code + "' in rule table '" + id + "'");
    }
    try {
      r.threshold = std::stod(trim(row.substr(ge + 2)));
    } catch (const std::exception&) {
      throw ConfigError("bad threshold in rule row '" + row + "'");
    }
    rules.rows.push_back(r);
  }
  rules.validate();
  return rules;
}

class RuleRegistry {
 public:
  RuleRegistry() {
    add(breast_rules());
    add(breast_rules_intense_incomplete_excluded());
  }
  void add(ScoreRules rules) {
    rules.validate();
    auto id = rules.id;
    tables_[id] = std::move(rules);
  }
  bool contains(const std::string& id) const { return tables_.count(id) != 0; }
  const ScoreRules& get(const std::string& id) const {
    auto it = tables_.find(id);
    if (it == tables_.end()) throw ConfigError("unknown rule table '" + id + "'");
    return it->second;
  }
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tables_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, ScoreRules> tables_;
};

struct FovCounts {
  std::string fov_id;
  CellClassCounts counts;
};

struct SlideCounts {
  CellClassCounts counts;
  std::vector<std::string> fov_ids;  // sorted
  std::array<double, kCellClassCount> proportions{};

  double proportion(const ClassSelection& s) const {
    std::int64_t n = 0;
    for (int i = 0; i < kCellClassCount; ++i) n += s[i] ? counts.by_class[i] : 0;
    return counts.total > 0 ? static_cast<double>(n) / static_cast<double>(counts.total) : 0.0;
  }
};

/// Sums counts over the included FOVs; throws IndeterminateScore when nothing is left to score.
inline SlideCounts aggregate(std::span<const FovCounts> fovs, const std::set<std::string>& included) {
  if (included.empty()) throw IndeterminateScore("no FOVs are included");
  SlideCounts s;
  for (const auto& f : fovs) {
    if (!included.count(f.fov_id)) continue;
    s.counts += f.counts;
    s.fov_ids.push_back(f.fov_id);
  }
  std::sort(s.fov_ids.begin(), s.fov_ids.end());
  if (s.counts.total <= 0) throw IndeterminateScore("no tumour cells in the included FOVs");
  for (int i = 0; i < kCellClassCount; ++i) {
    s.proportions[i] = static_cast<double>(s.counts.by_class[i]) / static_cast<double>(s.counts.total);
  }
  return s;
}

struct Her2Score {
  Her2Value value = Her2Value::Zero;
  Her2Category category = Her2Category::Negative;
  double triggering_proportion = 0.0;
  std::string rule_id;
  friend bool operator==(const Her2Score&, const Her2Score&) = default;
};

// Guards "proportion >= threshold" against the last bit of a division.
inline constexpr double kProportionSlack = 1e-12;

inline Her2Score score(const SlideCounts& slide, const ScoreRules& rules) {
  rules.validate();
  if (slide.counts.total <= 0) throw IndeterminateScore("no tumour cells to score");
  double best_missed = 0.0;
  for (const auto& r : rules.rows) {
    const double p = slide.proportion(r.classes);
    if (p + kProportionSlack >= r.threshold) return {r.value, category_of(r.value), p, r.id};
    best_missed = std::max(best_missed, p);
  }
  return {rules.fallback, category_of(rules.fallback), best_missed, rules.fallback_id};
}

inline constexpr std::size_t kRecommendedMinFovs = 5;

struct ScoreReport {
  bool scored = false;
  std::optional<Her2Score> score;
  CellClassCounts counts;
  std::array<double, kCellClassCount> proportions{};
  std::vector<std::string> included_fovs;
  std::string rule_table;
  std::vector<std::string> warnings;
};

/// Aggregate and score; indeterminate outcomes are reported, not thrown.
inline ScoreReport build_report(std::span<const FovCounts> fovs, const std::set<std::string>& included,
                                const ScoreRules& rules) {
  rules.validate();
  ScoreReport rep;
  rep.rule_table = rules.id;
  for (const auto& f : fovs) {
    if (included.count(f.fov_id)) rep.included_fovs.push_back(f.fov_id);
  }
  std::sort(rep.included_fovs.begin(), rep.included_fovs.end());
  if (rep.included_fovs.size() < kRecommendedMinFovs) {
    rep.warnings.push_back("only " + std::to_string(rep.included_fovs.size()) + " FOV(s) included; 5-10 recommended");
  }
  try {
    const SlideCounts slide = aggregate(fovs, included);
    rep.counts = slide.counts;
    rep.proportions = slide.proportions;
    rep.score = score(slide, rules);
    rep.scored = true;

    const bool ii_counted = std::any_of(rules.rows.begin(), rules.rows.end(), [](const ScoreRule& r) {
      return r.classes[static_cast<int>(CellClass::IntenseIncomplete)];
    });
    if (ii_counted) {
      ScoreRules without = rules;
      for (auto& r : without.rows) {
        r.classes[static_cast<int>(CellClass::IntenseIncomplete)] = false;
        if (std::none_of(r.classes.begin(), r.classes.end(), [](bool b) { return b; })) r.threshold = 1.0 + 1.0;
      }
      // Rows emptied above can never fire; skip validation for this what-if.
      Her2Value alt = without.fallback;
      for (const auto& r : without.rows) {
        if (r.threshold <= 1.0 && slide.proportion(r.classes) + kProportionSlack >= r.threshold) {
          alt = r.value;
          break;
        }
      }
      if (alt != rep.score->value) {
        rep.warnings.push_back("intense-incomplete cells decided the score (" + std::string(to_string(alt)) +
                               " without them)");
      }
    }
  } catch (const IndeterminateScore& e) {
    rep.scored = false;
    rep.score.reset();
    rep.warnings.push_back(std::string("indeterminate: ") + e.what());
  }
  return rep;
}

}  // namespace her2
