// Writes synthetic FOV fixtures: image, heatmap sidecar and a manifest with per-cell truth.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "her2/io.hpp"
#include "her2/serialize.hpp"
#include "her2/synth.hpp"

namespace {

using namespace her2;
namespace fs = std::filesystem;
using json::Json;

// "IC=10,WC=5" -> per-class values, by class code.
std::array<double, kCellClassCount> parse_mix(const std::string& text) {
  std::array<double, kCellClassCount> out{};
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("expected CODE=value, got '" + item + "'");
    const std::string code = her2::detail::trim(item.substr(0, eq));
    bool found = false;
    for (CellClass c : kAllCellClasses) {
      if (class_code(c) == code) {
        out[static_cast<int>(c)] = her2::detail::parse_double(code, her2::detail::trim(item.substr(eq + 1)));
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown class code '" + code + "' (use IC, II, WC, WI, NS)");
  }
  return out;
}

void write_fixture(const synth::Fixture& f, const fs::path& dir, const std::string& name) {
  const std::string image = name + ".png";
  const std::string heatmap = name + ".heatmap";
  io::write_png(dir / image, f.image);
  io::write_file(dir / heatmap, io::encode_heatmap_binary(f.heatmap, f.heatmap_scale));
  io::write_text(dir / (name + ".json"), json::fixture_manifest(f, image, heatmap).dump(2) + "\n");
}

void apply_common(synth::FixtureSpec& s, const std::string& objective, double texture, double weak, double intense,
                  double ring) {
  s.pixel_size = pixel_size_of(objective_from_string(objective));
  s.texture_amplitude = texture;
  s.od_weak = weak;
  s.od_intense = intense;
  s.ring_thickness_um = ring;
}

int run(int argc, char** argv) {
  CLI::App app{"Synthetic HER2 FOV fixtures with exact ground truth"};
  app.require_subcommand(1);
  std::string out = ".", objective = "40x", name = "fov", spec_file, cells, mix = "NS=1";
  std::uint64_t seed = 1;
  int side = 0, fovs = 5, per_fov = 100, distractors = 0;
  double texture = 0.0, weak = 0.3, intense = 0.7, ring = 1.4;
  bool archetype = false, allow_boundary = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "PRNG seed");
    sub->add_option("--objective", objective, "20x or 40x");
    sub->add_option("--texture", texture, "Background texture amplitude (OD)");
    sub->add_option("--od-weak", weak, "Weak membrane OD");
    sub->add_option("--od-intense", intense, "Intense membrane OD");
    sub->add_option("--ring-um", ring, "Membrane ring thickness in micrometres");
    sub->add_option("--distractors", distractors, "Small non-tumour nuclei");
  };
  CLI::App* fov = app.add_subcommand("fov", "One FOV");
  common(fov);
  fov->add_option("--name", name, "Base file name");
  fov->add_option("--spec", spec_file, "FixtureSpec JSON (other options are ignored)");
  fov->add_flag("--archetype", archetype, "One cell of each class in a row");
  fov->add_option("--cells", cells, "Random cells per class, e.g. IC=20,WI=10");
  fov->add_option("--size", side, "Square frame side in pixels (default: fits the cells)");
  CLI::App* slide = app.add_subcommand("slide", "A set of FOVs with a known slide score");
  common(slide);
  slide->add_option("--fovs", fovs, "Number of FOVs");
  slide->add_option("--cells-per-fov", per_fov, "Cells per FOV");
  slide->add_option("--mix", mix, "Class proportions, e.g. IC=0.35,NS=0.65");
  slide->add_flag("--allow-boundary", allow_boundary, "Accept mixes near a rule threshold");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  fs::create_directories(out);

  if (*fov) {
    synth::FixtureSpec s;
    if (!spec_file.empty()) {
      const auto bytes = io::read_file(spec_file);
      s = json::fixture_spec_from(Json::parse(bytes.begin(), bytes.end()));
    } else {
      s = archetype ? synth::archetype_spec(seed, pixel_size_of(objective_from_string(objective))) : synth::FixtureSpec{};
      s.seed = seed;
      apply_common(s, objective, texture, weak, intense, ring);
      s.distractors = distractors;
      if (!cells.empty()) {
        const auto m = parse_mix(cells);
        int n = 0;
        for (int c = 0; c < kCellClassCount; ++c) n += s.random_counts[c] = static_cast<int>(m[c]);
        if (side == 0) side = synth::frame_side_for(n + distractors, s);
      }
      if (side > 0) s.width = s.height = side;
    }
    const synth::Fixture f = synth::generate_fov(s);
    write_fixture(f, out, name);
    std::cout << f.truth.size() << " cells -> " << (fs::path(out) / (name + ".png")).string() << "\n";
    return 0;
  }

  synth::SlideSpec ss;
  ss.seed = seed;
  ss.fov_count = fovs;
  ss.cells_per_fov = per_fov;
  ss.proportions = parse_mix(mix);
  ss.allow_boundary = allow_boundary;
  apply_common(ss.base, objective, texture, weak, intense, ring);
  ss.base.distractors = distractors;
  ss.base.width = ss.base.height = synth::frame_side_for(per_fov + distractors, ss.base);
  const synth::SlideBundle b = synth::generate_slide(ss);
  std::string csv = "filename,objective\n";
  Json names = Json::array();
  for (std::size_t i = 0; i < b.fovs.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fov-%03zu", i + 1);
    write_fixture(b.fovs[i], out, buf);
    csv += std::string(buf) + ".png," + objective + "\n";
    names.push_back(std::string(buf) + ".png");
  }
  io::write_text(fs::path(out) / "manifest.csv", csv);
  const Json slide_json = {{"fovs", names},
                           {"truth_counts", json::counts(b.truth_counts)},
                           {"expected_score", std::string(to_string(b.expected.value))},
                           {"expected_rule", b.expected.rule_id}};
  io::write_text(fs::path(out) / "slide.json", slide_json.dump(2) + "\n");
  std::cout << b.fovs.size() << " FOVs, expected " << to_string(b.expected.value) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
