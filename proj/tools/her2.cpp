// Batch scoring, benchmarking and threshold calibration over a directory of FOV images.

#include <iostream>

#include "CLI11.hpp"
#include "her2/batch.hpp"

namespace {

using namespace her2;

int run(int argc, char** argv) {
  CLI::App app{"HER2 membrane scoring for a directory of field-of-view images"};
  std::string input, output, objective, manifest, rules, config, detector = "classical";
  std::optional<double> t_weak, t_intense, d;
  bool overlay = false, do_bench = false, do_calibrate = false;
  int workers = 0, repeat = 3;
  app.add_option("--input", input, "Directory of FOV images (or fixtures with --calibrate)")->required();
  app.add_option("--output", output, "Directory for report.json, fovs/ and overlays/");
  app.add_option("--objective", objective, "20x or 40x for files not in the manifest");
  app.add_option("--manifest", manifest, "CSV of filename,objective");
  app.add_option("--t-weak", t_weak, "Weak membrane threshold");
  app.add_option("--t-intense", t_intense, "Intense membrane threshold");
  app.add_option("--d", d, "Membrane proximity radius in micrometres");
  app.add_option("--rules", rules, "Rule table id");
  app.add_flag("--overlay", overlay, "Write overlay PNGs");
  app.add_option("--workers", workers, "Worker threads (default: config or hardware)");
  app.add_flag("--bench", do_bench, "Time each pipeline stage instead of scoring");
  app.add_option("--repeat", repeat, "Runs per FOV for --bench")->check(CLI::PositiveNumber);
  app.add_flag("--calibrate", do_calibrate, "Grid-search thresholds on the fixtures in --input");
  app.add_option("--detector", detector, "classical or heatmap")->check(CLI::IsMember({"classical", "heatmap"}));
  app.add_option("--config", config, "key = value config file");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  AppConfig cfg = config.empty() ? AppConfig{} : load_config(config);
  batch::BatchConfig bc;
  bc.input = input;
  bc.output = output;
  bc.manifest = manifest;
  if (!objective.empty()) bc.objective = objective_from_string(objective);
  bc.params = cfg.params;
  if (t_weak) bc.params.membrane.t_weak = *t_weak;
  if (t_intense) bc.params.membrane.t_intense = *t_intense;
  if (d) bc.params.membrane.d_um = *d;
  bc.params.validate();
  bc.rules = cfg.rules;
  bc.rule_table = rules.empty() ? cfg.default_rules : rules;
  bc.overlay = overlay;
  bc.detector = batch::detector_kind_from_string(detector);
  bc.heatmap_peak_threshold = cfg.heatmap_peak_threshold;
  ThreadPool pool(static_cast<std::size_t>(workers > 0 ? workers : cfg.workers));

  if (do_calibrate) {
    std::vector<batch::CalibrationFixture> fixtures;
    for (const auto& m : batch::fixture_manifests(bc.input)) fixtures.push_back(batch::load_fixture(m, bc.params));
    const auto r = batch::calibrate(fixtures, bc.params, &pool);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "accuracy " << r.accuracy << " on " << r.cells << " cells, " << r.optimal_points << " of "
              << r.grid_points << " grid points optimal\n";
    std::cout << r.config_fragment();
    if (!output.empty()) {
      std::filesystem::create_directories(output);
      io::write_text(std::filesystem::path(output) / "calibration.conf", r.config_fragment());
    }
    return 0;
  }

  if (do_bench) {
    const auto r = batch::bench(bc, repeat, &pool);
    for (const auto& f : r.failures) std::cerr << f.file << ": " << f.error << "\n";
    if (r.runs == 0) {
      std::cerr << "no FOV could be benchmarked\n";
      return 1;
    }
    std::cout << batch::bench_table(r);
    if (!output.empty()) {
      std::filesystem::create_directories(output);
      io::write_text(std::filesystem::path(output) / "bench.json", batch::bench_json(r).dump(2) + "\n");
    }
    return r.failures.empty() ? 0 : 2;
  }

  const auto r = batch::run_batch(bc, &pool);
  for (const auto& f : r.failures) std::cerr << f.file << ": " << f.error << "\n";
  if (r.fovs.empty()) {
    std::cerr << "no decodable images in " << input << "\n";
    return 1;
  }
  const json::Json& rep = r.report.at("report");
  if (rep.at("status") == "scored") {
    std::cout << "HER2 " << rep.at("score").get<std::string>() << " (" << rep.at("category").get<std::string>()
              << ") from " << r.fovs.size() << " FOVs\n";
  } else {
    std::cout << "indeterminate\n";
  }
  for (const auto& w : rep.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return r.exit_code;
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
