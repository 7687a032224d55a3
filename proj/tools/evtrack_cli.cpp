#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evtrack/error.hpp"
#include "evtrack/pipeline.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kStageError = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace evtrack;
  CLI::App app{"Event-camera multi-object tracker"};
  app.require_subcommand(1);

  std::string scene_cfg, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic disk scene");
  synth_cmd->add_option("--config", scene_cfg, "scene JSON")->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  std::string run_cfg, run_data, run_out, backend;
  std::optional<std::uint64_t> seed;
  auto* run_cmd = app.add_subcommand("run", "Track objects in a rendered sequence");
  run_cmd->add_option("--config", run_cfg, "run JSON")->required();
  run_cmd->add_option("--data", run_data, "directory written by synth")->required();
  run_cmd->add_option("--out", run_out, "results directory")->required();
  run_cmd->add_option("--backend", backend, "dense | spiking | both")
      ->check(CLI::IsMember({"dense", "spiking", "both"}));
  run_cmd->add_option("--seed", seed, "overrides the config seed");

  std::string bench_cfg, bench_out;
  auto* bench_cmd = app.add_subcommand("filter-bench", "Dense vs. spiking filter on exact measurements");
  bench_cmd->add_option("--config", bench_cfg, "run JSON")->required();
  bench_cmd->add_option("--out", bench_out, "output directory")->required();

  std::string eval_results, eval_truth, eval_cfg;
  auto* eval_cmd = app.add_subcommand("eval", "Score a results directory against truth");
  eval_cmd->add_option("--results", eval_results, "results directory")->required();
  eval_cmd->add_option("--truth", eval_truth, "truth.json")->required();
  eval_cmd->add_option("--config", eval_cfg, "run JSON supplying metric windows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*synth_cmd) {
      synth(scene_from_json(load_json(scene_cfg)), synth_out);
      std::cout << "wrote " << synth_out << '\n';
    } else if (*run_cmd) {
      RunConfig cfg = load_run_config(run_cfg);
      if (!backend.empty()) cfg.backend = backend_from_string(backend);
      if (seed) cfg.seed = *seed;
      const RunResult res = run_pipeline(cfg, run_data, run_out);
      std::cout << res.summary.dump(2) << '\n';
    } else if (*bench_cmd) {
      const BenchResult res = filter_bench(load_run_config(bench_cfg), bench_out);
      std::cout << res.summary.dump(2) << '\n';
    } else if (*eval_cmd) {
      MetricsConfig mc;
      if (!eval_cfg.empty()) mc = load_run_config(eval_cfg).metrics;
      std::cout << to_json(evaluate(eval_results, eval_truth, mc), mc).dump(2) << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageError;
  }
  return 0;
}
