#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtrack/config.hpp"
#include "evtrack/metrics.hpp"

namespace evtrack {

/// DIR/frames/frame_NNNNN.pgm, DIR/truth.json, DIR/scene.json.
std::filesystem::path frame_path(const std::filesystem::path& data_dir, int k);
void synth(const DiskScene& scene, const std::filesystem::path& out_dir);

struct RunResult {
  MetricsReport primary;
  std::optional<MetricsReport> spiking;  // backend = both
  std::vector<EquivalenceMetrics> equivalence;
  nlohmann::json summary;
  double runtime_seconds = 0.0;
};

/// Full loop: events -> surface -> detections -> tracks -> metrics and plots.
/// Setup problems throw ConfigError; per-frame failures throw StageError.
RunResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir);

struct BenchResult {
  std::vector<EquivalenceMetrics> equivalence;
  nlohmann::json summary;
};

/// Dense and spiking filters fed identical noiseless measurements h(truth)
/// for every orbiting object; writes bench.csv and bench_summary.json.
BenchResult filter_bench(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Re-reads tracks.csv from a results directory and scores it.
MetricsReport evaluate(const std::filesystem::path& results_dir,
                       const std::filesystem::path& truth_path, const MetricsConfig& cfg);

/// gnuplot scripts for the three panels; only objects present are plotted.
void write_plot_scripts(const std::filesystem::path& out_dir, const MetricsReport& report);
/// Quoted *.csv names referenced by plot_*.gp that do not exist in out_dir.
std::vector<std::string> lint_plot_scripts(const std::filesystem::path& out_dir);

}  // namespace evtrack
