#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "evtrack/ann.hpp"
#include "evtrack/error.hpp"
#include "evtrack/detector.hpp"
#include "evtrack/dvs.hpp"
#include "evtrack/scene.hpp"
#include "evtrack/tracker.hpp"

namespace evtrack {

struct MetricsConfig {
  int rmse_from = 150;  // inclusive frame windows
  int rmse_to = 200;
  int omega_from = 100;
  int omega_to = 200;
  int equivalence_from = 50;
  int equivalence_to = 200;
  double convergence_threshold = 2.0;  // px
};

struct RunConfig {
  std::uint64_t seed = 1;
  Backend backend = Backend::kDense;
  DvsConfig dvs;
  DetectorConfig detector;
  TrackerConfig tracker;
  AnnTrainingConfig ann;
  MetricsConfig metrics;
  std::filesystem::path model_path;  // pre-trained validator; empty = train from the scene
  std::filesystem::path scene_path;  // used by filter-bench and when the data dir has none
  bool center_from_scene = true;     // disk filter center follows the scene unless set
  bool write_events = false;         // events.evb next to the results
  bool write_detections = true;
};

/// Reads "key" from `j` into `out` when present; type mismatches throw ConfigError.
template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);

/// "preset": "default" | "intruder" | "empty" selects the base; other keys override.
DiskScene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const DiskScene& scene);

/// Keys: model, q_diag, r_diag, delta, p0_diag, center, r_min, gain.
FilterModel filter_model_from_json(const nlohmann::json& j, const FilterModel& base);
nlohmann::json filter_model_to_json(const FilterModel& m);

/// Relative paths inside the config resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// truth.json: array per frame of {label, x, y, theta, omega, visible}.
void write_truth_json(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth_json(const std::filesystem::path& path);

}  // namespace evtrack
