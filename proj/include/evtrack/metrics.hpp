#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtrack/config.hpp"
#include "evtrack/scene.hpp"
#include "evtrack/tracker.hpp"

namespace evtrack {

/// Parses tracks.csv; malformed rows throw ParseError with the line number.
std::vector<TrackEstimate> read_tracks_csv(std::istream& in);
std::vector<TrackEstimate> read_tracks_csv(const std::filesystem::path& path);

/// Track id -> truth label, fixed at each track's first confirmed row by the
/// nearest visible truth position.
std::map<int, int> assign_tracks(const std::vector<TrackEstimate>& rows, const GroundTruth& truth);

struct SeriesPoint {
  int frame = 0;
  int track = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  Vec2 truth = Vec2::Zero();
  double error = 0.0;
  double omega = 0.0;
  double omega_true = 0.0;
};

struct ObjectMetrics {
  int object = 0;  // truth label: 1 cross, 2 triangle, 3 circle, 4+ intruders
  std::vector<int> tracks;
  std::vector<SeriesPoint> series;
  double initial_error = 0.0;
  double window_mean_error = 0.0;  // over [rmse_from, rmse_to]
  double window_rmse = 0.0;
  int window_frames = 0;
  double mean_omega_error = 0.0;  // over [omega_from, omega_to]
  int omega_frames = 0;
  int convergence_frame = -1;     // error stays below threshold from here on
  int confirmed_rows = 0;
  int unmodeled_rows = 0;
  double unmodeled_fraction() const {
    return confirmed_rows > 0 ? static_cast<double>(unmodeled_rows) / confirmed_rows : 0.0;
  }
};

struct MetricsReport {
  std::vector<ObjectMetrics> objects;  // ordered by truth label
  std::map<int, int> assignment;
  int identity_swaps = 0;  // confirmed rows whose nearest truth differs from the previous one
  int handoffs = 0;        // an object's series moving to a different track
  int unassigned_tracks = 0;
};

/// Per-object series: at every frame the earliest-confirmed assigned track
/// that has a row supplies the estimate.
MetricsReport compute_metrics(const std::vector<TrackEstimate>& rows, const GroundTruth& truth,
                              const std::map<int, int>& assignment, const MetricsConfig& cfg);

/// RMS differences between two result sets of the same tracks (e.g. dense
/// vs. spiking shadow) per assigned object.
struct EquivalenceMetrics {
  int object = 0;
  int frames = 0;
  double rms_theta = 0.0;
  double rms_omega = 0.0;
  double rms_r = 0.0;
};

std::vector<EquivalenceMetrics> compute_equivalence(const std::vector<TrackEstimate>& reference,
                                                    const std::vector<TrackEstimate>& other,
                                                    const std::map<int, int>& assignment,
                                                    int from, int to);

nlohmann::json to_json(const MetricsReport& report, const MetricsConfig& cfg);
nlohmann::json to_json(const std::vector<EquivalenceMetrics>& eq);

/// errors.csv "frame,object,track,error"; omega.csv
/// "frame,object,track,omega,omega_true"; trajectories.csv
/// "frame,object,track,x,y,vx,vy,x_true,y_true".
void write_errors_csv(const std::filesystem::path& path, const MetricsReport& report);
void write_omega_csv(const std::filesystem::path& path, const MetricsReport& report);
void write_trajectories_csv(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace evtrack
