#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "evtrack/ann.hpp"
#include "evtrack/detector.hpp"
#include "evtrack/emsif.hpp"
#include "evtrack/snn_emsif.hpp"

namespace evtrack {

enum class Backend { kDense, kSpiking, kBoth };
enum class TrackStatus { kTentative, kConfirmed, kDead };

const char* to_string(Backend b);
Backend backend_from_string(const std::string& name);
const char* to_string(TrackStatus s);

struct TrackerConfig {
  double gate = 9.21;  // squared Mahalanobis distance, 99% for 2 dof
  int confirm_hits = 3;
  int confirm_window = 5;
  int max_misses = 5;
  double band_min = 10.0;  // px from the disk center: DiskPolar tracks
  double band_max = 60.0;
  FilterModel disk = FilterModel::disk_polar();
  FilterModel cv = FilterModel::constant_velocity();
  NeuralFilterConfig snn;
  EmbeddingSpec embedding;
  Backend backend = Backend::kDense;
  std::uint64_t seed = 1;
  double silence_fraction = 0.0;  // of each population, applied once
  int silence_after_frame = -1;   // < 0 disables silencing

  void validate() const;
};

/// Prior used for gating: predicted measurement and innovation covariance.
struct GateCandidate {
  int id = 0;
  Vec2 predicted = Vec2::Zero();
  Eigen::Matrix2d S = Eigen::Matrix2d::Identity();
};

struct Association {
  std::vector<std::pair<int, int>> pairs;  // (detection index, candidate index)
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_candidates;
  bool singular = false;  // some S needed the 1e-6 I regularizer
};

double mahalanobis2(const Vec2& innovation, const Eigen::Matrix2d& S, bool* singular = nullptr);

/// Greedy: detections in order, each takes the unused candidate with the
/// smallest d2 <= gate; ties go to the lower candidate id.
Association associate(const std::vector<GateCandidate>& candidates,
                      const std::vector<Detection>& detections, double gate);

/// Posterior of a spiking track, kept next to the population.
struct SpikingTrackState {
  std::unique_ptr<NeuralFilter> filter;
  Eigen::MatrixXd P;
  Eigen::Vector3d posterior = Eigen::Vector3d::Zero();
  double settle_error = 0.0;
  std::uint64_t weight_hash = 0;  // at build time
  bool silenced = false;
};

struct Track {
  int id = 0;
  ModelKind kind = ModelKind::kDiskPolar;
  TrackStatus status = TrackStatus::kTentative;
  FilterState dense;
  std::shared_ptr<SpikingTrackState> spiking;  // DiskPolar tracks when backend != dense
  int hits = 0;
  int misses = 0;  // consecutive
  std::deque<bool> history;
  int birth_frame = 0;
  int confirmed_frame = -1;  // first confirmation
  bool matched = false;
  Vec2 measurement = Vec2::Zero();
  ValidationVerdict verdict;
  bool validated = false;

  bool uses_spiking(Backend b) const { return spiking && b == Backend::kSpiking; }
};

/// One row of tracks.csv.
struct TrackEstimate {
  int frame = 0;
  int id = 0;
  std::string label;  // class label, "unmodeled", or "" before validation
  TrackStatus status = TrackStatus::kTentative;
  ModelKind kind = ModelKind::kDiskPolar;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double theta = 0.0, omega = 0.0, r = 0.0;
  std::string verdict;  // "modeled", "unmodeled", or "pending"
  double confidence = 0.0;
  bool spiking = false;
};

struct FrameEstimates {
  std::vector<TrackEstimate> primary;
  std::vector<TrackEstimate> shadow;  // spiking shadows when backend = both
};

class Tracker {
 public:
  /// `net` may be null: tracks then stay "pending" validation.
  Tracker(TrackerConfig config, const MlpNetwork* net);

  /// Predict, associate, update, spawn, validate and age for one frame.
  FrameEstimates step(const std::vector<Detection>& detections, int frame, const Frame* image);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }
  int tracks_created() const { return next_id_ - 1; }
  int singular_gates() const { return singular_gates_; }
  int spiking_fallbacks() const { return spiking_fallbacks_; }

 private:
  const FilterModel& model(const Track& t) const;
  GateCandidate candidate(const Track& t) const;
  void spawn(const Detection& d, int frame);
  void update_track(Track& t, int frame);
  TrackEstimate estimate(const Track& t, int frame, bool from_spiking) const;

  TrackerConfig config_;
  const MlpNetwork* net_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  int singular_gates_ = 0;
  int spiking_fallbacks_ = 0;
};

/// tracks.csv: header "frame,id,label,status,x,y,vx,vy,theta,omega,r,verdict,confidence".
void write_tracks_header(std::ostream& out);
void write_tracks(std::ostream& out, const std::vector<TrackEstimate>& rows);

}  // namespace evtrack
