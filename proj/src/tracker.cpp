#include "evtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/LU>

#include "evtrack/error.hpp"

namespace evtrack {

const char* to_string(Backend b) {
  switch (b) {
    case Backend::kDense: return "dense";
    case Backend::kSpiking: return "spiking";
    case Backend::kBoth: return "both";
  }
  return "dense";
}

Backend backend_from_string(const std::string& name) {
  if (name == "dense") return Backend::kDense;
  if (name == "spiking") return Backend::kSpiking;
  if (name == "both") return Backend::kBoth;
  throw ConfigError("unknown backend '" + name + "' (dense|spiking|both)");
}

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kTentative: return "tentative";
    case TrackStatus::kConfirmed: return "confirmed";
    case TrackStatus::kDead: return "dead";
  }
  return "tentative";
}

void TrackerConfig::validate() const {
  if (!(gate > 0.0)) throw ConfigError("tracker: gate must be > 0");
  if (confirm_window < 1 || confirm_hits < 1 || confirm_hits > confirm_window)
    throw ConfigError("tracker: need 1 <= confirm_hits <= confirm_window");
  if (max_misses < 1) throw ConfigError("tracker: max_misses must be >= 1");
  if (!(band_min >= 0.0 && band_max > band_min)) throw ConfigError("tracker: invalid disk band");
  if (disk.kind != ModelKind::kDiskPolar || cv.kind != ModelKind::kConstantVelocity)
    throw ConfigError("tracker: filter models have the wrong kind");
  disk.validate();
  cv.validate();
  if (backend != Backend::kDense) snn.validate();
  if (!(silence_fraction >= 0.0 && silence_fraction <= 1.0))
    throw ConfigError("tracker: silence_fraction must be in [0, 1]");
}

double mahalanobis2(const Vec2& innovation, const Eigen::Matrix2d& S, bool* singular) {
  Eigen::Matrix2d s = S;
  if (std::abs(s.determinant()) <= 1e-12 || !s.allFinite()) {
    s += 1e-6 * Eigen::Matrix2d::Identity();
    if (singular) *singular = true;
  }
  return innovation.dot(s.inverse() * innovation);
}

Association associate(const std::vector<GateCandidate>& candidates,
                      const std::vector<Detection>& detections, double gate) {
  Association out;
  std::vector<bool> used(candidates.size(), false);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      bool singular = false;
      const double d2 = mahalanobis2(detections[d].centroid - candidates[c].predicted,
                                     candidates[c].S, &singular);
      out.singular = out.singular || singular;
      if (d2 > gate) continue;
      if (d2 < best_d2 || (d2 == best_d2 && candidates[c].id < candidates[best].id)) {
        best = static_cast<int>(c);
        best_d2 = d2;
      }
    }
    if (best < 0) {
      out.unmatched_detections.push_back(static_cast<int>(d));
    } else {
      used[static_cast<std::size_t>(best)] = true;
      out.pairs.emplace_back(static_cast<int>(d), best);
    }
  }
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (!used[c]) out.unmatched_candidates.push_back(static_cast<int>(c));
  return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Readout at the end of a frame is the prior of the next frame; undo the
// one-frame rotation to report the posterior of the current frame.
Eigen::Vector3d posterior_from_readout(const Eigen::Vector3d& s) {
  return Eigen::Vector3d(wrap_angle(s(0) - s(1)), s(1), s(2));
}

}  // namespace

Tracker::Tracker(TrackerConfig config, const MlpNetwork* net) : config_(std::move(config)), net_(net) {
  config_.validate();
  if (net_) net_->validate();
}

const FilterModel& Tracker::model(const Track& t) const {
  return t.kind == ModelKind::kDiskPolar ? config_.disk : config_.cv;
}

GateCandidate Tracker::candidate(const Track& t) const {
  GateCandidate c;
  c.id = t.id;
  const FilterModel& m = model(t);
  if (t.uses_spiking(config_.backend)) {
    FilterState prior;
    prior.s = config_.embedding.from_rep(t.spiking->filter->decode());
    prior.P = t.spiking->P;
    c.predicted = h_measure(m, prior.s);
    c.S = innovation_covariance(m, prior);
  } else {
    c.predicted = h_measure(m, t.dense.s);
    c.S = innovation_covariance(m, t.dense);
  }
  return c;
}

void Tracker::spawn(const Detection& d, int frame) {
  Track t;
  t.id = next_id_++;
  t.birth_frame = frame;
  const double radius = (d.centroid - config_.disk.center).norm();
  t.kind = radius >= config_.band_min && radius <= config_.band_max ? ModelKind::kDiskPolar
                                                                     : ModelKind::kConstantVelocity;
  t.dense = init_from_detection(model(t), d.centroid, frame);
  t.matched = true;
  t.measurement = d.centroid;
  t.hits = 1;
  t.history.push_back(true);
  if (t.kind == ModelKind::kDiskPolar && config_.backend != Backend::kDense) {
    auto sp = std::make_shared<SpikingTrackState>();
    try {
      sp->filter = std::make_unique<NeuralFilter>(config_.snn, config_.embedding, config_.disk,
                                                  splitmix(config_.seed ^ splitmix(t.id)));
      sp->weight_hash = sp->filter->weight_hash();
      sp->settle_error = sp->filter->init_state(t.dense.s).error;
      sp->P = t.dense.P;
      sp->posterior = t.dense.s;
      t.spiking = std::move(sp);
    } catch (const ConfigError&) {
      ++spiking_fallbacks_;  // outside the representable domain: dense only
    }
  }
  tracks_.push_back(std::move(t));
}

void Tracker::update_track(Track& t, int frame) {
  const FilterModel& m = model(t);
  if (t.matched) t.dense = update(m, t.dense, t.measurement);
  if (!t.spiking) return;
  auto& sp = *t.spiking;
  if (config_.silence_after_frame >= 0 && frame > config_.silence_after_frame && !sp.silenced) {
    sp.filter->silence(config_.silence_fraction, splitmix(config_.seed + 0x51ull * t.id));
    sp.silenced = true;
  }
  CorrectionSchedule schedule;
  if (t.matched) {
    const SpikingCorrection c = sp.filter->correct(m, t.measurement, sp.P);
    schedule = c.schedule;
    sp.P = c.P;
  }
  sp.filter->step_frame(schedule);
  sp.posterior = posterior_from_readout(sp.filter->decode_state());
}

TrackEstimate Tracker::estimate(const Track& t, int frame, bool from_spiking) const {
  TrackEstimate e;
  e.frame = frame;
  e.id = t.id;
  e.status = t.status;
  e.kind = t.kind;
  e.spiking = from_spiking;
  const FilterModel& m = model(t);
  const Eigen::VectorXd s = from_spiking ? Eigen::VectorXd(t.spiking->posterior) : t.dense.s;
  e.position = h_measure(m, s);
  e.velocity = velocity(m, s);
  if (t.kind == ModelKind::kDiskPolar) {
    e.theta = s(0);
    e.omega = s(1);
    e.r = s(2);
  } else {
    const Vec2 d = e.position - m.center;
    e.theta = std::atan2(d.y(), d.x());
    e.r = d.norm();
    e.omega = e.r > 0.0 ? (d.x() * e.velocity.y() - d.y() * e.velocity.x()) / (e.r * e.r) : 0.0;
  }
  if (t.validated) {
    e.label = t.verdict.label;
    e.verdict = t.verdict.unmodeled() ? "unmodeled" : "modeled";
    e.confidence = t.verdict.confidence;
  } else {
    e.verdict = "pending";
  }
  return e;
}

FrameEstimates Tracker::step(const std::vector<Detection>& detections, int frame, const Frame* image) {
  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::kDead; });

  for (auto& t : tracks_) {
    const FilterModel& m = model(t);
    t.dense = predict(m, t.dense);
    t.dense.frame = frame;
    if (t.spiking) t.spiking->P = m.F * t.spiking->P * m.F.transpose() + m.Q;
    t.matched = false;
  }

  std::vector<GateCandidate> candidates;
  candidates.reserve(tracks_.size());
  for (const auto& t : tracks_) candidates.push_back(candidate(t));
  const Association assoc = associate(candidates, detections, config_.gate);
  if (assoc.singular) ++singular_gates_;
  for (const auto& [d, c] : assoc.pairs) {
    tracks_[static_cast<std::size_t>(c)].matched = true;
    tracks_[static_cast<std::size_t>(c)].measurement = detections[static_cast<std::size_t>(d)].centroid;
  }

  // Tracks are independent once associated; each writes only its own state.
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(tracks_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      update_track(tracks_[static_cast<std::size_t>(i)], frame);
    } catch (...) {
#pragma omp critical(tracker_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& t : tracks_) {
    t.history.push_back(t.matched);
    while (static_cast<int>(t.history.size()) > config_.confirm_window) t.history.pop_front();
    if (t.matched) {
      ++t.hits;
      t.misses = 0;
    } else {
      ++t.misses;
    }
    const int recent = static_cast<int>(std::count(t.history.begin(), t.history.end(), true));
    if (t.misses >= config_.max_misses) {
      t.status = TrackStatus::kDead;
    } else {
      t.status = recent >= config_.confirm_hits ? TrackStatus::kConfirmed : TrackStatus::kTentative;
      if (t.status == TrackStatus::kConfirmed && t.confirmed_frame < 0) t.confirmed_frame = frame;
    }
  }

  for (int d : assoc.unmatched_detections) spawn(detections[static_cast<std::size_t>(d)], frame);

  if (net_ && image) {
    for (auto& t : tracks_) {
      if (t.status != TrackStatus::kConfirmed) continue;
      const bool spiking = t.uses_spiking(config_.backend);
      const Vec2 at = estimate(t, frame, spiking).position;
      if (!image->contains(static_cast<int>(std::lround(at.x())), static_cast<int>(std::lround(at.y()))))
        continue;
      t.verdict = validate_detection(*net_, *image, at);
      t.validated = true;
    }
  }

  FrameEstimates out;
  for (const auto& t : tracks_) {
    out.primary.push_back(estimate(t, frame, t.uses_spiking(config_.backend)));
    if (config_.backend == Backend::kBoth && t.spiking) out.shadow.push_back(estimate(t, frame, true));
  }
  return out;
}

void write_tracks_header(std::ostream& out) {
  out << "frame,id,label,status,x,y,vx,vy,theta,omega,r,verdict,confidence\n";
}

void write_tracks(std::ostream& out, const std::vector<TrackEstimate>& rows) {
  out << std::fixed << std::setprecision(6);
  for (const auto& e : rows)
    out << e.frame << ',' << e.id << ',' << e.label << ',' << to_string(e.status) << ','
        << e.position.x() << ',' << e.position.y() << ',' << e.velocity.x() << ','
        << e.velocity.y() << ',' << e.theta << ',' << e.omega << ',' << e.r << ',' << e.verdict
        << ',' << e.confidence << '\n';
}

}  // namespace evtrack
