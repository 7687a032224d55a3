#include "evtrack/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "evtrack/error.hpp"

namespace evtrack {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, int line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("tracks.csv: bad number '" + s + "'", "line " + std::to_string(line));
  return v;
}

TrackStatus status_from_string(const std::string& s, int line) {
  if (s == "tentative") return TrackStatus::kTentative;
  if (s == "confirmed") return TrackStatus::kConfirmed;
  if (s == "dead") return TrackStatus::kDead;
  throw ParseError("tracks.csv: bad status '" + s + "'", "line " + std::to_string(line));
}

const ObjectTruth* find_truth(const GroundTruth& truth, int frame, int label) {
  if (frame < 0 || frame >= static_cast<int>(truth.size()))
    throw ConfigError("truth has no frame " + std::to_string(frame));
  for (const auto& o : truth[static_cast<std::size_t>(frame)])
    if (o.label == label && o.visible) return &o;
  return nullptr;
}

int nearest_label(const GroundTruth& truth, int frame, const Vec2& p) {
  if (frame < 0 || frame >= static_cast<int>(truth.size()))
    throw ConfigError("truth has no frame " + std::to_string(frame));
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& o : truth[static_cast<std::size_t>(frame)]) {
    if (!o.visible) continue;
    const double d = (o.position - p).norm();
    if (d < best_d) {
      best_d = d;
      best = o.label;
    }
  }
  return best;
}

bool in_window(int frame, int from, int to) { return frame >= from && frame <= to; }

}  // namespace

std::vector<TrackEstimate> read_tracks_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "frame,id,label,status,x,y,vx,vy,theta,omega,r,verdict,confidence")
    throw ParseError("tracks.csv: missing or wrong header", "line 1");
  std::vector<TrackEstimate> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13)
      throw ParseError("tracks.csv: expected 13 fields, got " + std::to_string(f.size()),
                       "line " + std::to_string(n));
    TrackEstimate e;
    e.frame = parse_number<int>(f[0], n);
    e.id = parse_number<int>(f[1], n);
    e.label = f[2];
    e.status = status_from_string(f[3], n);
    e.position = Vec2(parse_number<double>(f[4], n), parse_number<double>(f[5], n));
    e.velocity = Vec2(parse_number<double>(f[6], n), parse_number<double>(f[7], n));
    e.theta = parse_number<double>(f[8], n);
    e.omega = parse_number<double>(f[9], n);
    e.r = parse_number<double>(f[10], n);
    e.verdict = f[11];
    e.confidence = parse_number<double>(f[12], n);
    rows.push_back(std::move(e));
  }
  return rows;
}

std::vector<TrackEstimate> read_tracks_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_tracks_csv(in);
}

std::map<int, int> assign_tracks(const std::vector<TrackEstimate>& rows, const GroundTruth& truth) {
  std::map<int, int> out;
  for (const auto& e : rows) {
    if (e.status != TrackStatus::kConfirmed || out.count(e.id)) continue;
    const int label = nearest_label(truth, e.frame, e.position);
    if (label >= 0) out[e.id] = label;
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<TrackEstimate>& rows, const GroundTruth& truth,
                              const std::map<int, int>& assignment, const MetricsConfig& cfg) {
  MetricsReport rep;
  rep.assignment = assignment;

  std::map<int, int> first_confirmed;  // track -> frame
  std::map<int, int> last_nearest;     // track -> truth label
  std::set<int> ids;
  for (const auto& e : rows) {
    ids.insert(e.id);
    if (e.frame < 0 || e.frame >= static_cast<int>(truth.size()))
      throw ConfigError("truth has no frame " + std::to_string(e.frame));
    if (e.status != TrackStatus::kConfirmed) continue;
    if (!first_confirmed.count(e.id)) first_confirmed[e.id] = e.frame;
    const auto a = assignment.find(e.id);
    if (a == assignment.end()) continue;
    const int nearest = nearest_label(truth, e.frame, e.position);
    auto [it, fresh] = last_nearest.emplace(e.id, a->second);
    if (nearest >= 0 && nearest != it->second) {
      ++rep.identity_swaps;
      it->second = nearest;
    }
  }
  for (int id : ids)
    if (!assignment.count(id)) ++rep.unassigned_tracks;

  std::map<int, std::map<int, const TrackEstimate*>> by_object;  // object -> frame -> row
  std::map<int, ObjectMetrics> objects;
  for (const auto& [id, label] : assignment) {
    objects[label].object = label;
    objects[label].tracks.push_back(id);
  }
  auto rank = [&](int id) {
    const auto it = first_confirmed.find(id);
    return std::pair(it == first_confirmed.end() ? std::numeric_limits<int>::max() : it->second, id);
  };
  for (const auto& e : rows) {
    const auto a = assignment.find(e.id);
    if (a == assignment.end()) continue;
    auto& slot = by_object[a->second][e.frame];
    if (!slot || rank(e.id) < rank(slot->id)) slot = &e;
    if (e.status == TrackStatus::kConfirmed) {
      ++objects[a->second].confirmed_rows;
      if (e.verdict == "unmodeled") ++objects[a->second].unmodeled_rows;
    }
  }

  for (auto& [label, om] : objects) {
    int previous_track = -1;
    for (const auto& [frame, e] : by_object[label]) {
      const ObjectTruth* t = find_truth(truth, frame, label);
      if (!t) continue;
      SeriesPoint p;
      p.frame = frame;
      p.track = e->id;
      p.position = e->position;
      p.velocity = e->velocity;
      p.truth = t->position;
      p.error = (e->position - t->position).norm();
      p.omega = e->omega;
      p.omega_true = t->omega;
      if (previous_track >= 0 && previous_track != e->id) ++rep.handoffs;
      previous_track = e->id;
      om.series.push_back(p);
    }
    double sum = 0.0, sq = 0.0, wsum = 0.0;
    for (const auto& p : om.series) {
      if (in_window(p.frame, cfg.rmse_from, cfg.rmse_to)) {
        sum += p.error;
        sq += p.error * p.error;
        ++om.window_frames;
      }
      if (in_window(p.frame, cfg.omega_from, cfg.omega_to)) {
        wsum += std::abs(p.omega - p.omega_true);
        ++om.omega_frames;
      }
    }
    if (!om.series.empty()) om.initial_error = om.series.front().error;
    if (om.window_frames > 0) {
      om.window_mean_error = sum / om.window_frames;
      om.window_rmse = std::sqrt(sq / om.window_frames);
    }
    if (om.omega_frames > 0) om.mean_omega_error = wsum / om.omega_frames;
    for (std::size_t i = om.series.size(); i-- > 0;) {
      if (om.series[i].error >= cfg.convergence_threshold) break;
      om.convergence_frame = om.series[i].frame;
    }
    rep.objects.push_back(std::move(om));
  }
  return rep;
}

std::vector<EquivalenceMetrics> compute_equivalence(const std::vector<TrackEstimate>& reference,
                                                    const std::vector<TrackEstimate>& other,
                                                    const std::map<int, int>& assignment,
                                                    int from, int to) {
  std::map<std::pair<int, int>, const TrackEstimate*> lookup;  // (id, frame)
  for (const auto& e : other) lookup[{e.id, e.frame}] = &e;
  std::map<int, EquivalenceMetrics> acc;
  for (const auto& e : reference) {
    const auto a = assignment.find(e.id);
    if (a == assignment.end() || !in_window(e.frame, from, to)) continue;
    const auto o = lookup.find({e.id, e.frame});
    if (o == lookup.end()) continue;
    auto& m = acc[a->second];
    m.object = a->second;
    ++m.frames;
    m.rms_theta += std::pow(wrap_angle(e.theta - o->second->theta), 2);
    m.rms_omega += std::pow(e.omega - o->second->omega, 2);
    m.rms_r += std::pow(e.r - o->second->r, 2);
  }
  std::vector<EquivalenceMetrics> out;
  for (auto& [label, m] : acc) {
    m.rms_theta = std::sqrt(m.rms_theta / m.frames);
    m.rms_omega = std::sqrt(m.rms_omega / m.frames);
    m.rms_r = std::sqrt(m.rms_r / m.frames);
    out.push_back(m);
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& report, const MetricsConfig& cfg) {
  nlohmann::json j;
  j["identity_swaps"] = report.identity_swaps;
  j["handoffs"] = report.handoffs;
  j["unassigned_tracks"] = report.unassigned_tracks;
  j["windows"] = {{"error", {cfg.rmse_from, cfg.rmse_to}},
                  {"omega", {cfg.omega_from, cfg.omega_to}},
                  {"convergence_threshold", cfg.convergence_threshold}};
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, label] : report.assignment) assignment[std::to_string(id)] = label;
  j["assignment"] = assignment;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : report.objects) {
    j["objects"].push_back({{"object", o.object},
                            {"tracks", o.tracks},
                            {"frames_tracked", o.series.size()},
                            {"first_frame", o.series.empty() ? -1 : o.series.front().frame},
                            {"initial_error", o.initial_error},
                            {"window_mean_error", o.window_mean_error},
                            {"window_rmse", o.window_rmse},
                            {"window_frames", o.window_frames},
                            {"mean_omega_error", o.mean_omega_error},
                            {"omega_frames", o.omega_frames},
                            {"convergence_frame", o.convergence_frame},
                            {"confirmed_rows", o.confirmed_rows},
                            {"unmodeled_fraction", o.unmodeled_fraction()}});
  }
  return j;
}

nlohmann::json to_json(const std::vector<EquivalenceMetrics>& eq) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : eq)
    j.push_back({{"object", m.object},
                 {"frames", m.frames},
                 {"rms_theta", m.rms_theta},
                 {"rms_omega", m.rms_omega},
                 {"rms_r", m.rms_r}});
  return j;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header << '\n' << std::setprecision(12);
  return out;
}

}  // namespace

void write_errors_csv(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = open_csv(path, "frame,object,track,error");
  for (const auto& o : report.objects)
    for (const auto& p : o.series) out << p.frame << ',' << o.object << ',' << p.track << ',' << p.error << '\n';
}

void write_omega_csv(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = open_csv(path, "frame,object,track,omega,omega_true");
  for (const auto& o : report.objects)
    for (const auto& p : o.series)
      out << p.frame << ',' << o.object << ',' << p.track << ',' << p.omega << ',' << p.omega_true << '\n';
}

void write_trajectories_csv(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = open_csv(path, "frame,object,track,x,y,vx,vy,x_true,y_true");
  for (const auto& o : report.objects)
    for (const auto& p : o.series)
      out << p.frame << ',' << o.object << ',' << p.track << ',' << p.position.x() << ','
          << p.position.y() << ',' << p.velocity.x() << ',' << p.velocity.y() << ','
          << p.truth.x() << ',' << p.truth.y() << '\n';
}

}  // namespace evtrack
