#include "evtrack/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "evtrack/error.hpp"

namespace evtrack {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path frame_path(const fs::path& data_dir, int k) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.pgm", k);
  return data_dir / "frames" / name;
}

void synth(const DiskScene& scene_in, const fs::path& out_dir) {
  const DiskScene scene = validate_scene(scene_in);
  fs::create_directories(out_dir / "frames");
  for (int k = 0; k < scene.frame_count; ++k) write_pgm(frame_path(out_dir, k), render_frame(scene, k));
  write_truth_json(out_dir / "truth.json", ground_truth(scene));
  save_json(out_dir / "scene.json", scene_to_json(scene));
}

namespace {

template <typename F>
auto stage(const char* name, int frame, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, frame, e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

DiskScene scene_for_run(const RunConfig& cfg, const fs::path& data_dir) {
  if (!data_dir.empty() && fs::exists(data_dir / "scene.json"))
    return scene_from_json(load_json(data_dir / "scene.json"));
  if (!cfg.scene_path.empty()) return scene_from_json(load_json(cfg.scene_path));
  throw ConfigError("no scene: neither " + (data_dir / "scene.json").string() +
                    " nor a 'scene' entry in the run config");
}

TrackerConfig tracker_config(const RunConfig& cfg, const DiskScene& scene) {
  TrackerConfig t = cfg.tracker;
  t.backend = cfg.backend;
  t.seed = cfg.seed;
  if (cfg.center_from_scene) t.disk.center = scene.center;
  t.validate();
  return t;
}

json object_summary(const MetricsReport& rep, const MetricsConfig& mc) { return to_json(rep, mc); }

void write_metric_files(const fs::path& out_dir, const MetricsReport& rep, const std::string& suffix) {
  write_errors_csv(out_dir / ("errors" + suffix + ".csv"), rep);
  write_omega_csv(out_dir / ("omega" + suffix + ".csv"), rep);
  write_trajectories_csv(out_dir / ("trajectories" + suffix + ".csv"), rep);
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const DiskScene scene = scene_for_run(cfg, data_dir);
  const fs::path truth_path = data_dir / "truth.json";
  if (!fs::exists(truth_path)) throw ConfigError("missing " + truth_path.string());
  const GroundTruth truth = read_truth_json(truth_path);
  if (static_cast<int>(truth.size()) < scene.frame_count)
    throw ConfigError("truth.json covers fewer frames than the scene");
  for (int k = 0; k < scene.frame_count; ++k)
    if (!fs::exists(frame_path(data_dir, k)))
      throw ConfigError("missing frame " + frame_path(data_dir, k).string());
  fs::create_directories(out_dir);

  MlpNetwork net;
  if (!cfg.model_path.empty()) {
    net = load_model(cfg.model_path);
  } else {
    net = stage("ann", 0, [&] { return train_scene_validator(scene, cfg.ann).net; });
    save_model(out_dir / "model.json", net);
  }

  Tracker tracker(tracker_config(cfg, scene), &net);
  const double period = cfg.dvs.frame_period;
  const int windows = cfg.detector.windows_per_frame;

  Frame frame0 = stage("io", 0, [&] { return read_pgm(frame_path(data_dir, 0), 0); });
  DvsState dvs = stage("dvs", 0, [&] { return init_reference(frame0, cfg.dvs); });
  EventSurface surface(frame0.width, frame0.height, cfg.detector.tau_det, period, period);

  auto tracks_out = open_out(out_dir / "tracks.csv");
  write_tracks_header(tracks_out);
  std::ofstream shadow_out;
  if (cfg.backend == Backend::kBoth) {
    shadow_out = open_out(out_dir / "tracks_spiking.csv");
    write_tracks_header(shadow_out);
  }
  std::ofstream det_out;
  if (cfg.write_detections) {
    det_out = open_out(out_dir / "detections.csv");
    write_detections_header(det_out);
  }
  EventStream all_events;
  std::size_t event_count = 0, detection_count = 0;
  int frames_with_object_count = 0;

  for (int k = 1; k < scene.frame_count; ++k) {
    const Frame frame = stage("io", k, [&] { return read_pgm(frame_path(data_dir, k), k); });
    const EventStream events = stage("dvs", k, [&] { return emulate_step(dvs, frame, k); });
    event_count += events.size();
    if (cfg.write_events) all_events.insert(all_events.end(), events.begin(), events.end());

    std::vector<Detection> detections;
    stage("detector", k, [&] {
      auto it = events.begin();
      for (int w = 0; w < windows; ++w) {
        const double until = (k + static_cast<double>(w + 1) / windows) * period;
        auto end = w + 1 == windows ? events.end()
                                    : std::upper_bound(it, events.end(), until,
                                                       [](double t, const Event& e) { return t < e.t; });
        accumulate(surface, EventStream(it, end), std::max(until, surface.last_update));
        it = end;
        detections = extract_detections(surface, cfg.detector.a_min, cfg.detector.min_pixels, k, w,
                                         cfg.detector.link_radius);
        if (det_out.is_open()) write_detections(det_out, detections);
      }
    });
    detection_count += detections.size();
    int visible = 0;
    for (const auto& o : truth[static_cast<std::size_t>(k)]) visible += o.visible ? 1 : 0;
    if (static_cast<int>(detections.size()) == visible) ++frames_with_object_count;

    const FrameEstimates est = stage("tracker", k, [&] { return tracker.step(detections, k, &frame); });
    write_tracks(tracks_out, est.primary);
    if (shadow_out.is_open()) write_tracks(shadow_out, est.shadow);
  }
  tracks_out.close();
  if (shadow_out.is_open()) shadow_out.close();
  if (det_out.is_open()) det_out.close();
  if (cfg.write_events) write_events_evb(out_dir / "events.evb", all_events);

  RunResult result;
  const auto rows = read_tracks_csv(out_dir / "tracks.csv");
  const auto assignment = assign_tracks(rows, truth);
  result.primary = compute_metrics(rows, truth, assignment, cfg.metrics);
  write_metric_files(out_dir, result.primary, "");
  json summary;
  summary["backend"] = to_string(cfg.backend);
  summary["seed"] = cfg.seed;
  summary["frames"] = scene.frame_count;
  summary["events"] = event_count;
  summary["detections"] = detection_count;
  summary["frames_with_one_detection_per_visible_object"] = frames_with_object_count;
  summary["tracks_created"] = tracker.tracks_created();
  summary["singular_gates"] = tracker.singular_gates();
  summary["spiking_fallbacks"] = tracker.spiking_fallbacks();
  summary["metrics"] = object_summary(result.primary, cfg.metrics);
  if (cfg.backend == Backend::kBoth) {
    const auto shadow = read_tracks_csv(out_dir / "tracks_spiking.csv");
    result.spiking = compute_metrics(shadow, truth, assignment, cfg.metrics);
    write_metric_files(out_dir, *result.spiking, "_spiking");
    result.equivalence = compute_equivalence(rows, shadow, assignment, cfg.metrics.equivalence_from,
                                             cfg.metrics.equivalence_to);
    summary["metrics_spiking"] = object_summary(*result.spiking, cfg.metrics);
    summary["equivalence"] = to_json(result.equivalence);
    summary["equivalence_window"] = {cfg.metrics.equivalence_from, cfg.metrics.equivalence_to};
  }
  if (cfg.backend != Backend::kDense) {
    bool unchanged = true;
    for (const auto& t : tracker.tracks())
      if (t.spiking) unchanged = unchanged && t.spiking->filter->weight_hash() == t.spiking->weight_hash;
    summary["weights_unchanged"] = unchanged;
  }
  write_plot_scripts(out_dir, result.primary);
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary["runtime_seconds"] = result.runtime_seconds;
  result.summary = summary;
  save_json(out_dir / "summary.json", summary);
  return result;
}

BenchResult filter_bench(const RunConfig& cfg, const fs::path& out_dir) {
  const DiskScene scene = cfg.scene_path.empty() ? validate_scene(default_scene())
                                                 : scene_from_json(load_json(cfg.scene_path));
  const GroundTruth truth = ground_truth(scene);
  TrackerConfig tc = cfg.tracker;
  tc.backend = Backend::kBoth;
  tc.seed = cfg.seed;
  if (cfg.center_from_scene) tc.disk.center = scene.center;
  tc.validate();
  const FilterModel& model = tc.disk;
  fs::create_directories(out_dir);
  auto out = open_out(out_dir / "bench.csv");
  out << "frame,object,theta_dense,theta_snn,omega_dense,omega_snn,r_dense,r_snn\n"
      << std::setprecision(12);

  std::vector<TrackEstimate> dense_rows, snn_rows;
  std::map<int, int> assignment;
  json objects = json::array();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    if (!obj.orbiting()) continue;
    const int id = static_cast<int>(i) + 1;
    assignment[id] = obj.label;
    auto z_at = [&](int k) { return truth[static_cast<std::size_t>(k)][i].position; };
    FilterState dense = init_from_detection(model, z_at(0), 0);
    NeuralFilter nf(tc.snn, tc.embedding, model,
                    cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(id));
    const std::uint64_t hash0 = nf.weight_hash();
    const SettleReport settle = nf.init_state(dense.s);
    Eigen::MatrixXd P = dense.P;
    Eigen::Vector3d snn = dense.s;
    double dense_w = 0.0, snn_w = 0.0;
    int wframes = 0;
    for (int k = 0; k < scene.frame_count; ++k) {
      if (k > 0) {
        const Vec2 z = z_at(k);
        dense = update(model, predict(model, dense), z);
        P = model.F * P * model.F.transpose() + model.Q;
        if (tc.silence_after_frame >= 0 && k == tc.silence_after_frame + 1)
          nf.silence(tc.silence_fraction, cfg.seed + 0x51ull * static_cast<std::uint64_t>(id));
        const SpikingCorrection c = nf.correct(model, z, P);
        P = c.P;
        nf.step_frame(c.schedule);
        const Eigen::Vector3d s = nf.decode_state();
        snn = Eigen::Vector3d(wrap_angle(s(0) - s(1)), s(1), s(2));
      }
      out << k << ',' << obj.label << ',' << dense.s(0) << ',' << snn(0) << ',' << dense.s(1) << ','
          << snn(1) << ',' << dense.s(2) << ',' << snn(2) << '\n';
      TrackEstimate d, s;
      d.frame = s.frame = k;
      d.id = s.id = id;
      d.theta = dense.s(0);
      d.omega = dense.s(1);
      d.r = dense.s(2);
      s.theta = snn(0);
      s.omega = snn(1);
      s.r = snn(2);
      dense_rows.push_back(d);
      snn_rows.push_back(s);
      if (k >= cfg.metrics.omega_from && k <= cfg.metrics.omega_to) {
        dense_w += std::abs(dense.s(1) - scene.omega);
        snn_w += std::abs(snn(1) - scene.omega);
        ++wframes;
      }
    }
    objects.push_back({{"object", obj.label},
                       {"settle_error", settle.error},
                       {"settle_converged", settle.converged},
                       {"training_decode_error", nf.training_decode_error()},
                       {"weights_unchanged", nf.weight_hash() == hash0},
                       {"mean_omega_error_dense", wframes ? dense_w / wframes : 0.0},
                       {"mean_omega_error_snn", wframes ? snn_w / wframes : 0.0}});
  }
  BenchResult res;
  res.equivalence = compute_equivalence(dense_rows, snn_rows, assignment, cfg.metrics.equivalence_from,
                                        cfg.metrics.equivalence_to);
  res.summary = {{"seed", cfg.seed},
                 {"neurons", tc.snn.neurons},
                 {"frames", scene.frame_count},
                 {"equivalence_window", {cfg.metrics.equivalence_from, cfg.metrics.equivalence_to}},
                 {"equivalence", to_json(res.equivalence)},
                 {"objects", objects}};
  save_json(out_dir / "bench_summary.json", res.summary);
  return res;
}

MetricsReport evaluate(const fs::path& results_dir, const fs::path& truth_path, const MetricsConfig& cfg) {
  const auto rows = read_tracks_csv(results_dir / "tracks.csv");
  const GroundTruth truth = read_truth_json(truth_path);
  return compute_metrics(rows, truth, assign_tracks(rows, truth), cfg);
}

namespace {

const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof *kPalette)]; }

}  // namespace

void write_plot_scripts(const fs::path& out_dir, const MetricsReport& report) {
  auto header = [](std::ostream& o, const char* png, const char* title) {
    o << "set datafile separator ','\n"
      << "set terminal pngcairo size 900,700\n"
      << "set output '" << png << "'\n"
      << "set title '" << title << "'\n"
      << "set key outside right\n";
  };
  {
    auto o = open_out(out_dir / "plot_a.gp");
    header(o, "plot_a.png", "True (dashed) and estimated (solid) trajectories, velocity vectors");
    o << "set size ratio -1\nset yrange [*:*] reverse\nset xlabel 'x [px]'\nset ylabel 'y [px]'\n";
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < report.objects.size(); ++i) {
      const int obj = report.objects[i].object;
      std::ostringstream p;
      p << "'trajectories.csv' skip 1 using ($2==" << obj << "?$4:1/0):5 with lines lw 2 lc rgb '"
        << color(i) << "' title 'object " << obj << " estimate', "
        << "'trajectories.csv' skip 1 using ($2==" << obj << "?$8:1/0):9 with lines dt 2 lc rgb '"
        << color(i) << "' title 'object " << obj << " truth', "
        << "'trajectories.csv' skip 1 every 10 using ($2==" << obj
        << "?$4:1/0):5:($6*5):($7*5) with vectors lc rgb 'black' notitle";
      parts.push_back(p.str());
    }
    if (parts.empty()) {
      o << "plot 'trajectories.csv' skip 1 using 4:5 with lines title 'no tracked objects'\n";
    } else {
      o << "plot ";
      for (std::size_t i = 0; i < parts.size(); ++i) o << (i ? ", \\\n     " : "") << parts[i];
      o << '\n';
    }
  }
  {
    auto o = open_out(out_dir / "plot_b.gp");
    header(o, "plot_b.png", "Estimated angular velocity");
    o << "set xlabel 'frame'\nset ylabel 'omega [rad/frame]'\n";
    o << "plot 'omega.csv' skip 1 using 1:5 with lines dt 2 lc rgb 'black' title 'true'";
    for (std::size_t i = 0; i < report.objects.size(); ++i) {
      const int obj = report.objects[i].object;
      o << ", \\\n     'omega.csv' skip 1 using 1:($2==" << obj << "?$4:1/0) with lines lc rgb '"
        << color(i) << "' title 'object " << obj << "'";
    }
    o << '\n';
  }
  {
    auto o = open_out(out_dir / "plot_c.gp");
    header(o, "plot_c.png", "Position estimation error");
    o << "set xlabel 'frame'\nset ylabel 'error [px]'\n";
    if (report.objects.empty()) {
      o << "plot 'errors.csv' skip 1 using 1:4 with lines title 'no tracked objects'\n";
    } else {
      o << "plot ";
      for (std::size_t i = 0; i < report.objects.size(); ++i) {
        const int obj = report.objects[i].object;
        o << (i ? ", \\\n     " : "") << "'errors.csv' skip 1 using 1:($2==" << obj
          << "?$4:1/0) with lines lc rgb '" << color(i) << "' title 'object " << obj << "'";
      }
      o << '\n';
    }
  }
}

std::vector<std::string> lint_plot_scripts(const fs::path& out_dir) {
  std::vector<std::string> missing;
  const std::regex quoted("'([^']+\\.csv)'");
  for (const char* name : {"plot_a.gp", "plot_b.gp", "plot_c.gp"}) {
    std::ifstream in(out_dir / name);
    if (!in) {
      missing.push_back(name);
      continue;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::set<std::string> seen;
    for (std::sregex_iterator it(text.begin(), text.end(), quoted), end; it != end; ++it) {
      const std::string file = (*it)[1];
      if (seen.insert(file).second && !fs::exists(out_dir / file)) missing.push_back(file);
    }
  }
  return missing;
}

}  // namespace evtrack
