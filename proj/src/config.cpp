#include "evtrack/config.hpp"

#include <fstream>
#include <set>

#include "evtrack/error.hpp"

namespace evtrack {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), "offset " + std::to_string(e.byte));
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

Vec2 vec2_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(std::string(what) + ": expected [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

json vec2_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

SceneObject object_from_json(const json& j) {
  reject_unknown_keys(j, {"shape", "size", "orbit_radius", "initial_angle", "spawn_frame",
                          "linear_velocity", "start", "label"},
                      "scene object");
  SceneObject o;
  std::string shape = to_string(o.shape);
  read_key(j, "shape", shape);
  o.shape = shape_from_string(shape);
  read_key(j, "size", o.size);
  read_key(j, "orbit_radius", o.orbit_radius);
  read_key(j, "initial_angle", o.initial_angle);
  read_key(j, "spawn_frame", o.spawn_frame);
  if (j.contains("linear_velocity")) o.linear_velocity = vec2_from_json(j["linear_velocity"], "linear_velocity");
  if (j.contains("start")) o.start = vec2_from_json(j["start"], "start");
  read_key(j, "label", o.label);
  return o;
}

}  // namespace

DiskScene scene_from_json(const json& j) {
  reject_unknown_keys(j, {"preset", "intruder_spawn", "width", "height", "background_intensity",
                          "object_intensity", "center", "omega", "frame_count",
                          "pixel_noise_sigma", "supersample", "spin", "objects", "seed"},
                      "scene");
  std::string preset = "default";
  read_key(j, "preset", preset);
  int spawn = 80;
  read_key(j, "intruder_spawn", spawn);
  DiskScene s;
  if (preset == "default") {
    s = default_scene();
  } else if (preset == "intruder") {
    s = intruder_scene(spawn);
  } else if (preset != "empty") {
    throw ConfigError("scene: unknown preset '" + preset + "'");
  }
  read_key(j, "width", s.width);
  read_key(j, "height", s.height);
  read_key(j, "background_intensity", s.background_intensity);
  read_key(j, "object_intensity", s.object_intensity);
  if (j.contains("center")) s.center = vec2_from_json(j["center"], "center");
  read_key(j, "omega", s.omega);
  read_key(j, "frame_count", s.frame_count);
  read_key(j, "pixel_noise_sigma", s.pixel_noise_sigma);
  read_key(j, "supersample", s.supersample);
  read_key(j, "spin", s.spin);
  read_key(j, "seed", s.seed);
  if (j.contains("objects")) {
    if (!j["objects"].is_array()) throw ConfigError("scene: objects must be an array");
    s.objects.clear();
    for (const auto& o : j["objects"]) s.objects.push_back(object_from_json(o));
  }
  return validate_scene(s);
}

json scene_to_json(const DiskScene& s) {
  json j;
  j["preset"] = "empty";
  j["width"] = s.width;
  j["height"] = s.height;
  j["background_intensity"] = s.background_intensity;
  j["object_intensity"] = s.object_intensity;
  j["center"] = vec2_to_json(s.center);
  j["omega"] = s.omega;
  j["frame_count"] = s.frame_count;
  j["pixel_noise_sigma"] = s.pixel_noise_sigma;
  j["supersample"] = s.supersample;
  j["spin"] = s.spin;
  j["seed"] = s.seed;
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    j["objects"].push_back({{"shape", to_string(o.shape)},
                            {"size", o.size},
                            {"orbit_radius", o.orbit_radius},
                            {"initial_angle", o.initial_angle},
                            {"spawn_frame", o.spawn_frame},
                            {"linear_velocity", vec2_to_json(o.linear_velocity)},
                            {"start", vec2_to_json(o.start)},
                            {"label", o.label}});
  }
  return j;
}

FilterModel filter_model_from_json(const json& j, const FilterModel& base) {
  reject_unknown_keys(j, {"model", "q_diag", "r_diag", "delta", "p0_diag", "center", "r_min", "gain"},
                      "filter");
  FilterModel m = base;
  if (j.contains("model")) {
    const ModelKind kind = model_kind_from_string(j["model"].get<std::string>());
    if (kind != base.kind) {
      const Vec2 center = m.center;
      m = kind == ModelKind::kDiskPolar ? FilterModel::disk_polar(center)
                                        : FilterModel::constant_velocity();
    }
  }
  if (j.contains("q_diag")) m.Q = vector_from_json(j["q_diag"], "q_diag").asDiagonal();
  if (j.contains("r_diag")) {
    const Eigen::VectorXd r = vector_from_json(j["r_diag"], "r_diag");
    if (r.size() != 2) throw ConfigError("filter: r_diag must have 2 entries");
    m.R = r.asDiagonal();
  }
  if (j.contains("delta")) {
    const Eigen::VectorXd d = vector_from_json(j["delta"], "delta");
    if (d.size() != 2) throw ConfigError("filter: delta must have 2 entries");
    m.delta = d;
  }
  if (j.contains("p0_diag")) m.p0 = vector_from_json(j["p0_diag"], "p0_diag");
  if (j.contains("center")) m.center = vec2_from_json(j["center"], "center");
  read_key(j, "r_min", m.r_min);
  if (j.contains("gain")) {
    const auto g = j["gain"].get<std::string>();
    if (g == "propagated") m.gain = GainForm::kPropagated;
    else if (g == "pseudo_inverse") m.gain = GainForm::kPseudoInverse;
    else throw ConfigError("filter: gain must be 'propagated' or 'pseudo_inverse'");
  }
  m.validate();
  return m;
}

json filter_model_to_json(const FilterModel& m) {
  return {{"model", to_string(m.kind)},
          {"q_diag", vector_to_json(m.Q.diagonal())},
          {"r_diag", vector_to_json(m.R.diagonal())},
          {"delta", vector_to_json(m.delta)},
          {"p0_diag", vector_to_json(m.p0)},
          {"center", vec2_to_json(m.center)},
          {"r_min", m.r_min},
          {"gain", m.gain == GainForm::kPropagated ? "propagated" : "pseudo_inverse"}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j, {"seed", "backend", "scene", "model", "dvs", "detector", "filters", "snn",
                          "tracker", "ann", "metrics", "write_events", "write_detections"},
                      "run config");
  RunConfig c;
  if (!j.contains("seed")) throw ConfigError("run config: 'seed' is required");
  read_key(j, "seed", c.seed);
  if (j.contains("backend")) c.backend = backend_from_string(j["backend"].get<std::string>());
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  if (j.contains("scene")) {
    c.scene_path = resolve(j["scene"].get<std::string>());
    if (!std::filesystem::exists(c.scene_path))
      throw ConfigError("run config: scene file " + c.scene_path.string() + " does not exist");
  }
  if (j.contains("model")) {
    c.model_path = resolve(j["model"].get<std::string>());
    if (!std::filesystem::exists(c.model_path))
      throw ConfigError("run config: model file " + c.model_path.string() + " does not exist");
  }
  read_key(j, "write_events", c.write_events);
  read_key(j, "write_detections", c.write_detections);

  if (j.contains("dvs")) {
    const auto& d = j["dvs"];
    reject_unknown_keys(d, {"contrast_threshold", "eps", "frame_period", "refractory_period",
                            "noise_rate", "jitter", "seed"},
                        "dvs");
    read_key(d, "contrast_threshold", c.dvs.contrast_threshold);
    read_key(d, "eps", c.dvs.eps);
    read_key(d, "frame_period", c.dvs.frame_period);
    read_key(d, "refractory_period", c.dvs.refractory_period);
    read_key(d, "noise_rate", c.dvs.noise_rate);
    read_key(d, "jitter", c.dvs.jitter);
    read_key(d, "seed", c.dvs.seed);
  }
  if (j.contains("detector")) {
    const auto& d = j["detector"];
    reject_unknown_keys(d, {"tau_det", "a_min", "min_pixels", "windows_per_frame", "link_radius"},
                        "detector");
    read_key(d, "tau_det", c.detector.tau_det);
    read_key(d, "a_min", c.detector.a_min);
    read_key(d, "min_pixels", c.detector.min_pixels);
    read_key(d, "windows_per_frame", c.detector.windows_per_frame);
    read_key(d, "link_radius", c.detector.link_radius);
    if (!(c.detector.tau_det > 0.0) || c.detector.min_pixels < 1 ||
        c.detector.windows_per_frame < 1 || c.detector.link_radius < 1)
      throw ConfigError("detector: tau_det > 0, min_pixels, windows_per_frame, link_radius >= 1");
  }
  auto& t = c.tracker;
  if (j.contains("filters")) {
    const auto& f = j["filters"];
    reject_unknown_keys(f, {"disk_polar", "constant_velocity"}, "filters");
    if (f.contains("disk_polar")) {
      t.disk = filter_model_from_json(f["disk_polar"], t.disk);
      if (f["disk_polar"].contains("center")) c.center_from_scene = false;
    }
    if (f.contains("constant_velocity")) t.cv = filter_model_from_json(f["constant_velocity"], t.cv);
  }
  if (j.contains("snn")) {
    const auto& s = j["snn"];
    reject_unknown_keys(s, {"neurons", "tau_m", "v_th", "v_reset", "t_ref", "dt", "tau_syn",
                            "frame_period", "t_inj", "t_init", "samples", "reg", "decode_window",
                            "discrete_rates", "discrete_synapse", "calibrate_decoders",
                            "omega_scale", "r_scale", "r_ref", "rho_rep"},
                        "snn");
    read_key(s, "neurons", t.snn.neurons);
    read_key(s, "tau_m", t.snn.lif.tau_m);
    read_key(s, "v_th", t.snn.lif.v_th);
    read_key(s, "v_reset", t.snn.lif.v_reset);
    read_key(s, "t_ref", t.snn.lif.t_ref);
    read_key(s, "dt", t.snn.lif.dt);
    read_key(s, "tau_syn", t.snn.tau_syn);
    read_key(s, "frame_period", t.snn.frame_period);
    read_key(s, "t_inj", t.snn.t_inj);
    read_key(s, "t_init", t.snn.t_init);
    read_key(s, "samples", t.snn.samples);
    read_key(s, "reg", t.snn.reg);
    read_key(s, "decode_window", t.snn.decode_window);
    read_key(s, "discrete_rates", t.snn.discrete_rates);
    read_key(s, "discrete_synapse", t.snn.discrete_synapse);
    read_key(s, "calibrate_decoders", t.snn.calibrate_decoders);
    read_key(s, "omega_scale", t.embedding.omega_scale);
    read_key(s, "r_scale", t.embedding.r_scale);
    read_key(s, "r_ref", t.embedding.r_ref);
    read_key(s, "rho_rep", t.embedding.rho_rep);
    t.snn.validate();
  }
  if (j.contains("tracker")) {
    const auto& k = j["tracker"];
    reject_unknown_keys(k, {"gate", "confirm_hits", "confirm_window", "max_misses", "band_min",
                            "band_max", "silence_fraction", "silence_after_frame"},
                        "tracker");
    read_key(k, "gate", t.gate);
    read_key(k, "confirm_hits", t.confirm_hits);
    read_key(k, "confirm_window", t.confirm_window);
    read_key(k, "max_misses", t.max_misses);
    read_key(k, "band_min", t.band_min);
    read_key(k, "band_max", t.band_max);
    read_key(k, "silence_fraction", t.silence_fraction);
    read_key(k, "silence_after_frame", t.silence_after_frame);
  }
  if (j.contains("ann")) {
    const auto& a = j["ann"];
    reject_unknown_keys(a, {"patch_size", "hidden_width", "samples_per_class", "lambda",
                            "target_logit", "decision_threshold", "position_jitter", "rescaled_negatives",
                            "seed"},
                        "ann");
    read_key(a, "patch_size", c.ann.patch_size);
    read_key(a, "hidden_width", c.ann.hidden_width);
    read_key(a, "samples_per_class", c.ann.samples_per_class);
    read_key(a, "lambda", c.ann.lambda);
    read_key(a, "target_logit", c.ann.target_logit);
    read_key(a, "decision_threshold", c.ann.decision_threshold);
    read_key(a, "position_jitter", c.ann.position_jitter);
    read_key(a, "rescaled_negatives", c.ann.rescaled_negatives);
    read_key(a, "seed", c.ann.seed);
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    reject_unknown_keys(m, {"rmse_from", "rmse_to", "omega_from", "omega_to", "equivalence_from",
                            "equivalence_to", "convergence_threshold"},
                        "metrics");
    read_key(m, "rmse_from", c.metrics.rmse_from);
    read_key(m, "rmse_to", c.metrics.rmse_to);
    read_key(m, "omega_from", c.metrics.omega_from);
    read_key(m, "omega_to", c.metrics.omega_to);
    read_key(m, "equivalence_from", c.metrics.equivalence_from);
    read_key(m, "equivalence_to", c.metrics.equivalence_to);
    read_key(m, "convergence_threshold", c.metrics.convergence_threshold);
  }
  t.backend = c.backend;
  t.seed = c.seed;
  t.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(load_json(path), path.parent_path());
}

void write_truth_json(const std::filesystem::path& path, const GroundTruth& truth) {
  json frames = json::array();
  for (const auto& frame : truth) {
    json objs = json::array();
    for (const auto& o : frame)
      objs.push_back({{"label", o.label},
                      {"x", o.position.x()},
                      {"y", o.position.y()},
                      {"theta", o.theta},
                      {"omega", o.omega},
                      {"visible", o.visible}});
    frames.push_back(std::move(objs));
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << frames.dump() << '\n';
}

GroundTruth read_truth_json(const std::filesystem::path& path) {
  const json j = load_json(path);
  if (!j.is_array()) throw ParseError(path.string() + ": truth must be an array of frames", "offset 0");
  GroundTruth truth;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_array())
      throw ParseError(path.string() + ": frame entry is not an array", "frame " + std::to_string(k));
    std::vector<ObjectTruth> frame;
    for (const auto& o : j[k]) {
      try {
        ObjectTruth t;
        t.label = o.at("label").get<int>();
        t.position = Vec2(o.at("x").get<double>(), o.at("y").get<double>());
        t.theta = o.at("theta").get<double>();
        t.omega = o.at("omega").get<double>();
        t.visible = o.at("visible").get<bool>();
        frame.push_back(t);
      } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), "frame " + std::to_string(k));
      }
    }
    truth.push_back(std::move(frame));
  }
  return truth;
}

}  // namespace evtrack
