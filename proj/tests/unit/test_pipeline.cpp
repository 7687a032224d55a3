#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "evtrack/config.hpp"
#include "evtrack/error.hpp"
#include "evtrack/metrics.hpp"
#include "evtrack/pipeline.hpp"

using namespace evtrack;
namespace fs = std::filesystem;

namespace {

TrackEstimate row(int frame, int id, const Vec2& p, double omega, TrackStatus st = TrackStatus::kConfirmed) {
  TrackEstimate e;
  e.frame = frame;
  e.id = id;
  e.status = st;
  e.position = p;
  e.omega = omega;
  e.verdict = "modeled";
  e.label = "cross";
  return e;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evtrack_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EVTRACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// A short default-scene sequence rendered once and reused.
struct Fixture {
  fs::path root, data, results;
  RunConfig cfg;
  RunResult result;
  Fixture() {
    root = scratch("fixture");
    data = root / "data";
    results = root / "results";
    DiskScene scene = default_scene();
    scene.frame_count = 24;
    synth(scene, data);
    cfg.metrics.rmse_from = 10;
    cfg.metrics.rmse_to = 23;
    cfg.metrics.omega_from = 12;
    cfg.metrics.omega_to = 23;
    result = run_pipeline(cfg, data, results);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("metrics: window errors, omega errors, earliest-confirmed series against hand values") {
  const DiskScene scene = validate_scene(default_scene());
  const GroundTruth truth = ground_truth(scene);
  std::vector<TrackEstimate> rows;
  for (int k = 0; k < scene.frame_count; ++k) {
    // Track 1 follows the cross 1 px to the right; track 7 follows it later, 3 px off.
    rows.push_back(row(k, 1, truth[k][0].position + Vec2(1, 0), 0.052));
    if (k >= 50) rows.push_back(row(k, 7, truth[k][0].position + Vec2(0, 3), 0.0));
    rows.push_back(row(k, 2, truth[k][2].position + Vec2(0, k % 2 ? 2.0 : 0.0), 0.047,
                       k < 3 ? TrackStatus::kTentative : TrackStatus::kConfirmed));
  }
  const auto assignment = assign_tracks(rows, truth);
  CHECK(assignment == std::map<int, int>{{1, 1}, {2, 3}, {7, 1}});
  MetricsConfig mc;
  const MetricsReport rep = compute_metrics(rows, truth, assignment, mc);
  REQUIRE(rep.objects.size() == 2);
  const ObjectMetrics& cross = rep.objects[0];
  CHECK(cross.object == 1);
  CHECK(cross.window_frames == 50);  // frames 150..199
  CHECK(std::abs(cross.window_mean_error - 1.0) <= 1e-9);
  CHECK(std::abs(cross.mean_omega_error - 0.002) <= 1e-9);
  CHECK(rep.handoffs == 0);
  const ObjectMetrics& circle = rep.objects[1];
  // Frames 150..199: odd frames are 2 px off, 25 of 50.
  CHECK(std::abs(circle.window_mean_error - 1.0) <= 1e-9);
  CHECK(std::abs(circle.window_rmse - std::sqrt(2.0)) <= 1e-9);
  CHECK(std::abs(circle.mean_omega_error - 0.003) <= 1e-9);
  CHECK(circle.confirmed_rows == 197);
  CHECK(rep.identity_swaps == 0);

  // A track that jumps onto another object is a swap.
  std::vector<TrackEstimate> swapped = rows;
  for (auto& e : swapped)
    if (e.id == 1 && e.frame >= 100) e.position = truth[e.frame][1].position;
  CHECK(compute_metrics(swapped, truth, assign_tracks(swapped, truth), mc).identity_swaps == 1);
}

TEST_CASE("metrics: equivalence RMS of known offsets") {
  std::vector<TrackEstimate> a, b;
  for (int k = 0; k <= 200; ++k) {
    TrackEstimate e = row(k, 1, Vec2(0, 0), 0.05);
    e.theta = 3.1;
    e.r = 40;
    a.push_back(e);
    e.theta = -3.1;  // wraps: 2 pi - 6.2 apart
    e.omega = 0.05 + (k % 2 ? 0.01 : -0.01);
    e.r = 41.5;
    b.push_back(e);
  }
  const auto eq = compute_equivalence(a, b, {{1, 3}}, 50, 200);
  REQUIRE(eq.size() == 1);
  CHECK(eq[0].object == 3);
  CHECK(eq[0].frames == 151);
  CHECK(std::abs(eq[0].rms_theta - (2 * M_PI - 6.2)) <= 1e-9);
  CHECK(std::abs(eq[0].rms_omega - 0.01) <= 1e-9);
  CHECK(std::abs(eq[0].rms_r - 1.5) <= 1e-9);
}

TEST_CASE("tracks.csv: round trip and malformed input") {
  std::vector<TrackEstimate> rows = {row(3, 2, Vec2(10.25, 20.5), 0.05), row(4, 9, Vec2(1, 2), -0.01)};
  rows[1].label = "";
  rows[1].verdict = "pending";
  rows[1].status = TrackStatus::kTentative;
  std::stringstream ss;
  write_tracks_header(ss);
  write_tracks(ss, rows);
  const auto back = read_tracks_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].position == rows[0].position);
  CHECK(back[1].status == TrackStatus::kTentative);
  CHECK(back[1].label.empty());
  CHECK(back[1].verdict == "pending");
  CHECK(back[1].omega == doctest::Approx(-0.01));

  const std::string header = "frame,id,label,status,x,y,vx,vy,theta,omega,r,verdict,confidence\n";
  std::istringstream bad_header("frame,id\n1,2\n");
  CHECK_THROWS_AS(read_tracks_csv(bad_header), ParseError);
  std::istringstream short_row(header + "1,2,cross,confirmed,1,2\n");
  CHECK_THROWS_AS(read_tracks_csv(short_row), ParseError);
  std::istringstream bad_num(header + "1,2,cross,confirmed,x,2,0,0,0,0,0,modeled,1\n");
  CHECK_THROWS_AS(read_tracks_csv(bad_num), ParseError);
  std::istringstream bad_status(header + "1,2,cross,alive,1,2,0,0,0,0,0,modeled,1\n");
  CHECK_THROWS_AS(read_tracks_csv(bad_status), ParseError);
}

TEST_CASE("run config: required keys, unknown keys, references, overrides") {
  const fs::path dir = scratch("config");
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::object(), dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"sede", 2}}, dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"backend", "quantum"}}, dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"scene", "missing.json"}}, dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"detector", {{"tau_det", 0}}}}, dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"snn", {{"neurons", 10}}}}, dir), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"tracker", {{"gait", 3}}}}, dir), ConfigError);

  save_json(dir / "scene.json", scene_to_json(default_scene()));
  const RunConfig c = run_config_from_json(
      {{"seed", 9},
       {"backend", "both"},
       {"scene", "scene.json"},
       {"filters", {{"disk_polar", {{"gain", "pseudo_inverse"}, {"delta", {5, 6}}}}}},
       {"snn", {{"neurons", 400}, {"t_init", 0.3}}},
       {"metrics", {{"rmse_from", 7}}}},
      dir);
  CHECK(c.seed == 9);
  CHECK(c.backend == Backend::kBoth);
  CHECK(c.scene_path == dir / "scene.json");
  CHECK(c.tracker.disk.gain == GainForm::kPseudoInverse);
  CHECK(c.tracker.disk.delta == Eigen::Vector2d(5, 6));
  CHECK(c.center_from_scene);
  CHECK(c.tracker.snn.neurons == 400);
  CHECK(c.tracker.snn.t_init == 0.3);
  CHECK(c.metrics.rmse_from == 7);

  const DiskScene s = scene_from_json(scene_to_json(intruder_scene(40)));
  CHECK(s.objects.size() == 4);
  CHECK(s.objects[3].spawn_frame == 40);
  CHECK_THROWS_AS(scene_from_json({{"preset", "moon"}}), ConfigError);
}

TEST_CASE("pipeline: synth outputs and a short dense run") {
  Fixture& f = fixture();
  CHECK(fs::exists(frame_path(f.data, 0)));
  CHECK(fs::exists(frame_path(f.data, 23)));
  CHECK_FALSE(fs::exists(frame_path(f.data, 24)));
  CHECK(read_truth_json(f.data / "truth.json").size() == 24);
  for (const char* name : {"tracks.csv", "detections.csv", "errors.csv", "omega.csv", "trajectories.csv",
                           "summary.json", "model.json", "plot_a.gp", "plot_b.gp", "plot_c.gp"})
    CHECK_MESSAGE(fs::exists(f.results / name), name);
  CHECK(lint_plot_scripts(f.results).empty());

  // Exactly 3 tracks, all confirmed and validated as modeled by frame 7.
  const auto rows = read_tracks_csv(f.results / "tracks.csv");
  std::map<int, int> confirmed_at;
  for (const auto& e : rows) {
    if (e.status == TrackStatus::kConfirmed && !confirmed_at.count(e.id)) confirmed_at[e.id] = e.frame;
    if (e.frame == 7) {
      CHECK(e.status == TrackStatus::kConfirmed);
      CHECK(e.verdict == "modeled");
    }
  }
  CHECK(confirmed_at.size() == 3);
  for (const auto& [id, k] : confirmed_at) CHECK(k <= 7);

  const nlohmann::json summary = load_json(f.results / "summary.json");
  CHECK(summary["tracks_created"] == 3);
  CHECK(summary["frames"] == 24);
  CHECK(summary["backend"] == "dense");
}

TEST_CASE("pipeline: reported metrics match an independent recompute from tracks.csv and truth.json") {
  Fixture& f = fixture();
  const GroundTruth truth = read_truth_json(f.data / "truth.json");
  std::ifstream in(f.results / "tracks.csv");
  std::string line;
  std::getline(in, line);
  // track -> label at first confirmation; label -> errors in the window.
  std::map<int, int> label_of;
  std::map<int, std::vector<double>> errs;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::vector<std::string> c;
    for (std::string cell; std::getline(ls, cell, ',');) c.push_back(cell);
    const int k = std::stoi(c[0]), id = std::stoi(c[1]);
    const Vec2 p(std::stod(c[4]), std::stod(c[5]));
    if (c[3] == "confirmed" && !label_of.count(id)) {
      double best = 1e300;
      for (const auto& o : truth[k])
        if (o.visible && (o.position - p).norm() < best) {
          best = (o.position - p).norm();
          label_of[id] = o.label;
        }
    }
    if (!label_of.count(id) || k < 10 || k > 23) continue;
    for (const auto& o : truth[k])
      if (o.label == label_of[id]) errs[o.label].push_back((o.position - p).norm());
  }
  REQUIRE(f.result.primary.objects.size() == 3);
  const MetricsReport again = evaluate(f.results, f.data / "truth.json", f.cfg.metrics);
  for (const auto& om : f.result.primary.objects) {
    const auto& e = errs[om.object];
    REQUIRE(static_cast<int>(e.size()) == om.window_frames);
    double mean = 0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    CHECK(std::abs(mean - om.window_mean_error) <= 1e-9);
  }
  for (std::size_t i = 0; i < again.objects.size(); ++i)
    CHECK(again.objects[i].window_mean_error == f.result.primary.objects[i].window_mean_error);
}

TEST_CASE("plot lint reports a referenced file that does not exist") {
  Fixture& f = fixture();
  const fs::path dir = scratch("lint");
  for (const char* name : {"plot_a.gp", "plot_b.gp", "plot_c.gp", "trajectories.csv", "omega.csv"})
    fs::copy_file(f.results / name, dir / name);
  CHECK(lint_plot_scripts(dir) == std::vector<std::string>{"errors.csv"});
}

TEST_CASE("cli: exit codes 0 / 2 / 3") {
  Fixture& f = fixture();
  const fs::path dir = scratch("cli");
  write_text(dir / "scene.json", R"({"preset": "default", "frame_count": 6})");
  write_text(dir / "run.json", R"({"seed": 3})");
  write_text(dir / "bad_run.json", R"({"seed": 3, "detector": {"a_min": "high"}})");
  write_text(dir / "bad_scene.json", R"({"preset": "default", "omega": "fast"})");
  write_text(dir / "not_json.json", "{ seed: ");

  CHECK(run_cli("synth --config " + (dir / "scene.json").string() + " --out " + (dir / "data").string()) == 0);
  CHECK(run_cli("synth --config " + (dir / "bad_scene.json").string() + " --out " + (dir / "x").string()) == 2);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("run --config " + (dir / "run.json").string()) == 2);
  CHECK(run_cli("run --config " + (dir / "not_json.json").string() + " --data " + (dir / "data").string() +
                " --out " + (dir / "r").string()) == 2);
  CHECK(run_cli("run --config " + (dir / "bad_run.json").string() + " --data " + (dir / "data").string() +
                " --out " + (dir / "r").string()) == 2);
  CHECK(run_cli("run --config " + (dir / "run.json").string() + " --data " + (dir / "data").string() +
                " --out " + (dir / "r").string() + " --backend analog") == 2);
  // A missing input directory is a configuration problem.
  CHECK(run_cli("run --config " + (dir / "run.json").string() + " --data " + (dir / "nowhere").string() +
                " --out " + (dir / "r").string()) == 2);

  // A corrupt frame fails a pipeline stage.
  const std::string model = " --out " + (dir / "r").string();
  write_text(dir / "run_model.json",
             R"({"seed": 3, "model": ")" + (f.results / "model.json").string() + R"("})");
  write_text(frame_path(dir / "data", 4), "P5\n128 128\n255\nshort");
  CHECK(run_cli("run --config " + (dir / "run_model.json").string() + " --data " + (dir / "data").string() +
                model) == 3);

  CHECK(run_cli("eval --results " + f.results.string() + " --truth " + (f.data / "truth.json").string()) == 0);
  CHECK(run_cli("eval --results " + (dir / "nowhere").string() + " --truth " +
                (f.data / "truth.json").string()) != 0);
}
