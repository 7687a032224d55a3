#include <doctest.h>

#include <cmath>
#include <sstream>

#include "evtrack/detector.hpp"
#include "evtrack/error.hpp"
#include "evtrack/scene.hpp"

using namespace evtrack;

namespace {

EventStream blob(double t, int cx, int cy, int half, int repeats) {
  EventStream ev;
  for (int r = 0; r < repeats; ++r)
    for (int y = cy - half; y <= cy + half; ++y)
      for (int x = cx - half; x <= cx + half; ++x)
        ev.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), 1});
  return ev;
}

}  // namespace

TEST_CASE("surface decay and accumulation arithmetic") {
  EventSurface s(8, 8, 2.0, 0.1, 0.0);
  accumulate(s, EventStream(5, Event{0.0, 2, 3, 1}), 0.0);
  CHECK(s.at(2, 3) == 5.0);
  accumulate(s, {}, 0.1);  // one frame, tau_det = 2
  CHECK(s.at(2, 3) == doctest::Approx(5.0 * std::exp(-0.5)).epsilon(1e-14));
  CHECK(s.last_update == 0.1);
  accumulate(s, {{0.15, 2, 3, -1}}, 0.2);  // polarity ignored
  CHECK(s.at(2, 3) == doctest::Approx(5.0 * std::exp(-1.0) + 1.0).epsilon(1e-14));
}

TEST_CASE("interleaved accumulation equals the per-event weighted-sum oracle") {
  const DiskScene scene = validate_scene(default_scene());
  DvsState st = init_reference(render_frame(scene, 0), {});
  EventSurface surface(128, 128, 0.5, 0.1, 0.1);
  std::vector<std::pair<Event, double>> log;  // event and the horizon it was added at
  for (int k = 1; k <= 5; ++k) {
    const EventStream ev = emulate_step(st, render_frame(scene, k), k);
    // Two windows per frame.
    const double mid = (k + 0.5) * 0.1, end = (k + 1) * 0.1;
    EventStream first, second;
    for (const auto& e : ev) (e.t <= mid ? first : second).push_back(e);
    accumulate(surface, first, mid);
    accumulate(surface, second, end);
    for (const auto& e : first) log.push_back({e, mid});
    for (const auto& e : second) log.push_back({e, end});
    std::vector<double> oracle(128 * 128, 0.0);
    for (const auto& [e, added] : log)
      oracle[static_cast<std::size_t>(e.y) * 128 + e.x] += std::exp(-(end - added) / (0.5 * 0.1));
    double worst = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i)
      worst = std::max(worst, std::abs(oracle[i] - surface.mass[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("centroids: translation equivariance and multiplicity homogeneity") {
  const DiskScene scene = validate_scene(default_scene());
  DvsState st = init_reference(render_frame(scene, 0), {});
  emulate_step(st, render_frame(scene, 1), 1);
  const EventStream ev = emulate_step(st, render_frame(scene, 2), 2);
  auto detect = [](const EventStream& e, double a_min) {
    EventSurface s(160, 160, 0.5, 0.1, 0.2);
    accumulate(s, e, 0.3);
    return extract_detections(s, a_min, 3, 2, 0, 12);
  };
  const auto base = detect(ev, 1.5);
  REQUIRE(base.size() == 3);
  EventStream moved = ev, doubled;
  for (auto& e : moved) {
    e.x += 7;
    e.y += 11;
  }
  for (const auto& e : ev) {
    doubled.push_back(e);
    doubled.push_back(e);
  }
  const auto shifted = detect(moved, 1.5);
  const auto twice = detect(doubled, 3.0);  // same mask at twice the mass
  REQUIRE(shifted.size() == 3);
  REQUIRE(twice.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(shifted[i].centroid.x() == doctest::Approx(base[i].centroid.x() + 7).epsilon(1e-12));
    CHECK(shifted[i].centroid.y() == doctest::Approx(base[i].centroid.y() + 11).epsilon(1e-12));
    CHECK((twice[i].centroid - base[i].centroid).norm() < 1e-12);
    CHECK(twice[i].mass == doctest::Approx(2 * base[i].mass));
    CHECK(base[i].centroid.x() >= base[i].bbox.x0);
    CHECK(base[i].centroid.x() <= base[i].bbox.x1);
  }
}

TEST_CASE("components: threshold, min_pixels, centroid, ordering") {
  EventSurface s(64, 64, 0.5, 0.1, 0.0);
  // Spec example: one 3x3 block of value 2 -> centroid at its center, mass 18.
  {
    EventSurface one(16, 16, 0.5, 0.1, 0.0);
    accumulate(one, blob(0.0, 5, 6, 1, 2), 0.0);
    const auto d = extract_detections(one, 1.5, 3);
    REQUIRE(d.size() == 1);
    CHECK(d[0].mass == 18.0);
    CHECK(d[0].centroid == Vec2(5, 6));
  }
  EventStream ev = blob(0.0, 10, 10, 1, 3);  // 9 px, mass 3 each
  const auto big = blob(0.0, 40, 30, 2, 2);   // 25 px, mass 2 each
  ev.insert(ev.end(), big.begin(), big.end());
  ev.push_back({0.0, 60, 60, 1});             // lone pixel
  ev.push_back({0.0, 60, 60, 1});
  accumulate(s, ev, 0.0);
  auto d = extract_detections(s, 1.5, 3, 7, 0);
  REQUIRE(d.size() == 2);
  CHECK(d[0].mass == doctest::Approx(50.0));  // sorted by mass desc
  CHECK(d[0].centroid.x() == doctest::Approx(40.0));
  CHECK(d[0].centroid.y() == doctest::Approx(30.0));
  CHECK(d[0].pixels == 25);
  CHECK(d[0].frame == 7);
  CHECK(d[1].centroid.x() == doctest::Approx(10.0));
  CHECK(d[1].bbox.x0 == 9);
  CHECK(d[1].bbox.x1 == 11);
  CHECK(extract_detections(s, 2.5, 3).size() == 1);
  CHECK(extract_detections(s, 1.5, 1).size() == 3);
  CHECK(extract_detections(s, 1.5, 30).empty());
}

TEST_CASE("8-connectivity vs linking radius") {
  EventSurface s(32, 32, 0.5, 0.1, 0.0);
  EventStream ev = blob(0.0, 5, 5, 1, 2);
  const auto far = blob(0.0, 12, 5, 1, 2);  // 4 px gap
  ev.insert(ev.end(), far.begin(), far.end());
  accumulate(s, ev, 0.0);
  CHECK(extract_detections(s, 1.5, 1, 0, 0, 1).size() == 2);
  CHECK(extract_detections(s, 1.5, 1, 0, 0, 5).size() == 1);
  CHECK_THROWS_AS(extract_detections(s, 1.5, 1, 0, 0, 0), ConfigError);
}

TEST_CASE("surface is empty without events; detections csv") {
  EventSurface s(16, 16, 0.5, 0.1, 0.0);
  accumulate(s, {}, 1.0);
  CHECK(extract_detections(s, 1.5, 3).empty());
  std::ostringstream out;
  write_detections_header(out);
  Detection d;
  d.frame = 3;
  d.window = 1;
  d.centroid = Vec2(1.5, 2.25);
  d.mass = 10;
  write_detections(out, {d});
  CHECK(out.str() == "frame,window,x,y,mass\n3,1,1.500000,2.250000,10.000000\n");
}

TEST_CASE("accumulate rejects unsorted, future and out-of-surface events") {
  EventSurface s(4, 4, 0.5, 0.1, 1.0);
  CHECK_THROWS_AS(accumulate(s, {{1.06, 1, 1, 1}, {1.05, 1, 1, 1}}, 1.1), ConfigError);
  CHECK_THROWS_AS(accumulate(s, {{1.2, 1, 1, 1}}, 1.1), ConfigError);
  CHECK_THROWS_AS(accumulate(s, {{1.05, 9, 1, 1}}, 1.1), ConfigError);
  CHECK_THROWS_AS(accumulate(s, {}, 0.5), ConfigError);
}
