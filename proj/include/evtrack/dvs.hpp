#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "evtrack/frame.hpp"
#include "evtrack/kernels.hpp"

namespace evtrack {

struct Event {
  double t = 0.0;  // seconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

using EventStream = std::vector<Event>;

struct DvsConfig {
  double contrast_threshold = 0.15;  // log-luminance units
  double eps = 1e-3;
  double frame_period = 0.1;  // seconds of simulated time per frame
  // Optional knobs, all off by default.
  double refractory_period = 0.0;  // seconds; events closer than this at a pixel are dropped
  double noise_rate = 0.0;         // spurious events per pixel per frame
  bool jitter = false;             // seeded uniform timestamp jitter inside each slot
  std::uint64_t seed = 0;
};

struct DvsState {
  int width = 0;
  int height = 0;
  std::vector<double> ref_log;
  DvsConfig config;
};

DvsState init_reference(const Frame& frame0, const DvsConfig& config);

/// Events for the transition into frame `k`, timestamps inside
/// (k*T, (k+1)*T), sorted by (t, y, x). Updates the per-pixel reference.
EventStream emulate_step(DvsState& state, const Frame& frame, int k,
                         kernels::Exec exec = kernels::Exec::kParallel);

/// Brute-force scalar reference of emulate_step without optional knobs.
/// Kept for tests and the benchmark.
EventStream emulate_step_reference(DvsState& state, const Frame& frame, int k);

// events.csv: header "t,x,y,p", t with 9 decimals.
void write_events_csv(std::ostream& out, const EventStream& events);
EventStream read_events_csv(std::istream& in);
void write_events_csv(const std::filesystem::path& path, const EventStream& events);
EventStream read_events_csv(const std::filesystem::path& path);

// .evb: "EVB1" then packed little-endian records (f64 t, u16 x, u16 y, i8 p).
void write_events_evb(std::ostream& out, const EventStream& events);
EventStream read_events_evb(std::istream& in);
void write_events_evb(const std::filesystem::path& path, const EventStream& events);
EventStream read_events_evb(const std::filesystem::path& path);

}  // namespace evtrack
