#pragma once

#include <iosfwd>
#include <vector>

#include "evtrack/dvs.hpp"
#include "evtrack/geometry.hpp"

namespace evtrack {

/// Per-pixel leaky accumulator of event mass (polarity ignored).
struct EventSurface {
  int width = 0;
  int height = 0;
  std::vector<double> mass;
  double tau_det = 2.0;        // frames
  double frame_period = 0.1;   // seconds per frame
  double last_update = 0.0;    // seconds

  EventSurface() = default;
  EventSurface(int w, int h, double tau_frames, double period, double t0 = 0.0);

  double at(int x, int y) const { return mass[static_cast<std::size_t>(y) * width + x]; }
};

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

struct Detection {
  Vec2 centroid = Vec2::Zero();
  double mass = 0.0;
  int pixels = 0;
  BoundingBox bbox;
  int frame = 0;
  int window = 0;
};

struct DetectorConfig {
  double tau_det = 0.5;   // frames
  double a_min = 1.5;
  int min_pixels = 3;
  int windows_per_frame = 1;
  int link_radius = 12;
};

/// Decays the surface to `until`, then adds one unit per event.
void accumulate(EventSurface& surface, const EventStream& events, double until,
                kernels::Exec exec = kernels::Exec::kParallel);

/// Connected components of {mass >= a_min} with at least min_pixels pixels,
/// sorted by mass (desc), then centroid x, then centroid y. Two mask pixels
/// are linked when their Chebyshev distance is <= link_radius (1 = 8-connected).
std::vector<Detection> extract_detections(const EventSurface& surface, double a_min,
                                          int min_pixels, int frame = 0, int window = 0,
                                          int link_radius = 1);

/// detections.csv: header "frame,window,x,y,mass".
void write_detections_header(std::ostream& out);
void write_detections(std::ostream& out, const std::vector<Detection>& detections);

}  // namespace evtrack
