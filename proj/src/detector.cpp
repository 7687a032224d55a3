#include "evtrack/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "evtrack/error.hpp"

namespace evtrack {

EventSurface::EventSurface(int w, int h, double tau_frames, double period, double t0)
    : width(w),
      height(h),
      mass(static_cast<std::size_t>(w) * h, 0.0),
      tau_det(tau_frames),
      frame_period(period),
      last_update(t0) {
  if (w <= 0 || h <= 0) throw ConfigError("surface: empty geometry");
  if (!(tau_frames > 0.0) || !(period > 0.0))
    throw ConfigError("surface: tau_det and frame_period must be > 0");
}

void accumulate(EventSurface& surface, const EventStream& events, double until, kernels::Exec exec) {
  if (until < surface.last_update) throw ConfigError("accumulate: time moved backwards");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.t > until) throw ConfigError("accumulate: event after the integration horizon");
    if (i > 0 && e.t < events[i - 1].t) throw ConfigError("accumulate: events not sorted by time");
    if (e.x >= surface.width || e.y >= surface.height)
      throw ConfigError("accumulate: event outside the surface");
  }
  const double frames = (until - surface.last_update) / surface.frame_period;
  if (frames > 0.0) kernels::scale(exec, surface.mass, std::exp(-frames / surface.tau_det));
  for (const auto& e : events) surface.mass[static_cast<std::size_t>(e.y) * surface.width + e.x] += 1.0;
  surface.last_update = until;
}

std::vector<Detection> extract_detections(const EventSurface& surface, double a_min,
                                          int min_pixels, int frame, int window, int link_radius) {
  if (link_radius < 1) throw ConfigError("extract_detections: link_radius must be >= 1");
  const int w = surface.width, h = surface.height;
  std::vector<int> label(surface.mass.size(), -1);
  std::vector<Detection> out;
  std::vector<int> stack;
  int next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p0 = static_cast<std::size_t>(y) * w + x;
      if (label[p0] >= 0 || surface.mass[p0] < a_min) continue;
      Detection d;
      d.frame = frame;
      d.window = window;
      d.bbox = {x, y, x, y};
      double sx = 0.0, sy = 0.0;
      stack.assign(1, static_cast<int>(p0));
      label[p0] = next;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int px = p % w, py = p / w;
        const double m = surface.mass[static_cast<std::size_t>(p)];
        d.mass += m;
        sx += m * px;
        sy += m * py;
        ++d.pixels;
        d.bbox.x0 = std::min(d.bbox.x0, px);
        d.bbox.y0 = std::min(d.bbox.y0, py);
        d.bbox.x1 = std::max(d.bbox.x1, px);
        d.bbox.y1 = std::max(d.bbox.y1, py);
        for (int dy = -link_radius; dy <= link_radius; ++dy) {
          for (int dx = -link_radius; dx <= link_radius; ++dx) {
            const int nx = px + dx, ny = py + dy;
            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
            if (label[q] >= 0 || surface.mass[q] < a_min) continue;
            label[q] = next;
            stack.push_back(static_cast<int>(q));
          }
        }
      }
      ++next;
      if (d.pixels < min_pixels) continue;
      d.centroid = Vec2(sx / d.mass, sy / d.mass);
      out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.mass != b.mass) return a.mass > b.mass;
    if (a.centroid.x() != b.centroid.x()) return a.centroid.x() < b.centroid.x();
    return a.centroid.y() < b.centroid.y();
  });
  return out;
}

void write_detections_header(std::ostream& out) { out << "frame,window,x,y,mass\n"; }

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  out << std::fixed << std::setprecision(6);
  for (const auto& d : detections)
    out << d.frame << ',' << d.window << ',' << d.centroid.x() << ',' << d.centroid.y() << ','
        << d.mass << '\n';
}

}  // namespace evtrack
