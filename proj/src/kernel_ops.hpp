#pragma once

// Per-element bodies shared by the serial and OpenMP kernels so both paths
// run identical arithmetic.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "evtrack/kernels.hpp"

namespace evtrack::kernels::detail {

inline double pixel_coverage(std::span<const RasterShape> shapes, int px, int py,
                             double background, int ss) {
  double acc = 0.0;
  const double step = 1.0 / ss;
  for (int sy = 0; sy < ss; ++sy) {
    const double y = py - 0.5 + (sy + 0.5) * step;
    for (int sx = 0; sx < ss; ++sx) {
      const double x = px - 0.5 + (sx + 0.5) * step;
      double v = background;
      // Later shapes paint over earlier ones.
      for (const auto& s : shapes) {
        if (shape_contains(s, x, y)) v = s.intensity;
      }
      acc += v;
    }
  }
  return acc / (ss * ss);
}

inline std::uint8_t lif_neuron(const LifConstants& c, double& u, int& refractory, double current,
                               bool silenced) {
  if (silenced) {
    u = c.v_reset;
    refractory = 0;
    return 0;
  }
  if (refractory > 0) {
    u = c.v_reset;
    --refractory;
    return 0;
  }
  bool fired = u >= c.v_th;
  if (!fired) {
    u += c.dt_over_tau * (-(u - c.v_reset) + current);
    fired = u >= c.v_th;
  }
  if (fired) {
    u = c.v_reset;
    refractory = c.refractory_steps;
    return 1;
  }
  return 0;
}

/// Signed number of threshold crossings, truncated toward zero. Ratios within
/// 1e-9 of an integer snap to it so programmed steps of exactly k*C survive
/// the exp/log round trip.
inline int quantize_log_change(double delta, double c) {
  const double q = delta / c;
  const double r = std::round(q);
  if (std::abs(q - r) < 1e-9) return static_cast<int>(r);
  return static_cast<int>(std::trunc(q));
}

}  // namespace evtrack::kernels::detail
