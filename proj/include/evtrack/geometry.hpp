#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace evtrack {

using Vec2 = Eigen::Vector2d;

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi) return a;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

inline Vec2 rotate_about(const Vec2& p, const Vec2& center, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 d = p - center;
  return center + Vec2(c * d.x() - s * d.y(), s * d.x() + c * d.y());
}

}  // namespace evtrack
