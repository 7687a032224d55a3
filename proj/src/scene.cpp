#include "evtrack/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "evtrack/error.hpp"

namespace evtrack {

std::string to_string(Shape s) {
  switch (s) {
    case Shape::kCross: return "cross";
    case Shape::kTriangle: return "triangle";
    case Shape::kCircle: return "circle";
    case Shape::kSquare: return "square";
  }
  return "unknown";
}

Shape shape_from_string(const std::string& name) {
  if (name == "cross") return Shape::kCross;
  if (name == "triangle") return Shape::kTriangle;
  if (name == "circle") return Shape::kCircle;
  if (name == "square") return Shape::kSquare;
  throw ConfigError("unknown shape '" + name + "'");
}

DiskScene default_scene() {
  DiskScene s;
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  s.objects = {
      SceneObject{Shape::kCross, 11.0, 25.0, 0.0, 0, Vec2::Zero(), Vec2::Zero(), 1},
      SceneObject{Shape::kTriangle, 9.0, 38.0, third, 0, Vec2::Zero(), Vec2::Zero(), 2},
      SceneObject{Shape::kCircle, 8.0, 50.0, 2.0 * third, 0, Vec2::Zero(), Vec2::Zero(), 3},
  };
  return s;
}

DiskScene intruder_scene(int spawn_frame) {
  DiskScene s = default_scene();
  SceneObject sq;
  sq.shape = Shape::kSquare;
  sq.size = 5.0;
  sq.spawn_frame = spawn_frame;
  sq.start = Vec2(6.0, 30.0);
  sq.linear_velocity = Vec2(0.25, -0.25);
  sq.label = 4;
  s.objects.push_back(sq);
  return s;
}

double bounding_radius(Shape shape, double size) {
  switch (shape) {
    case Shape::kCircle: return size;
    case Shape::kTriangle: return size / std::numbers::sqrt3;
    case Shape::kSquare: return size * std::numbers::sqrt2;
    case Shape::kCross: return std::hypot(size, 1.0);
  }
  return size;
}

namespace {

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

}  // namespace

DiskScene validate_scene(const DiskScene& cfg) {
  if (cfg.width < 32 || cfg.height < 32) throw ConfigError("scene: width and height must be >= 32");
  if (!(cfg.background_intensity >= 0.0 && cfg.background_intensity < cfg.object_intensity &&
        cfg.object_intensity <= 1.0))
    throw ConfigError("scene: need 0 <= background_intensity < object_intensity <= 1");
  if (!std::isfinite(cfg.omega)) throw ConfigError("scene: omega must be finite");
  if (cfg.frame_count < 1) throw ConfigError("scene: frame_count must be >= 1");
  if (!finite(cfg.center)) throw ConfigError("scene: center must be finite");
  if (!(std::isfinite(cfg.pixel_noise_sigma) && cfg.pixel_noise_sigma >= 0.0))
    throw ConfigError("scene: pixel_noise_sigma must be finite and >= 0");
  if (cfg.supersample < 1) throw ConfigError("scene: supersample must be >= 1");

  const double room = std::min({cfg.center.x(), cfg.center.y(), cfg.width - 1 - cfg.center.x(),
                                cfg.height - 1 - cfg.center.y()});
  std::set<int> labels;
  std::vector<double> radii;
  for (const auto& o : cfg.objects) {
    if (!labels.insert(o.label).second)
      throw ConfigError("scene: duplicate object label " + std::to_string(o.label));
    if (!(std::isfinite(o.size) && o.size > 0.0))
      throw ConfigError("scene: object size must be positive");
    if (!std::isfinite(o.orbit_radius) || !std::isfinite(o.initial_angle) ||
        !finite(o.linear_velocity) || !finite(o.start))
      throw ConfigError("scene: object parameters must be finite");
    if (o.spawn_frame < 0) throw ConfigError("scene: spawn_frame must be >= 0");
    const bool orbits = o.orbit_radius > 0.0;
    const bool moves = o.linear_velocity.squaredNorm() > 0.0;
    if (orbits == moves || o.orbit_radius < 0.0)
      throw ConfigError("scene: object " + std::to_string(o.label) +
                        " needs exactly one of orbit_radius > 0 or nonzero linear_velocity");
    if (orbits) {
      if (o.orbit_radius + bounding_radius(o.shape, o.size) > room)
        throw ConfigError("scene: orbit of object " + std::to_string(o.label) +
                          " leaves the image");
      for (double r : radii)
        if (std::abs(r - o.orbit_radius) < 1e-9)
          throw ConfigError("scene: two objects share orbit radius " +
                            std::to_string(o.orbit_radius));
      radii.push_back(o.orbit_radius);
    }
  }
  return cfg;
}

ObjectTruth object_truth(const DiskScene& scene, const SceneObject& obj, int k) {
  ObjectTruth t;
  t.label = obj.label;
  if (obj.orbiting()) {
    t.theta = obj.initial_angle + scene.omega * k;
    t.omega = scene.omega;
    t.position = scene.center + obj.orbit_radius * Vec2(std::cos(t.theta), std::sin(t.theta));
    t.visible = k >= obj.spawn_frame;
  } else {
    t.theta = obj.initial_angle;
    t.omega = 0.0;
    t.position = obj.start + obj.linear_velocity * static_cast<double>(std::max(0, k - obj.spawn_frame));
    t.visible = k >= obj.spawn_frame && t.position.x() >= 0.0 && t.position.y() >= 0.0 &&
                t.position.x() <= scene.width - 1 && t.position.y() <= scene.height - 1;
  }
  return t;
}

GroundTruth ground_truth(const DiskScene& scene) {
  GroundTruth gt(static_cast<std::size_t>(scene.frame_count));
  for (int k = 0; k < scene.frame_count; ++k) {
    auto& row = gt[static_cast<std::size_t>(k)];
    row.reserve(scene.objects.size());
    for (const auto& o : scene.objects) row.push_back(object_truth(scene, o, k));
  }
  return gt;
}

Frame render_shapes(const DiskScene& scene, std::span<const kernels::RasterShape> shapes, int k,
                    kernels::Exec exec) {
  Frame f(scene.width, scene.height, k);
  kernels::rasterize(exec, shapes, scene.width, scene.height, scene.background_intensity,
                     scene.supersample, f.pixels);
  if (scene.pixel_noise_sigma > 0.0) {
    std::mt19937_64 rng(scene.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(k));
    std::normal_distribution<double> noise(0.0, scene.pixel_noise_sigma);
    for (auto& p : f.pixels) p += noise(rng);
  }
  for (auto& p : f.pixels) p = std::clamp(p, 0.0, 1.0);
  return f;
}

Frame render_frame(const DiskScene& scene, int k, kernels::Exec exec) {
  if (k < 0 || k >= scene.frame_count)
    throw ConfigError("render_frame: index " + std::to_string(k) + " out of range");
  std::vector<kernels::RasterShape> shapes;
  for (const auto& o : scene.objects) {
    const ObjectTruth t = object_truth(scene, o, k);
    if (!t.visible) continue;
    const double orientation = (o.orbiting() && scene.spin) ? t.theta : o.initial_angle;
    shapes.push_back({o.shape, t.position.x(), t.position.y(), o.size, orientation,
                      scene.object_intensity});
  }
  return render_shapes(scene, shapes, k, exec);
}

}  // namespace evtrack
