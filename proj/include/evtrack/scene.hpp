#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evtrack/frame.hpp"
#include "evtrack/geometry.hpp"
#include "evtrack/kernels.hpp"

namespace evtrack {

using Shape = kernels::ShapeKind;

std::string to_string(Shape s);
Shape shape_from_string(const std::string& name);

/// One object on (or crossing) the disk. Orbiting objects have
/// orbit_radius > 0 and zero velocity; intruders have orbit_radius == 0, a
/// nonzero linear_velocity and start at `start` on spawn_frame.
struct SceneObject {
  Shape shape = Shape::kCircle;
  double size = 8.0;
  double orbit_radius = 0.0;
  double initial_angle = 0.0;
  int spawn_frame = 0;
  Vec2 linear_velocity = Vec2::Zero();
  Vec2 start = Vec2::Zero();
  int label = 0;

  bool orbiting() const { return orbit_radius > 0.0; }
};

struct DiskScene {
  int width = 128;
  int height = 128;
  double background_intensity = 0.2;
  double object_intensity = 0.9;
  Vec2 center{64.0, 64.0};
  double omega = 0.05;  // rad/frame
  int frame_count = 200;
  double pixel_noise_sigma = 0.0;
  int supersample = 4;
  // Orbiting shapes keep their initial orientation unless spin is set.
  bool spin = false;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 1;
};

/// Cross / triangle / circle on orbits of 25 / 38 / 50 px, labels 1 / 2 / 3.
DiskScene default_scene();

/// Default scene plus a square intruder crossing the top-left corner from
/// `spawn_frame` on (label 4).
DiskScene intruder_scene(int spawn_frame = 80);

/// Radius of the smallest disk about the object center that covers the shape.
double bounding_radius(Shape shape, double size);

/// Returns the scene if every invariant holds, throws ConfigError otherwise.
DiskScene validate_scene(const DiskScene& cfg);

struct ObjectTruth {
  int label = 0;
  Vec2 position = Vec2::Zero();
  double theta = 0.0;  // not wrapped
  double omega = 0.0;
  bool visible = false;
};

/// truth[k][i] is object i (scene order) at frame k.
using GroundTruth = std::vector<std::vector<ObjectTruth>>;

ObjectTruth object_truth(const DiskScene& scene, const SceneObject& obj, int k);
GroundTruth ground_truth(const DiskScene& scene);

Frame render_frame(const DiskScene& scene, int k,
                   kernels::Exec exec = kernels::Exec::kParallel);

/// Frame with no objects; used by ANN training for background crops.
Frame render_shapes(const DiskScene& scene, std::span<const kernels::RasterShape> shapes, int k,
                    kernels::Exec exec = kernels::Exec::kParallel);

}  // namespace evtrack
