#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; both produce
// bit-identical results (same per-element arithmetic, no reductions across
// elements). The dispatchers at the bottom pick one by Exec.

#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace evtrack::kernels {

enum class Exec { kSerial, kParallel };

enum class ShapeKind { kCross, kTriangle, kCircle, kSquare };

/// One filled shape to rasterize. `size` is the disk radius, square
/// half-side, triangle side length, or cross arm length.
struct RasterShape {
  ShapeKind kind = ShapeKind::kCircle;
  double cx = 0.0;
  double cy = 0.0;
  double size = 1.0;
  double orientation = 0.0;
  double intensity = 1.0;
};

/// Point-in-shape test in image coordinates.
bool shape_contains(const RasterShape& s, double x, double y);

struct LifConstants {
  double dt = 1e-3;
  double dt_over_tau = 0.05;
  double v_th = 1.0;
  double v_reset = 0.0;
  int refractory_steps = 2;
  double trace_decay = 0.0;      // exp(-dt / tau_syn)
  double trace_increment = 0.0;  // 1 / tau_syn
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace serial {

void rasterize(std::span<const RasterShape> shapes, int width, int height, double background,
               int supersample, std::span<double> out);
void lif_update(const LifConstants& c, std::span<double> u, std::span<int> refractory,
                std::span<const double> current, std::span<const std::uint8_t> silenced,
                std::span<std::uint8_t> spikes, std::span<double> trace);
void gemv(const RowMajorMatrix& w, std::span<const double> x, std::span<double> y);
void log_quantize(std::span<const double> luminance, std::span<const double> ref_log, double c,
                  double eps, std::span<int> counts);
void scale(std::span<double> values, double factor);

}  // namespace serial

namespace omp {

void rasterize(std::span<const RasterShape> shapes, int width, int height, double background,
               int supersample, std::span<double> out);
void lif_update(const LifConstants& c, std::span<double> u, std::span<int> refractory,
                std::span<const double> current, std::span<const std::uint8_t> silenced,
                std::span<std::uint8_t> spikes, std::span<double> trace);
void gemv(const RowMajorMatrix& w, std::span<const double> x, std::span<double> y);
void log_quantize(std::span<const double> luminance, std::span<const double> ref_log, double c,
                  double eps, std::span<int> counts);
void scale(std::span<double> values, double factor);

}  // namespace omp

inline void rasterize(Exec e, std::span<const RasterShape> shapes, int width, int height,
                      double background, int supersample, std::span<double> out) {
  e == Exec::kParallel ? omp::rasterize(shapes, width, height, background, supersample, out)
                       : serial::rasterize(shapes, width, height, background, supersample, out);
}

inline void lif_update(Exec e, const LifConstants& c, std::span<double> u,
                       std::span<int> refractory, std::span<const double> current,
                       std::span<const std::uint8_t> silenced, std::span<std::uint8_t> spikes,
                       std::span<double> trace) {
  e == Exec::kParallel ? omp::lif_update(c, u, refractory, current, silenced, spikes, trace)
                       : serial::lif_update(c, u, refractory, current, silenced, spikes, trace);
}

inline void gemv(Exec e, const RowMajorMatrix& w, std::span<const double> x, std::span<double> y) {
  e == Exec::kParallel ? omp::gemv(w, x, y) : serial::gemv(w, x, y);
}

inline void log_quantize(Exec e, std::span<const double> luminance,
                         std::span<const double> ref_log, double c, double eps,
                         std::span<int> counts) {
  e == Exec::kParallel ? omp::log_quantize(luminance, ref_log, c, eps, counts)
                       : serial::log_quantize(luminance, ref_log, c, eps, counts);
}

inline void scale(Exec e, std::span<double> values, double factor) {
  e == Exec::kParallel ? omp::scale(values, factor) : serial::scale(values, factor);
}

}  // namespace evtrack::kernels
