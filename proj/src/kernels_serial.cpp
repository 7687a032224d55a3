#include <cmath>

#include "evtrack/kernels.hpp"
#include "kernel_ops.hpp"

namespace evtrack::kernels {

bool shape_contains(const RasterShape& s, double x, double y) {
  // Into the shape frame.
  const double dx = x - s.cx, dy = y - s.cy;
  const double c = std::cos(s.orientation), sn = std::sin(s.orientation);
  const double lx = c * dx + sn * dy;
  const double ly = -sn * dx + c * dy;
  switch (s.kind) {
    case ShapeKind::kCircle:
      return lx * lx + ly * ly <= s.size * s.size;
    case ShapeKind::kSquare:
      return std::abs(lx) <= s.size && std::abs(ly) <= s.size;
    case ShapeKind::kCross: {
      constexpr double half_thickness = 1.0;
      return (std::abs(lx) <= s.size && std::abs(ly) <= half_thickness) ||
             (std::abs(ly) <= s.size && std::abs(lx) <= half_thickness);
    }
    case ShapeKind::kTriangle: {
      // Equilateral with side `size`, centroid at the origin, apex on +x.
      constexpr double k120 = 2.0 * std::numbers::pi / 3.0;
      const double circumradius = s.size / std::numbers::sqrt3;
      double px[3], py[3];
      for (int i = 0; i < 3; ++i) {
        px[i] = circumradius * std::cos(i * k120);
        py[i] = circumradius * std::sin(i * k120);
      }
      auto edge = [&](int i, int j) {
        return (px[j] - px[i]) * (ly - py[i]) - (py[j] - py[i]) * (lx - px[i]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

namespace serial {

void rasterize(std::span<const RasterShape> shapes, int width, int height, double background,
               int supersample, std::span<double> out) {
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * width + x] =
          detail::pixel_coverage(shapes, x, y, background, supersample);
}

void lif_update(const LifConstants& c, std::span<double> u, std::span<int> refractory,
                std::span<const double> current, std::span<const std::uint8_t> silenced,
                std::span<std::uint8_t> spikes, std::span<double> trace) {
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    spikes[i] = detail::lif_neuron(c, u[i], refractory[i], current[i],
                                   !silenced.empty() && silenced[i] != 0);
    trace[i] = trace[i] * c.trace_decay + spikes[i] * c.trace_increment;
  }
}

void gemv(const RowMajorMatrix& w, std::span<const double> x, std::span<double> y) {
  const Eigen::Index rows = w.rows(), cols = w.cols();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* row = w.data() + i * cols;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void log_quantize(std::span<const double> luminance, std::span<const double> ref_log, double c,
                  double eps, std::span<int> counts) {
  for (std::size_t i = 0; i < luminance.size(); ++i)
    counts[i] = detail::quantize_log_change(std::log(luminance[i] + eps) - ref_log[i], c);
}

void scale(std::span<double> values, double factor) {
  for (auto& v : values) v *= factor;
}

}  // namespace serial
}  // namespace evtrack::kernels
