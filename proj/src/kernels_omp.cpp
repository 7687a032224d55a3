#include <cmath>

#include "evtrack/kernels.hpp"
#include "kernel_ops.hpp"

namespace evtrack::kernels::omp {

void rasterize(std::span<const RasterShape> shapes, int width, int height, double background,
               int supersample, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * width + x] =
          detail::pixel_coverage(shapes, x, y, background, supersample);
}

void lif_update(const LifConstants& c, std::span<double> u, std::span<int> refractory,
                std::span<const double> current, std::span<const std::uint8_t> silenced,
                std::span<std::uint8_t> spikes, std::span<double> trace) {
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  const bool has_mask = !silenced.empty();
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    spikes[i] = detail::lif_neuron(c, u[i], refractory[i], current[i], has_mask && silenced[i] != 0);
    trace[i] = trace[i] * c.trace_decay + spikes[i] * c.trace_increment;
  }
}

void gemv(const RowMajorMatrix& w, std::span<const double> x, std::span<double> y) {
  const Eigen::Index rows = w.rows(), cols = w.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* row = w.data() + i * cols;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void log_quantize(std::span<const double> luminance, std::span<const double> ref_log, double c,
                  double eps, std::span<int> counts) {
  const auto n = static_cast<std::ptrdiff_t>(luminance.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    counts[i] = detail::quantize_log_change(std::log(luminance[i] + eps) - ref_log[i], c);
}

void scale(std::span<double> values, double factor) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) values[i] *= factor;
}

}  // namespace evtrack::kernels::omp
