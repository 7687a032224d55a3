#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evtrack {

/// Grayscale raster, row-major, luminance in [0, 1]. Pixel (x, y) has its
/// center at integer coordinates (x, y) in image space.
struct Frame {
  int width = 0;
  int height = 0;
  int index = 0;
  std::vector<double> pixels;

  Frame() = default;
  Frame(int w, int h, int k, double fill = 0.0)
      : width(w), height(h), index(k), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  double mean() const;
};

/// Binary PGM (P5, maxval 255). Values are clamped and rounded to 8 bits.
void write_pgm(const std::filesystem::path& path, const Frame& frame);
Frame read_pgm(const std::filesystem::path& path, int index = 0);

}  // namespace evtrack
