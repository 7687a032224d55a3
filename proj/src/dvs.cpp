#include "evtrack/dvs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evtrack/error.hpp"
#include "kernel_ops.hpp"

namespace evtrack {

DvsState init_reference(const Frame& frame0, const DvsConfig& config) {
  if (!(config.contrast_threshold > 0.0)) throw ConfigError("dvs: contrast threshold must be > 0");
  if (!(config.eps > 0.0)) throw ConfigError("dvs: eps must be > 0");
  if (!(config.frame_period > 0.0)) throw ConfigError("dvs: frame_period must be > 0");
  if (config.refractory_period < 0.0 || config.noise_rate < 0.0)
    throw ConfigError("dvs: refractory_period and noise_rate must be >= 0");
  DvsState s;
  s.width = frame0.width;
  s.height = frame0.height;
  s.config = config;
  s.ref_log.resize(frame0.pixels.size());
  std::transform(frame0.pixels.begin(), frame0.pixels.end(), s.ref_log.begin(),
                 [&](double v) { return std::log(v + config.eps); });
  return s;
}

namespace {

bool event_less(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

void check_dims(const DvsState& state, const Frame& frame) {
  if (frame.width != state.width || frame.height != state.height)
    throw ConfigError("dvs: frame is " + std::to_string(frame.width) + "x" +
                      std::to_string(frame.height) + ", state is " + std::to_string(state.width) +
                      "x" + std::to_string(state.height));
}

}  // namespace

EventStream emulate_step(DvsState& state, const Frame& frame, int k, kernels::Exec exec) {
  check_dims(state, frame);
  const auto& cfg = state.config;
  std::vector<int> counts(frame.pixels.size());
  kernels::log_quantize(exec, frame.pixels, state.ref_log, cfg.contrast_threshold, cfg.eps, counts);

  const double t0 = k * cfg.frame_period;
  std::mt19937_64 rng(cfg.seed * 0xD1B54A32D192ED03ULL + static_cast<std::uint64_t>(k));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  EventStream out;
  for (int y = 0; y < state.height; ++y) {
    for (int x = 0; x < state.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * state.width + x;
      const int n = counts[p];
      if (n == 0) continue;
      const int m = std::abs(n);
      const auto pol = static_cast<std::int8_t>(n > 0 ? 1 : -1);
      const double spacing = cfg.frame_period / (m + 1);
      int emitted = 0;
      double last_t = -1e300;
      for (int j = 0; j < m; ++j) {
        double t = t0 + (j + 1) * spacing;
        if (cfg.jitter) t += (unit(rng) - 0.5) * spacing;
        if (cfg.refractory_period > 0.0 && t - last_t < cfg.refractory_period) continue;
        out.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), pol});
        last_t = t;
        ++emitted;
      }
      state.ref_log[p] += (n > 0 ? emitted : -emitted) * cfg.contrast_threshold;
    }
  }
  if (cfg.noise_rate > 0.0) {
    std::poisson_distribution<int> draws(cfg.noise_rate * state.width * state.height);
    const int extra = draws(rng);
    for (int i = 0; i < extra; ++i) {
      const auto x = static_cast<std::uint16_t>(std::min(state.width - 1, static_cast<int>(unit(rng) * state.width)));
      const auto y = static_cast<std::uint16_t>(std::min(state.height - 1, static_cast<int>(unit(rng) * state.height)));
      const double t = t0 + cfg.frame_period * (0.5 + 0.999 * (unit(rng) - 0.5));
      out.push_back({t, x, y, static_cast<std::int8_t>(unit(rng) < 0.5 ? 1 : -1)});
    }
  }
  std::stable_sort(out.begin(), out.end(), event_less);
  return out;
}

EventStream emulate_step_reference(DvsState& state, const Frame& frame, int k) {
  check_dims(state, frame);
  const auto& cfg = state.config;
  EventStream out;
  for (int y = 0; y < state.height; ++y) {
    for (int x = 0; x < state.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * state.width + x;
      const double delta = std::log(frame.pixels[p] + cfg.eps) - state.ref_log[p];
      const int n = kernels::detail::quantize_log_change(delta, cfg.contrast_threshold);
      const double spacing = cfg.frame_period / (std::abs(n) + 1);
      for (int j = 0; j < std::abs(n); ++j)
        out.push_back({k * cfg.frame_period + (j + 1) * spacing,
                       static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                       static_cast<std::int8_t>(n > 0 ? 1 : -1)});
      state.ref_log[p] += n * cfg.contrast_threshold;
    }
  }
  std::stable_sort(out.begin(), out.end(), event_less);
  return out;
}

}  // namespace evtrack
