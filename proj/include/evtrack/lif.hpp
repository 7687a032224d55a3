#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "evtrack/kernels.hpp"

namespace evtrack {

struct LifParams {
  double tau_m = 0.02;  // s
  double v_th = 1.0;
  double v_reset = 0.0;
  double t_ref = 0.002;  // s
  double dt = 0.001;     // s

  void validate() const;
  int refractory_steps() const;
};

/// Binary spike output of one micro-step.
using SpikeVector = std::vector<std::uint8_t>;

/// A group of LIF neurons with exponential synaptic traces.
///
/// Recurrent input is either a dense matrix `w_rec` (n x n, applied to the
/// traces) or, when `rec_encoder` is non-empty, the low-rank product
/// rec_encoder * rec_decoder^T, which equals the dense matrix but costs
/// O(n d) per step. Neurons flagged in `silenced` never integrate or fire.
struct LifPopulation {
  int n = 0;
  std::vector<double> u;
  std::vector<int> refractory;  // remaining refractory micro-steps
  std::vector<double> bias;
  std::vector<double> trace;  // a, 1/s
  double tau_syn = 0.02;

  Eigen::MatrixXd w_in;  // optional n x m input projection
  kernels::RowMajorMatrix w_rec;
  Eigen::MatrixXd rec_encoder;  // n x d
  Eigen::MatrixXd rec_decoder;  // n x d
  std::vector<std::uint8_t> silenced;

  std::vector<double> scratch;

  LifPopulation() = default;
  LifPopulation(int count, double tau_syn_s);

  bool recurrent() const { return w_rec.size() > 0 || rec_encoder.size() > 0; }
  double refractory_remaining(int i, const LifParams& p) const { return refractory[i] * p.dt; }
  /// Projects an external input through w_in into per-neuron current.
  Eigen::VectorXd drive(const Eigen::VectorXd& input) const;
  /// Materializes the low-rank recurrent product as a dense matrix.
  void densify_recurrent();
};

/// One forward-Euler micro-step. `input_current` has one entry per neuron.
SpikeVector lif_step(LifPopulation& pop, const LifParams& params,
                     std::span<const double> input_current,
                     kernels::Exec exec = kernels::Exec::kParallel);

/// Closed-form steady-state firing rate (Hz) for constant drive J measured
/// from v_reset.
double lif_rate(double current, const LifParams& params);

/// Exact steady-state rate of the forward-Euler neuron used by lif_step for
/// constant drive: a whole number of micro-steps per interspike interval.
double lif_rate_discrete(double current, const LifParams& params);

struct SpikeRaster {
  int neurons = 0;
  std::vector<SpikeVector> rows;  // one per micro-step

  std::size_t total_spikes() const;
};

/// Row s of `schedule` holds the per-neuron current of micro-step s.
SpikeRaster run_window(LifPopulation& pop, const LifParams& params,
                       const Eigen::MatrixXd& schedule, int steps,
                       kernels::Exec exec = kernels::Exec::kParallel);

/// spikes.csv: header "step,neuron", one row per spike. `first_step` offsets
/// the step column.
void write_spikes_csv(std::ostream& out, const SpikeRaster& raster, int first_step = 0);

}  // namespace evtrack
