#pragma once

#include <cstdint>
#include <deque>

#include <Eigen/Core>

#include "evtrack/emsif.hpp"
#include "evtrack/lif.hpp"

namespace evtrack {

using Vec4 = Eigen::Vector4d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

/// Bounded embedding x = [cos theta, sin theta, omega/omega_scale,
/// (r - r_ref)/r_scale] of a DiskPolar state.
struct EmbeddingSpec {
  double omega_scale = 0.2;  // rad/frame
  double r_scale = 30.0;     // px
  double r_ref = 37.5;       // px
  double rho_rep = 1.3;

  Vec4 to_rep(const Eigen::Vector3d& s) const;
  Eigen::Vector3d from_rep(const Vec4& x) const;
  /// d to_rep / d s (4 x 3).
  Mat43 jacobian(const Eigen::Vector3d& s) const;
  bool in_domain(const Vec4& x) const { return x.norm() <= rho_rep; }
};

struct NeuralFilterConfig {
  int neurons = 800;
  LifParams lif;
  double tau_syn = 0.2;        // s, synapses of the filter population
  double frame_period = 0.1;   // s simulated per video frame
  double t_inj = 0.02;         // s, correction injection window
  double t_init = 0.5;         // s, closed-loop settle at init
  int samples = 2000;          // decoder training points
  double reg = 0.1;            // ridge: (reg * 200)^2 * M
  int decode_window = 10;      // micro-steps averaged by the readout
  // Tuning curves from the exact rate of the Euler neuron rather than the
  // continuous closed form.
  bool discrete_rates = true;
  // Compensates the one-step synapse discretization in the recurrent target.
  bool discrete_synapse = true;
  // Least-squares 4x4 gain fit of decoded vs. target on the sample set.
  bool calibrate_decoders = true;

  int steps_per_frame() const;
  int injection_steps() const;
  void validate() const;
};

/// Constant input u over the first `steps` micro-steps of the next frame.
struct CorrectionSchedule {
  Vec4 u = Vec4::Zero();
  int steps = 0;
};

struct SettleReport {
  double error = 0.0;  // ||x_dec - T(s0)||
  bool converged = false;
};

struct SpikingCorrection {
  CorrectionSchedule schedule;
  Correction dense;            // gain computed from the decoded state
  Eigen::Vector3d decoded;     // prior state the gain was computed at
  Eigen::MatrixXd P;           // Joseph-updated covariance
  bool clamped = false;        // decoded state was outside the domain
};

/// Spiking DiskPolar filter: state memory and the rotation prediction live in
/// a recurrent LIF population; the gain is computed densely from its readout.
class NeuralFilter {
 public:
  NeuralFilter(const NeuralFilterConfig& config, const EmbeddingSpec& spec, const FilterModel& model,
               std::uint64_t seed);

  const NeuralFilterConfig& config() const { return config_; }
  const EmbeddingSpec& spec() const { return spec_; }
  int neurons() const { return config_.neurons; }

  /// Closed-loop settle towards T(s0); throws ConfigError outside the domain.
  SettleReport init_state(const Eigen::Vector3d& s0);
  /// Runs `micro_steps` steps; the schedule is applied while the frame's
  /// cursor is below schedule.steps. Zero-length schedules leave inputs off.
  void advance(int micro_steps, const CorrectionSchedule& schedule);
  /// One full frame (frame_period / dt micro-steps), starting a new schedule.
  void step_frame(const CorrectionSchedule& schedule);

  /// Readout averaged over the last decode_window micro-steps.
  Vec4 decode() const;
  /// T^-1 of the readout; the phase is held when |q| < 0.1.
  Eigen::Vector3d decode_state();
  bool phase_undefined() const { return phase_undefined_; }

  /// Gain from the decoded prior; P is the dense prior covariance.
  SpikingCorrection correct(const FilterModel& model, const Vec2& z, const Eigen::MatrixXd& P);

  /// Permanently silences round(fraction * n) randomly chosen neurons.
  void silence(double fraction, std::uint64_t seed);
  /// FNV-1a over the fixed weights (encoders, biases, decoders).
  std::uint64_t weight_hash() const;

  const Eigen::MatrixXd& encoders() const { return encoders_; }
  const Eigen::VectorXd& gains() const { return gain_; }
  const Eigen::VectorXd& biases() const { return bias_; }
  const Eigen::MatrixXd& decoders_out() const { return d_out_; }
  const Eigen::MatrixXd& decoders_rec() const { return d_rec_; }
  /// Rate of every neuron for representation point x (Hz).
  Eigen::VectorXd rates(const Vec4& x) const;
  /// Continuous embedded dynamics f_c(x), per second.
  Vec4 dynamics(const Vec4& x) const;
  /// RMS decode error of D_out over the training sample, / rho_rep.
  double training_decode_error() const { return train_error_; }
  LifPopulation& population() { return pop_; }
  const LifPopulation& population() const { return pop_; }

 private:
  void micro_step(const Vec4& injected);

  NeuralFilterConfig config_;
  EmbeddingSpec spec_;
  Eigen::MatrixXd encoders_;      // n x 4, unit rows
  Eigen::VectorXd gain_, bias_;
  Eigen::MatrixXd scaled_enc_;    // alpha_i e_i / rho
  Eigen::MatrixXd d_out_, d_rec_; // n x 4
  LifPopulation pop_;
  std::deque<Vec4> history_;
  int cursor_ = 0;
  double train_error_ = 0.0;
  double last_theta_ = 0.0;
  bool phase_undefined_ = false;
};

}  // namespace evtrack
