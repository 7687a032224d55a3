#include "evtrack/snn_emsif.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "evtrack/error.hpp"

namespace evtrack {

Vec4 EmbeddingSpec::to_rep(const Eigen::Vector3d& s) const {
  return Vec4(std::cos(s(0)), std::sin(s(0)), s(1) / omega_scale, (s(2) - r_ref) / r_scale);
}

Eigen::Vector3d EmbeddingSpec::from_rep(const Vec4& x) const {
  return Eigen::Vector3d(std::atan2(x(1), x(0)), x(2) * omega_scale, r_ref + x(3) * r_scale);
}

Mat43 EmbeddingSpec::jacobian(const Eigen::Vector3d& s) const {
  Mat43 j = Mat43::Zero();
  j(0, 0) = -std::sin(s(0));
  j(1, 0) = std::cos(s(0));
  j(2, 1) = 1.0 / omega_scale;
  j(3, 2) = 1.0 / r_scale;
  return j;
}

int NeuralFilterConfig::steps_per_frame() const {
  return static_cast<int>(std::lround(frame_period / lif.dt));
}

int NeuralFilterConfig::injection_steps() const {
  return static_cast<int>(std::lround(t_inj / lif.dt));
}

void NeuralFilterConfig::validate() const {
  lif.validate();
  if (neurons < 100) throw ConfigError("snn filter: at least 100 neurons required");
  if (!(tau_syn > 0.0) || !(frame_period > 0.0) || !(t_inj > 0.0) || !(t_init >= 0.0))
    throw ConfigError("snn filter: time constants must be positive");
  if (t_inj > frame_period + 1e-12) throw ConfigError("snn filter: t_inj exceeds the frame period");
  if (samples < 100) throw ConfigError("snn filter: at least 100 decoder samples required");
  if (!(reg > 0.0)) throw ConfigError("snn filter: reg must be > 0");
  if (decode_window < 1 || decode_window > steps_per_frame())
    throw ConfigError("snn filter: decode_window must be in [1, steps_per_frame]");
}

namespace {

Vec4 unit_normal4(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
  Vec4 v;
  do {
    for (int k = 0; k < 4; ++k) v(k) = nd(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace

NeuralFilter::NeuralFilter(const NeuralFilterConfig& config, const EmbeddingSpec& spec,
                           const FilterModel& model, std::uint64_t seed)
    : config_(config), spec_(spec), pop_(config.neurons, config.tau_syn) {
  config_.validate();
  if (model.kind != ModelKind::kDiskPolar)
    throw ConfigError("snn filter: only the disk_polar model has an embedding");
  if (!(spec.rho_rep > 0.0) || !(spec.omega_scale > 0.0) || !(spec.r_scale > 0.0))
    throw ConfigError("snn filter: embedding scales must be positive");
  const int n = config_.neurons, m = config_.samples;
  const auto& lif = config_.lif;
  const double span = lif.v_th - lif.v_reset;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  encoders_.resize(n, 4);
  gain_.resize(n);
  bias_.resize(n);
  for (int i = 0; i < n; ++i) encoders_.row(i) = unit_normal4(rng, nd).transpose();
  for (int i = 0; i < n; ++i) {
    const double intercept = -0.95 + 1.9 * ud(rng);
    const double max_rate = 100.0 + 100.0 * ud(rng);
    const double j_max = span / (1.0 - std::exp(-(1.0 / max_rate - lif.t_ref) / lif.tau_m));
    gain_(i) = (j_max - span) / (1.0 - intercept);
    bias_(i) = span - gain_(i) * intercept;
  }
  scaled_enc_ = (encoders_.array().colwise() * (gain_.array() / spec_.rho_rep)).matrix();

  // Decoder training points: uniform in the 4-ball of radius rho.
  Eigen::MatrixXd X(m, 4);
  for (int k = 0; k < m; ++k)
    X.row(k) = (unit_normal4(rng, nd) * spec_.rho_rep * std::pow(ud(rng), 0.25)).transpose();
  Eigen::MatrixXd A(m, n);
  for (int k = 0; k < m; ++k) A.row(k) = rates(X.row(k).transpose()).transpose();

  Eigen::MatrixXd gram = A.transpose() * A;
  gram.diagonal().array() += std::pow(config_.reg * 200.0, 2) * m;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);

  Eigen::MatrixXd rec_target(m, 4);
  const double c = config_.discrete_synapse
                       ? (lif.dt / config_.tau_syn) / (1.0 - std::exp(-lif.dt / config_.tau_syn))
                       : 1.0;
  for (int k = 0; k < m; ++k) {
    const Vec4 x = X.row(k).transpose();
    rec_target.row(k) = (x / c + config_.tau_syn * dynamics(x)).transpose();
  }
  d_out_ = solver.solve(A.transpose() * X);
  d_rec_ = solver.solve(A.transpose() * rec_target);
  if (config_.calibrate_decoders) {
    const Eigen::MatrixXd yo = A * d_out_;
    d_out_ = d_out_ * yo.colPivHouseholderQr().solve(X);
    const Eigen::MatrixXd yr = A * d_rec_;
    d_rec_ = d_rec_ * yr.colPivHouseholderQr().solve(rec_target);
  }
  train_error_ = std::sqrt((A * d_out_ - X).rowwise().squaredNorm().mean()) / spec_.rho_rep;
  if (!(train_error_ <= 0.02))
    throw ConfigError("snn filter: decode error " + std::to_string(train_error_) +
                      " of rho exceeds 2%; increase the neuron count");

  pop_.bias.assign(bias_.data(), bias_.data() + n);
  pop_.rec_encoder = scaled_enc_;
  pop_.rec_decoder = d_rec_;
  pop_.w_in = scaled_enc_;
  for (int i = 0; i < n; ++i) pop_.u[i] = lif.v_reset + span * ud(rng);
}

Eigen::VectorXd NeuralFilter::rates(const Vec4& x) const {
  const Eigen::VectorXd j = scaled_enc_ * x + bias_;
  Eigen::VectorXd r(j.size());
  for (Eigen::Index i = 0; i < j.size(); ++i)
    r(i) = config_.discrete_rates ? lif_rate_discrete(j(i), config_.lif) : lif_rate(j(i), config_.lif);
  return r;
}

Vec4 NeuralFilter::dynamics(const Vec4& x) const {
  const double w = x(2) * spec_.omega_scale / config_.frame_period;
  return Vec4(-w * x(1), w * x(0), 0.0, 0.0);
}

void NeuralFilter::micro_step(const Vec4& injected) {
  const Eigen::VectorXd drive = scaled_enc_ * (config_.tau_syn * injected);
  lif_step(pop_, config_.lif, std::span<const double>(drive.data(), drive.size()));
  const Eigen::Map<const Eigen::VectorXd> a(pop_.trace.data(), pop_.n);
  history_.push_back(d_out_.transpose() * a);
  while (static_cast<int>(history_.size()) > config_.decode_window) history_.pop_front();
}

SettleReport NeuralFilter::init_state(const Eigen::Vector3d& s0) {
  const Vec4 target = spec_.to_rep(s0);
  if (!spec_.in_domain(target))
    throw ConfigError("snn filter: initial state outside the representation domain");
  const double kp = 5.0 / config_.tau_syn;
  const int steps = static_cast<int>(std::lround(config_.t_init / config_.lif.dt));
  for (int s = 0; s < steps; ++s) {
    const Eigen::Map<const Eigen::VectorXd> a(pop_.trace.data(), pop_.n);
    const Vec4 now = d_out_.transpose() * a;
    micro_step(kp * (target - now));
  }
  cursor_ = 0;
  last_theta_ = wrap_angle(s0(0));
  SettleReport rep;
  rep.error = history_.empty() ? target.norm() : (decode() - target).norm();
  rep.converged = rep.error <= 0.05 * spec_.rho_rep;
  return rep;
}

void NeuralFilter::advance(int micro_steps, const CorrectionSchedule& schedule) {
  for (int s = 0; s < micro_steps; ++s, ++cursor_)
    micro_step(cursor_ < schedule.steps ? schedule.u : Vec4::Zero());
}

void NeuralFilter::step_frame(const CorrectionSchedule& schedule) {
  cursor_ = 0;
  advance(config_.steps_per_frame(), schedule);
}

Vec4 NeuralFilter::decode() const {
  Vec4 sum = Vec4::Zero();
  for (const auto& v : history_) sum += v;
  return history_.empty() ? sum : Vec4(sum / static_cast<double>(history_.size()));
}

Eigen::Vector3d NeuralFilter::decode_state() {
  const Vec4 x = decode();
  Eigen::Vector3d s = spec_.from_rep(x);
  phase_undefined_ = std::hypot(x(0), x(1)) < 0.1;
  if (phase_undefined_) s(0) = last_theta_;
  s(0) = wrap_angle(s(0));
  last_theta_ = s(0);
  return s;
}

SpikingCorrection NeuralFilter::correct(const FilterModel& model, const Vec2& z,
                                        const Eigen::MatrixXd& P) {
  SpikingCorrection out;
  Vec4 x = decode();
  if (!spec_.in_domain(x)) {
    x *= spec_.rho_rep / x.norm();
    out.clamped = true;
  }
  Eigen::Vector3d s = spec_.from_rep(x);
  phase_undefined_ = std::hypot(x(0), x(1)) < 0.1;
  s(0) = phase_undefined_ ? last_theta_ : wrap_angle(s(0));
  last_theta_ = s(0);
  out.decoded = s;
  out.dense = compute_correction(model, s, z);
  const Vec4 dx = spec_.jacobian(s) * out.dense.ds;
  out.schedule.u = dx / config_.t_inj;
  out.schedule.steps = config_.injection_steps();
  out.P = joseph(P, out.dense.K, out.dense.H, model.R);
  return out;
}

void NeuralFilter::silence(double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("silence: fraction must be in [0, 1]");
  const int n = config_.neurons;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  const int count = static_cast<int>(std::lround(fraction * n));
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  pop_.silenced.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < count; ++i) pop_.silenced[idx[i]] = 1;
}

std::uint64_t NeuralFilter::weight_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const double* p, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (Eigen::Index i = 0; i < count * static_cast<Eigen::Index>(sizeof(double)); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(encoders_.data(), encoders_.size());
  mix(gain_.data(), gain_.size());
  mix(bias_.data(), bias_.size());
  mix(d_out_.data(), d_out_.size());
  mix(d_rec_.data(), d_rec_.size());
  mix(pop_.rec_encoder.data(), pop_.rec_encoder.size());
  mix(pop_.rec_decoder.data(), pop_.rec_decoder.size());
  return h;
}

}  // namespace evtrack
