#include "evtrack/lif.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "evtrack/error.hpp"

namespace evtrack {

void LifParams::validate() const {
  if (!(tau_m > 0.0)) throw ConfigError("lif: tau_m must be > 0");
  if (!(v_th > v_reset)) throw ConfigError("lif: v_th must exceed v_reset");
  if (!(dt > 0.0)) throw ConfigError("lif: dt must be > 0");
  if (!(t_ref >= 0.0)) throw ConfigError("lif: t_ref must be >= 0");
  if (dt > tau_m / 5.0 + 1e-15) throw ConfigError("lif: dt must be <= tau_m / 5");
}

int LifParams::refractory_steps() const { return static_cast<int>(std::lround(t_ref / dt)); }

LifPopulation::LifPopulation(int count, double tau_syn_s)
    : n(count),
      u(static_cast<std::size_t>(count), 0.0),
      refractory(static_cast<std::size_t>(count), 0),
      bias(static_cast<std::size_t>(count), 0.0),
      trace(static_cast<std::size_t>(count), 0.0),
      tau_syn(tau_syn_s),
      scratch(static_cast<std::size_t>(count), 0.0) {
  if (count <= 0) throw ConfigError("lif: population size must be positive");
  if (!(tau_syn_s > 0.0)) throw ConfigError("lif: tau_syn must be > 0");
}

Eigen::VectorXd LifPopulation::drive(const Eigen::VectorXd& input) const {
  if (w_in.rows() != n || w_in.cols() != input.size())
    throw ConfigError("lif: input width does not match w_in");
  return w_in * input;
}

void LifPopulation::densify_recurrent() {
  if (rec_encoder.size() == 0) return;
  w_rec = rec_encoder * rec_decoder.transpose();
}

SpikeVector lif_step(LifPopulation& pop, const LifParams& params,
                     std::span<const double> input_current, kernels::Exec exec) {
  if (static_cast<int>(input_current.size()) != pop.n)
    throw ConfigError("lif_step: current has " + std::to_string(input_current.size()) +
                      " entries, population has " + std::to_string(pop.n));
  for (double j : input_current)
    if (!std::isfinite(j)) throw ConfigError("lif_step: non-finite input current");

  auto& cur = pop.scratch;
  cur.resize(static_cast<std::size_t>(pop.n));
  if (pop.rec_encoder.size() > 0) {
    const Eigen::Map<const Eigen::VectorXd> a(pop.trace.data(), pop.n);
    const Eigen::VectorXd latent = pop.rec_decoder.transpose() * a;
    Eigen::Map<Eigen::VectorXd>(cur.data(), pop.n) = pop.rec_encoder * latent;
  } else if (pop.w_rec.size() > 0) {
    kernels::gemv(exec, pop.w_rec, pop.trace, cur);
  } else {
    std::fill(cur.begin(), cur.end(), 0.0);
  }
  for (int i = 0; i < pop.n; ++i) cur[i] += input_current[i] + pop.bias[i];

  kernels::LifConstants c;
  c.dt = params.dt;
  c.dt_over_tau = params.dt / params.tau_m;
  c.v_th = params.v_th;
  c.v_reset = params.v_reset;
  c.refractory_steps = params.refractory_steps();
  c.trace_decay = std::exp(-params.dt / pop.tau_syn);
  c.trace_increment = 1.0 / pop.tau_syn;

  SpikeVector spikes(static_cast<std::size_t>(pop.n), 0);
  kernels::lif_update(exec, c, pop.u, pop.refractory, cur, pop.silenced, spikes, pop.trace);
  return spikes;
}

double lif_rate(double current, const LifParams& p) {
  const double span = p.v_th - p.v_reset;
  if (!(current > span)) return 0.0;
  return 1.0 / (p.t_ref + p.tau_m * std::log(current / (current - span)));
}

double lif_rate_discrete(double current, const LifParams& p) {
  const double span = p.v_th - p.v_reset;
  if (!(current > span)) return 0.0;
  const double k = p.dt / p.tau_m;
  if (current * k >= span) return 1.0 / ((1 + p.refractory_steps()) * p.dt);
  // u_m = J (1 - (1 - k)^m) after m integration steps from reset.
  const double m = std::ceil(std::log1p(-span / current) / std::log1p(-k) - 1e-12);
  return 1.0 / ((m + p.refractory_steps()) * p.dt);
}

std::size_t SpikeRaster::total_spikes() const {
  std::size_t total = 0;
  for (const auto& r : rows) total += static_cast<std::size_t>(std::count(r.begin(), r.end(), 1));
  return total;
}

SpikeRaster run_window(LifPopulation& pop, const LifParams& params,
                       const Eigen::MatrixXd& schedule, int steps, kernels::Exec exec) {
  if (steps < 0) throw ConfigError("run_window: negative step count");
  if (steps > 0 && (schedule.rows() < steps || schedule.cols() != pop.n))
    throw ConfigError("run_window: schedule covers " + std::to_string(schedule.rows()) +
                      " steps, " + std::to_string(steps) + " requested");
  SpikeRaster raster;
  raster.neurons = pop.n;
  raster.rows.reserve(static_cast<std::size_t>(steps));
  std::vector<double> row(static_cast<std::size_t>(pop.n));
  for (int s = 0; s < steps; ++s) {
    for (int i = 0; i < pop.n; ++i) row[i] = schedule(s, i);
    raster.rows.push_back(lif_step(pop, params, row, exec));
  }
  return raster;
}

void write_spikes_csv(std::ostream& out, const SpikeRaster& raster, int first_step) {
  out << "step,neuron\n";
  for (std::size_t s = 0; s < raster.rows.size(); ++s)
    for (std::size_t i = 0; i < raster.rows[s].size(); ++i)
      if (raster.rows[s][i]) out << first_step + static_cast<int>(s) << ',' << i << '\n';
}

}  // namespace evtrack
