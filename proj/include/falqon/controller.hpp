#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "falqon/csv.hpp"
#include "falqon/errors.hpp"
#include "falqon/evolution.hpp"
#include "falqon/hubbard.hpp"
#include "falqon/operator.hpp"
#include "falqon/spectral.hpp"
#include "falqon/state.hpp"

namespace falqon {

struct FalqonConfig {
  double dt = 0.02;
  double dtau = 0.0;  // 0 disables the imaginary-time kick
  int ite_period = 2;
  int n_layers = 50000;
  double beta_init = 0.0;
  PropagationMethod method{};
  bool signal_pre_ite = false;  // measure A before the kick at hybrid layers
  int log_every = 1;

  double total_time() const { return dt * n_layers; }

  void validate() const {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("FalqonConfig: dt must be >= 0");
    if (!(dtau >= 0.0)) throw std::invalid_argument("FalqonConfig: dtau must be >= 0");
    if (ite_period <= 0) throw std::invalid_argument("FalqonConfig: ite_period must be positive");
    if (n_layers <= 0) throw std::invalid_argument("FalqonConfig: n_layers must be positive");
    if (log_every <= 0) throw std::invalid_argument("FalqonConfig: log_every must be positive");
  }

  friend bool operator==(const FalqonConfig&, const FalqonConfig&) = default;
};

struct LayerRecord {
  std::size_t layer = 0;
  double t = 0.0;
  double beta = 0.0;
  double A = 0.0;
  double energy = 0.0;
  double delta_e = std::numeric_limits<double>::quiet_NaN();
  double variance = 0.0;
  bool ite = false;
  double pre_norm = std::numeric_limits<double>::quiet_NaN();
  double norm_drift = 0.0;
  // Energy and variance after the unitary part of the layer, before any kick.
  double energy_before_ite = 0.0;
  double variance_before_ite = 0.0;
  double n_up = 0.0;
  double n_down = 0.0;
};

struct TrajectoryRecord {
  FalqonConfig config;
  std::optional<double> ground_energy;
  std::vector<LayerRecord> layers;  // layers[0] describes psi0
  double max_particle_deviation = 0.0;

  const LayerRecord& final() const { return layers.back(); }
};

/// A = i<[H_d, H_p]> with `comm` = commutator(H_d, H_p) already carrying i.
inline double commutator_signal(const StateVector& state, const CompiledOperator& comm) {
  const cplx a = comm.expectation(state);
  if (std::abs(a.imag()) > 1e-6) {
    throw HermiticityError("commutator_signal: imaginary residue " + std::to_string(a.imag()));
  }
  return a.real();
}

inline double commutator_signal(const StateVector& state, const PauliTermSum& comm) {
  return commutator_signal(state, CompiledOperator::for_state(comm, state));
}

/// exp(-i H_p dt) exp(-i beta H_d dt)|psi>: driver first, then problem.
inline StateVector falqon_layer(const StateVector& state, double beta, const CompiledOperator& hp,
                                const CompiledOperator& hd, double dt,
                                const PropagationMethod& method = {}, double* drift = nullptr) {
  PropagationStats s1, s2;
  StateVector mid = propagate(state, hd, beta * dt, method, &s1);
  StateVector out = propagate(mid, hp, dt, method, &s2);
  if (drift) {
    *drift += std::abs(s1.norm_before_renormalization - 1.0) +
              std::abs(s2.norm_before_renormalization - 1.0);
  }
  return out;
}

inline StateVector falqon_layer(const StateVector& state, double beta, const PauliTermSum& hp,
                                const PauliTermSum& hd, double dt,
                                const PropagationMethod& method = {}) {
  return falqon_layer(state, beta, CompiledOperator::for_state(hp, state),
                      CompiledOperator::for_state(hd, state), dt, method);
}

struct RunHooks {
  std::function<void(const LayerRecord&, const StateVector&)> on_layer;
  std::function<void(std::size_t layer, const StateVector& before, const StateVector& after)> on_ite;
};

struct RunOptions {
  std::optional<double> ground_energy;
  const NumberOperators* numbers = nullptr;  // tracks particle-number drift when set
  std::optional<double> dtau_limit;          // validity limit; checked when dtau > 0
  RunHooks hooks;
};

namespace controller_detail {

inline void check_finite(const LayerRecord& r) {
  for (double v : {r.beta, r.A, r.energy, r.variance}) {
    if (!std::isfinite(v)) throw NumericalAbort("run: non-finite trajectory value", r.layer);
  }
  if (r.ite && !std::isfinite(r.pre_norm)) throw NumericalAbort("run: non-finite ITE norm", r.layer);
}

}  // namespace controller_detail

/**
 * Feedback loop: beta_1 = beta_init, beta_{k+1} = -A_k, where A_k is measured
 * at the end of layer k (after the kick when one fires, unless
 * signal_pre_ite). With dtau > 0 the kick follows every ite_period-th layer.
 */
inline TrajectoryRecord run(const FalqonConfig& config, const PauliTermSum& hp_op,
                            const PauliTermSum& hd_op, const StateVector& psi0,
                            const RunOptions& options = {}) {
  config.validate();
  if (config.dtau > 0.0 && options.dtau_limit) check_dtau(config.dtau, *options.dtau_limit);
  const CompiledOperator hp = CompiledOperator::for_state(hp_op, psi0);
  const CompiledOperator hd = CompiledOperator::for_state(hd_op, psi0);
  const CompiledOperator comm = CompiledOperator::for_state(commutator(hd_op, hp_op), psi0);
  std::optional<CompiledOperator> nup, ndown;
  double target_up = 0.0, target_down = 0.0;
  if (options.numbers) {
    nup = CompiledOperator::for_state(options.numbers->n_up, psi0);
    ndown = CompiledOperator::for_state(options.numbers->n_down, psi0);
    target_up = nup->expectation(psi0).real();
    target_down = ndown->expectation(psi0).real();
  }

  TrajectoryRecord traj;
  traj.config = config;
  traj.ground_energy = options.ground_energy;
  traj.layers.reserve(static_cast<std::size_t>(config.n_layers) + 1);

  StateVector psi = psi0;
  double drift = 0.0;
  auto finish = [&](LayerRecord& r) {
    if (options.ground_energy) r.delta_e = r.energy - *options.ground_energy;
    r.norm_drift = drift;
    if (nup) {
      r.n_up = nup->expectation(psi).real();
      r.n_down = ndown->expectation(psi).real();
      traj.max_particle_deviation =
          std::max({traj.max_particle_deviation, std::abs(r.n_up - target_up),
                    std::abs(r.n_down - target_down)});
    }
    controller_detail::check_finite(r);
    traj.layers.push_back(r);
    if (options.hooks.on_layer) options.hooks.on_layer(r, psi);
  };

  {
    LayerRecord r0;
    const EnergyStats es = energy_stats(psi, hp);
    r0.beta = config.beta_init;
    r0.A = commutator_signal(psi, comm);
    r0.energy = r0.energy_before_ite = es.energy;
    r0.variance = r0.variance_before_ite = es.variance;
    finish(r0);
  }

  double beta = config.beta_init;
  for (int k = 1; k <= config.n_layers; ++k) {
    LayerRecord r;
    r.layer = static_cast<std::size_t>(k);
    r.t = k * config.dt;
    r.beta = beta;
    psi = falqon_layer(psi, beta, hp, hd, config.dt, config.method, &drift);
    const EnergyStats before = energy_stats(psi, hp);
    r.energy_before_ite = before.energy;
    r.variance_before_ite = before.variance;
    r.ite = config.dtau > 0.0 && k % config.ite_period == 0;
    if (r.ite) {
      if (config.signal_pre_ite) r.A = commutator_signal(psi, comm);
      IteResult step = ite_step(psi, hp, config.dtau);
      if (options.hooks.on_ite) options.hooks.on_ite(r.layer, psi, step.state);
      psi = std::move(step.state);
      r.pre_norm = step.pre_norm;
      const EnergyStats after = energy_stats(psi, hp);
      r.energy = after.energy;
      r.variance = after.variance;
      if (!config.signal_pre_ite) r.A = commutator_signal(psi, comm);
    } else {
      r.energy = before.energy;
      r.variance = before.variance;
      r.A = commutator_signal(psi, comm);
    }
    finish(r);
    beta = -r.A;
  }
  return traj;
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& traj, int log_every = 1) {
  os << "layer,t,beta,A,energy,delta_e,variance,ite,pre_norm,norm_drift\n";
  const std::size_t last = traj.layers.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    if (i % static_cast<std::size_t>(log_every) != 0 && i != last) continue;
    const LayerRecord& r = traj.layers[i];
    os << r.layer << ',' << format_double(r.t) << ',' << format_double(r.beta) << ','
       << format_double(r.A) << ',' << format_double(r.energy) << ','
       << format_double(r.delta_e) << ',' << format_double(r.variance) << ','
       << (r.ite ? 1 : 0) << ',' << format_double(r.pre_norm) << ','
       << format_double(r.norm_drift) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Descent-bound checks

struct DescentBoundCheck {
  double energy;
  double variance;
  double lhs;
  double rhs;
  bool holds;
};

/**
 * One kick on a PSD operator compared with
 * E - 2 dtau (1 - h dtau / 2) / (1 - h dtau)^2 V.
 * Requires 0 < dtau < 2/h and dtau != 1/h.
 */
inline DescentBoundCheck verify_descent_bound(const StateVector& state,
                                              const CompiledOperator& h_shifted, double dtau,
                                              double h) {
  if (!(h > 0.0) || !(dtau > 0.0) || !(dtau < 2.0 / h) || std::abs(h * dtau - 1.0) < 1e-12) {
    throw std::invalid_argument("verify_descent_bound: dtau " + std::to_string(dtau) +
                                " outside the validity window 0 < dtau < 2/h = " +
                                std::to_string(2.0 / h) + ", dtau != 1/h");
  }
  const EnergyStats es = energy_stats(state, h_shifted);
  const IteResult step = ite_step(state, h_shifted, dtau);
  const double lhs = energy_stats(step.state, h_shifted).energy;
  const double x = 1.0 - h * dtau;
  const double rhs = es.energy - 2.0 * dtau * (1.0 - 0.5 * h * dtau) / (x * x) * es.variance;
  return {es.energy, es.variance, lhs, rhs, lhs <= rhs + 1e-9};
}

/// H + |lambda_min| I, the PSD operator used by the bound checks.
inline PauliTermSum shift_to_psd(const PauliTermSum& h, double lambda_min) {
  return h + PauliTermSum::identity(h.n_qubits(), std::abs(lambda_min));
}

struct ContractionStep {
  std::size_t layer = 0;
  double ratio_before = 0.0;  // ||excited|| / ||ground|| before the kick
  double ratio_after = 0.0;
  double rho = 0.0;
  double r_first = 0.0;
  double exact_factor = 0.0;  // exp(-dtau * gap)
  bool gated = false;         // excited norm large enough to assert on
  bool holds = true;
};

/// Largest first-order damping factor of any excited group relative to the ground one.
inline double first_order_contraction_factor(const SpectrumResult& spec, double dtau) {
  const double e0 = spec.ground_energy();
  double r = 0.0;
  for (std::size_t n = 0; n < spec.size(); ++n) {
    if (spec.group_of[n] == 0) continue;
    r = std::max(r, std::abs((1.0 - dtau * spec.eigenvalues[n]) / (1.0 - dtau * e0)));
  }
  return r;
}

/**
 * Contraction of the excited-to-ground amplitude ratio across one kick.
 * Ground weight is the ground-group projector weight. Steps whose excited
 * norm is below `gate` are reported but not asserted, since rounding noise
 * dominates the ratio there.
 */
inline ContractionStep verify_contraction(const StateVector& before, const StateVector& after,
                                          const SpectrumResult& spec, double dtau,
                                          double gate = 1e-6) {
  ContractionStep s;
  const double g0 = group_populations(before, spec).front();
  const double g1 = group_populations(after, spec).front();
  const double e0 = std::max(0.0, 1.0 - g0);
  const double e1 = std::max(0.0, 1.0 - g1);
  s.ratio_before = std::sqrt(e0 / g0);
  s.ratio_after = std::sqrt(e1 / g1);
  s.rho = s.ratio_before > 0 ? s.ratio_after / s.ratio_before : 0.0;
  s.r_first = first_order_contraction_factor(spec, dtau);
  const double gap = spec.groups.size() > 1 ? spec.eigenvalues[spec.groups[1].front()] - spec.ground_energy() : 0.0;
  s.exact_factor = std::exp(-dtau * gap);
  s.gated = std::sqrt(e0) >= gate;
  s.holds = !s.gated || s.rho <= s.r_first + 1e-9;
  return s;
}

// ---------------------------------------------------------------------------
// Monotonicity audit

enum class Endpoint { converged, plateau, running };

inline std::string_view to_string(Endpoint e) {
  switch (e) {
    case Endpoint::converged: return "converged";
    case Endpoint::plateau: return "plateau";
    case Endpoint::running: return "running";
  }
  return "?";
}

struct AuditSettings {
  double slack_rel = 1e-6;      // descent slack = slack_rel * |E0|
  std::size_t window = 500;     // trailing window for plateau detection
  double stall_rel = 1e-8;      // stall_eps = stall_rel * |E0|
  double converged_threshold = 1e-2;
  double variance_floor = 1e-10;
  double closing_factor = 10.0;  // plateau if closing the gap needs > factor x elapsed layers
};

struct MonotonicityReport {
  std::vector<std::size_t> descent_violations;  // unitary steps with E rising beyond slack
  std::vector<std::size_t> ite_violations;      // kicks that failed to lower E while V > floor
  std::size_t ite_layers = 0;
  double max_rise = 0.0;
  double final_delta_e = std::numeric_limits<double>::quiet_NaN();
  double trailing_max_step = 0.0;   // largest |E_{k+1} - E_k| in the window
  double trailing_mean_step = 0.0;  // |E_end - E_start| / window
  double closing_layers = 0.0;      // final delta_e / trailing_mean_step
  Endpoint endpoint = Endpoint::running;
};

/**
 * Flags energy rises and classifies the endpoint. Unitary steps compare the
 * pre-kick energy of layer k with the energy recorded at layer k-1; kicks
 * compare energies across the kick itself.
 *
 * A plateau is a trailing window whose net energy change per layer is below
 * stall_eps, or slow enough that closing the remaining gap at that rate would
 * take more than closing_factor times the layers already run. The net change
 * is used rather than the largest single step because a stalled trajectory
 * still oscillates layer to layer while beta fluctuates about zero.
 */
inline MonotonicityReport monotonicity_audit(const TrajectoryRecord& traj,
                                             const AuditSettings& s = {}) {
  if (!traj.ground_energy) throw std::invalid_argument("monotonicity_audit: ground energy required");
  const double e0 = *traj.ground_energy;
  const double slack = s.slack_rel * std::abs(e0);
  const double stall = s.stall_rel * std::abs(e0);
  MonotonicityReport rep;
  const auto& L = traj.layers;
  for (std::size_t k = 1; k < L.size(); ++k) {
    const double rise = L[k].energy_before_ite - L[k - 1].energy;
    rep.max_rise = std::max(rep.max_rise, rise);
    if (rise > slack) rep.descent_violations.push_back(k);
    if (L[k].ite) {
      ++rep.ite_layers;
      if (L[k].variance_before_ite > s.variance_floor && !(L[k].energy < L[k].energy_before_ite)) {
        rep.ite_violations.push_back(k);
      }
    }
  }
  rep.final_delta_e = L.back().energy - e0;
  const std::size_t start = L.size() > s.window + 1 ? L.size() - 1 - s.window : 0;
  for (std::size_t k = start + 1; k < L.size(); ++k) {
    rep.trailing_max_step = std::max(rep.trailing_max_step, std::abs(L[k].energy - L[k - 1].energy));
  }
  const std::size_t span = L.size() - 1 - start;
  rep.trailing_mean_step = span > 0 ? std::abs(L.back().energy - L[start].energy) / static_cast<double>(span) : 0.0;
  rep.closing_layers = rep.trailing_mean_step > 0
                           ? rep.final_delta_e / rep.trailing_mean_step
                           : std::numeric_limits<double>::infinity();
  const double elapsed = static_cast<double>(L.size() - 1);
  if (rep.final_delta_e < s.converged_threshold) {
    rep.endpoint = Endpoint::converged;
  } else if (rep.trailing_mean_step < stall || rep.closing_layers > s.closing_factor * elapsed) {
    rep.endpoint = Endpoint::plateau;
  } else {
    rep.endpoint = Endpoint::running;
  }
  return rep;
}

}  // namespace falqon
