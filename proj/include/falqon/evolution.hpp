#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "falqon/errors.hpp"
#include "falqon/hubbard.hpp"
#include "falqon/krylov.hpp"
#include "falqon/norm.hpp"
#include "falqon/operator.hpp"
#include "falqon/state.hpp"

namespace falqon {

// ---------------------------------------------------------------------------
// Initial states

enum class InitMode { canonical_fill, occupation, random, driver_ground };

inline std::string_view to_string(InitMode m) {
  switch (m) {
    case InitMode::canonical_fill: return "canonical_fill";
    case InitMode::occupation: return "occupation";
    case InitMode::random: return "random";
    case InitMode::driver_ground: return "driver_ground";
  }
  return "?";
}

inline InitMode parse_init_mode(std::string_view s) {
  if (s == "canonical_fill") return InitMode::canonical_fill;
  if (s == "occupation") return InitMode::occupation;
  if (s == "random") return InitMode::random;
  if (s == "driver_ground") return InitMode::driver_ground;
  throw std::invalid_argument("unknown initial state '" + std::string(s) +
                              "' (expected canonical_fill, occupation, random, driver_ground)");
}

struct InitialStateSpec {
  InitMode mode = InitMode::driver_ground;
  std::uint64_t bitmask = 0;  // occupation mode
  std::uint64_t seed = 0;     // random mode

  friend bool operator==(const InitialStateSpec&, const InitialStateSpec&) = default;
};

/**
 * Lowest eigenvector of the hopping driver reachable from the uniform sector
 * vector: the normalized projection of that vector onto the lowest eigenspace
 * it overlaps. Phase fixed so the overlap with the uniform vector is positive.
 */
inline StateVector driver_ground_state(const LatticeSpec& lat, const OrbitalOrdering& ord,
                                       SectorBasisPtr basis = nullptr) {
  if (!basis) basis = make_sector_basis(lat, ord);
  const std::size_t dim = basis->dim();
  const CompiledOperator hd = CompiledOperator::sector(build_driver_hamiltonian(lat, ord), basis);
  LowestOptions opt;
  opt.tol = 1e-11;
  opt.start.assign(dim, cplx{1.0 / std::sqrt(static_cast<double>(dim)), 0.0});
  EigenPairs ep = lowest_eigenpairs(hd, 1, opt);
  std::vector<cplx> v = std::move(ep.vectors[0]);
  cplx overlap = 0.0;
  for (const cplx& a : v) overlap += a;
  const cplx phase = std::abs(overlap) > 0 ? std::conj(overlap) / std::abs(overlap) : cplx{1.0};
  for (cplx& a : v) a *= phase;
  StateVector s(std::move(basis), std::move(v));
  s.normalize();
  return s;
}

/// Normalized sector state for `spec`; embedded into the full register when
/// `full_space` is set.
inline StateVector initial_state(const LatticeSpec& lat, const OrbitalOrdering& ord,
                                 const InitialStateSpec& spec, bool full_space = false) {
  SectorBasisPtr basis = make_sector_basis(lat, ord);
  const int L = lat.n_sites();
  std::vector<cplx> a(basis->dim(), 0.0);
  StateVector s;
  switch (spec.mode) {
    case InitMode::canonical_fill:
    case InitMode::occupation: {
      std::uint64_t word = spec.bitmask;
      if (spec.mode == InitMode::canonical_fill) {
        word = ((std::uint64_t{1} << lat.n_up) - 1) |
               (((std::uint64_t{1} << lat.n_down) - 1) << L);
      } else if (!basis->contains(word)) {
        const std::uint64_t up_mask = (std::uint64_t{1} << L) - 1;
        throw std::invalid_argument(
            "initial_state: occupation mask has (" + std::to_string(std::popcount(word & up_mask)) +
            "," + std::to_string(std::popcount(word >> L)) + ") particles, sector expects (" +
            std::to_string(lat.n_up) + "," + std::to_string(lat.n_down) + ")");
      }
      a[*basis->index_of(word)] = 1.0;
      s = StateVector(basis, std::move(a));
      break;
    }
    case InitMode::random: {
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> g(0.0, 1.0);
      for (cplx& x : a) {
        const double re = g(rng);
        const double im = g(rng);
        x = {re, im};
      }
      s = StateVector(basis, std::move(a));
      s.normalize();
      break;
    }
    case InitMode::driver_ground:
      s = driver_ground_state(lat, ord, basis);
      break;
  }
  return full_space ? s.embed() : s;
}

// ---------------------------------------------------------------------------
// Real-time propagation

struct PropagationMethod {
  enum class Kind { krylov, trotter_terms };
  Kind kind = Kind::krylov;
  double tol = 1e-10;
  int max_dim = 60;
  int n_substeps = 1;

  static PropagationMethod krylov(double tol = 1e-10, int max_dim = 60) {
    return {Kind::krylov, tol, max_dim, 1};
  }
  static PropagationMethod trotter_terms(int n_substeps) {
    return {Kind::trotter_terms, 1e-10, 60, n_substeps};
  }
  friend bool operator==(const PropagationMethod&, const PropagationMethod&) = default;
};

struct PropagationStats {
  double norm_before_renormalization = 1.0;
  int krylov_dim = 0;
};

namespace detail {

// psi <- exp(-i theta P) psi = cos(theta) psi - i sin(theta) P psi, full register.
inline void apply_pauli_rotation(const PauliString& p, double theta, std::span<cplx> psi,
                                 std::vector<cplx>& scratch) {
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const double c = std::cos(theta);
  const cplx ms = cplx{0.0, -std::sin(theta)} * kIPow[p.y_count() & 3];
  const std::uint64_t x = p.x_mask();
  const std::uint64_t z = p.z_mask();
  scratch.assign(psi.begin(), psi.end());
  for (cplx& a : psi) a *= c;
  for (std::size_t b = 0; b < psi.size(); ++b) {
    const bool odd = std::popcount(b & z) & 1;
    psi[b ^ x] += (odd ? -ms : ms) * scratch[b];
  }
}

}  // namespace detail

/**
 * exp(-i H t)|psi>, renormalized. The norm before renormalization is reported
 * in `stats` so drift can be audited rather than silently hidden.
 */
inline StateVector propagate(const StateVector& state, const CompiledOperator& H, double t,
                             const PropagationMethod& method = {},
                             PropagationStats* stats = nullptr) {
  H.check_compatible(state, "propagate");
  if (!H.hermitian()) throw HermiticityError("propagate: operator is not hermitian");
  std::vector<cplx> out(state.dim());
  PropagationStats st;
  if (method.kind == PropagationMethod::Kind::krylov) {
    const ExpmStats es =
        expm_multiply(H, state.amplitudes(), t, out, method.tol, method.max_dim);
    st.krylov_dim = es.krylov_dim;
  } else {
    if (state.is_sector()) {
      throw std::invalid_argument(
          "propagate: trotter_terms acts term by term and needs a full-space state");
    }
    if (method.n_substeps <= 0) throw std::invalid_argument("propagate: n_substeps must be positive");
    out.assign(state.amplitudes().begin(), state.amplitudes().end());
    std::vector<cplx> scratch;
    const double step = t / method.n_substeps;
    for (int r = 0; r < method.n_substeps; ++r) {
      for (const auto& [p, c] : H.source().terms()) {
        detail::apply_pauli_rotation(p, c.real() * step, out, scratch);
      }
    }
  }
  StateVector result = state.with_amplitudes(std::move(out));
  st.norm_before_renormalization = result.normalize();
  if (stats) *stats = st;
  return result;
}

inline StateVector propagate(const StateVector& state, const PauliTermSum& H, double t,
                             const PropagationMethod& method = {},
                             PropagationStats* stats = nullptr) {
  return propagate(state, CompiledOperator::for_state(H, state), t, method, stats);
}

// ---------------------------------------------------------------------------
// Imaginary-time step, energy statistics

struct IteResult {
  StateVector state;
  double pre_norm;
};

/// Normalized (I - dtau H)|psi> and the norm before normalization.
inline IteResult ite_step(const StateVector& state, const CompiledOperator& H, double dtau) {
  H.check_compatible(state, "ite_step");
  if (!(dtau > 0.0)) throw std::invalid_argument("ite_step: dtau must be positive");
  std::vector<cplx> hpsi(state.dim());
  H.apply(state.amplitudes(), hpsi);
  for (std::size_t i = 0; i < hpsi.size(); ++i) hpsi[i] = state[i] - dtau * hpsi[i];
  StateVector next = state.with_amplitudes(std::move(hpsi));
  const double pre = next.norm();
  if (pre < 1e-12) {
    throw DegenerateStepError("ite_step: (I - dtau H)|psi> has norm " + std::to_string(pre) +
                              "; psi is an eigenvector with eigenvalue 1/dtau");
  }
  next.normalize();
  return {std::move(next), pre};
}

inline IteResult ite_step(const StateVector& state, const PauliTermSum& H, double dtau) {
  return ite_step(state, CompiledOperator::for_state(H, state), dtau);
}

struct EnergyStats {
  double energy;
  double variance;
};

/// <H> and <H^2> - <H>^2 (clamped at 0) from one operator application.
inline EnergyStats energy_stats(const StateVector& state, const CompiledOperator& H) {
  H.check_compatible(state, "energy_stats");
  std::vector<cplx> w(state.dim());
  H.apply(state.amplitudes(), w);
  double nrm2 = 0.0, h2 = 0.0;
  cplx h1 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    nrm2 += std::norm(state[i]);
    h1 += std::conj(state[i]) * w[i];
    h2 += std::norm(w[i]);
  }
  const double e = h1.real() / nrm2;
  return {e, std::max(0.0, h2 / nrm2 - e * e)};
}

inline double variance(const StateVector& state, const CompiledOperator& H) {
  return energy_stats(state, H).variance;
}

inline double variance(const StateVector& state, const PauliTermSum& H) {
  if (!H.is_hermitian()) throw HermiticityError("variance: operator is not hermitian");
  return variance(state, CompiledOperator::for_state(H, state));
}

/**
 * Largest admissible ITE step: 1 / max(|lambda_min|, |lambda_max|), with the
 * extremes taken over `basis` when given and over the full register otherwise.
 * Below this limit 1 - dtau E_n > 0 for every level.
 */
inline double dtau_limit(const PauliTermSum& H, SectorBasisPtr basis = nullptr) {
  const double h = operator_norm_bound(H, NormMode::extremal, std::move(basis));
  return h > 0 ? 1.0 / h : std::numeric_limits<double>::infinity();
}

inline void check_dtau(double dtau, double limit) {
  if (!(dtau > 0.0) || !(dtau < limit)) {
    throw std::invalid_argument("dtau " + std::to_string(dtau) +
                                " outside the damping-validity range (0, " +
                                std::to_string(limit) + ")");
  }
}

}  // namespace falqon
