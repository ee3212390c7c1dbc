#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "falqon/csv.hpp"
#include "falqon/errors.hpp"
#include "falqon/hubbard.hpp"
#include "falqon/krylov.hpp"
#include "falqon/operator.hpp"
#include "falqon/state.hpp"

namespace falqon {

/**
 * Fermi-Hubbard Hamiltonian written directly in the occupation basis of the
 * (N_up, N_down) sector, with fermionic signs from the parity of occupied
 * orbitals between the hop endpoints. Uses no Pauli algebra; indices match
 * SectorBasis(lat, ord) exactly.
 */
inline SectorMatrix fermionic_hamiltonian_oracle(const LatticeSpec& lat,
                                                 const OrbitalOrdering& ord = {}) {
  const SectorBasis basis(lat, ord);
  const auto edges = lattice_edges(lat);
  SectorMatrix m;
  m.row_ptr.push_back(0);
  std::vector<std::pair<std::int32_t, double>> row;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const std::uint64_t w = basis.state(i);
    row.clear();
    double diag = 0.0;
    for (int site = 0; site < lat.n_sites(); ++site) {
      const int a = ord.orbital(lat, site, Spin::up);
      const int b = ord.orbital(lat, site, Spin::down);
      if (((w >> a) & 1) && ((w >> b) & 1)) diag += lat.U;
    }
    if (diag != 0.0) row.emplace_back(static_cast<std::int32_t>(i), diag);
    for (const auto& [si, sj] : edges) {
      for (Spin s : {Spin::up, Spin::down}) {
        const int p = ord.orbital(lat, si, s);
        const int q = ord.orbital(lat, sj, s);
        // c+_p c_q and c+_q c_p: move a particle between p and q.
        const bool op = (w >> p) & 1;
        const bool oq = (w >> q) & 1;
        if (op == oq) continue;
        const int lo = std::min(p, q);
        const int hi = std::max(p, q);
        const std::uint64_t between = ((std::uint64_t{1} << hi) - 1) & ~((std::uint64_t{2} << lo) - 1);
        const double sign = (std::popcount(w & between) & 1) ? -1.0 : 1.0;
        const std::uint64_t w2 = w ^ (std::uint64_t{1} << p) ^ (std::uint64_t{1} << q);
        row.emplace_back(static_cast<std::int32_t>(*basis.index_of(w2)), -lat.J * sign);
      }
    }
    std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t k = 0; k < row.size();) {
      const std::int32_t j = row[k].first;
      double v = 0.0;
      for (; k < row.size() && row[k].first == j; ++k) v += row[k].second;
      if (std::abs(v) >= kPruneThreshold) {
        m.col.push_back(j);
        m.val.emplace_back(v, 0.0);
      }
    }
    m.row_ptr.push_back(static_cast<std::int64_t>(m.val.size()));
  }
  return m;
}

/// Dense copy of any linear map (column j = op * e_j).
template <LinearMap Op>
Eigen::MatrixXcd to_dense(const Op& op) {
  const std::size_t n = op.dim();
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<cplx> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

inline constexpr std::size_t kDenseDimCap = 4096;

enum class DiagMode { full_dense, lowest_k };

struct DiagonalizeOptions {
  DiagMode mode = DiagMode::full_dense;
  int k = 1;
  int block = 4;
  std::uint64_t seed = 0x5eedULL;
  double tol = 1e-10;
};

/**
 * Eigen-decomposition with degeneracy groups.
 *
 * eigenvectors (when present) hold one column per eigenvalue in the basis of
 * the decomposed operator; `basis` is the sector, or null for a full register.
 */
struct SpectrumResult {
  std::vector<double> eigenvalues;
  std::optional<Eigen::MatrixXcd> eigenvectors;
  std::vector<double> residuals;
  std::vector<int> group_of;
  std::vector<std::vector<int>> groups;
  double degeneracy_eps = 0.0;
  bool truncated = false;
  SectorBasisPtr basis;

  std::size_t size() const { return eigenvalues.size(); }
  double ground_energy() const { return eigenvalues.front(); }
  const std::vector<int>& ground_group() const { return groups.front(); }
};

inline double degeneracy_eps_for(const std::vector<double>& ev) {
  double emax = 0.0;
  for (double e : ev) emax = std::max(emax, std::abs(e));
  return 1e-8 * std::max(1.0, emax);
}

/// Groups consecutive ascending eigenvalues closer than eps.
inline void assign_degeneracy_groups(SpectrumResult& r) {
  r.degeneracy_eps = degeneracy_eps_for(r.eigenvalues);
  r.group_of.assign(r.eigenvalues.size(), 0);
  r.groups.clear();
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
    if (i == 0 || r.eigenvalues[i] - r.eigenvalues[i - 1] >= r.degeneracy_eps) r.groups.emplace_back();
    r.groups.back().push_back(static_cast<int>(i));
    r.group_of[i] = static_cast<int>(r.groups.size() - 1);
  }
}

inline SpectrumResult diagonalize_dense(const Eigen::MatrixXcd& h) {
  SpectrumResult r;
  const Eigen::Index n = h.rows();
  const bool real = h.imag().cwiseAbs().maxCoeff() == 0.0;
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
  if (real) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
    if (es.info() != Eigen::Success) throw EigensolverNotConverged("diagonalize: dense solver failed", 0.0);
    values = es.eigenvalues();
    vectors = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw EigensolverNotConverged("diagonalize: dense solver failed", 0.0);
    values = es.eigenvalues();
    vectors = es.eigenvectors();
  }
  r.eigenvalues.assign(values.data(), values.data() + n);
  r.residuals.resize(static_cast<std::size_t>(n));
  const Eigen::MatrixXcd hv = h * vectors;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.residuals[static_cast<std::size_t>(i)] = (hv.col(i) - values[i] * vectors.col(i)).norm();
  }
  r.eigenvectors = std::move(vectors);
  assign_degeneracy_groups(r);
  return r;
}

/// Diagonalizes a compiled operator (sector or full register).
inline SpectrumResult diagonalize(const CompiledOperator& h, const DiagonalizeOptions& opt = {}) {
  if (!h.hermitian()) throw HermiticityError("diagonalize: operator is not hermitian");
  SpectrumResult r;
  if (opt.mode == DiagMode::full_dense) {
    if (h.dim() > kDenseDimCap) {
      throw std::length_error("diagonalize: dimension " + std::to_string(h.dim()) +
                              " exceeds the dense cap of " + std::to_string(kDenseDimCap) +
                              "; use lowest_k (Lanczos) instead");
    }
    r = diagonalize_dense(to_dense(h));
  } else {
    LowestOptions lo;
    lo.block = opt.block;
    lo.seed = opt.seed;
    lo.tol = opt.tol;
    const EigenPairs ep = lowest_eigenpairs(h, opt.k, lo);
    const auto n = static_cast<Eigen::Index>(h.dim());
    Eigen::MatrixXcd vecs(n, static_cast<Eigen::Index>(ep.values.size()));
    for (std::size_t i = 0; i < ep.values.size(); ++i) {
      for (Eigen::Index j = 0; j < n; ++j) vecs(j, static_cast<Eigen::Index>(i)) = ep.vectors[i][j];
    }
    r.eigenvalues = ep.values;
    r.residuals = ep.residuals;
    r.eigenvectors = std::move(vecs);
    r.truncated = ep.values.size() < h.dim();
    assign_degeneracy_groups(r);
  }
  r.basis = h.basis();
  return r;
}

/// Sector spectrum of H_p via the Jordan-Wigner route.
inline SpectrumResult sector_spectrum(const LatticeSpec& lat, const OrbitalOrdering& ord = {},
                                      DiagonalizeOptions opt = {}) {
  const SectorBasisPtr basis = make_sector_basis(lat, ord);
  return diagonalize(CompiledOperator::sector(build_problem_hamiltonian(lat, ord), basis), opt);
}

/// Ground energy of the sector, dense when small and Lanczos otherwise.
inline double sector_ground_energy(const LatticeSpec& lat, const OrbitalOrdering& ord = {},
                                   std::uint64_t seed = 0x5eedULL) {
  const SectorBasisPtr basis = make_sector_basis(lat, ord);
  const CompiledOperator h = CompiledOperator::sector(build_problem_hamiltonian(lat, ord), basis);
  if (basis->dim() <= 512) return diagonalize(h).ground_energy();
  DiagonalizeOptions opt;
  opt.mode = DiagMode::lowest_k;
  opt.k = 1;
  opt.seed = seed;
  return diagonalize(h, opt).ground_energy();
}

// ---------------------------------------------------------------------------
// Populations

struct LevelPopulation {
  double energy;
  double weight;        // |<n|psi>|^2, basis-dependent inside a degenerate group
  int group;
  double group_summed;  // total weight of the level's degeneracy group
};

namespace spectral_detail {

inline void check_basis(const StateVector& state, const SpectrumResult& spec, const char* where) {
  if (!spec.eigenvectors) throw std::invalid_argument(std::string(where) + ": spectrum has no eigenvectors");
  const bool ok = spec.basis ? (state.is_sector() && state.basis()->same_sector(*spec.basis))
                             : !state.is_sector();
  if (!ok || static_cast<Eigen::Index>(state.dim()) != spec.eigenvectors->rows()) {
    throw DimensionMismatch(std::string(where) + ": state and spectrum live in different bases");
  }
}

}  // namespace spectral_detail

/// Per-level populations |<n|psi>|^2 with group-summed weights.
inline std::vector<LevelPopulation> population_distribution(const StateVector& state,
                                                            const SpectrumResult& spec) {
  spectral_detail::check_basis(state, spec, "population_distribution");
  Eigen::Map<const Eigen::VectorXcd> psi(state.amplitudes().data(),
                                         static_cast<Eigen::Index>(state.dim()));
  const Eigen::VectorXcd overlaps = spec.eigenvectors->adjoint() * psi;
  std::vector<double> group_weight(spec.groups.size(), 0.0);
  std::vector<LevelPopulation> out(spec.size());
  for (std::size_t n = 0; n < spec.size(); ++n) {
    out[n] = {spec.eigenvalues[n], std::norm(overlaps[static_cast<Eigen::Index>(n)]),
              spec.group_of[n], 0.0};
    group_weight[static_cast<std::size_t>(spec.group_of[n])] += out[n].weight;
  }
  for (auto& p : out) p.group_summed = group_weight[static_cast<std::size_t>(p.group)];
  return out;
}

/// Total weight per degeneracy group, indexed by group id.
inline std::vector<double> group_populations(const StateVector& state, const SpectrumResult& spec) {
  std::vector<double> g(spec.groups.size(), 0.0);
  for (const auto& p : population_distribution(state, spec)) g[static_cast<std::size_t>(p.group)] += p.weight;
  return g;
}

/// Norm distance from psi to the ground degeneracy subspace.
inline double ground_distance(const StateVector& state, const SpectrumResult& spec) {
  const double w = group_populations(state, spec).front();
  return std::sqrt(std::max(0.0, 1.0 - w));
}

// ---------------------------------------------------------------------------
// CSV

inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& spec) {
  os << "index,energy,degeneracy_group\n";
  for (std::size_t i = 0; i < spec.size(); ++i) {
    os << i << ',' << format_double(spec.eigenvalues[i]) << ',' << spec.group_of[i] << '\n';
  }
}

inline void write_population_csv(std::ostream& os, const std::vector<LevelPopulation>& pops) {
  os << "energy,weight,group_summed\n";
  for (const auto& p : pops) {
    os << format_double(p.energy) << ',' << format_double(p.weight) << ','
       << format_double(p.group_summed) << '\n';
  }
}

}  // namespace falqon
