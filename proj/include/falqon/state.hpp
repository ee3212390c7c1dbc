#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "falqon/errors.hpp"
#include "falqon/hubbard.hpp"

namespace falqon {

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

/// All `width`-bit integers with exactly `k` set bits, ascending.
inline std::vector<std::uint64_t> fixed_popcount_words(int width, int k) {
  std::vector<std::uint64_t> out;
  if (k < 0 || k > width) return out;
  out.reserve(binomial(width, k));
  if (k == 0) {
    out.push_back(0);
    return out;
  }
  const std::uint64_t limit = width == 64 ? 0 : (std::uint64_t{1} << width);
  std::uint64_t v = (std::uint64_t{1} << k) - 1;
  while (limit == 0 || v < limit) {
    out.push_back(v);
    // Gosper's hack: next word with the same popcount.
    const std::uint64_t c = v & (~v + 1);
    const std::uint64_t r = v + c;
    if (r == 0) break;
    v = (((r ^ v) >> 2) / c) | r;
  }
  return out;
}

/**
 * Occupation basis of the fixed-(N_up, N_down) sector.
 *
 * Basis words are 2L-bit integers: the low L bits are the spin-up block and
 * the high L bits the spin-down block, matching the spin-blocked orbital
 * numbering. Words are stored ascending.
 */
class SectorBasis {
 public:
  SectorBasis(const LatticeSpec& lattice, const OrbitalOrdering& ordering)
      : lattice_(lattice), ordering_(ordering) {
    lattice_.validate();
    const int L = lattice_.n_sites();
    const auto ups = fixed_popcount_words(L, lattice_.n_up);
    const auto downs = fixed_popcount_words(L, lattice_.n_down);
    states_.reserve(ups.size() * downs.size());
    for (std::uint64_t d : downs) {
      for (std::uint64_t u : ups) states_.push_back(u | (d << L));
    }
  }

  const LatticeSpec& lattice() const { return lattice_; }
  const OrbitalOrdering& ordering() const { return ordering_; }
  int n_qubits() const { return lattice_.n_qubits(); }
  std::size_t dim() const { return states_.size(); }
  std::span<const std::uint64_t> basis_states() const { return states_; }
  std::uint64_t state(std::size_t i) const { return states_[i]; }

  std::optional<std::size_t> index_of(std::uint64_t word) const {
    auto it = std::lower_bound(states_.begin(), states_.end(), word);
    if (it == states_.end() || *it != word) return std::nullopt;
    return static_cast<std::size_t>(it - states_.begin());
  }

  bool contains(std::uint64_t word) const {
    const int L = lattice_.n_sites();
    const std::uint64_t up_mask = (std::uint64_t{1} << L) - 1;
    return (word >> (2 * L)) == 0 &&
           std::popcount(word & up_mask) == lattice_.n_up &&
           std::popcount(word >> L) == lattice_.n_down;
  }

  bool same_sector(const SectorBasis& other) const {
    return lattice_.rows == other.lattice_.rows &&
           lattice_.cols == other.lattice_.cols &&
           lattice_.n_up == other.lattice_.n_up &&
           lattice_.n_down == other.lattice_.n_down;
  }

 private:
  LatticeSpec lattice_;
  OrbitalOrdering ordering_;
  std::vector<std::uint64_t> states_;
};

using SectorBasisPtr = std::shared_ptr<const SectorBasis>;

inline SectorBasisPtr make_sector_basis(const LatticeSpec& lattice,
                                        const OrbitalOrdering& ordering = {}) {
  return std::make_shared<const SectorBasis>(lattice, ordering);
}

/**
 * Amplitudes over either the full 2^n computational basis or a particle-number
 * sector. In sector mode amplitude i belongs to basis word basis->state(i).
 */
class StateVector {
 public:
  StateVector() = default;

  /// Full-space state; amplitudes.size() must be 2^n_qubits.
  StateVector(int n_qubits, std::vector<cplx> amplitudes)
      : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    if (n_qubits <= 0 || n_qubits > 30) {
      throw std::invalid_argument("StateVector: full mode supports 1..30 qubits");
    }
    if (amps_.size() != (std::size_t{1} << n_qubits)) {
      throw DimensionMismatch("StateVector: expected 2^" +
                              std::to_string(n_qubits) + " amplitudes, got " +
                              std::to_string(amps_.size()));
    }
  }

  /// Sector-mode state; amplitudes.size() must equal basis->dim().
  StateVector(SectorBasisPtr basis, std::vector<cplx> amplitudes)
      : n_qubits_(basis->n_qubits()),
        amps_(std::move(amplitudes)),
        basis_(std::move(basis)) {
    if (amps_.size() != basis_->dim()) {
      throw DimensionMismatch("StateVector: expected " +
                              std::to_string(basis_->dim()) +
                              " sector amplitudes, got " +
                              std::to_string(amps_.size()));
    }
  }

  static StateVector basis_state(int n_qubits, std::uint64_t word) {
    std::vector<cplx> a(std::size_t{1} << n_qubits, 0.0);
    a.at(word) = 1.0;
    return StateVector(n_qubits, std::move(a));
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  bool is_sector() const { return basis_ != nullptr; }
  const SectorBasisPtr& basis() const { return basis_; }

  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }
  cplx& operator[](std::size_t i) { return amps_[i]; }

  /// Computational basis word of amplitude i.
  std::uint64_t word(std::size_t i) const {
    return basis_ ? basis_->state(i) : static_cast<std::uint64_t>(i);
  }

  /// Amplitude index of a basis word, if representable in this basis.
  std::optional<std::size_t> index_of(std::uint64_t w) const {
    if (basis_) return basis_->index_of(w);
    if (w < amps_.size()) return static_cast<std::size_t>(w);
    return std::nullopt;
  }

  double norm() const {
    double s = 0.0;
    for (const cplx& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  /// Scales to unit norm and returns the norm before scaling.
  double normalize() {
    const double n = norm();
    if (n == 0.0) throw std::domain_error("StateVector: cannot normalize zero vector");
    for (cplx& a : amps_) a /= n;
    return n;
  }

  /// Same basis, new amplitudes.
  StateVector with_amplitudes(std::vector<cplx> amplitudes) const {
    if (basis_) return StateVector(basis_, std::move(amplitudes));
    return StateVector(n_qubits_, std::move(amplitudes));
  }

  bool same_basis(const StateVector& other) const {
    if (n_qubits_ != other.n_qubits_ || dim() != other.dim()) return false;
    if (is_sector() != other.is_sector()) return false;
    return !is_sector() || basis_ == other.basis_ ||
           basis_->same_sector(*other.basis_);
  }

  /// Full-space copy of this state.
  StateVector embed() const {
    if (!basis_) return *this;
    std::vector<cplx> full(std::size_t{1} << n_qubits_, 0.0);
    for (std::size_t i = 0; i < amps_.size(); ++i) full[basis_->state(i)] = amps_[i];
    return StateVector(n_qubits_, std::move(full));
  }

  /// Restriction of a full-space state to `basis`; weight outside is dropped.
  static StateVector project(const StateVector& full, SectorBasisPtr basis) {
    if (full.is_sector()) throw std::invalid_argument("project: input already in a sector");
    if (full.n_qubits() != basis->n_qubits()) {
      throw DimensionMismatch("project: qubit count differs from sector lattice");
    }
    std::vector<cplx> a(basis->dim());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = full[basis->state(i)];
    return StateVector(std::move(basis), std::move(a));
  }

 private:
  int n_qubits_ = 0;
  std::vector<cplx> amps_;
  SectorBasisPtr basis_;
};

/// <a|b>.
inline cplx inner(const StateVector& a, const StateVector& b) {
  if (!a.same_basis(b)) throw DimensionMismatch("inner: states live in different bases");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double distance(const StateVector& a, const StateVector& b) {
  if (!a.same_basis(b)) throw DimensionMismatch("distance: states live in different bases");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace falqon
