#pragma once

#include <Eigen/SparseCore>

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falqon/pauli.hpp"
#include "falqon/state.hpp"

namespace falqon {

namespace detail {

inline void check_register(const StateVector& state, const PauliTermSum& op,
                           const char* where) {
  if (state.n_qubits() != op.n_qubits()) {
    throw DimensionMismatch(std::string(where) + ": state has " +
                            std::to_string(state.n_qubits()) +
                            " qubits, operator " + std::to_string(op.n_qubits()));
  }
}

// out += op * in over the full 2^n basis.
inline void apply_full_accumulate(const PauliTermSum& op, std::span<const cplx> in,
                                  std::span<cplx> out) {
  const std::size_t dim = in.size();
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (const auto& [s, c] : op.terms()) {
    const std::uint64_t x = s.x_mask();
    const std::uint64_t z = s.z_mask();
    const cplx base = c * kIPow[s.y_count() & 3];
    for (std::size_t b = 0; b < dim; ++b) {
      const bool odd = std::popcount(b & z) & 1;
      out[b ^ x] += (odd ? -base : base) * in[b];
    }
  }
}

}  // namespace detail

/// op|psi>, unnormalized. For sector-mode states the result is projected back
/// onto the sector (exact for number-conserving operators).
inline StateVector apply_term_sum(const StateVector& state, const PauliTermSum& op) {
  detail::check_register(state, op, "apply_term_sum");
  std::vector<cplx> out(state.dim(), 0.0);
  if (!state.is_sector()) {
    detail::apply_full_accumulate(op, state.amplitudes(), out);
    return state.with_amplitudes(std::move(out));
  }
  const SectorBasis& basis = *state.basis();
  for (std::size_t j = 0; j < state.dim(); ++j) {
    const cplx a = state[j];
    if (a == cplx{0.0}) continue;
    for (const auto& [s, c] : op.terms()) {
      auto [w, phase] = s.act(basis.state(j));
      if (auto i = basis.index_of(w)) out[*i] += c * phase * a;
    }
  }
  return state.with_amplitudes(std::move(out));
}

/// <psi|op|psi>, evaluated term by term without forming a matrix.
inline cplx expectation(const StateVector& state, const PauliTermSum& op) {
  detail::check_register(state, op, "expectation");
  cplx total = 0.0;
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (const auto& [s, c] : op.terms()) {
    const std::uint64_t x = s.x_mask();
    const std::uint64_t z = s.z_mask();
    cplx acc = 0.0;
    if (!state.is_sector()) {
      for (std::size_t b = 0; b < state.dim(); ++b) {
        const cplx term = std::conj(state[b ^ x]) * state[b];
        acc += (std::popcount(b & z) & 1) ? -term : term;
      }
    } else {
      const SectorBasis& basis = *state.basis();
      for (std::size_t j = 0; j < state.dim(); ++j) {
        const std::uint64_t b = basis.state(j);
        const auto i = x == 0 ? std::optional<std::size_t>(j) : basis.index_of(b ^ x);
        if (!i) continue;
        const cplx term = std::conj(state[*i]) * state[j];
        acc += (std::popcount(b & z) & 1) ? -term : term;
      }
    }
    total += c * kIPow[s.y_count() & 3] * acc;
  }
  return total;
}

using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::int64_t>;

/// Largest register to_sparse_matrix will lower by default.
inline constexpr int kSparseQubitCap = 16;

/// Matrix of `op` in the computational basis (qubit 0 = least significant bit).
inline SparseMatrix to_sparse_matrix(const PauliTermSum& op,
                                     int max_qubits = kSparseQubitCap) {
  if (op.n_qubits() > max_qubits) {
    throw std::length_error("to_sparse_matrix: " + std::to_string(op.n_qubits()) +
                            " qubits exceeds the cap of " +
                            std::to_string(max_qubits) + " qubits");
  }
  const std::int64_t dim = std::int64_t{1} << op.n_qubits();
  std::vector<Eigen::Triplet<cplx, std::int64_t>> entries;
  entries.reserve(op.size() * static_cast<std::size_t>(dim));
  for (const auto& [s, c] : op.terms()) {
    for (std::int64_t b = 0; b < dim; ++b) {
      auto [w, phase] = s.act(static_cast<std::uint64_t>(b));
      entries.emplace_back(static_cast<std::int64_t>(w), b, c * phase);
    }
  }
  SparseMatrix m(dim, dim);
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune([](std::int64_t, std::int64_t, const cplx& v) {
    return std::abs(v) >= kPruneThreshold;
  });
  return m;
}

}  // namespace falqon
