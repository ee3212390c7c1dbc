#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "falqon/hubbard.hpp"
#include "falqon/pauli.hpp"
#include "falqon/pauli_action.hpp"
#include "falqon/state.hpp"

namespace falqon {

/// Row-compressed matrix of a number-conserving operator over sector indices.
struct SectorMatrix {
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int32_t> col;
  std::vector<cplx> val;

  std::size_t dim() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  std::size_t nnz() const { return val.size(); }

  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    const std::size_t n = dim();
    for (std::size_t i = 0; i < n; ++i) {
      cplx acc = 0.0;
      for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        acc += val[k] * in[col[k]];
      }
      out[i] = acc;
    }
  }
};

/**
 * Restricts a number-conserving Pauli sum to the (N_up, N_down) sector.
 *
 * Conservation is verified symbolically against the sector lattice's number
 * operators before any matrix element is generated.
 */
inline SectorMatrix sector_compile(const PauliTermSum& op, const SectorBasis& basis) {
  if (op.n_qubits() != basis.n_qubits()) {
    throw DimensionMismatch("sector_compile: operator has " +
                            std::to_string(op.n_qubits()) + " qubits, sector " +
                            std::to_string(basis.n_qubits()));
  }
  if (!conserves_particle_number(op, basis.lattice(), basis.ordering())) {
    throw std::invalid_argument(
        "sector_compile: operator does not conserve spin-resolved particle number");
  }
  SectorMatrix m;
  const std::size_t dim = basis.dim();
  m.row_ptr.reserve(dim + 1);
  m.row_ptr.push_back(0);
  std::vector<std::pair<std::int32_t, cplx>> row;
  for (std::size_t i = 0; i < dim; ++i) {
    row.clear();
    const std::uint64_t bi = basis.state(i);
    // <b_i|P|b_j> is nonzero only for b_j = b_i ^ x.
    for (const auto& [s, c] : op.terms()) {
      const std::uint64_t bj = bi ^ s.x_mask();
      auto j = basis.index_of(bj);
      if (!j) continue;
      row.emplace_back(static_cast<std::int32_t>(*j), c * s.act(bj).second);
    }
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < row.size();) {
      const std::int32_t j = row[k].first;
      cplx v = 0.0;
      for (; k < row.size() && row[k].first == j; ++k) v += row[k].second;
      if (std::abs(v) >= kPruneThreshold) {
        m.col.push_back(j);
        m.val.push_back(v);
      }
    }
    m.row_ptr.push_back(static_cast<std::int64_t>(m.val.size()));
  }
  return m;
}

/**
 * An operator prepared for repeated application in one basis: either the full
 * 2^n register (Pauli bit kernels) or a particle-number sector (CSR).
 */
class CompiledOperator {
 public:
  CompiledOperator() = default;

  static CompiledOperator full(PauliTermSum op) {
    CompiledOperator c;
    c.dim_ = std::size_t{1} << op.n_qubits();
    c.source_ = std::make_shared<const PauliTermSum>(std::move(op));
    return c;
  }

  static CompiledOperator sector(PauliTermSum op, SectorBasisPtr basis) {
    CompiledOperator c;
    c.matrix_ = std::make_shared<const SectorMatrix>(sector_compile(op, *basis));
    c.dim_ = basis->dim();
    c.basis_ = std::move(basis);
    c.source_ = std::make_shared<const PauliTermSum>(std::move(op));
    return c;
  }

  /// Compiles for the basis `like` lives in.
  static CompiledOperator for_state(PauliTermSum op, const StateVector& like) {
    if (op.n_qubits() != like.n_qubits()) {
      throw DimensionMismatch("CompiledOperator: operator has " +
                              std::to_string(op.n_qubits()) + " qubits, state " +
                              std::to_string(like.n_qubits()));
    }
    return like.is_sector() ? sector(std::move(op), like.basis()) : full(std::move(op));
  }

  std::size_t dim() const { return dim_; }
  bool is_sector() const { return matrix_ != nullptr; }
  const PauliTermSum& source() const { return *source_; }
  const SectorBasisPtr& basis() const { return basis_; }
  bool hermitian(double tol = 1e-12) const { return source_->is_hermitian(tol); }

  /// out = op * in; `out` must not alias `in`.
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    if (matrix_) {
      matrix_->apply(in, out);
      return;
    }
    std::fill(out.begin(), out.end(), cplx{0.0});
    detail::apply_full_accumulate(*source_, in, out);
  }

  void check_compatible(const StateVector& state, const char* where) const {
    if (state.dim() != dim_ || state.is_sector() != is_sector() ||
        (is_sector() && !basis_->same_sector(*state.basis()))) {
      throw DimensionMismatch(std::string(where) +
                              ": state basis does not match the compiled operator");
    }
  }

  StateVector apply(const StateVector& state) const {
    check_compatible(state, "CompiledOperator::apply");
    std::vector<cplx> out(dim_);
    apply(state.amplitudes(), out);
    return state.with_amplitudes(std::move(out));
  }

  cplx expectation(const StateVector& state) const {
    check_compatible(state, "CompiledOperator::expectation");
    std::vector<cplx> out(dim_);
    apply(state.amplitudes(), out);
    cplx s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += std::conj(state[i]) * out[i];
    return s;
  }

 private:
  std::size_t dim_ = 0;
  std::shared_ptr<const PauliTermSum> source_;
  std::shared_ptr<const SectorMatrix> matrix_;
  SectorBasisPtr basis_;
};

}  // namespace falqon
