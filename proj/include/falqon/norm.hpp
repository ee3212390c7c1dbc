#pragma once

#include <algorithm>
#include <cmath>
#include <string_view>

#include "falqon/errors.hpp"
#include "falqon/krylov.hpp"
#include "falqon/operator.hpp"
#include "falqon/pauli.hpp"

namespace falqon {

enum class NormMode { triangle, extremal };

inline NormMode parse_norm_mode(std::string_view s) {
  if (s == "triangle") return NormMode::triangle;
  if (s == "extremal") return NormMode::extremal;
  throw std::invalid_argument("unknown norm mode '" + std::string(s) + "'");
}

/// Extremal eigenvalues of a Hermitian sum over the full register or a sector.
inline SpectralBounds spectral_bounds(const PauliTermSum& op, SectorBasisPtr basis = nullptr,
                                      double rel_tol = 1e-8) {
  if (!op.is_hermitian()) throw HermiticityError("spectral_bounds: operator is not hermitian");
  const CompiledOperator c = basis ? CompiledOperator::sector(op, std::move(basis))
                                   : CompiledOperator::full(op);
  return extremal_eigenvalues(c, rel_tol);
}

/**
 * Upper bound h on the spectral norm.
 *
 * triangle: sum of |coefficients|. extremal: max |lambda| by Lanczos over the
 * whole register, or over `basis` when given (a bound for that sector only).
 */
inline double operator_norm_bound(const PauliTermSum& op, NormMode mode = NormMode::triangle,
                                  SectorBasisPtr basis = nullptr) {
  if (!op.is_hermitian()) throw HermiticityError("operator_norm_bound: operator is not hermitian");
  if (mode == NormMode::triangle || op.empty()) return op.one_norm();
  const SpectralBounds b = spectral_bounds(op, std::move(basis));
  return std::max(std::abs(b.min), std::abs(b.max));
}

}  // namespace falqon
