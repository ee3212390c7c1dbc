#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace falqon {

/// Operands act on registers (or bases) of different size.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation that requires a Hermitian operator received a non-Hermitian one.
class HermiticityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Krylov expansion reached its dimension cap before meeting the tolerance.
class KrylovNotConverged : public std::runtime_error {
 public:
  KrylovNotConverged(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Iterative eigensolver did not converge within its iteration budget.
class EigensolverNotConverged : public std::runtime_error {
 public:
  EigensolverNotConverged(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// (I - dtau H)|psi> vanished: psi is the eigenvector with eigenvalue 1/dtau.
class DegenerateStepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A logged trajectory quantity became NaN or infinite.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, std::size_t layer)
      : std::runtime_error(what + " at layer " + std::to_string(layer)),
        layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

}  // namespace falqon
