#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "falqon/errors.hpp"

namespace falqon {

using cplx = std::complex<double>;

/// Anything that can act on amplitude arrays of a fixed dimension.
template <class Op>
concept LinearMap = requires(const Op& op, std::span<const cplx> in, std::span<cplx> out) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  op.apply(in, out);
};

/// Dense Hermitian matrix viewed as a LinearMap (tests and small oracles).
struct DenseMap {
  const Eigen::MatrixXcd* matrix;
  std::size_t dim() const { return static_cast<std::size_t>(matrix->rows()); }
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    Eigen::Map<const Eigen::VectorXcd> x(in.data(), static_cast<Eigen::Index>(in.size()));
    Eigen::Map<Eigen::VectorXcd> y(out.data(), static_cast<Eigen::Index>(out.size()));
    y.noalias() = (*matrix) * x;
  }
};

namespace krylov_detail {

inline cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double norm(std::span<const cplx> a) {
  double s = 0.0;
  for (const cplx& x : a) s += std::norm(x);
  return std::sqrt(s);
}

inline void axpy(cplx alpha, std::span<const cplx> x, std::span<cplx> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline std::vector<cplx> random_vector(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<cplx> v(dim);
  for (auto& x : v) {
    const double re = g(rng);
    const double im = g(rng);
    x = {re, im};
  }
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

// Two passes of classical Gram-Schmidt against `basis`.
inline void orthogonalize(const std::vector<std::vector<cplx>>& basis, std::span<cplx> w) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) axpy(-dot(q, w), q, w);
  }
}

}  // namespace krylov_detail

struct SpectralBounds {
  double min;
  double max;
  int iterations;
};

/**
 * Smallest and largest eigenvalue of a Hermitian map by plain Lanczos.
 *
 * Only three vectors are kept, so memory stays O(dim) on large registers.
 * Loss of orthogonality produces duplicate Ritz values but leaves the extreme
 * ones intact. Stops when both extremes have residual estimate below
 * rel_tol * max(1, |theta|), or on an invariant subspace.
 */
template <LinearMap Op>
SpectralBounds extremal_eigenvalues(const Op& op, double rel_tol = 1e-8,
                                    std::uint64_t seed = 0x5eedULL, int max_iter = 3000) {
  using namespace krylov_detail;
  const std::size_t n = op.dim();
  std::vector<cplx> v = random_vector(n, seed);
  std::vector<cplx> v_prev(n, 0.0), w(n);
  std::vector<double> alpha, beta;
  double beta_prev = 0.0;
  double lo = 0.0, hi = 0.0;
  for (int m = 1; m <= max_iter; ++m) {
    op.apply(v, w);
    const double a = dot(v, w).real();
    for (std::size_t i = 0; i < n; ++i) w[i] -= a * v[i] + beta_prev * v_prev[i];
    const double b = norm(w);
    alpha.push_back(a);
    beta.push_back(b);

    const double scale = std::max(1.0, std::abs(a) + b + beta_prev);
    const bool invariant = b < 1e-13 * scale;
    if (invariant || m % 4 == 0 || m == static_cast<int>(n)) {
      Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
      Eigen::VectorXd e(std::max(0, m - 1));
      for (int i = 0; i + 1 < m; ++i) e[i] = beta[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      lo = es.eigenvalues()[0];
      hi = es.eigenvalues()[m - 1];
      const double r_lo = b * std::abs(es.eigenvectors()(m - 1, 0));
      const double r_hi = b * std::abs(es.eigenvectors()(m - 1, m - 1));
      if (invariant || (r_lo < rel_tol * std::max(1.0, std::abs(lo)) &&
                        r_hi < rel_tol * std::max(1.0, std::abs(hi)))) {
        return {lo, hi, m};
      }
    }
    v_prev.swap(v);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / b;
    beta_prev = b;
  }
  throw EigensolverNotConverged("extremal_eigenvalues: Lanczos did not converge", hi - lo);
}

struct ExpmStats {
  int krylov_dim = 0;
  double increment = 0.0;
};

/**
 * out = exp(-i t H) v by Lanczos projection with full reorthogonalization.
 *
 * The subspace grows until the change in the propagated vector between
 * consecutive dimensions is below `tol` (absolute, in vector 2-norm), or the
 * subspace becomes invariant.
 */
template <LinearMap Op>
ExpmStats expm_multiply(const Op& op, std::span<const cplx> v, double t, std::span<cplx> out,
                        double tol = 1e-10, int max_dim = 60) {
  using namespace krylov_detail;
  const std::size_t n = op.dim();
  const double nu = norm(v);
  if (t == 0.0 || nu == 0.0) {
    std::copy(v.begin(), v.end(), out.begin());
    return {0, 0.0};
  }
  std::vector<std::vector<cplx>> V;
  V.reserve(static_cast<std::size_t>(max_dim));
  V.emplace_back(v.begin(), v.end());
  for (auto& x : V[0]) x /= nu;
  std::vector<double> alpha, beta;
  Eigen::VectorXcd y_prev;
  std::vector<cplx> w(n);
  double increment = std::numeric_limits<double>::infinity();

  for (int m = 1; m <= max_dim; ++m) {
    op.apply(V[m - 1], w);
    const double a = dot(V[m - 1], w).real();
    axpy(-a, V[m - 1], w);
    if (m > 1) axpy(-beta[m - 2], V[m - 2], w);
    orthogonalize(V, w);
    const double b = norm(w);
    alpha.push_back(a);

    Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd e(m - 1);
    for (int i = 0; i + 1 < m; ++i) e[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::VectorXcd phase(m);
    for (int i = 0; i < m; ++i) {
      phase[i] = std::exp(cplx{0.0, -t * es.eigenvalues()[i]}) * Q(0, i);
    }
    Eigen::VectorXcd y = Q.cast<cplx>() * phase;

    const double scale = std::max(1.0, std::abs(a) + b);
    const bool invariant = b < 1e-13 * scale || m == static_cast<int>(n);
    if (m > 1) {
      double s = std::norm(y[m - 1]);
      for (int i = 0; i + 1 < m; ++i) s += std::norm(y[i] - y_prev[i]);
      increment = nu * std::sqrt(s);
    }
    if (invariant || increment < tol) {
      std::fill(out.begin(), out.end(), cplx{0.0});
      for (int j = 0; j < m; ++j) axpy(nu * y[j], V[j], out);
      return {m, invariant ? 0.0 : increment};
    }
    beta.push_back(b);
    y_prev = std::move(y);
    V.emplace_back(w);
    for (auto& x : V.back()) x /= b;
  }
  throw KrylovNotConverged("expm_multiply: no convergence within " +
                               std::to_string(max_dim) + " Krylov vectors",
                           increment);
}

struct EigenPairs {
  std::vector<double> values;             // ascending
  std::vector<std::vector<cplx>> vectors;  // vectors[i] pairs with values[i]
  std::vector<double> residuals;           // ||H v - lambda v||
  int restarts = 0;
};

struct LowestOptions {
  double tol = 1e-10;      // residual tolerance relative to max(1, |lambda|)
  int max_basis = 0;       // 0: choose from k
  int block = 1;           // Krylov block width; >= degeneracy to resolve copies
  int max_restarts = 500;
  std::uint64_t seed = 0x5eedULL;
  std::vector<cplx> start;  // optional start vector (block must be 1)
};

/**
 * Lowest k eigenpairs of a Hermitian map by thick-restarted block Lanczos.
 *
 * The basis is kept fully orthonormal and the projected matrix is formed
 * explicitly, so a restart simply keeps the lowest Ritz vectors together with
 * the block of residual directions. A single start vector yields, within a
 * degenerate eigenspace, the normalized projection of that vector.
 */
template <LinearMap Op>
EigenPairs lowest_eigenpairs(const Op& op, int k, const LowestOptions& opt = {}) {
  using namespace krylov_detail;
  const std::size_t n = op.dim();
  if (k <= 0 || static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("lowest_eigenpairs: k must be in [1, dim]");
  }
  const int block = std::max(1, opt.block);
  int max_basis = opt.max_basis > 0 ? opt.max_basis : std::max(2 * k + 2 * block + 20, 40);
  max_basis = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(max_basis), n));
  const int keep = std::min(max_basis - block, std::max(k + block, k + k / 2 + 1));

  std::vector<std::vector<cplx>> V, AV;
  std::vector<std::vector<cplx>> cand;
  if (!opt.start.empty()) {
    if (opt.start.size() != n) throw DimensionMismatch("lowest_eigenpairs: start vector size");
    cand.push_back(opt.start);
  }
  for (int b = static_cast<int>(cand.size()); b < block; ++b) {
    cand.push_back(random_vector(n, opt.seed + 7919ULL * static_cast<std::uint64_t>(b)));
  }

  EigenPairs result;
  double worst = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    // Expand until the basis is full or the space is exhausted.
    while (static_cast<int>(V.size()) < max_basis && !cand.empty()) {
      std::vector<std::vector<cplx>> next;
      for (auto& q : cand) {
        const double before = norm(q);
        orthogonalize(V, q);
        const double after = norm(q);
        if (after <= 1e-10 * std::max(before, 1e-300)) continue;
        for (auto& x : q) x /= after;
        std::vector<cplx> aq(n);
        op.apply(q, aq);
        V.push_back(std::move(q));
        AV.push_back(aq);
        next.push_back(std::move(aq));
        if (static_cast<int>(V.size()) >= max_basis) break;
      }
      cand = std::move(next);
    }

    const int m = static_cast<int>(V.size());
    Eigen::MatrixXcd H(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = i; j < m; ++j) {
        H(i, j) = dot(V[i], AV[j]);
        H(j, i) = std::conj(H(i, j));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    const Eigen::MatrixXcd& Y = es.eigenvectors();

    const int want = std::min(k, m);
    result.values.assign(want, 0.0);
    result.vectors.assign(want, std::vector<cplx>(n, 0.0));
    result.residuals.assign(want, 0.0);
    std::vector<std::vector<cplx>> residual_dirs;
    bool all_converged = want == k;
    worst = 0.0;
    for (int i = 0; i < want; ++i) {
      const double theta = es.eigenvalues()[i];
      std::vector<cplx>& x = result.vectors[i];
      std::vector<cplx> r(n, 0.0);
      for (int j = 0; j < m; ++j) {
        axpy(Y(j, i), V[j], x);
        axpy(Y(j, i), AV[j], r);
      }
      axpy(-theta, x, r);
      const double rn = norm(r);
      result.values[i] = theta;
      result.residuals[i] = rn;
      worst = std::max(worst, rn);
      if (rn >= opt.tol * std::max(1.0, std::abs(theta))) {
        all_converged = false;
        if (static_cast<int>(residual_dirs.size()) < block) residual_dirs.push_back(std::move(r));
      }
    }
    result.restarts = restart;
    if (all_converged || static_cast<std::size_t>(m) == n) {
      if (!all_converged && worst > 1e-8) {
        throw EigensolverNotConverged("lowest_eigenpairs: exhausted space without convergence",
                                      worst);
      }
      return result;
    }

    // Thick restart: keep the lowest Ritz vectors, continue from residuals.
    const int kept = std::min(keep, m);
    std::vector<std::vector<cplx>> V2(kept, std::vector<cplx>(n, 0.0));
    std::vector<std::vector<cplx>> AV2(kept, std::vector<cplx>(n, 0.0));
    for (int i = 0; i < kept; ++i) {
      for (int j = 0; j < m; ++j) {
        axpy(Y(j, i), V[j], V2[i]);
        axpy(Y(j, i), AV[j], AV2[i]);
      }
    }
    V = std::move(V2);
    AV = std::move(AV2);
    cand = std::move(residual_dirs);
    if (cand.empty()) {
      cand.push_back(random_vector(n, opt.seed + 104729ULL * static_cast<std::uint64_t>(restart + 1)));
    }
  }
  throw EigensolverNotConverged("lowest_eigenpairs: restart budget exhausted", worst);
}

}  // namespace falqon
