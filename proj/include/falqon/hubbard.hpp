#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "falqon/pauli.hpp"

namespace falqon {

/// Open-boundary rectangular Fermi-Hubbard lattice with fixed filling.
struct LatticeSpec {
  int rows = 1;
  int cols = 1;
  double J = 1.0;
  double U = 5.0;
  int n_up = 0;
  int n_down = 0;

  int n_sites() const { return rows * cols; }
  int n_qubits() const { return 2 * n_sites(); }

  void validate() const {
    if (rows <= 0 || cols <= 0) {
      throw std::invalid_argument("LatticeSpec: rows and cols must be positive");
    }
    if (n_qubits() > kMaxQubits) {
      throw std::invalid_argument("LatticeSpec: lattice needs more than 64 qubits");
    }
    if (n_up < 0 || n_down < 0 || n_up > n_sites() || n_down > n_sites()) {
      throw std::invalid_argument(
          "LatticeSpec: filling (" + std::to_string(n_up) + "," +
          std::to_string(n_down) + ") does not fit " + std::to_string(n_sites()) +
          " sites");
    }
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

enum class SitePath { row_major, snake };

inline std::string_view to_string(SitePath p) {
  return p == SitePath::row_major ? "row_major" : "snake";
}

inline SitePath parse_site_path(std::string_view s) {
  if (s == "row_major") return SitePath::row_major;
  if (s == "snake") return SitePath::snake;
  throw std::invalid_argument("unknown ordering '" + std::string(s) +
                              "' (expected row_major or snake)");
}

enum class Spin : int { up = 0, down = 1 };

/**
 * Orbital numbering used by the Jordan-Wigner line.
 *
 * Spin-blocked: spin-up orbitals occupy 0..L-1 and spin-down L..2L-1. Within
 * each block, sites are numbered along `site_path`: row-major, or a snake that
 * reverses every odd row so consecutive path positions are always neighbours.
 * Lattice site ids are always row-major (r * cols + c).
 */
struct OrbitalOrdering {
  SitePath site_path = SitePath::row_major;

  int path_position(const LatticeSpec& lat, int site) const {
    const int r = site / lat.cols;
    const int c = site % lat.cols;
    if (site_path == SitePath::snake && (r % 2) == 1) {
      return r * lat.cols + (lat.cols - 1 - c);
    }
    return site;
  }

  int site_at(const LatticeSpec& lat, int position) const {
    // The snake map is an involution on row-major ids.
    return path_position(lat, position);
  }

  int orbital(const LatticeSpec& lat, int site, Spin spin) const {
    return path_position(lat, site) + (spin == Spin::down ? lat.n_sites() : 0);
  }

  std::pair<int, Spin> site_of(const LatticeSpec& lat, int orbital) const {
    const int L = lat.n_sites();
    const Spin spin = orbital < L ? Spin::up : Spin::down;
    return {site_at(lat, orbital % L), spin};
  }

  friend bool operator==(const OrbitalOrdering&, const OrbitalOrdering&) = default;
};

/// Nearest-neighbour bonds (i < j, row-major site ids), horizontal then vertical.
inline std::vector<std::pair<int, int>> lattice_edges(const LatticeSpec& lat) {
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < lat.rows; ++r) {
    for (int c = 0; c + 1 < lat.cols; ++c) {
      edges.emplace_back(r * lat.cols + c, r * lat.cols + c + 1);
    }
  }
  for (int r = 0; r + 1 < lat.rows; ++r) {
    for (int c = 0; c < lat.cols; ++c) {
      edges.emplace_back(r * lat.cols + c, (r + 1) * lat.cols + c);
    }
  }
  return edges;
}

/// c_j = Z_0 ... Z_{j-1} (X_j + iY_j)/2, which maps |1> (occupied) to |0>.
inline PauliTermSum jw_annihilation(int orbital, int n_orbitals) {
  if (orbital < 0 || orbital >= n_orbitals) {
    throw std::out_of_range("jw_annihilation: orbital " +
                            std::to_string(orbital) + " outside [0, " +
                            std::to_string(n_orbitals) + ")");
  }
  const std::uint64_t bit = std::uint64_t{1} << orbital;
  const std::uint64_t string = bit - 1;
  PauliTermSum c(n_orbitals);
  c.add_term(PauliString(n_orbitals, bit, string), 0.5);
  c.add_term(PauliString(n_orbitals, bit, string | bit), cplx{0.0, 0.5});
  return c;
}

inline PauliTermSum jw_creation(int orbital, int n_orbitals) {
  return jw_annihilation(orbital, n_orbitals).adjoint();
}

inline PauliTermSum jw_number(int orbital, int n_orbitals) {
  return jw_creation(orbital, n_orbitals) * jw_annihilation(orbital, n_orbitals);
}

/// -J sum_<ij>,s (c+_is c_js + h.c.) mapped through Jordan-Wigner.
inline PauliTermSum build_driver_hamiltonian(const LatticeSpec& lat,
                                             const OrbitalOrdering& ord = {}) {
  lat.validate();
  const int n = lat.n_qubits();
  PauliTermSum h(n);
  for (const auto& [i, j] : lattice_edges(lat)) {
    for (Spin s : {Spin::up, Spin::down}) {
      const int p = ord.orbital(lat, i, s);
      const int q = ord.orbital(lat, j, s);
      const PauliTermSum hop = jw_creation(p, n) * jw_annihilation(q, n);
      h += (-lat.J) * (hop + hop.adjoint());
    }
  }
  return h;
}

/// Fermi-Hubbard Hamiltonian: hopping plus U sum_i n_i,up n_i,down. The
/// constant term from expanding the interaction is kept.
inline PauliTermSum build_problem_hamiltonian(const LatticeSpec& lat,
                                              const OrbitalOrdering& ord = {}) {
  PauliTermSum h = build_driver_hamiltonian(lat, ord);
  const int n = lat.n_qubits();
  for (int site = 0; site < lat.n_sites(); ++site) {
    const int a = ord.orbital(lat, site, Spin::up);
    const int b = ord.orbital(lat, site, Spin::down);
    h += lat.U * (jw_number(a, n) * jw_number(b, n));
  }
  return h;
}

struct NumberOperators {
  PauliTermSum n_up;
  PauliTermSum n_down;
};

inline NumberOperators number_operators(const LatticeSpec& lat,
                                        const OrbitalOrdering& ord = {}) {
  lat.validate();
  const int n = lat.n_qubits();
  NumberOperators out{PauliTermSum(n), PauliTermSum(n)};
  for (int site = 0; site < lat.n_sites(); ++site) {
    out.n_up += jw_number(ord.orbital(lat, site, Spin::up), n);
    out.n_down += jw_number(ord.orbital(lat, site, Spin::down), n);
  }
  return out;
}

/// True when `op` commutes with both spin-resolved number operators.
inline bool conserves_particle_number(const PauliTermSum& op,
                                      const LatticeSpec& lat,
                                      const OrbitalOrdering& ord = {}) {
  const NumberOperators num = number_operators(lat, ord);
  return commutator(op, num.n_up).empty() && commutator(op, num.n_down).empty();
}

}  // namespace falqon
