#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "falqon/hubbard.hpp"
#include "falqon/state.hpp"

namespace falqon {

/**
 * Binary state snapshot.
 *
 * Layout, all little-endian: 8-byte magic "FALQSNP1"; u32 n_qubits; u32 mode
 * (0 full, 1 sector); i32 rows, cols, n_up, n_down; u32 site_path; f64 J, U;
 * u64 layer; u64 dim; then dim pairs of f64 (re, im).
 */
struct Snapshot {
  StateVector state;
  LatticeSpec lattice;
  OrbitalOrdering ordering;
  std::uint64_t layer = 0;
};

namespace snapshot_detail {

inline constexpr char kMagic[8] = {'F', 'A', 'L', 'Q', 'S', 'N', 'P', '1'};

template <class T>
void put(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) {
    throw std::runtime_error("snapshot: truncated file");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace snapshot_detail

inline void write_snapshot(const std::string& path, const StateVector& state,
                           const LatticeSpec& lat, const OrbitalOrdering& ord,
                           std::uint64_t layer) {
  using namespace snapshot_detail;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snapshot: cannot open " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(state.n_qubits()));
  put<std::uint32_t>(os, state.is_sector() ? 1u : 0u);
  put<std::int32_t>(os, lat.rows);
  put<std::int32_t>(os, lat.cols);
  put<std::int32_t>(os, lat.n_up);
  put<std::int32_t>(os, lat.n_down);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ord.site_path));
  put<double>(os, lat.J);
  put<double>(os, lat.U);
  put<std::uint64_t>(os, layer);
  put<std::uint64_t>(os, state.dim());
  for (std::size_t i = 0; i < state.dim(); ++i) {
    put<double>(os, state[i].real());
    put<double>(os, state[i].imag());
  }
  if (!os) throw std::runtime_error("snapshot: write failed for " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
  using namespace snapshot_detail;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snapshot: cannot open " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error("snapshot: bad magic in " + path);
  }
  Snapshot s;
  const auto n_qubits = static_cast<int>(get<std::uint32_t>(is));
  const auto mode = get<std::uint32_t>(is);
  s.lattice.rows = get<std::int32_t>(is);
  s.lattice.cols = get<std::int32_t>(is);
  s.lattice.n_up = get<std::int32_t>(is);
  s.lattice.n_down = get<std::int32_t>(is);
  const auto path_code = get<std::uint32_t>(is);
  if (path_code > 1) throw std::runtime_error("snapshot: unknown site path code");
  s.ordering.site_path = static_cast<SitePath>(path_code);
  s.lattice.J = get<double>(is);
  s.lattice.U = get<double>(is);
  s.layer = get<std::uint64_t>(is);
  const auto dim = get<std::uint64_t>(is);
  s.lattice.validate();
  if (n_qubits != s.lattice.n_qubits()) throw std::runtime_error("snapshot: qubit count mismatch");
  std::vector<cplx> amps(dim);
  for (auto& a : amps) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    a = {re, im};
  }
  if (mode == 1) {
    s.state = StateVector(make_sector_basis(s.lattice, s.ordering), std::move(amps));
  } else if (mode == 0) {
    s.state = StateVector(n_qubits, std::move(amps));
  } else {
    throw std::runtime_error("snapshot: unknown mode code");
  }
  return s;
}

}  // namespace falqon
