#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "falqon/errors.hpp"

namespace falqon {

using cplx = std::complex<double>;

/// Coefficients with magnitude below this are dropped after every algebraic
/// operation on a PauliTermSum.
inline constexpr double kPruneThreshold = 1e-14;

/// Largest register a PauliString can describe (one bit per qubit per mask).
inline constexpr int kMaxQubits = 64;

enum class Pauli : std::uint8_t { I = 0, X = 1, Z = 2, Y = 3 };

inline char to_char(Pauli p) {
  switch (p) {
    case Pauli::I: return 'I';
    case Pauli::X: return 'X';
    case Pauli::Y: return 'Y';
    case Pauli::Z: return 'Z';
  }
  return '?';
}

/**
 * Tensor product of single-qubit Pauli letters, stored as two bit masks.
 *
 * Bit q of x_mask is set for X or Y on qubit q; bit q of z_mask is set for Z
 * or Y. The string carries no phase: Y is the Hermitian Pauli Y, and the
 * operator is always Hermitian and unitary. Qubit 0 is the least significant
 * bit of a computational basis index. In text form, character q of the letter
 * sequence is qubit q.
 */
class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(int n_qubits) : n_qubits_(n_qubits) {
    check_size(n_qubits);
  }

  PauliString(int n_qubits, std::uint64_t x_mask, std::uint64_t z_mask)
      : n_qubits_(n_qubits), x_(x_mask), z_(z_mask) {
    check_size(n_qubits);
    const std::uint64_t valid = valid_mask(n_qubits);
    if ((x_ & ~valid) != 0 || (z_ & ~valid) != 0) {
      throw std::invalid_argument("PauliString: mask bits beyond n_qubits");
    }
  }

  static PauliString single(int n_qubits, int qubit, Pauli letter) {
    PauliString s(n_qubits);
    s.set(qubit, letter);
    return s;
  }

  static PauliString from_letters(std::string_view letters) {
    PauliString s(static_cast<int>(letters.size()));
    for (std::size_t q = 0; q < letters.size(); ++q) {
      switch (letters[q]) {
        case 'I': break;
        case 'X': s.set(static_cast<int>(q), Pauli::X); break;
        case 'Y': s.set(static_cast<int>(q), Pauli::Y); break;
        case 'Z': s.set(static_cast<int>(q), Pauli::Z); break;
        default:
          throw std::invalid_argument(std::string("PauliString: bad letter '") +
                                      letters[q] + "'");
      }
    }
    return s;
  }

  int n_qubits() const { return n_qubits_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }
  bool is_identity() const { return x_ == 0 && z_ == 0; }
  int weight() const { return std::popcount(x_ | z_); }
  int y_count() const { return std::popcount(x_ & z_); }

  Pauli letter(int qubit) const {
    const unsigned bx = (x_ >> qubit) & 1U;
    const unsigned bz = (z_ >> qubit) & 1U;
    return static_cast<Pauli>(bx | (bz << 1));
  }

  void set(int qubit, Pauli letter) {
    if (qubit < 0 || qubit >= n_qubits_) {
      throw std::out_of_range("PauliString: qubit index out of range");
    }
    const std::uint64_t bit = std::uint64_t{1} << qubit;
    const auto code = static_cast<unsigned>(letter);
    x_ = (code & 1U) ? (x_ | bit) : (x_ & ~bit);
    z_ = (code & 2U) ? (z_ | bit) : (z_ & ~bit);
  }

  std::string to_string() const {
    std::string out(static_cast<std::size_t>(n_qubits_), 'I');
    for (int q = 0; q < n_qubits_; ++q) out[q] = to_char(letter(q));
    return out;
  }

  /// Action on a computational basis state: P|b> = phase * |b ^ x_mask>.
  std::pair<std::uint64_t, cplx> act(std::uint64_t basis) const {
    static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    int e = y_count() + 2 * (std::popcount(basis & z_) & 1);
    return {basis ^ x_, kIPow[e & 3]};
  }

  /// True when the two strings commute as operators.
  bool commutes_with(const PauliString& other) const {
    const int s = std::popcount(x_ & other.z_) + std::popcount(z_ & other.x_);
    return (s & 1) == 0;
  }

  friend bool operator==(const PauliString&, const PauliString&) = default;
  friend auto operator<=>(const PauliString& a, const PauliString& b) {
    if (auto c = a.n_qubits_ <=> b.n_qubits_; c != 0) return c;
    if (auto c = a.x_ <=> b.x_; c != 0) return c;
    return a.z_ <=> b.z_;
  }

 private:
  static void check_size(int n) {
    if (n <= 0 || n > kMaxQubits) {
      throw std::invalid_argument("PauliString: n_qubits must be in [1, 64]");
    }
  }
  static std::uint64_t valid_mask(int n) {
    return n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  }

  int n_qubits_ = 0;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

struct PauliProduct {
  cplx phase;           // one of 1, -1, i, -i
  PauliString product;  // phase-free string
};

/// Pauli group multiplication: a * b == phase * product.
inline PauliProduct multiply_strings(const PauliString& a,
                                     const PauliString& b) {
  if (a.n_qubits() != b.n_qubits()) {
    throw DimensionMismatch("multiply_strings: operands act on " +
                            std::to_string(a.n_qubits()) + " and " +
                            std::to_string(b.n_qubits()) + " qubits");
  }
  const std::uint64_t ax = a.x_mask(), az = a.z_mask();
  const std::uint64_t bx = b.x_mask(), bz = b.z_mask();
  const std::uint64_t aY = ax & az, aX = ax & ~az, aZ = ~ax & az;
  const std::uint64_t bY = bx & bz, bX = bx & ~bz, bZ = ~bx & bz;
  // Cyclic pairs (XY, YZ, ZX) contribute +i, anti-cyclic pairs -i.
  const int plus = std::popcount(aX & bY) + std::popcount(aY & bZ) +
                   std::popcount(aZ & bX);
  const int minus = std::popcount(aY & bX) + std::popcount(aZ & bY) +
                    std::popcount(aX & bZ);
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const int e = ((plus - minus) % 4 + 4) % 4;
  return {kIPow[e], PauliString(a.n_qubits(), ax ^ bx, az ^ bz)};
}

/**
 * Weighted sum of Pauli strings with terms merged by letter sequence.
 *
 * Iteration order is the PauliString ordering, so every traversal (and
 * therefore every floating-point reduction over terms) is deterministic.
 */
class PauliTermSum {
 public:
  using TermMap = std::map<PauliString, cplx>;

  PauliTermSum() = default;
  explicit PauliTermSum(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits <= 0 || n_qubits > kMaxQubits) {
      throw std::invalid_argument("PauliTermSum: n_qubits must be in [1, 64]");
    }
  }
  PauliTermSum(const PauliString& s, cplx coeff) : PauliTermSum(s.n_qubits()) {
    add_term(s, coeff);
    prune();
  }

  static PauliTermSum identity(int n_qubits, cplx coeff = 1.0) {
    return PauliTermSum(PauliString(n_qubits), coeff);
  }
  static PauliTermSum single(int n_qubits, int qubit, Pauli letter,
                             cplx coeff = 1.0) {
    return PauliTermSum(PauliString::single(n_qubits, qubit, letter), coeff);
  }

  int n_qubits() const { return n_qubits_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  cplx coefficient(const PauliString& s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? cplx{0.0} : it->second;
  }

  /// Accumulates without pruning; call prune() once a batch is complete.
  void add_term(const PauliString& s, cplx coeff) {
    if (s.n_qubits() != n_qubits_) {
      throw DimensionMismatch("PauliTermSum: term acts on " +
                              std::to_string(s.n_qubits()) +
                              " qubits, sum on " + std::to_string(n_qubits_));
    }
    terms_[s] += coeff;
  }

  void prune(double threshold = kPruneThreshold) {
    std::erase_if(terms_,
                  [&](const auto& kv) { return std::abs(kv.second) < threshold; });
  }

  /// All coefficients real to `tol` (strings themselves are phase-free).
  bool is_hermitian(double tol = 1e-12) const {
    for (const auto& [s, c] : terms_) {
      if (std::abs(c.imag()) > tol) return false;
    }
    return true;
  }

  /// Sum of |coefficient|; an upper bound on the spectral norm.
  double one_norm() const {
    double total = 0.0;
    for (const auto& [s, c] : terms_) total += std::abs(c);
    return total;
  }

  PauliTermSum adjoint() const {
    PauliTermSum out(n_qubits_);
    for (const auto& [s, c] : terms_) out.terms_.emplace(s, std::conj(c));
    return out;
  }

  PauliTermSum& operator+=(const PauliTermSum& rhs) {
    check_same(rhs, "operator+=");
    for (const auto& [s, c] : rhs.terms_) terms_[s] += c;
    prune();
    return *this;
  }
  PauliTermSum& operator-=(const PauliTermSum& rhs) {
    check_same(rhs, "operator-=");
    for (const auto& [s, c] : rhs.terms_) terms_[s] -= c;
    prune();
    return *this;
  }
  PauliTermSum& operator*=(cplx scale) {
    for (auto& [s, c] : terms_) c *= scale;
    prune();
    return *this;
  }

  friend PauliTermSum operator+(PauliTermSum a, const PauliTermSum& b) {
    return a += b;
  }
  friend PauliTermSum operator-(PauliTermSum a, const PauliTermSum& b) {
    return a -= b;
  }
  friend PauliTermSum operator*(PauliTermSum a, cplx s) { return a *= s; }
  friend PauliTermSum operator*(cplx s, PauliTermSum a) { return a *= s; }
  friend PauliTermSum operator*(PauliTermSum a, double s) { return a *= s; }
  friend PauliTermSum operator*(double s, PauliTermSum a) { return a *= s; }

  friend PauliTermSum operator*(const PauliTermSum& a, const PauliTermSum& b) {
    a.check_same(b, "operator*");
    PauliTermSum out(a.n_qubits_);
    for (const auto& [sa, ca] : a.terms_) {
      for (const auto& [sb, cb] : b.terms_) {
        auto [phase, prod] = multiply_strings(sa, sb);
        out.terms_[prod] += phase * ca * cb;
      }
    }
    out.prune();
    return out;
  }

  /// Equal up to `tol` in every coefficient.
  bool approx_equal(const PauliTermSum& other, double tol = 1e-12) const {
    if (n_qubits_ != other.n_qubits_) return false;
    for (const auto& [s, c] : terms_) {
      if (std::abs(c - other.coefficient(s)) > tol) return false;
    }
    for (const auto& [s, c] : other.terms_) {
      if (std::abs(c - coefficient(s)) > tol) return false;
    }
    return true;
  }

  friend bool operator==(const PauliTermSum&, const PauliTermSum&) = default;

  void check_same(const PauliTermSum& other, const char* where) const {
    if (n_qubits_ != other.n_qubits_) {
      throw DimensionMismatch(std::string(where) + ": operands act on " +
                              std::to_string(n_qubits_) + " and " +
                              std::to_string(other.n_qubits_) + " qubits");
    }
  }

 private:
  int n_qubits_ = 0;
  TermMap terms_;
};

/// Returns i[a, b]. Hermitian inputs give a Hermitian result.
inline PauliTermSum commutator(const PauliTermSum& a, const PauliTermSum& b) {
  a.check_same(b, "commutator");
  PauliTermSum out(a.n_qubits());
  for (const auto& [sa, ca] : a.terms()) {
    for (const auto& [sb, cb] : b.terms()) {
      if (sa.commutes_with(sb)) continue;
      // ab - ba = 2ab for anticommuting strings.
      auto [phase, prod] = multiply_strings(sa, sb);
      out.add_term(prod, cplx{0.0, 2.0} * phase * ca * cb);
    }
  }
  out.prune();
  return out;
}

/// Returns {a, b} = ab + ba.
inline PauliTermSum anticommutator(const PauliTermSum& a,
                                   const PauliTermSum& b) {
  a.check_same(b, "anticommutator");
  PauliTermSum out(a.n_qubits());
  for (const auto& [sa, ca] : a.terms()) {
    for (const auto& [sb, cb] : b.terms()) {
      if (!sa.commutes_with(sb)) continue;
      auto [phase, prod] = multiply_strings(sa, sb);
      out.add_term(prod, 2.0 * phase * ca * cb);
    }
  }
  out.prune();
  return out;
}

// Text form: one term per line, "<re> <im> <letters>".

inline void write_term_sum(std::ostream& os, const PauliTermSum& op) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& [s, c] : op.terms()) {
    line.str("");
    line << c.real() << ' ' << c.imag() << ' ' << s.to_string() << '\n';
    os << line.str();
  }
}

inline std::string to_text(const PauliTermSum& op) {
  std::ostringstream os;
  write_term_sum(os, op);
  return os.str();
}

/// Parses the text form. An empty text is only accepted when `n_qubits` is
/// given, since the register size is otherwise carried by the letters.
inline PauliTermSum parse_term_sum(std::string_view text, int n_qubits = 0) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::vector<std::pair<PauliString, cplx>> parsed;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double re = 0, im = 0;
    std::string letters;
    if (!(ls >> re >> im >> letters)) {
      throw std::invalid_argument("parse_term_sum: malformed line " +
                                  std::to_string(line_no));
    }
    parsed.emplace_back(PauliString::from_letters(letters), cplx{re, im});
  }
  if (parsed.empty() && n_qubits <= 0) {
    throw std::invalid_argument("parse_term_sum: no terms");
  }
  PauliTermSum out(n_qubits > 0 ? n_qubits : parsed.front().first.n_qubits());
  for (const auto& [s, c] : parsed) out.add_term(s, c);
  out.prune();
  return out;
}

}  // namespace falqon
