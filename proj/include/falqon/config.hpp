#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "falqon/controller.hpp"
#include "falqon/csv.hpp"
#include "falqon/evolution.hpp"
#include "falqon/hubbard.hpp"

namespace falqon {

/// Everything one experiment needs; serializes to the sectioned key=value format.
struct ExperimentConfig {
  LatticeSpec lattice{1, 2, 1.0, 5.0, 1, 1};
  OrbitalOrdering ordering{};
  FalqonConfig falqon{};
  InitialStateSpec init{};
  bool full_space = false;
  std::string out_dir = "out";
  int snapshot_every = 0;  // 0: final snapshot only
  bool plots = true;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return i;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long i = 0;
  try {
    i = std::stoull(v, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v.front() == '-') {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return i;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string from_bool(bool b) { return b ? "true" : "false"; }

inline std::string method_name(const PropagationMethod& m) {
  return m.kind == PropagationMethod::Kind::krylov ? "krylov" : "trotter_terms";
}

}  // namespace config_detail

/// Sets one field addressed as "section.key"; throws ConfigError on bad input.
inline void set_config_field(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  const auto& v = value;
  const auto as_int = [&] { return static_cast<int>(to_int(key, v)); };
  if (key == "lattice.rows") c.lattice.rows = as_int();
  else if (key == "lattice.cols") c.lattice.cols = as_int();
  else if (key == "lattice.J") c.lattice.J = to_double(key, v);
  else if (key == "lattice.U") c.lattice.U = to_double(key, v);
  else if (key == "lattice.n_up") c.lattice.n_up = as_int();
  else if (key == "lattice.n_down") c.lattice.n_down = as_int();
  else if (key == "lattice.ordering") {
    try {
      c.ordering.site_path = parse_site_path(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "falqon.dt") c.falqon.dt = to_double(key, v);
  else if (key == "falqon.dtau") c.falqon.dtau = to_double(key, v);
  else if (key == "falqon.ite_period") c.falqon.ite_period = as_int();
  else if (key == "falqon.layers") c.falqon.n_layers = as_int();
  else if (key == "falqon.beta_init") c.falqon.beta_init = to_double(key, v);
  else if (key == "falqon.method") {
    if (v == "krylov") c.falqon.method.kind = PropagationMethod::Kind::krylov;
    else if (v == "trotter_terms") c.falqon.method.kind = PropagationMethod::Kind::trotter_terms;
    else throw ConfigError(key + ": expected krylov or trotter_terms, got '" + v + "'");
  } else if (key == "falqon.krylov_tol") c.falqon.method.tol = to_double(key, v);
  else if (key == "falqon.krylov_max_dim") c.falqon.method.max_dim = as_int();
  else if (key == "falqon.trotter_substeps") c.falqon.method.n_substeps = as_int();
  else if (key == "falqon.signal_pre_ite") c.falqon.signal_pre_ite = to_bool(key, v);
  else if (key == "falqon.log_every") c.falqon.log_every = as_int();
  else if (key == "state.init") {
    try {
      c.init.mode = parse_init_mode(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "state.bitmask") c.init.bitmask = to_u64(key, v);
  else if (key == "state.seed") c.init.seed = to_u64(key, v);
  else if (key == "state.full_space") c.full_space = to_bool(key, v);
  else if (key == "output.dir") c.out_dir = v;
  else if (key == "output.snapshot_every") c.snapshot_every = as_int();
  else if (key == "output.plots") c.plots = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void validate(const ExperimentConfig& c) {
  try {
    c.lattice.validate();
    c.falqon.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.snapshot_every < 0) throw ConfigError("output.snapshot_every must be >= 0");
  if (c.falqon.method.max_dim <= 0) throw ConfigError("falqon.krylov_max_dim must be positive");
  if (c.falqon.method.n_substeps <= 0) throw ConfigError("falqon.trotter_substeps must be positive");
  if (!(c.falqon.method.tol > 0)) throw ConfigError("falqon.krylov_tol must be positive");
  if (c.full_space && c.lattice.n_qubits() > 24) {
    throw ConfigError("state.full_space: " + std::to_string(c.lattice.n_qubits()) +
                      " qubits is beyond the full-register limit of 24");
  }
  if (c.falqon.method.kind == PropagationMethod::Kind::trotter_terms && !c.full_space) {
    throw ConfigError("falqon.method = trotter_terms requires state.full_space = true");
  }
}

inline std::string serialize(const ExperimentConfig& c) {
  using namespace config_detail;
  std::ostringstream os;
  os << "[lattice]\n"
     << "rows = " << c.lattice.rows << "\n"
     << "cols = " << c.lattice.cols << "\n"
     << "J = " << format_double(c.lattice.J) << "\n"
     << "U = " << format_double(c.lattice.U) << "\n"
     << "n_up = " << c.lattice.n_up << "\n"
     << "n_down = " << c.lattice.n_down << "\n"
     << "ordering = " << to_string(c.ordering.site_path) << "\n\n"
     << "[falqon]\n"
     << "dt = " << format_double(c.falqon.dt) << "\n"
     << "dtau = " << format_double(c.falqon.dtau) << "\n"
     << "ite_period = " << c.falqon.ite_period << "\n"
     << "layers = " << c.falqon.n_layers << "\n"
     << "beta_init = " << format_double(c.falqon.beta_init) << "\n"
     << "method = " << method_name(c.falqon.method) << "\n"
     << "krylov_tol = " << format_double(c.falqon.method.tol) << "\n"
     << "krylov_max_dim = " << c.falqon.method.max_dim << "\n"
     << "trotter_substeps = " << c.falqon.method.n_substeps << "\n"
     << "signal_pre_ite = " << from_bool(c.falqon.signal_pre_ite) << "\n"
     << "log_every = " << c.falqon.log_every << "\n\n"
     << "[state]\n"
     << "init = " << to_string(c.init.mode) << "\n"
     << "bitmask = " << c.init.bitmask << "\n"
     << "seed = " << c.init.seed << "\n"
     << "full_space = " << from_bool(c.full_space) << "\n\n"
     << "[output]\n"
     << "dir = " << c.out_dir << "\n"
     << "snapshot_every = " << c.snapshot_every << "\n"
     << "plots = " << from_bool(c.plots) << "\n";
  return os.str();
}

/// Applies a config text on top of `base`. Errors name the offending line.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
  using namespace config_detail;
  std::istringstream in{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (const auto hash = s.find('#'); hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = section + "." + trim(s.substr(0, eq));
    try {
      set_config_field(base, key, trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  return parse_config(read_text_file(path), std::move(base));
}

}  // namespace falqon
