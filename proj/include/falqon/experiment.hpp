#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "falqon/config.hpp"
#include "falqon/controller.hpp"
#include "falqon/csv.hpp"
#include "falqon/evolution.hpp"
#include "falqon/hubbard.hpp"
#include "falqon/snapshot.hpp"
#include "falqon/spectral.hpp"
#include "falqon/svg.hpp"

namespace falqon {

namespace fs = std::filesystem;

/// Endpoint threshold used for classification: tighter when kicks are on.
inline double converged_threshold_for(const FalqonConfig& c) { return c.dtau > 0 ? 1e-5 : 1e-2; }

struct RunOutcome {
  TrajectoryRecord trajectory;
  MonotonicityReport audit;
  double ground_energy = 0.0;
  double dtau_limit = 0.0;
  std::optional<SpectrumResult> spectrum;   // present when the sector is dense-diagonalizable
  std::vector<double> final_group_weights;  // with spectrum
  StateVector final_state;
  double wall_seconds = 0.0;
};

namespace experiment_detail {

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

inline std::string snapshot_name(std::uint64_t layer) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "layer_%08llu.bin", static_cast<unsigned long long>(layer));
  return buf;
}

inline StateVector to_sector(const StateVector& s, const SectorBasisPtr& basis) {
  return s.is_sector() ? s : StateVector::project(s, basis);
}

// Plots are rebuilt from the CSV already on disk so they never feed back into numbers.
inline void render_trajectory_plots(const fs::path& dir) {
  const CsvTable t = read_csv((dir / "trajectory.csv").string());
  const auto tt = t.numeric("t");
  const auto de = t.numeric("delta_e");
  const auto beta = t.numeric("beta");
  std::vector<double> abs_de(de.size());
  std::transform(de.begin(), de.end(), abs_de.begin(), [](double v) { return std::abs(v); });
  svg::ChartOptions o1{"Energy error", "t", "|E(t) - E0|", true};
  write_file(dir / "delta_e.svg", svg::line_chart({{"delta_e", tt, abs_de}}, o1));
  const std::size_t late = tt.size() - std::max<std::size_t>(1, tt.size() / 10);
  svg::Series late_beta{"late window", {tt.begin() + static_cast<std::ptrdiff_t>(late), tt.end()},
                        {beta.begin() + static_cast<std::ptrdiff_t>(late), beta.end()}};
  svg::ChartOptions o2{"Feedback control", "t", "beta(t)", false};
  write_file(dir / "beta.svg", svg::line_chart({{"beta", tt, beta}, late_beta}, o2));
}

inline void render_population_plot(const fs::path& dir, double ground_energy) {
  const CsvTable t = read_csv((dir / "populations.csv").string());
  svg::ChartOptions o{"Eigenbasis populations (group summed)", "E", "P(E)", false};
  o.x_markers = {ground_energy};
  write_file(dir / "populations.svg",
             svg::stem_chart({"P", t.numeric("energy"), t.numeric("group_summed")}, o));
}

inline std::string spectrum_csv(const SpectrumResult& s) {
  std::ostringstream os;
  write_spectrum_csv(os, s);
  return os.str();
}

inline std::string population_csv(const std::vector<LevelPopulation>& p) {
  std::ostringstream os;
  write_population_csv(os, p);
  return os.str();
}

inline std::string degeneracy_report(const SpectrumResult& s) {
  std::ostringstream os;
  os << "levels " << s.size() << (s.truncated ? " (truncated basis: lowest levels only)" : "")
     << ", degeneracy_eps " << format_double(s.degeneracy_eps) << "\n";
  for (std::size_t g = 0; g < s.groups.size(); ++g) {
    const auto& grp = s.groups[g];
    os << "group " << g << ": E = " << format_double(s.eigenvalues[static_cast<std::size_t>(grp.front())])
       << ", multiplicity " << grp.size() << ", levels";
    for (int i : grp) os << ' ' << i;
    if (grp.size() > 1) {
      os << "  (";
      for (std::size_t j = 0; j < grp.size(); ++j) os << (j ? " = " : "") << "E_" << grp[j];
      os << ")";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace experiment_detail

/**
 * Executes one configured trajectory and writes the per-run directory:
 * config.txt, trajectory.csv, summary.txt, snapshots/, and (for sectors up to
 * the dense cap) spectrum.csv and populations.csv of the final state.
 */
inline RunOutcome run_experiment(const ExperimentConfig& cfg) {
  using namespace experiment_detail;
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir / "snapshots");
  write_file(dir / "config.txt", serialize(cfg));

  const LatticeSpec& lat = cfg.lattice;
  const SectorBasisPtr basis = make_sector_basis(lat, cfg.ordering);
  const PauliTermSum hp = build_problem_hamiltonian(lat, cfg.ordering);
  const PauliTermSum hd = build_driver_hamiltonian(lat, cfg.ordering);
  const NumberOperators numbers = number_operators(lat, cfg.ordering);

  RunOutcome out;
  if (basis->dim() <= kDenseDimCap) {
    out.spectrum = diagonalize(CompiledOperator::sector(hp, basis));
    out.ground_energy = out.spectrum->ground_energy();
  } else {
    out.ground_energy = sector_ground_energy(lat, cfg.ordering);
  }
  const SpectralBounds bounds = spectral_bounds(hp, basis);
  out.dtau_limit = 1.0 / std::max(std::abs(bounds.min), std::abs(bounds.max));

  const StateVector psi0 = initial_state(lat, cfg.ordering, cfg.init, cfg.full_space);
  RunOptions opt;
  opt.ground_energy = out.ground_energy;
  opt.numbers = &numbers;
  opt.dtau_limit = out.dtau_limit;
  if (cfg.snapshot_every > 0) {
    opt.hooks.on_layer = [&](const LayerRecord& r, const StateVector& psi) {
      if (r.layer % static_cast<std::size_t>(cfg.snapshot_every) == 0) {
        write_snapshot((dir / "snapshots" / snapshot_name(r.layer)).string(), psi, lat, cfg.ordering, r.layer);
      }
    };
  }
  StateVector last = psi0;
  auto user_hook = opt.hooks.on_layer;
  opt.hooks.on_layer = [&](const LayerRecord& r, const StateVector& psi) {
    if (user_hook) user_hook(r, psi);
    if (r.layer == static_cast<std::size_t>(cfg.falqon.n_layers)) last = psi;
  };
  out.trajectory = run(cfg.falqon, hp, hd, psi0, opt);
  out.final_state = last;
  write_snapshot((dir / "snapshots" / "final.bin").string(), last, lat, cfg.ordering,
                 static_cast<std::uint64_t>(cfg.falqon.n_layers));

  AuditSettings as;
  as.converged_threshold = converged_threshold_for(cfg.falqon);
  out.audit = monotonicity_audit(out.trajectory, as);

  {
    std::ofstream os(dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(os, out.trajectory, cfg.falqon.log_every);
  }
  if (out.spectrum) {
    const StateVector fin = to_sector(last, basis);
    const auto pops = population_distribution(fin, *out.spectrum);
    out.final_group_weights = group_populations(fin, *out.spectrum);
    write_file(dir / "spectrum.csv", spectrum_csv(*out.spectrum));
    write_file(dir / "populations.csv", population_csv(pops));
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::ordered_json s;
  s["lattice"] = std::to_string(lat.rows) + "x" + std::to_string(lat.cols);
  s["filling"] = {lat.n_up, lat.n_down};
  s["J"] = lat.J;
  s["U"] = lat.U;
  s["sector_dim"] = basis->dim();
  s["dt"] = cfg.falqon.dt;
  s["dtau"] = cfg.falqon.dtau;
  s["ite_period"] = cfg.falqon.ite_period;
  s["layers"] = cfg.falqon.n_layers;
  s["total_time"] = cfg.falqon.total_time();
  s["ground_energy"] = out.ground_energy;
  s["dtau_limit"] = out.dtau_limit;
  s["final_energy"] = out.trajectory.final().energy;
  s["final_delta_e"] = out.audit.final_delta_e;
  s["endpoint"] = std::string(to_string(out.audit.endpoint));
  s["converged_threshold"] = as.converged_threshold;
  s["descent_violations"] = out.audit.descent_violations.size();
  s["max_energy_rise"] = out.audit.max_rise;
  s["ite_layers"] = out.audit.ite_layers;
  s["ite_violations"] = out.audit.ite_violations.size();
  s["trailing_max_step"] = out.audit.trailing_max_step;
  s["trailing_mean_step"] = out.audit.trailing_mean_step;
  s["closing_layers"] = std::isfinite(out.audit.closing_layers) ? nlohmann::json(out.audit.closing_layers)
                                                                : nlohmann::json("inf");
  s["max_particle_deviation"] = out.trajectory.max_particle_deviation;
  s["norm_drift"] = out.trajectory.final().norm_drift;
  if (!out.final_group_weights.empty()) {
    s["ground_group_weight"] = out.final_group_weights.front();
    s["excited_weight"] = 1.0 - out.final_group_weights.front();
  }
  s["wall_time_s"] = out.wall_seconds;
  write_file(dir / "summary.txt", s.dump(2) + "\n");

  if (cfg.plots) {
    render_trajectory_plots(dir);
    if (out.spectrum) render_population_plot(dir, out.ground_energy);
  }
  return out;
}

inline int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const RunOutcome r = run_experiment(cfg);
    out << "final delta_e " << format_double(r.audit.final_delta_e) << " (" << to_string(r.audit.endpoint)
        << "), ITE violations " << r.audit.ite_violations.size() << ", wrote " << cfg.out_dir << "\n";
    return 0;
  } catch (const NumericalAbort& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------

struct SpectrumOptions {
  std::optional<std::string> snapshot;
  int lowest_k = 0;  // > 0 selects Lanczos with a truncated basis
};

inline int cmd_spectrum(const ExperimentConfig& cfg, const SpectrumOptions& so, std::ostream& out,
                        std::ostream& err) {
  using namespace experiment_detail;
  try {
    cfg.lattice.validate();
    const SectorBasisPtr basis = make_sector_basis(cfg.lattice, cfg.ordering);
    const CompiledOperator h =
        CompiledOperator::sector(build_problem_hamiltonian(cfg.lattice, cfg.ordering), basis);
    DiagonalizeOptions d;
    if (so.lowest_k > 0) {
      d.mode = DiagMode::lowest_k;
      d.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(so.lowest_k), basis->dim()));
    } else if (basis->dim() > kDenseDimCap) {
      err << "error: sector dimension " << basis->dim() << " exceeds the dense cap of " << kDenseDimCap
          << "; rerun with --lowest-k K (Lanczos, truncated basis)\n";
      return 2;
    }
    const SpectrumResult spec = diagonalize(h, d);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "spectrum.csv", spectrum_csv(spec));
    const std::string report = degeneracy_report(spec);
    write_file(dir / "degeneracy.txt", report);
    out << report;
    if (so.snapshot) {
      const Snapshot snap = read_snapshot(*so.snapshot);
      if (snap.lattice.rows != cfg.lattice.rows || snap.lattice.cols != cfg.lattice.cols ||
          snap.lattice.n_up != cfg.lattice.n_up || snap.lattice.n_down != cfg.lattice.n_down ||
          !(snap.ordering == cfg.ordering)) {
        err << "error: snapshot lattice/filling/ordering does not match the configuration\n";
        return 2;
      }
      const auto pops = population_distribution(to_sector(snap.state, basis), spec);
      write_file(dir / "populations.csv", population_csv(pops));
      if (cfg.plots) render_population_plot(dir, spec.ground_energy());
      double total = 0.0;
      for (const auto& p : pops) total += p.weight;
      out << "populations of layer " << snap.layer << ": ground group " << format_double(pops.front().group_summed)
          << ", total " << format_double(total) << (spec.truncated ? " (truncated basis)" : "") << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------

struct SweepAxis {
  std::string key;  // "section.key"
  std::vector<std::string> values;
};

/// Parses "falqon.dt=0.025,0.05"; a bare key is looked up in the usual sections.
inline SweepAxis parse_sweep_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("sweep axis '" + spec + "': expected key=v1,v2,...");
  }
  SweepAxis a{spec.substr(0, eq), split(spec.substr(eq + 1), ',')};
  if (a.key.find('.') == std::string::npos) {
    static const char* sections[] = {"lattice", "falqon", "state", "output"};
    std::string found;
    for (const char* s : sections) {
      ExperimentConfig probe;
      try {
        set_config_field(probe, std::string(s) + "." + a.key, a.values.front());
        found = std::string(s) + "." + a.key;
        break;
      } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("unknown config key", 0) != 0) {
          found = std::string(s) + "." + a.key;
          break;
        }
      }
    }
    if (found.empty()) throw ConfigError("sweep axis: unknown key '" + a.key + "'");
    a.key = found;
  }
  return a;
}

inline unsigned sweep_workers() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FALQON_WORKERS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

struct SweepCell {
  std::vector<std::string> values;
  std::string dir;
  bool ok = false;
  std::string error;
  double final_delta_e = std::numeric_limits<double>::quiet_NaN();
  std::string endpoint;
};

/**
 * Cartesian grid over `axes`, one output directory per cell, plus
 * aggregate.csv in the template's output directory. Cells are independent
 * and run on a bounded worker pool; failures are recorded per cell.
 */
inline int cmd_sweep(const ExperimentConfig& tmpl, const std::vector<SweepAxis>& axes, std::ostream& out,
                     std::ostream& err) {
  std::vector<SweepCell> cells(1);
  for (const auto& ax : axes) {
    std::vector<SweepCell> next;
    for (const auto& c : cells) {
      for (const auto& v : ax.values) {
        SweepCell n = c;
        n.values.push_back(v);
        next.push_back(std::move(n));
      }
    }
    cells = std::move(next);
  }
  const fs::path root(tmpl.out_dir);
  fs::create_directories(root);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cell_%03zu", i);
    cells[i].dir = (root / buf).string();
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& c = cells[i];
      try {
        ExperimentConfig cfg = tmpl;
        for (std::size_t a = 0; a < axes.size(); ++a) set_config_field(cfg, axes[a].key, c.values[a]);
        cfg.out_dir = c.dir;
        const RunOutcome r = run_experiment(cfg);
        c.ok = true;
        c.final_delta_e = r.audit.final_delta_e;
        c.endpoint = std::string(to_string(r.audit.endpoint));
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const unsigned n_workers = std::min<unsigned>(sweep_workers(), static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream agg(root / "aggregate.csv", std::ios::binary);
  agg << "cell";
  for (const auto& ax : axes) agg << ',' << ax.key;
  agg << ",final_delta_e,endpoint,status\n";
  int failures = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& c = cells[i];
    agg << i;
    for (const auto& v : c.values) agg << ',' << v;
    agg << ',' << format_double(c.final_delta_e) << ',' << (c.ok ? c.endpoint : "") << ','
        << (c.ok ? "ok" : "failed") << '\n';
    if (!c.ok) {
      ++failures;
      err << "cell " << i << " failed: " << c.error << "\n";
    }
  }
  out << cells.size() << " cells, " << failures << " failed, aggregate " << (root / "aggregate.csv").string()
      << "\n";
  return failures ? 1 : 0;
}

// ---------------------------------------------------------------------------

struct VerifyOptions {
  int n_states = 1000;
  std::vector<double> dtaus;     // empty: {0.01, 0.05, 0.1/h}
  std::optional<double> bound_dtau;  // single explicit bound-check step (validity enforced)
  int contraction_layers = 400;
  std::uint64_t seed = 1;
};

struct CheckLine {
  enum class Status { pass, fail, warn } status;
  std::string name;
  std::string detail;
};

inline std::string_view to_string(CheckLine::Status s) {
  switch (s) {
    case CheckLine::Status::pass: return "PASS";
    case CheckLine::Status::fail: return "FAIL";
    case CheckLine::Status::warn: return "WARN";
  }
  return "?";
}

/// Random normalized sector states, reproducible from `seed`.
inline std::vector<StateVector> random_sector_states(const LatticeSpec& lat, const OrbitalOrdering& ord, int n,
                                                     std::uint64_t seed) {
  std::vector<StateVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(initial_state(lat, ord, {InitMode::random, 0, seed * 1000003ULL + static_cast<std::uint64_t>(i)}));
  }
  return out;
}

/// Anticommutation identities of the JW operators on `n` orbitals.
inline bool check_anticommutation(int n, std::string* detail = nullptr) {
  for (int p = 0; p < n; ++p) {
    const PauliTermSum cp = jw_annihilation(p, n);
    for (int q = 0; q < n; ++q) {
      const PauliTermSum cq = jw_annihilation(q, n);
      const PauliTermSum a = anticommutator(cp, cq.adjoint());
      const PauliTermSum expected = p == q ? PauliTermSum::identity(n) : PauliTermSum(n);
      if (!a.approx_equal(expected) || !anticommutator(cp, cq).empty()) {
        if (detail) *detail = "fails for orbitals " + std::to_string(p) + ", " + std::to_string(q);
        return false;
      }
    }
  }
  return true;
}

/// Descent-bound harness and oracle checks; one line per check.
inline std::vector<CheckLine> verify_checks(const ExperimentConfig& cfg, const VerifyOptions& vo) {
  using S = CheckLine::Status;
  std::vector<CheckLine> lines;
  const LatticeSpec& lat = cfg.lattice;
  lat.validate();
  const SectorBasisPtr basis = make_sector_basis(lat, cfg.ordering);
  const PauliTermSum hp = build_problem_hamiltonian(lat, cfg.ordering);
  const PauliTermSum hd = build_driver_hamiltonian(lat, cfg.ordering);

  // JW route against the occupation-basis construction.
  if (basis->dim() <= kDenseDimCap) {
    const SpectrumResult jw = diagonalize(CompiledOperator::sector(hp, basis));
    const SectorMatrix fm = fermionic_hamiltonian_oracle(lat, cfg.ordering);
    const SpectrumResult fo = diagonalize_dense(to_dense(fm));
    double worst = 0.0;
    for (std::size_t i = 0; i < jw.size(); ++i) worst = std::max(worst, std::abs(jw.eigenvalues[i] - fo.eigenvalues[i]));
    lines.push_back({worst <= 1e-10 ? S::pass : S::fail, "jw_vs_fermionic_oracle",
                     "max |dE| = " + format_double(worst) + " over " + std::to_string(jw.size()) + " levels"});
  } else {
    const double a = sector_ground_energy(lat, cfg.ordering);
    const SectorMatrix fm = fermionic_hamiltonian_oracle(lat, cfg.ordering);
    const double b = lowest_eigenpairs(fm, 1, {}).values.front();
    lines.push_back({std::abs(a - b) <= 1e-8 ? S::pass : S::fail, "jw_vs_fermionic_oracle",
                     "ground energies differ by " + format_double(std::abs(a - b))});
  }

  {
    std::string detail = "all orbital pairs on " + std::to_string(lat.n_qubits()) + " orbitals";
    const bool ok = check_anticommutation(lat.n_qubits(), &detail);
    lines.push_back({ok ? S::pass : S::fail, "anticommutation", detail});
  }

  const PauliTermSum comm = commutator(hd, hp);
  if (comm.empty()) {
    lines.push_back({S::warn, "degenerate_control",
                     "i[H_d, H_p] vanishes; the feedback signal is identically zero"});
  }

  // Descent-bound harness on the shifted PSD operator.
  const SpectralBounds b = spectral_bounds(hp, basis);
  const PauliTermSum hs = shift_to_psd(hp, b.min);
  const double h = hs.one_norm();
  const CompiledOperator hsc = CompiledOperator::sector(hs, basis);
  const auto states = random_sector_states(lat, cfg.ordering, vo.n_states, vo.seed);
  std::vector<double> dtaus = vo.dtaus.empty() ? std::vector<double>{0.01, 0.05, 0.1 / h} : vo.dtaus;
  if (vo.bound_dtau) dtaus = {*vo.bound_dtau};
  for (double dtau : dtaus) {
    const std::string tag = "descent_bound(dtau=" + format_double(dtau) + ")";
    try {
      int violations = 0, strict_fail = 0;
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& s : states) {
        const DescentBoundCheck c = verify_descent_bound(s, hsc, dtau, h);
        if (!c.holds) ++violations;
        if (c.variance > 1e-12 && !(c.lhs < c.energy)) ++strict_fail;
        worst = std::max(worst, c.lhs - c.rhs);
      }
      lines.push_back({violations == 0 ? S::pass : S::fail, tag,
                       std::to_string(violations) + "/" + std::to_string(states.size()) +
                           " states violate the bound (max lhs - rhs = " + format_double(worst) + ", h = " +
                           format_double(h) + ")"});
      lines.push_back({strict_fail == 0 ? S::pass : S::fail, "strict_descent(dtau=" + format_double(dtau) + ")",
                       std::to_string(strict_fail) + " states failed to lower the energy"});
    } catch (const std::invalid_argument& e) {
      lines.push_back({S::fail, tag, std::string("refused: ") + e.what()});
    }
  }

  if (!vo.bound_dtau) {
    int off = 0;
    double worst = 0.0;
    for (double dtau : {1e-3, 1e-4}) {
      for (const auto& s : states) {
        const DescentBoundCheck c = verify_descent_bound(s, hsc, dtau, h);
        if (c.variance <= 1e-12) continue;
        const double ratio = (c.energy - c.lhs) / (2.0 * dtau * c.variance);
        worst = std::max(worst, std::abs(ratio - 1.0));
        if (std::abs(ratio - 1.0) > 0.1) ++off;
      }
    }
    lines.push_back({off == 0 ? S::pass : S::fail, "first_order_slope",
                     "(E - C)/(2 dtau V) within " + format_double(worst) + " of 1 at dtau 1e-3, 1e-4"});
  }

  // Per-kick contraction along a short hybrid trajectory.
  if (basis->dim() <= kDenseDimCap) {
    const SpectrumResult spec = diagonalize(CompiledOperator::sector(hp, basis));
    FalqonConfig fc = cfg.falqon;
    if (fc.dtau <= 0) fc.dtau = 0.05;
    fc.n_layers = std::min(fc.n_layers, vo.contraction_layers);
    const double limit = 1.0 / std::max(std::abs(b.min), std::abs(b.max));
    if (!(fc.dtau < limit)) {
      lines.push_back({S::fail, "contraction", "dtau " + format_double(fc.dtau) +
                                                   " outside the damping-validity range (0, " +
                                                   format_double(limit) + ")"});
    } else if (spec.groups.size() < 2) {
      lines.push_back({S::warn, "contraction", "single energy level; nothing to contract"});
    } else {
      int gated = 0, bad = 0;
      double worst = -std::numeric_limits<double>::infinity();
      RunOptions ro;
      ro.hooks.on_ite = [&](std::size_t, const StateVector& before, const StateVector& after) {
        const ContractionStep st = verify_contraction(before, after, spec, fc.dtau);
        if (!st.gated) return;
        ++gated;
        worst = std::max(worst, st.rho - st.r_first);
        if (!st.holds) ++bad;
      };
      run(fc, hp, hd, initial_state(lat, cfg.ordering, cfg.init), ro);
      lines.push_back({bad == 0 ? S::pass : S::fail, "contraction",
                       std::to_string(bad) + "/" + std::to_string(gated) +
                           " gated kicks exceed r_first (max rho - r_first = " + format_double(worst) + ")"});
    }
  }
  return lines;
}

inline int cmd_verify(const ExperimentConfig& cfg, const VerifyOptions& vo, std::ostream& out, std::ostream& err) {
  try {
    const auto lines = verify_checks(cfg, vo);
    int failures = 0;
    for (const auto& l : lines) {
      out << '[' << to_string(l.status) << "] " << l.name << ": " << l.detail << "\n";
      if (l.status == CheckLine::Status::fail) ++failures;
    }
    out << failures << " failing check(s)\n";
    return failures ? 1 : 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------

enum class HamiltonianPart { problem, driver, commutator, number_up, number_down };

inline HamiltonianPart parse_hamiltonian_part(std::string_view s) {
  if (s == "problem") return HamiltonianPart::problem;
  if (s == "driver") return HamiltonianPart::driver;
  if (s == "commutator") return HamiltonianPart::commutator;
  if (s == "number_up") return HamiltonianPart::number_up;
  if (s == "number_down") return HamiltonianPart::number_down;
  throw std::invalid_argument("unknown operator '" + std::string(s) +
                              "' (expected problem, driver, commutator, number_up, number_down)");
}

inline PauliTermSum hamiltonian_part(const ExperimentConfig& cfg, HamiltonianPart part) {
  switch (part) {
    case HamiltonianPart::problem: return build_problem_hamiltonian(cfg.lattice, cfg.ordering);
    case HamiltonianPart::driver: return build_driver_hamiltonian(cfg.lattice, cfg.ordering);
    case HamiltonianPart::commutator:
      return commutator(build_driver_hamiltonian(cfg.lattice, cfg.ordering),
                        build_problem_hamiltonian(cfg.lattice, cfg.ordering));
    case HamiltonianPart::number_up: return number_operators(cfg.lattice, cfg.ordering).n_up;
    case HamiltonianPart::number_down: return number_operators(cfg.lattice, cfg.ordering).n_down;
  }
  throw std::logic_error("hamiltonian_part");
}

inline int cmd_dump_hamiltonian(const ExperimentConfig& cfg, HamiltonianPart part, std::ostream& out,
                                std::ostream& err) {
  try {
    cfg.lattice.validate();
    write_term_sum(out, hamiltonian_part(cfg, part));
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace falqon
