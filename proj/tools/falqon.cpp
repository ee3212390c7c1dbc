// Command-line front end: run, spectrum, sweep, verify, dump-hamiltonian.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "falqon/falqon.hpp"

namespace {

using falqon::ExperimentConfig;

// Flags are collected as (config key, text) and applied over the config file.
struct Overrides {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> fields;
  std::map<std::string, std::string> raw;
  bool no_ite = false;
  bool signal_pre_ite = false;
  bool full_space = false;
  bool no_plots = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Config file (sectioned key = value)");
  auto opt = [&](const char* flag, const char* key, const char* help) {
    app->add_option_function<std::string>(
        flag, [&o, key](const std::string& v) { o.fields.emplace_back(key, v); }, help);
  };
  app->add_option_function<std::string>(
      "--lattice", [&o](const std::string& v) { o.raw["lattice"] = v; }, "Lattice RxC, e.g. 2x2");
  app->add_option_function<std::string>(
      "--fill", [&o](const std::string& v) { o.raw["fill"] = v; }, "Filling N_up,N_down, e.g. 2,2");
  opt("--J", "lattice.J", "Hopping amplitude");
  opt("--U", "lattice.U", "On-site repulsion");
  opt("--ordering", "lattice.ordering", "Site path: row_major or snake");
  opt("--dt", "falqon.dt", "Layer duration");
  opt("--layers", "falqon.layers", "Number of feedback layers");
  opt("--ite-dtau", "falqon.dtau", "Imaginary-time step (0 disables)");
  opt("--ite-period", "falqon.ite_period", "Apply the kick after every m-th layer");
  opt("--beta-init", "falqon.beta_init", "Control value for layer 1");
  opt("--method", "falqon.method", "krylov or trotter_terms");
  opt("--krylov-tol", "falqon.krylov_tol", "Krylov increment tolerance");
  opt("--krylov-max-dim", "falqon.krylov_max_dim", "Krylov dimension cap");
  opt("--trotter-substeps", "falqon.trotter_substeps", "Substeps for trotter_terms");
  opt("--log-every", "falqon.log_every", "Trajectory CSV row stride");
  opt("--init", "state.init", "canonical_fill, occupation, random, driver_ground");
  opt("--bitmask", "state.bitmask", "Occupation bitmask for --init occupation");
  opt("--seed", "state.seed", "Seed for --init random");
  opt("--out", "output.dir", "Output directory");
  opt("--snapshot-every", "output.snapshot_every", "Write a state snapshot every K layers");
  app->add_flag("--no-ite", o.no_ite, "Pure feedback run (dtau = 0)");
  app->add_flag("--signal-pre-ite", o.signal_pre_ite, "Measure A before the kick at hybrid layers");
  app->add_flag("--full-space", o.full_space, "Simulate the full 2^n register instead of the sector");
  app->add_flag("--no-plots", o.no_plots, "Skip SVG output");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = falqon::load_config(o.config_path);
  if (auto it = o.raw.find("lattice"); it != o.raw.end()) {
    const auto x = it->second.find_first_of("xX");
    if (x == std::string::npos) throw falqon::ConfigError("--lattice: expected RxC, got '" + it->second + "'");
    falqon::set_config_field(c, "lattice.rows", it->second.substr(0, x));
    falqon::set_config_field(c, "lattice.cols", it->second.substr(x + 1));
  }
  if (auto it = o.raw.find("fill"); it != o.raw.end()) {
    const auto parts = falqon::split(it->second, ',');
    if (parts.size() != 2) throw falqon::ConfigError("--fill: expected N_up,N_down, got '" + it->second + "'");
    falqon::set_config_field(c, "lattice.n_up", parts[0]);
    falqon::set_config_field(c, "lattice.n_down", parts[1]);
  }
  for (const auto& [k, v] : o.fields) falqon::set_config_field(c, k, v);
  if (o.no_ite) c.falqon.dtau = 0.0;
  if (o.signal_pre_ite) c.falqon.signal_pre_ite = true;
  if (o.full_space) c.full_space = true;
  if (o.no_plots) c.plots = false;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback-based ground-state preparation for Fermi-Hubbard lattices"};
  app.require_subcommand(1);

  Overrides o_run, o_spec, o_sweep, o_verify, o_dump;
  CLI::App* run = app.add_subcommand("run", "Run one feedback trajectory");
  add_common(run, o_run);

  CLI::App* spectrum = app.add_subcommand("spectrum", "Sector spectrum, degeneracies, populations");
  add_common(spectrum, o_spec);
  falqon::SpectrumOptions so;
  std::string snapshot;
  spectrum->add_option("--snapshot", snapshot, "State snapshot for the population report");
  spectrum->add_option("--lowest-k", so.lowest_k, "Lanczos for the lowest K levels (truncated basis)");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid of runs over parameter axes");
  add_common(sweep, o_sweep);
  std::vector<std::string> vary;
  sweep->add_option("--vary", vary, "Axis key=v1,v2,... (repeatable)")->required();

  CLI::App* verify = app.add_subcommand("verify", "Descent-bound, oracle and contraction checks");
  add_common(verify, o_verify);
  falqon::VerifyOptions vo;
  double bound_dtau = 0.0;
  verify->add_option("--states", vo.n_states, "Random states for the bound sweep");
  verify->add_option("--contraction-layers", vo.contraction_layers, "Layers in the contraction audit run");
  auto* bd = verify->add_option("--bound-dtau", bound_dtau, "Check the bound at this single dtau only");

  CLI::App* dump = app.add_subcommand("dump-hamiltonian", "Print an operator in the term text format");
  add_common(dump, o_dump);
  std::string part = "problem";
  std::string output;
  dump->add_option("--operator", part, "problem, driver, commutator, number_up, number_down");
  dump->add_option("--output", output, "Write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return falqon::cmd_run(resolve(o_run), std::cout, std::cerr);
    if (*spectrum) {
      if (!snapshot.empty()) so.snapshot = snapshot;
      return falqon::cmd_spectrum(resolve(o_spec), so, std::cout, std::cerr);
    }
    if (*sweep) {
      std::vector<falqon::SweepAxis> axes;
      for (const auto& v : vary) axes.push_back(falqon::parse_sweep_axis(v));
      return falqon::cmd_sweep(resolve(o_sweep), axes, std::cout, std::cerr);
    }
    if (*verify) {
      if (bd->count()) vo.bound_dtau = bound_dtau;
      return falqon::cmd_verify(resolve(o_verify), vo, std::cout, std::cerr);
    }
    if (*dump) {
      const ExperimentConfig c = resolve(o_dump);
      const auto which = falqon::parse_hamiltonian_part(part);
      if (output.empty()) return falqon::cmd_dump_hamiltonian(c, which, std::cout, std::cerr);
      std::ofstream os(output);
      if (!os) {
        std::cerr << "error: cannot write " << output << "\n";
        return 2;
      }
      return falqon::cmd_dump_hamiltonian(c, which, os, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
