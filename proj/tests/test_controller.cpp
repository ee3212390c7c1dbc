#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "falqon/controller.hpp"
#include "falqon/csv.hpp"
#include "falqon/evolution.hpp"
#include "falqon/spectral.hpp"
#include "oracles.hpp"

using namespace falqon;
using oracle::cplx;

namespace {

const LatticeSpec kTwoSite{1, 2, 1.0, 5.0, 1, 1};

struct Model {
  LatticeSpec lat;
  SectorBasisPtr basis;
  PauliTermSum hp, hd;
  NumberOperators num;
  double e0;

  explicit Model(const LatticeSpec& l)
      : lat(l),
        basis(make_sector_basis(l)),
        hp(build_problem_hamiltonian(l, {})),
        hd(build_driver_hamiltonian(l, {})),
        num(number_operators(l, {})),
        e0(sector_ground_energy(l)) {}

  TrajectoryRecord run(const FalqonConfig& cfg, const RunHooks& hooks = {}) const {
    RunOptions opt;
    opt.ground_energy = e0;
    opt.numbers = &num;
    opt.dtau_limit = dtau_limit(hp, basis);
    opt.hooks = hooks;
    return falqon::run(cfg, hp, hd, driver_ground_state(lat, {}, basis), opt);
  }
};

FalqonConfig config(int layers, double dtau = 0.0) {
  FalqonConfig c;
  c.n_layers = layers;
  c.dtau = dtau;
  return c;
}

// Single-qubit operator with |0> at energy lo and |1> at energy hi.
PauliTermSum two_level(double lo, double hi) {
  return PauliTermSum::identity(1, 0.5 * (lo + hi)) + PauliTermSum::single(1, 0, Pauli::Z, 0.5 * (lo - hi));
}

StateVector two_level_state(double p_excited) {
  return StateVector(1, {std::sqrt(1 - p_excited), std::sqrt(p_excited)});
}

}  // namespace

TEST(CommutatorSignal, EigenstatesMatchDenseOracle) {
  const auto spec = sector_spectrum(kTwoSite);
  const auto hp = build_problem_hamiltonian(kTwoSite, {});
  const auto comm = commutator(build_driver_hamiltonian(kTwoSite, {}), hp);
  const oracle::MatrixXcd c = oracle::restrict(oracle::dense(comm), *spec.basis);
  for (Eigen::Index n = 0; n < 4; ++n) {
    const oracle::VectorXcd v = spec.eigenvectors->col(n);
    const double expected = v.dot(c * v).real();
    EXPECT_NEAR(commutator_signal(StateVector(spec.basis, oracle::to_std(v)), comm), expected, 1e-12);
  }
}

TEST(CommutatorSignal, VanishesOnGroundState) {
  const auto spec = sector_spectrum(kTwoSite);
  const auto comm = commutator(build_driver_hamiltonian(kTwoSite, {}), build_problem_hamiltonian(kTwoSite, {}));
  EXPECT_NEAR(commutator_signal(StateVector(spec.basis, oracle::to_std(spec.eigenvectors->col(0))), comm), 0.0, 1e-8);
}

TEST(CommutatorSignal, ZeroForCommutingPair) {
  LatticeSpec free = kTwoSite;
  free.U = 0.0;
  const auto comm = commutator(build_driver_hamiltonian(free, {}), build_problem_hamiltonian(free, {}));
  EXPECT_TRUE(comm.empty());
  const auto s = initial_state(free, {}, {InitMode::random, 0, 1});
  EXPECT_EQ(commutator_signal(s, comm), 0.0);
}

TEST(CommutatorSignal, ImaginaryResidueIsHermiticityError) {
  const auto s = StateVector::basis_state(1, 0);
  EXPECT_THROW(commutator_signal(s, PauliTermSum::single(1, 0, Pauli::Z, cplx(0, 1))), HermiticityError);
}

TEST(FalqonLayer, ZeroBetaConservesEnergy) {
  const Model m(kTwoSite);
  const auto s = initial_state(kTwoSite, {}, {InitMode::random, 0, 2});
  const auto out = falqon_layer(s, 0.0, m.hp, m.hd, 0.05);
  EXPECT_NEAR(expectation(out, m.hp).real(), expectation(s, m.hp).real(), 1e-9);
  EXPECT_NEAR(out.norm(), 1.0, 1e-9);
}

TEST(FalqonLayer, ZeroDtIsIdentity) {
  const Model m(kTwoSite);
  const auto s = initial_state(kTwoSite, {}, {InitMode::random, 0, 3});
  EXPECT_LT(distance(falqon_layer(s, 0.7, m.hp, m.hd, 0.0), s), 1e-15);
}

TEST(FalqonLayer, DriverThenProblemMatchesDense) {
  const Model m(kTwoSite);
  const oracle::MatrixXcd P = oracle::dense(m.hp), D = oracle::dense(m.hd);
  const oracle::VectorXcd v = oracle::random_vector(16, 4);
  const oracle::VectorXcd expected = oracle::expm_hermitian(P, 0.05) * oracle::expm_hermitian(D, 0.05) * v;
  const auto out = falqon_layer(oracle::full_state(4, v), 1.0, m.hp, m.hd, 0.05);
  EXPECT_LT((oracle::to_eigen(out) - expected).norm(), 1e-9);
  // The opposite order is measurably different.
  const oracle::VectorXcd swapped = oracle::expm_hermitian(D, 0.05) * oracle::expm_hermitian(P, 0.05) * v;
  EXPECT_GT((oracle::to_eigen(out) - swapped).norm(), 1e-4);
}

TEST(Run, FeedbackBootstrapping) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  FalqonConfig c = config(200);
  c.beta_init = 0.3;
  const auto traj = m.run(c);
  ASSERT_EQ(traj.layers.size(), 201U);
  EXPECT_EQ(traj.layers[1].beta, 0.3);
  for (std::size_t k = 1; k < 200; ++k) EXPECT_EQ(traj.layers[k + 1].beta, -traj.layers[k].A);
  for (std::size_t k = 0; k <= 200; ++k) EXPECT_DOUBLE_EQ(traj.layers[k].t, 0.02 * static_cast<double>(k));
}

TEST(Run, LoggedBetaReproducedFromStoredStates) {
  const Model m({2, 2, 1.0, 5.0, 1, 2});
  std::vector<StateVector> states;
  RunHooks hooks;
  hooks.on_layer = [&](const LayerRecord&, const StateVector& psi) { states.push_back(psi); };
  const auto traj = m.run(config(300, 0.05), hooks);
  const auto comm = commutator(m.hd, m.hp);
  ASSERT_EQ(states.size(), traj.layers.size());
  for (std::size_t k = 1; k + 1 < states.size(); ++k) {
    EXPECT_NEAR(-commutator_signal(states[k], comm), traj.layers[k + 1].beta, 1e-10);
  }
}

TEST(Run, SnapshotEnergiesMatchLog) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  std::vector<StateVector> states;
  RunHooks hooks;
  hooks.on_layer = [&](const LayerRecord&, const StateVector& psi) { states.push_back(psi); };
  const auto traj = m.run(config(100, 0.05), hooks);
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_NEAR(expectation(states[k], m.hp).real(), traj.layers[k].energy, 1e-12);
    EXPECT_NEAR(variance(states[k], m.hp), traj.layers[k].variance, 1e-10);
  }
}

TEST(Run, IteScheduleAndSignalTiming) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  FalqonConfig c = config(12, 0.05);
  c.ite_period = 3;
  std::vector<std::size_t> kicked;
  RunHooks hooks;
  hooks.on_ite = [&](std::size_t layer, const StateVector&, const StateVector&) { kicked.push_back(layer); };
  const auto post = m.run(c, hooks);
  EXPECT_EQ(kicked, (std::vector<std::size_t>{3, 6, 9, 12}));
  for (std::size_t k = 1; k <= 12; ++k) {
    EXPECT_EQ(post.layers[k].ite, k % 3 == 0);
    EXPECT_EQ(std::isfinite(post.layers[k].pre_norm), k % 3 == 0);
  }
  c.signal_pre_ite = true;
  const auto pre = m.run(c);
  EXPECT_EQ(pre.layers[2].A, post.layers[2].A);
  EXPECT_NE(pre.layers[3].A, post.layers[3].A);
}

TEST(Run, Deterministic) {
  const Model m({2, 2, 1.0, 5.0, 2, 2});
  std::ostringstream a, b;
  write_trajectory_csv(a, m.run(config(500, 0.05)));
  write_trajectory_csv(b, m.run(config(500, 0.05)));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Run, ParticleNumberConstantInFullSpace) {
  const LatticeSpec lat{1, 3, 1.0, 5.0, 1, 2};
  const Model m(lat);
  RunOptions opt;
  opt.ground_energy = m.e0;
  opt.numbers = &m.num;
  const auto psi0 = initial_state(lat, {}, {InitMode::random, 0, 5}, true);
  const auto traj = run(config(400, 0.05), m.hp, m.hd, psi0, opt);
  EXPECT_LT(traj.max_particle_deviation, 1e-9);
  EXPECT_NEAR(traj.final().n_up, 1.0, 1e-9);
  EXPECT_NEAR(traj.final().n_down, 2.0, 1e-9);
}

TEST(Run, NonFiniteValueAbortsWithLayer) {
  const Model m(kTwoSite);
  FalqonConfig c = config(10);
  c.beta_init = std::nan("");
  try {
    m.run(c);
    FAIL() << "expected NumericalAbort";
  } catch (const NumericalAbort& e) {
    EXPECT_EQ(e.layer(), 0U);
  }
}

TEST(Run, RejectsInvalidDtau) {
  const Model m(kTwoSite);
  EXPECT_THROW(m.run(config(10, 0.5)), std::invalid_argument);
  FalqonConfig bad = config(10);
  bad.ite_period = 0;
  EXPECT_THROW(m.run(bad), std::invalid_argument);
}

TEST(Run, DopedChainConverges) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  const auto traj = m.run(config(50000));
  const auto rep = monotonicity_audit(traj);
  EXPECT_LT(rep.final_delta_e, 1e-2);
  EXPECT_EQ(rep.endpoint, Endpoint::converged);
  EXPECT_TRUE(rep.descent_violations.empty());
}

TEST(Run, HalfFilledPlaquetteStagnatesWithoutKicks) {
  const Model m({2, 2, 1.0, 5.0, 2, 2});
  const auto traj = m.run(config(50000));
  const auto rep = monotonicity_audit(traj);
  EXPECT_GT(rep.final_delta_e, 1.0);
  EXPECT_EQ(rep.endpoint, Endpoint::plateau);
}

TEST(Run, HalfFilledPlaquetteConvergesWithKicks) {
  const Model m({2, 2, 1.0, 5.0, 2, 2});
  const auto traj = m.run(config(50000, 0.05));
  AuditSettings s;
  s.converged_threshold = 1e-5;
  const auto rep = monotonicity_audit(traj, s);
  EXPECT_LT(rep.final_delta_e, 1e-5);
  EXPECT_TRUE(rep.ite_violations.empty());
  EXPECT_EQ(rep.ite_layers, 25000U);
}

TEST(DescentBound, EigenstateIsEquality) {
  const auto spec = sector_spectrum(kTwoSite);
  const auto hs = shift_to_psd(build_problem_hamiltonian(kTwoSite, {}), spec.ground_energy());
  const auto c = CompiledOperator::sector(hs, spec.basis);
  const double h = hs.one_norm();
  for (Eigen::Index n = 0; n < 4; ++n) {
    const StateVector s(spec.basis, oracle::to_std(spec.eigenvectors->col(n)));
    const auto r = verify_descent_bound(s, c, 0.05, h);
    EXPECT_NEAR(r.variance, 0.0, 1e-10);
    EXPECT_NEAR(r.lhs, r.energy, 1e-10);
    EXPECT_NEAR(r.rhs, r.energy, 1e-10);
    EXPECT_TRUE(r.holds);
  }
}

TEST(DescentBound, ValidityWindowEnforced) {
  const auto c = CompiledOperator::full(two_level(0, 1));
  const auto s = two_level_state(0.5);
  EXPECT_THROW(verify_descent_bound(s, c, 3.0, 1.0), std::invalid_argument);
  EXPECT_THROW(verify_descent_bound(s, c, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(verify_descent_bound(s, c, 0.0, 1.0), std::invalid_argument);
  EXPECT_NO_THROW(verify_descent_bound(s, c, 0.5, 1.0));
}

// Closed-form two-level arithmetic: levels {0, h}, excited weight p.
TEST(DescentBound, TwoLevelClosedForm) {
  const double h = 1.0, p = 0.5, dtau = 0.01;
  const auto r = verify_descent_bound(two_level_state(p), CompiledOperator::full(two_level(0, h)), dtau, h);
  const double E = p * h, V = p * (1 - p) * h * h;
  const double w = p * (1 - dtau * h) * (1 - dtau * h);
  const double lhs = w * h / ((1 - p) + w);
  const double rhs = E - 2 * dtau * (1 - 0.5 * h * dtau) / std::pow(1 - h * dtau, 2) * V;
  EXPECT_NEAR(r.energy, E, 1e-15);
  EXPECT_NEAR(r.variance, V, 1e-15);
  EXPECT_NEAR(r.lhs, lhs, 1e-14);
  EXPECT_NEAR(r.rhs, rhs, 1e-14);
  // The stated inequality fails here: lhs = 0.494975..., rhs = 0.494924...
  EXPECT_NEAR(r.lhs, 0.494975, 5e-7);
  EXPECT_NEAR(r.rhs, 0.494924, 5e-7);
  EXPECT_FALSE(r.holds);
  // One kick still lowers the energy.
  EXPECT_LT(r.lhs, r.energy);
}

TEST(DescentBound, FirstOrderSlope) {
  const auto spec = sector_spectrum(kTwoSite);
  const auto hs = shift_to_psd(build_problem_hamiltonian(kTwoSite, {}), spec.ground_energy());
  const auto c = CompiledOperator::sector(hs, spec.basis);
  const double h = hs.one_norm();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = initial_state(kTwoSite, {}, {InitMode::random, 0, seed});
    for (double dtau : {1e-3, 1e-4}) {
      const auto r = verify_descent_bound(s, c, dtau, h);
      const double slope = (r.energy - r.lhs) / (2 * dtau * r.variance);
      EXPECT_NEAR(slope, 1.0, 0.1) << "seed " << seed << " dtau " << dtau;
    }
  }
}

TEST(Contraction, TwoLevelRatioEqualsFirstOrderFactor) {
  const double e0 = -1.0, e1 = 2.0, dtau = 0.1;
  const auto h = two_level(e0, e1);
  SpectrumResult spec = diagonalize_dense(oracle::dense(h));
  const auto before = two_level_state(0.3);
  const auto after = ite_step(before, h, dtau).state;
  const auto step = verify_contraction(before, after, spec, dtau);
  const double r_first = std::abs((1 - dtau * e1) / (1 - dtau * e0));
  EXPECT_NEAR(step.r_first, r_first, 1e-15);
  EXPECT_NEAR(step.rho, r_first, 1e-12);
  EXPECT_TRUE(step.gated);
  EXPECT_TRUE(step.holds);
  EXPECT_NEAR(step.exact_factor, std::exp(-dtau * 3.0), 1e-15);
}

TEST(Contraction, GroundEigenstateStaysPure) {
  const auto spec = sector_spectrum(kTwoSite);
  const auto hp = build_problem_hamiltonian(kTwoSite, {});
  const StateVector g(spec.basis, oracle::to_std(spec.eigenvectors->col(0)));
  const auto after = ite_step(g, hp, 0.05).state;
  const auto step = verify_contraction(g, after, spec, 0.05);
  EXPECT_LT(step.ratio_after, 1e-7);
  EXPECT_FALSE(step.gated);
  EXPECT_TRUE(step.holds);
}

TEST(Contraction, EveryKickOnDopedChain) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  const auto spec = sector_spectrum(m.lat);
  std::size_t steps = 0, gated = 0;
  RunHooks hooks;
  hooks.on_ite = [&](std::size_t, const StateVector& before, const StateVector& after) {
    const auto s = verify_contraction(before, after, spec, 0.05);
    ++steps;
    gated += s.gated;
    EXPECT_TRUE(s.holds) << "rho " << s.rho << " r_first " << s.r_first;
  };
  m.run(config(400, 0.05), hooks);
  EXPECT_EQ(steps, 200U);
  EXPECT_GT(gated, 10U);
}

TEST(Contraction, DegenerateGroundUsesGroupProjector) {
  const Model m({2, 2, 1.0, 5.0, 1, 2});
  const auto spec = sector_spectrum(m.lat);
  ASSERT_EQ(spec.ground_group().size(), 2U);
  StateVector s = initial_state(m.lat, {}, {InitMode::random, 0, 6});
  for (int k = 0; k < 50; ++k) {
    const auto after = ite_step(s, m.hp, 0.05).state;
    const auto step = verify_contraction(s, after, spec, 0.05);
    EXPECT_TRUE(step.holds);
    s = after;
  }
}

TEST(Audit, FlagsRisesAndFailedKicks) {
  TrajectoryRecord t;
  t.ground_energy = -1.0;
  auto layer = [](double e_before, double e_after, bool ite, double v) {
    LayerRecord r;
    r.energy_before_ite = e_before;
    r.energy = e_after;
    r.ite = ite;
    r.variance_before_ite = v;
    return r;
  };
  t.layers = {layer(0.0, 0.0, false, 1), layer(-0.1, -0.1, false, 1), layer(-0.05, -0.05, false, 1),
              layer(-0.2, -0.1, true, 1), layer(-0.2, -0.2, true, 0)};
  const auto rep = monotonicity_audit(t);
  EXPECT_EQ(rep.descent_violations, (std::vector<std::size_t>{2}));
  EXPECT_EQ(rep.ite_violations, (std::vector<std::size_t>{3}));
  EXPECT_EQ(rep.ite_layers, 2U);
  EXPECT_NEAR(rep.max_rise, 0.05, 1e-15);
}

TEST(Audit, KickedTrajectoryHasNoKickViolations) {
  for (const LatticeSpec lat : {LatticeSpec{1, 3, 1, 5, 1, 2}, LatticeSpec{1, 4, 1, 5, 1, 2}, LatticeSpec{2, 2, 1, 5, 1, 2}}) {
    const Model m(lat);
    const auto rep = monotonicity_audit(m.run(config(5000, 0.05)));
    EXPECT_TRUE(rep.ite_violations.empty());
    EXPECT_EQ(rep.ite_layers, 2500U);
  }
}

TEST(Audit, FrozenControlIsPlateauAtStart) {
  LatticeSpec free{2, 2, 1.0, 0.0, 1, 2};
  const auto hp = build_problem_hamiltonian(free, {});
  const auto hd = build_driver_hamiltonian(free, {});
  RunOptions opt;
  opt.ground_energy = sector_ground_energy(free);
  const auto psi0 = initial_state(free, {}, {InitMode::canonical_fill});
  const auto traj = run(config(1000), hp, hd, psi0, opt);
  for (const auto& r : traj.layers) {
    EXPECT_EQ(r.beta, 0.0);
    EXPECT_NEAR(r.energy, traj.layers[0].energy, 1e-12);
  }
  const auto rep = monotonicity_audit(traj);
  EXPECT_GT(rep.final_delta_e, 1e-2);
  EXPECT_EQ(rep.endpoint, Endpoint::plateau);
  EXPECT_TRUE(rep.descent_violations.empty());
}

TEST(Audit, RequiresGroundEnergy) {
  TrajectoryRecord t;
  t.layers.resize(2);
  EXPECT_THROW(monotonicity_audit(t), std::invalid_argument);
}

TEST(TrajectoryCsv, HeaderStrideAndLosslessValues) {
  const Model m({1, 3, 1.0, 5.0, 1, 2});
  const auto traj = m.run(config(25, 0.05));
  std::ostringstream os;
  write_trajectory_csv(os, traj, 10);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "layer,t,beta,A,energy,delta_e,variance,ite,pre_norm,norm_drift");
  std::vector<std::size_t> layers;
  while (std::getline(is, line)) {
    const auto f = split(line, ',');
    ASSERT_EQ(f.size(), 10U);
    const std::size_t k = std::stoul(f[0]);
    layers.push_back(k);
    const auto& r = traj.layers[k];
    EXPECT_EQ(std::stod(f[2]), r.beta);
    EXPECT_EQ(std::stod(f[3]), r.A);
    EXPECT_EQ(std::stod(f[4]), r.energy);
    EXPECT_EQ(std::stod(f[5]), r.delta_e);
    EXPECT_EQ(std::stod(f[6]), r.variance);
    EXPECT_EQ(f[7], r.ite ? "1" : "0");
    if (r.ite) EXPECT_EQ(std::stod(f[8]), r.pre_norm);
  }
  EXPECT_EQ(layers, (std::vector<std::size_t>{0, 10, 20, 25}));
}
