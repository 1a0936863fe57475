#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spincool/dicke.hpp"
#include "spincool/engine.hpp"

using namespace spincool;

namespace {

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

EnsembleModel small_model() {
  EnsembleModel model;
  model.manifolds = sample_manifolds(model.N, 3, 14, 1.0 / 14, 28);  // I = 28, 42, 56
  return model;
}

// manifolds near the thermal bulk I ~ sqrt(N/2), where the nominal drive
// time is matched to the pair-swap enhancement
EnsembleModel bulk_model() {
  EnsembleModel model;
  model.manifolds = sample_manifolds(model.N, 3, 14, 1.0 / 14, 140);  // I = 140, 154, 168
  return model;
}

// ideal single-manifold setup: all noise channels ablated, tau = 1/(4 A_c),
// T = the full pair-swap time at the lockpoint
struct IdealCycle {
  EnsembleModel model;
  FeedbackConfig cfg;
  BlockEigen blocks;
  double tau;

  IdealCycle() {
    model.manifolds = {ManifoldSpec{14, -1, 1, 1.0}};
    cfg.ablate.no_transverse_noise = true;
    cfg.ablate.no_optical_relaxation = true;
    cfg.ablate.no_nuclear_dephasing = true;
    tau = 1.0 / (4 * model.A_c);
    const double f0 = enhancement_factor(std::sqrt(model.xi) * 14, 0);
    cfg.T_us = 2.0 / (model.A_nc * f0);

    GateParams gp;
    gp.omega_n = model.species[0].omega_n;
    gp.A_nc = model.A_nc;
    gp.xi = model.xi;
    blocks = build_actuation_blocks(model.manifolds[0], gp);
  }

  ManifoldState start_at(int iz) const {
    ManifoldState st = thermal_manifold(model.manifolds[0]);
    st.rho.setZero();
    st.rho(st.idx(0, iz), st.idx(0, iz)) = 1.0;
    return st;
  }

  void cycle(ManifoldState& st) const {
    run_cycle(st, tau, cfg, model.species[0], model, blocks);
  }
};

}  // namespace

TEST_CASE("ideal cycle corrects a one-site displacement deterministically") {
  IdealCycle ic;
  for (int start : {+1, -1}) {
    ManifoldState st = ic.start_at(start);
    ic.cycle(st);
    INFO("start iz = " << start);
    const Eigen::VectorXd p = st.nuclear_diag();
    REQUIRE(p[1] == Catch::Approx(1.0).margin(1e-9));  // iz = 0
    REQUIRE(st.trace() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("ideal cycle splits the locked state symmetrically") {
  IdealCycle ic;
  ManifoldState st = ic.start_at(0);
  ic.cycle(st);
  const Eigen::VectorXd p = st.nuclear_diag();  // indexed iz = -1, 0, +1
  REQUIRE(p[0] == Catch::Approx(0.5).margin(1e-9));
  REQUIRE(p[2] == Catch::Approx(0.5).margin(1e-9));
  REQUIRE(p[1] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("noisy cycles drift displaced states toward the lockpoint") {
  EnsembleModel model;
  model.manifolds = {ManifoldSpec{42, -3, 3, 1.0}};
  FeedbackConfig cfg;  // defaults: full noise, delta = 0, phi = 0
  GateParams gp;
  gp.omega_n = model.species[0].omega_n;
  gp.A_nc = model.A_nc;
  gp.xi = model.xi;
  const BlockEigen blocks = build_actuation_blocks(model.manifolds[0], gp);

  for (int start : {+2, -2}) {
    ManifoldState st = thermal_manifold(model.manifolds[0]);
    st.rho.setZero();
    st.rho(st.idx(0, start), st.idx(0, start)) = 1.0;
    for (int j = 0; j < 20; ++j) run_cycle(st, 0.050, cfg, model.species[0], model, blocks);
    INFO("start iz = " << start);
    const double mean = st.iz_mean();
    REQUIRE(std::abs(mean) < std::abs(static_cast<double>(start)) - 0.3);
    REQUIRE(mean * start > -0.5);  // no gross overshoot past the lockpoint
    REQUIRE(st.trace() == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("full sequence preserves trace and positivity on every manifold") {
  EnsembleModel model = small_model();
  FeedbackConfig cfg;  // 44 cycles, 30 -> 98 ns ramp, full noise
  SequenceResult res = run_sequence(model, cfg);
  REQUIRE(res.species.size() == 2);
  REQUIRE(res.diag.min_trace > 1 - 1e-9);
  for (const auto& row : res.states)
    for (const auto& st : row) {
      REQUIRE(std::abs(st.trace() - 1) < 1e-9);
      REQUIRE(st.hermiticity_error() < 1e-10);
      REQUIRE(st.min_eigenvalue() > -1e-9);
    }
}

TEST_CASE("sequence narrows the thermal distribution toward the lockpoint") {
  EnsembleModel model = bulk_model();
  FeedbackConfig cfg;
  SequenceResult res = run_sequence(model, cfg);
  for (std::size_t s = 0; s < res.states.size(); ++s)
    for (std::size_t m = 0; m < res.states[s].size(); ++m) {
      const auto& st = res.states[s][m];
      const double before = thermal_iz_second_moment(st.spec);
      INFO("species " << s << " manifold I = " << st.spec.I);
      REQUIRE(st.iz_second_moment() < 0.5 * before);
      REQUIRE(std::abs(st.iz_mean()) < 0.5);
    }
}

TEST_CASE("sense phase is 2 pi periodic") {
  EnsembleModel model = small_model();
  FeedbackConfig a, b;
  a.n_cycles = b.n_cycles = 6;
  a.phi = 0.3;
  b.phi = 0.3 + 2 * kPi;
  SequenceResult ra = run_sequence(model, a), rb = run_sequence(model, b);
  for (std::size_t s = 0; s < ra.states.size(); ++s)
    for (std::size_t m = 0; m < ra.states[s].size(); ++m)
      REQUIRE(max_diff(ra.states[s][m].rho, rb.states[s][m].rho) < 1e-12);
}

TEST_CASE("sequence results are independent of the thread count") {
  EnsembleModel model = small_model();
  FeedbackConfig cfg;
  cfg.n_cycles = 10;
  SequenceResult r1 = run_sequence(model, cfg, 1);
  SequenceResult r3 = run_sequence(model, cfg, 3);
  for (std::size_t s = 0; s < r1.states.size(); ++s)
    for (std::size_t m = 0; m < r1.states[s].size(); ++m)
      REQUIRE(max_diff(r1.states[s][m].rho, r3.states[s][m].rho) == 0.0);
}

TEST_CASE("species handling: reduction flag and order invariance") {
  EnsembleModel model = small_model();
  FeedbackConfig cfg;
  cfg.n_cycles = 8;

  SequenceResult full = run_sequence(model, cfg);
  REQUIRE(max_diff(full.states[0][0].rho, full.states[1][0].rho) > 1e-6);  // As vs In differ

  FeedbackConfig one = cfg;
  one.ablate.single_species = true;
  SequenceResult reduced = run_sequence(model, one);
  REQUIRE(reduced.species.size() == 1);
  REQUIRE(reduced.species[0].label == model.species[0].label);
  for (std::size_t m = 0; m < reduced.states[0].size(); ++m)
    REQUIRE(max_diff(reduced.states[0][m].rho, full.states[0][m].rho) == 0.0);

  EnsembleModel swapped = model;
  std::swap(swapped.species[0], swapped.species[1]);
  SequenceResult rs = run_sequence(swapped, cfg);
  for (std::size_t m = 0; m < rs.states[0].size(); ++m) {
    REQUIRE(max_diff(rs.states[0][m].rho, full.states[1][m].rho) == 0.0);
    REQUIRE(max_diff(rs.states[1][m].rho, full.states[0][m].rho) == 0.0);
  }
}

TEST_CASE("ablation flags switch their channels off") {
  EnsembleModel model = small_model();
  FeedbackConfig cfg;
  cfg.n_cycles = 6;
  SequenceResult base = run_sequence(model, cfg);

  for (int which = 0; which < 3; ++which) {
    FeedbackConfig ab = cfg;
    if (which == 0) ab.ablate.no_transverse_noise = true;
    if (which == 1) ab.ablate.no_optical_relaxation = true;
    if (which == 2) ab.ablate.no_nuclear_dephasing = true;
    SequenceResult res = run_sequence(model, ab);
    INFO("flag " << which);
    REQUIRE(max_diff(res.states[0][0].rho, base.states[0][0].rho) > 1e-9);
  }
}

TEST_CASE("sensing-time schedule endpoints") {
  TauSchedule s;
  REQUIRE(s.tau_at(0, 44) == Catch::Approx(0.030).margin(1e-15));
  REQUIRE(s.tau_at(43, 44) == Catch::Approx(0.098).margin(1e-15));
  REQUIRE(s.tau_at(0, 1) == Catch::Approx(0.030).margin(1e-15));
  s.kind = TauSchedule::Fixed;
  for (int j : {0, 7, 43}) REQUIRE(s.tau_at(j, 44) == Catch::Approx(0.150).margin(1e-15));

  TauSchedule bad;
  bad.tau_min_us = 0.2;
  bad.tau_max_us = 0.1;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = TauSchedule{};
  bad.tau_min_us = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("lockpoint margin rules") {
  const ManifoldSpec narrow{14, -1, 1, 1.0};  // window 3: containment only
  REQUIRE_NOTHROW(check_lockpoint_margin(narrow, 1.0));
  REQUIRE_THROWS_AS(check_lockpoint_margin(narrow, 1.5), ConfigError);

  const ManifoldSpec wide{70, -5, 5, 1.0};  // window 11: 2-site margin
  REQUIRE_NOTHROW(check_lockpoint_margin(wide, 3.0));
  REQUIRE_THROWS_AS(check_lockpoint_margin(wide, 4.0), ConfigError);
  REQUIRE_THROWS_AS(check_lockpoint_margin(wide, -4.0), ConfigError);

  EnsembleModel model = small_model();
  FeedbackConfig cfg;
  cfg.delta = -0.63 * 5;  // lockpoint 5 spins, outside the I = 28 window
  REQUIRE_THROWS_AS(run_sequence(model, cfg), ConfigError);

  EnsembleModel empty;
  REQUIRE_THROWS_AS(run_sequence(empty, FeedbackConfig{}), ConfigError);
}

TEST_CASE("dragging walks the ensemble mean with the lockpoint") {
  EnsembleModel model;
  model.manifolds = {ManifoldSpec{70, -5, 5, 1.0}};
  FeedbackConfig cfg;
  cfg.drag_schedule = {{0.0, 2}, {-0.63, 2}, {-1.26, 2}};  // locks 0, 1, 2

  DragResult dr = drag_lockpoint(model, cfg);
  REQUIRE(dr.steps.size() == 3);
  for (const auto& step : dr.steps) {
    INFO("delta = " << step.delta << " lock = " << step.lock);
    REQUIRE(std::abs(step.mean_iz - step.lock) < 0.6);
  }
  REQUIRE(dr.steps[2].mean_iz > dr.steps[0].mean_iz + 1.0);
  REQUIRE(dr.diag.min_trace > 1 - 1e-9);
}

TEST_CASE("drag schedule validation") {
  EnsembleModel model;
  model.manifolds = {ManifoldSpec{70, -5, 5, 1.0}};
  FeedbackConfig cfg;

  cfg.drag_schedule = {};
  REQUIRE_THROWS_AS(drag_lockpoint(model, cfg), ConfigError);

  // a 10-spin jump exceeds half the capture range 1/(A_c tau_max) ~ 16.2/2
  cfg.drag_schedule = {{0.0, 1}, {-6.3, 1}};
  REQUIRE_THROWS_AS(drag_lockpoint(model, cfg), ConfigError);

  cfg.drag_schedule = {{0.0, 0}};
  REQUIRE_THROWS_AS(drag_lockpoint(model, cfg), ConfigError);
}
