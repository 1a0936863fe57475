#pragma once
// Composes gates and channels into algorithm cycles and full feedback
// sequences: the dynamic sensing-time ramp, two-species averaging, and
// lockpoint dragging.
//
// One cycle, in fixed order:
//   rho' = K_reset K_pd U3 K_opt U2 K_tn U1_j rho
// with U1_j = sense(tau_j) after the phase-programmable pi/2 pulse,
// K_tn the transverse-noise channel at tau_j, U2 = R_{-y}(pi/2),
// K_opt the optical relaxation over T, U3 the flip-flop propagator over T,
// K_pd the nuclear dephasing over T, and K_reset the electron reset.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "spincool/channels.hpp"
#include "spincool/dicke.hpp"
#include "spincool/gates.hpp"
#include "spincool/util.hpp"

namespace spincool {

struct TauSchedule {
  enum Kind { Linear, Fixed };
  Kind kind = Linear;
  double tau_min_us = 0.030;
  double tau_max_us = 0.098;
  double tau_fixed_us = 0.150;

  // linear ramp inclusive of both endpoints
  double tau_at(int j, int n_cycles) const {
    if (kind == Fixed) return tau_fixed_us;
    if (n_cycles <= 1) return tau_min_us;
    return tau_min_us + j * (tau_max_us - tau_min_us) / (n_cycles - 1);
  }

  void validate() const {
    if (kind == Linear) {
      if (tau_min_us <= 0 || tau_max_us <= 0)
        throw ConfigError("cycle.tau_min_ns/tau_max_ns: must be > 0");
      if (tau_min_us > tau_max_us)
        throw ConfigError("cycle.tau_min_ns: must not exceed tau_max_ns");
    } else if (tau_fixed_us <= 0) {
      throw ConfigError("cycle.tau_fixed_ns: must be > 0");
    }
  }
};

struct AblationFlags {
  bool no_transverse_noise = false;
  bool no_optical_relaxation = false;
  bool no_nuclear_dephasing = false;
  bool single_species = false;
};

struct FeedbackConfig {
  int n_cycles = 44;
  TauSchedule schedule;
  double T_us = 0.086;  // actuation time
  double delta = 0.0;   // ESR detuning, MHz (lockpoint = -delta / A_c)
  double phi = 0.0;     // sense-pulse phase, rad
  NoiseParams noise;    // omega_n field is overwritten per species
  AblationFlags ablate;

  // dragging: list of (delta, cycles at that delta); empty = no drag
  std::vector<std::pair<double, int>> drag_schedule;

  void validate() const {
    if (n_cycles < 1) throw ConfigError("cycle.n_cycles: must be >= 1");
    if (T_us < 0) throw ConfigError("cycle.T_ns: must be >= 0");
    schedule.validate();
  }
};

struct CycleDiagnostics {
  double min_trace = 1.0;   // smallest manifold trace seen
  long clamped_f = 0;       // blocks decoupled by the xi-window clamp
};

inline double lockpoint_of(const FeedbackConfig& cfg, const EnsembleModel& model) {
  return -cfg.delta / model.A_c;
}

// The truncation window must contain the lockpoint; for windows wide enough
// to afford it we additionally insist on a 2-site margin from either edge,
// since truncation corrupts the flip-flop flow near the boundary.
inline void check_lockpoint_margin(const ManifoldSpec& spec, double lock) {
  if (lock < spec.iz_lo || lock > spec.iz_hi)
    throw ConfigError("lockpoint " + fmt9(lock) + " outside the I_z window of manifold I=" +
                      std::to_string(spec.I));
  if (spec.window() >= 7) {
    if (lock < spec.iz_lo + 2 || lock > spec.iz_hi - 2)
      throw ConfigError("lockpoint " + fmt9(lock) + " within 2 sites of the window edge, manifold I=" +
                        std::to_string(spec.I));
  }
}

inline void run_cycle(ManifoldState& st, double tau_us, const FeedbackConfig& cfg,
                      const Species& sp, const EnsembleModel& model, const BlockEigen& blocks) {
  NoiseParams np = cfg.noise;
  np.omega_n = sp.omega_n;
  np.A_nc = model.A_nc;

  apply_rotation(st, kPi / 2, kFirstPulseAxisOffset + cfg.phi);
  apply_sense(st, tau_us, cfg.delta, model.A_c, sp.omega_n);
  if (!cfg.ablate.no_transverse_noise) transverse_noise_channel(st, tau_us, np);
  apply_rotation(st, kPi / 2, kSecondPulseAxisPhase);
  if (!cfg.ablate.no_optical_relaxation) optical_relaxation_channel(st, cfg.T_us, cfg.noise.Gamma_opt);
  apply_flipflop(st, blocks, cfg.T_us);
  if (!cfg.ablate.no_nuclear_dephasing) nuclear_dephasing_channel(st, cfg.T_us, cfg.noise.Gamma);
  reset_channel(st);
}

struct SequenceResult {
  // states[s][m]: species s (after any single_species reduction), manifold m
  std::vector<std::vector<ManifoldState>> states;
  std::vector<Species> species;  // the species actually evolved
  CycleDiagnostics diag;
};

inline std::vector<Species> active_species(const EnsembleModel& model, const AblationFlags& ab) {
  if (ab.single_species && model.species.size() > 1)
    return {model.species.front()};
  return model.species;
}

// Evolve every sampled manifold from the thermal state through n_cycles
// cycles, independently per species. Deterministic: manifolds may be
// evolved concurrently but results land in fixed (species, I) slots.
inline SequenceResult run_sequence(const EnsembleModel& model, const FeedbackConfig& cfg,
                                   int threads = 1) {
  model.validate();
  cfg.validate();
  if (model.manifolds.empty()) throw ConfigError("model: no manifolds sampled");
  const double lock = lockpoint_of(cfg, model);
  for (const auto& spec : model.manifolds) check_lockpoint_margin(spec, lock);

  SequenceResult res;
  res.species = active_species(model, cfg.ablate);
  const std::size_t ns = res.species.size(), nm = model.manifolds.size();
  res.states.resize(ns);
  for (auto& v : res.states) v.resize(nm);

  std::vector<CycleDiagnostics> diags(ns * nm);
  parallel_for(ns * nm, threads, [&](std::size_t job) {
    const std::size_t s = job / nm, m = job % nm;
    const Species& sp = res.species[s];
    GateParams gp;
    gp.delta = cfg.delta;
    gp.phi = cfg.phi;
    gp.T_us = cfg.T_us;
    gp.omega_n = sp.omega_n;
    gp.A_c = model.A_c;
    gp.A_nc = model.A_nc;
    gp.xi = model.xi;
    const BlockEigen blocks = build_actuation_blocks(model.manifolds[m], gp);
    ManifoldState st = thermal_manifold(model.manifolds[m]);
    for (int j = 0; j < cfg.n_cycles; ++j)
      run_cycle(st, cfg.schedule.tau_at(j, cfg.n_cycles), cfg, sp, model, blocks);
    diags[job].min_trace = st.trace();
    diags[job].clamped_f = blocks.clamped;
    require_finite(st.trace(), "run_sequence trace");
    res.states[s][m] = std::move(st);
  });
  for (const auto& d : diags) {
    res.diag.min_trace = std::min(res.diag.min_trace, d.min_trace);
    res.diag.clamped_f += d.clamped_f;
  }
  return res;
}

// ---------------------------------------------------------------------------
// lockpoint dragging
// ---------------------------------------------------------------------------

struct DragStep {
  double delta = 0;         // MHz
  double lock = 0;          // programmed lockpoint, spins
  double mean_iz = 0;       // species- and weight-averaged <I_z>
  std::vector<std::vector<ManifoldState>> states;  // snapshot after the step
};

struct DragResult {
  std::vector<DragStep> steps;
  std::vector<Species> species;
  CycleDiagnostics diag;
};

// Steps the detuning through cfg.drag_schedule, evolving the running states
// for the scheduled number of cycles at each delta. Each step must move the
// lockpoint by less than half the capture range 1/(A_c tau) at the largest
// scheduled sensing time, and every lockpoint must respect every window.
inline DragResult drag_lockpoint(const EnsembleModel& model, const FeedbackConfig& cfg,
                                 int threads = 1) {
  model.validate();
  cfg.validate();
  if (cfg.drag_schedule.empty()) throw ConfigError("drag: empty delta schedule");
  if (model.manifolds.empty()) throw ConfigError("model: no manifolds sampled");

  const double tau_top = (cfg.schedule.kind == TauSchedule::Fixed) ? cfg.schedule.tau_fixed_us
                                                                   : cfg.schedule.tau_max_us;
  const double capture = 1.0 / (model.A_c * tau_top);  // spins
  double prev_lock = -cfg.drag_schedule.front().first / model.A_c;
  for (const auto& [dlt, reps] : cfg.drag_schedule) {
    if (reps < 1) throw ConfigError("drag: repeat count must be >= 1");
    const double lock = -dlt / model.A_c;
    if (std::abs(lock - prev_lock) >= capture / 2)
      throw ConfigError("drag: step to delta=" + fmt9(dlt) + " MHz moves the lockpoint by " +
                        fmt9(std::abs(lock - prev_lock)) + " spins, >= half the capture range " +
                        fmt9(capture / 2));
    for (const auto& spec : model.manifolds) check_lockpoint_margin(spec, lock);
    prev_lock = lock;
  }

  DragResult out;
  out.species = active_species(model, cfg.ablate);
  const std::size_t ns = out.species.size(), nm = model.manifolds.size();

  // running states, initialized thermal
  std::vector<std::vector<ManifoldState>> states(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    states[s].resize(nm);
    for (std::size_t m = 0; m < nm; ++m) states[s][m] = thermal_manifold(model.manifolds[m]);
  }

  for (const auto& [dlt, reps] : cfg.drag_schedule) {
    FeedbackConfig step_cfg = cfg;
    step_cfg.delta = dlt;
    parallel_for(ns * nm, threads, [&](std::size_t job) {
      const std::size_t s = job / nm, m = job % nm;
      const Species& sp = out.species[s];
      GateParams gp;
      gp.delta = dlt;
      gp.phi = cfg.phi;
      gp.T_us = cfg.T_us;
      gp.omega_n = sp.omega_n;
      gp.A_c = model.A_c;
      gp.A_nc = model.A_nc;
      gp.xi = model.xi;
      const BlockEigen blocks = build_actuation_blocks(model.manifolds[m], gp);
      for (int r = 0; r < reps; ++r)
        for (int j = 0; j < step_cfg.n_cycles; ++j)
          run_cycle(states[s][m], step_cfg.schedule.tau_at(j, step_cfg.n_cycles), step_cfg, sp,
                    model, blocks);
    });

    DragStep rec;
    rec.delta = dlt;
    rec.lock = -dlt / model.A_c;
    double num = 0, den = 0;
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t m = 0; m < nm; ++m) {
        const auto& st = states[s][m];
        const double wgt = st.spec.weight;
        Eigen::VectorXd p = st.nuclear_diag();
        for (int j = 0; j < p.size(); ++j) {
          num += wgt * p[j] * (st.spec.iz_lo + j);
          den += wgt * p[j];
        }
        out.diag.min_trace = std::min(out.diag.min_trace, st.trace());
      }
    rec.mean_iz = den > 0 ? num / den : 0.0;
    rec.states = states;
    out.steps.push_back(std::move(rec));
  }
  return out;
}

}  // namespace spincool
