#pragma once
// Pre-packaged experiment reproductions: parameter sweeps with ablations,
// the phase-engineered bimodal scan, and fixed-tau latticed multistability.
// Each grid point is an independent pure function of its inputs; rows are
// emitted in grid order regardless of scheduling.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spincool/engine.hpp"
#include "spincool/probe.hpp"
#include "spincool/util.hpp"

namespace spincool {

struct SweepSpec {
  enum Param { TauMax, DriveT, Phi, TauFixed };
  Param param = TauMax;
  std::vector<double> values;  // us for times, rad for phi
  EnsembleModel model;
  FeedbackConfig base;
  ProbeParams probe;
  int threads = 1;

  void validate() const {
    if (values.empty()) throw ConfigError("sweep: empty value grid");
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] > values[i - 1])) throw ConfigError("sweep: grid must be strictly increasing");
  }
};

inline const char* sweep_param_name(SweepSpec::Param p) {
  switch (p) {
    case SweepSpec::TauMax: return "tau_max_ns";
    case SweepSpec::DriveT: return "T_ns";
    case SweepSpec::Phi: return "phi_rad";
    case SweepSpec::TauFixed: return "tau_fixed_ns";
  }
  return "?";
}

struct SweepRow {
  double value = 0;      // in the parameter's natural config unit (ns or rad)
  double T2_ns = 0;
  double alpha = 0;
  double S_p = 0;
  double fwhm_MHz = 0;
  bool ok = false;
  std::string error;
};

inline FeedbackConfig apply_sweep_value(const SweepSpec& spec, double v) {
  FeedbackConfig cfg = spec.base;
  switch (spec.param) {
    case SweepSpec::TauMax:
      cfg.schedule.kind = TauSchedule::Linear;
      cfg.schedule.tau_max_us = v;
      break;
    case SweepSpec::DriveT:
      cfg.T_us = v;
      break;
    case SweepSpec::Phi:
      cfg.phi = v;
      break;
    case SweepSpec::TauFixed:
      cfg.schedule.kind = TauSchedule::Fixed;
      cfg.schedule.tau_fixed_us = v;
      break;
  }
  return cfg;
}

// Per grid value: run_sequence -> distribution -> FID -> fit -> entropy.
// Failures are recorded in-row; the sweep continues.
inline std::vector<SweepRow> sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows(spec.values.size());
  parallel_for(spec.values.size(), spec.threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    const double v = spec.values[i];
    row.value = (spec.param == SweepSpec::Phi) ? v : v * 1e3;  // us -> ns
    try {
      FeedbackConfig cfg = apply_sweep_value(spec, v);
      SequenceResult seq = run_sequence(spec.model, cfg, 1);
      ProbeSummary ps = run_probe(seq.states, spec.model, lockpoint_of(cfg, spec.model),
                                  spec.probe);
      row.T2_ns = ps.fit.T2_us * 1e3;
      row.alpha = ps.fit.alpha;
      row.S_p = ps.S_p;
      row.fwhm_MHz = ps.width.width;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// bimodal phase scan
// ---------------------------------------------------------------------------

struct BimodalRow {
  double phi = 0;
  int n_modes = 0;
  double splitting_MHz = 0;   // separation of the two tallest modes (0 if < 2)
  double weight_ratio = 0;    // tallest / second tallest (inf-like if single)
  double S_p = 0;
  SpectralDistribution p_lattice;
};

// Runs a fixed-tau sequence with the first-pulse phase set to phi.  At
// phi = pi the lockpoint turns anti-stable and the distribution splits
// symmetrically; the mode separation equals the inverse of the sensing
// time, which is only sharply defined when tau is held constant, so a
// ramped base schedule is rejected.
inline std::vector<BimodalRow> bimodal_scan(const std::vector<double>& phi_values,
                                            const EnsembleModel& model,
                                            const FeedbackConfig& base, const ProbeParams& probe,
                                            int threads = 1) {
  if (phi_values.empty()) throw ConfigError("scan_phi: empty phi grid");
  if (base.schedule.kind != TauSchedule::Fixed)
    throw ConfigError("scan_phi: requires a fixed-tau schedule (schedule = fixed)");
  std::vector<BimodalRow> rows(phi_values.size());
  parallel_for(phi_values.size(), threads, [&](std::size_t i) {
    FeedbackConfig cfg = base;
    cfg.phi = phi_values[i];
    SequenceResult seq = run_sequence(model, cfg, 1);
    const double lock = lockpoint_of(cfg, model);
    BimodalRow& row = rows[i];
    row.phi = phi_values[i];
    row.p_lattice = extract_p_lattice(seq.states, model, lock);
    SpectralDistribution p = extract_p(seq.states, model, lock, probe.f_min, probe.f_max,
                                       probe.n_grid);
    row.S_p = lddp_entropy(p, probe.lddp_m, probe.lddp_n);
    std::vector<Mode> modes = find_modes(row.p_lattice);
    row.n_modes = static_cast<int>(modes.size());
    if (modes.size() >= 2) {
      std::sort(modes.begin(), modes.end(),
                [](const Mode& a, const Mode& b) { return a.height > b.height; });
      row.splitting_MHz = std::abs(modes[0].freq - modes[1].freq);
      row.weight_ratio = modes[0].height / modes[1].height;
    } else {
      row.splitting_MHz = 0;
      row.weight_ratio = std::numeric_limits<double>::infinity();
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// fixed-tau multistability scan
// ---------------------------------------------------------------------------

struct MultistabilityRow {
  double tau_ns = 0;
  int n_modes = 0;
  double mean_spacing_MHz = 0;  // mean separation of adjacent detected modes
  double mean_width_MHz = 0;    // mean per-mode FWHM
  double S_p = 0;
  SpectralDistribution p_lattice;
};

namespace detail {

// per-mode full width at half the mode's own height, walking to the first
// crossing on each side
inline double mode_width(const SpectralDistribution& p, int idx) {
  const double half = p.dens[static_cast<std::size_t>(idx)] / 2;
  const std::size_t n = p.dens.size();
  double left = p.freqs.front(), right = p.freqs.back();
  for (std::size_t j = static_cast<std::size_t>(idx); j-- > 0;) {
    if (p.dens[j] < half) {
      const double t = (half - p.dens[j]) / (p.dens[j + 1] - p.dens[j]);
      left = p.freqs[j] + t * (p.freqs[j + 1] - p.freqs[j]);
      break;
    }
  }
  for (std::size_t j = static_cast<std::size_t>(idx) + 1; j < n; ++j) {
    if (p.dens[j] < half) {
      const double t = (p.dens[j - 1] - half) / (p.dens[j - 1] - p.dens[j]);
      right = p.freqs[j - 1] + t * (p.freqs[j] - p.freqs[j - 1]);
      break;
    }
  }
  return right - left;
}

}  // namespace detail

// Fixed sensing time from a thermal start: the steady state freezes onto the
// lattice of stable points split by 1/(A_c tau) macrostates. n_cycles should
// be well past convergence (hundreds of cycles at desk scale).
inline std::vector<MultistabilityRow> multistability_scan(const std::vector<double>& tau_values_us,
                                                          const EnsembleModel& model,
                                                          const FeedbackConfig& base,
                                                          const ProbeParams& probe, int n_cycles,
                                                          int threads = 1) {
  if (tau_values_us.empty()) throw ConfigError("scan_tau: empty tau grid");
  std::vector<MultistabilityRow> rows(tau_values_us.size());
  parallel_for(tau_values_us.size(), threads, [&](std::size_t i) {
    FeedbackConfig cfg = base;
    cfg.schedule.kind = TauSchedule::Fixed;
    cfg.schedule.tau_fixed_us = tau_values_us[i];
    cfg.n_cycles = n_cycles;
    SequenceResult seq = run_sequence(model, cfg, 1);
    const double lock = lockpoint_of(cfg, model);
    MultistabilityRow& row = rows[i];
    row.tau_ns = tau_values_us[i] * 1e3;
    row.p_lattice = extract_p_lattice(seq.states, model, lock);
    SpectralDistribution p = extract_p(seq.states, model, lock, probe.f_min, probe.f_max,
                                       probe.n_grid);
    row.S_p = lddp_entropy(p, probe.lddp_m, probe.lddp_n);
    std::vector<Mode> modes = find_modes(row.p_lattice);
    row.n_modes = static_cast<int>(modes.size());
    if (modes.size() >= 2) {
      double s = 0;
      for (std::size_t k = 1; k < modes.size(); ++k) s += modes[k].freq - modes[k - 1].freq;
      row.mean_spacing_MHz = s / static_cast<double>(modes.size() - 1);
    }
    if (!modes.empty()) {
      double w = 0;
      for (const auto& m : modes) w += detail::mode_width(row.p_lattice, m.index);
      row.mean_width_MHz = w / static_cast<double>(modes.size());
    }
  });
  return rows;
}

}  // namespace spincool
