// spincool command-line front end. Subcommands map one-to-one onto the
// library's scenario entry points; every run computes first and writes all
// files at the end, so a failed run leaves no partial output next to a
// manifest that lists it.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spincool/config.hpp"
#include "spincool/io.hpp"
#include "spincool/scenarios.hpp"
#include "spincool/selftest.hpp"
#include "spincool/semiclassical.hpp"

namespace {

using namespace spincool;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  int threads = default_threads();
  std::string ablate_csv;
  bool seedless = false;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key = value sections)");
  cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--threads", args.threads, "manifold-level parallelism cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--ablate", args.ablate_csv,
                  "comma list of no_transverse_noise, no_optical_relaxation, "
                  "no_nuclear_dephasing, single_species, all");
  cmd->add_flag("--seedless", args.seedless,
                "assert the no-RNG contract (always true; reserved)")
      ->disable_flag_override();
}

AblationFlags parse_ablate(const std::string& csv) {
  AblationFlags fl;
  if (csv.empty()) return fl;
  for (const auto& tok : cfgdetail::split(csv, ',')) {
    if (tok.empty()) continue;
    if (tok == "no_transverse_noise") fl.no_transverse_noise = true;
    else if (tok == "no_optical_relaxation") fl.no_optical_relaxation = true;
    else if (tok == "no_nuclear_dephasing") fl.no_nuclear_dephasing = true;
    else if (tok == "single_species") fl.single_species = true;
    else if (tok == "all") {
      fl.no_transverse_noise = fl.no_optical_relaxation = fl.no_nuclear_dephasing = true;
      fl.single_species = true;
    } else {
      throw ConfigError("--ablate: unknown flag '" + tok + "'");
    }
  }
  return fl;
}

class Stopwatch {
 public:
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    laps_.emplace_back(name, std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
  }
  std::vector<std::pair<std::string, double>> finish() {
    auto out = laps_;
    double total = 0;
    for (const auto& [n, ms] : out) total += ms;
    out.emplace_back("total", total);
    return out;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> laps_;
};

struct Run {
  AppConfig cfg;
  CommonArgs args;
  RunManifest manifest;
  Stopwatch timer;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content, written at the end

  Run(const CommonArgs& a, const std::string& subcommand) : args(a) {
    cfg = parse_config_file(a.config_path);
    manifest.subcommand = subcommand;
    manifest.config_digest = cfg.digest();
    manifest.config_lines = cfg.canonical_lines();
    manifest.seedless = true;  // no RNG anywhere in the pipeline
  }

  void stage(const std::string& name) { timer.lap(name); }

  void add(const std::string& name, const std::string& content) {
    files.emplace_back(name, content);
  }

  void flush() {
    timer.lap("compute");
    ensure_dir(args.out_dir);
    for (const auto& [name, content] : files) {
      write_text(args.out_dir + "/" + name, content);
      manifest.outputs.push_back(name);
    }
    manifest.outputs.push_back("manifest.json");
    manifest.timings_ms = timer.finish();
    manifest.save(args.out_dir + "/manifest.json");
  }
};

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

std::string distribution_text(const SpectralDistribution& p) {
  CsvWriter w("freq_MHz,density_per_MHz");
  for (std::size_t i = 0; i < p.freqs.size(); ++i) w.row({fmt9(p.freqs[i]), fmt9(p.dens[i])});
  return w.text();
}

std::string fid_text(const FidTrace& fid) {
  CsvWriter w("time_ns,Sz");
  for (std::size_t i = 0; i < fid.t_us.size(); ++i)
    w.row({fmt9(fid.t_us[i] * 1e3), fmt9(fid.sz[i])});
  return w.text();
}

std::string fit_json_text(const ProbeSummary& ps, const EnsembleModel& model) {
  JsonWriter j;
  j.field("T2_star_ns", ps.fit.T2_us * 1e3);
  j.field("alpha", ps.fit.alpha);
  j.field("amplitude", ps.fit.amplitude);
  j.field("fit_residual", ps.fit.residual);
  j.field("fit_converged", ps.fit.converged);
  j.field("S_p", ps.S_p);
  j.field("fwhm_MHz", ps.width.width);
  j.field("fwhm_multimodal", ps.width.multimodal);
  j.field("n_modes", static_cast<long long>(ps.modes.size()));
  j.field("estimated_N", estimate_N(ps.fit.T2_us, model.A_c));
  return j.text();
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
  Run run(args, "simulate");
  const EnsembleModel model = run.cfg.model();
  FeedbackConfig fb = run.cfg.feedback();
  fb.ablate = parse_ablate(args.ablate_csv);
  const ProbeParams pp = run.cfg.probe();
  run.stage("setup");

  SequenceResult seq = run_sequence(model, fb, args.threads);
  run.stage("sequence");
  ProbeSummary ps = run_probe(seq.states, model, lockpoint_of(fb, model), pp);
  run.stage("probe");

  run.add("fid.csv", fid_text(ps.fid));
  run.add("p.csv", distribution_text(ps.p));
  run.add("p_lattice.csv", distribution_text(ps.p_lattice));
  run.add("fit.json", fit_json_text(ps, model));
  run.flush();
  std::cout << "T2* = " << fmt9(ps.fit.T2_us * 1e3) << " ns, alpha = " << fmt9(ps.fit.alpha)
            << ", S_p = " << fmt9(ps.S_p) << ", FWHM = " << fmt9(ps.width.width) << " MHz\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  Run run(args, "sweep");
  if (run.cfg.sweep_param.empty())
    throw ConfigError("sweep: set exactly one of tau_max_values_ns / T_values_ns / "
                      "phi_values_rad / tau_fixed_values_ns in [sweep]");
  SweepSpec spec;
  if (run.cfg.sweep_param == "tau_max") spec.param = SweepSpec::TauMax;
  else if (run.cfg.sweep_param == "T") spec.param = SweepSpec::DriveT;
  else if (run.cfg.sweep_param == "phi") spec.param = SweepSpec::Phi;
  else spec.param = SweepSpec::TauFixed;
  spec.values = run.cfg.sweep_values;
  if (spec.param != SweepSpec::Phi)
    for (double& v : spec.values) v *= 1e-3;  // ns -> us
  spec.model = run.cfg.model();
  spec.base = run.cfg.feedback();
  spec.base.ablate = parse_ablate(args.ablate_csv);
  spec.probe = run.cfg.probe();
  spec.threads = args.threads;
  run.stage("setup");

  std::vector<SweepRow> rows = sweep(spec);
  run.stage("sweep");

  CsvWriter w(std::string(sweep_param_name(spec.param)) + ",T2_ns,alpha,S_p,fwhm_MHz,ok,error");
  for (const auto& r : rows)
    w.row({fmt9(r.value), fmt9(r.T2_ns), fmt9(r.alpha), fmt9(r.S_p), fmt9(r.fwhm_MHz),
           r.ok ? "1" : "0", csv_safe(r.error)});
  run.add("sweep.csv", w.text());
  run.flush();
  return 0;
}

int cmd_scan_phi(const CommonArgs& args) {
  Run run(args, "scan-phi");
  const EnsembleModel model = run.cfg.model();
  FeedbackConfig base = run.cfg.feedback();
  // the phase scan is defined on a constant sensing time (the mode splitting
  // is 1/tau), so run it at tau_fixed_ns regardless of the ramp settings
  base.schedule.kind = TauSchedule::Fixed;
  base.ablate = parse_ablate(args.ablate_csv);
  const ProbeParams pp = run.cfg.probe();
  run.stage("setup");

  std::vector<BimodalRow> rows =
      bimodal_scan(run.cfg.scan_phi_values_rad, model, base, pp, args.threads);
  run.stage("scan");

  CsvWriter w("phi_rad,n_modes,splitting_MHz,weight_ratio,S_p");
  CsvWriter map("phi_rad,freq_MHz,density_per_MHz");
  for (const auto& r : rows) {
    w.row({fmt9(r.phi), std::to_string(r.n_modes), fmt9(r.splitting_MHz), fmt9(r.weight_ratio),
           fmt9(r.S_p)});
    for (std::size_t i = 0; i < r.p_lattice.freqs.size(); ++i)
      map.row({fmt9(r.phi), fmt9(r.p_lattice.freqs[i]), fmt9(r.p_lattice.dens[i])});
  }
  run.add("scan_phi.csv", w.text());
  run.add("scan_phi_map.csv", map.text());
  run.flush();
  return 0;
}

int cmd_scan_tau(const CommonArgs& args) {
  Run run(args, "scan-tau");
  const EnsembleModel model = run.cfg.model();
  FeedbackConfig base = run.cfg.feedback();
  base.ablate = parse_ablate(args.ablate_csv);
  const ProbeParams pp = run.cfg.probe();
  std::vector<double> taus_us = run.cfg.scan_tau_values_ns;
  for (double& v : taus_us) v *= 1e-3;
  run.stage("setup");

  std::vector<MultistabilityRow> rows =
      multistability_scan(taus_us, model, base, pp, run.cfg.scan_tau_n_cycles, args.threads);
  run.stage("scan");

  CsvWriter w("tau_ns,n_modes,mean_spacing_MHz,mean_width_MHz,S_p");
  CsvWriter map("tau_ns,freq_MHz,density_per_MHz");
  for (const auto& r : rows) {
    w.row({fmt9(r.tau_ns), std::to_string(r.n_modes), fmt9(r.mean_spacing_MHz),
           fmt9(r.mean_width_MHz), fmt9(r.S_p)});
    for (std::size_t i = 0; i < r.p_lattice.freqs.size(); ++i)
      map.row({fmt9(r.tau_ns), fmt9(r.p_lattice.freqs[i]), fmt9(r.p_lattice.dens[i])});
  }
  run.add("scan_tau.csv", w.text());
  run.add("scan_tau_map.csv", map.text());
  run.flush();
  return 0;
}

int cmd_drag(const CommonArgs& args) {
  Run run(args, "drag");
  const EnsembleModel model = run.cfg.drag_model();
  FeedbackConfig fb = run.cfg.feedback();
  fb.ablate = parse_ablate(args.ablate_csv);
  run.stage("setup");

  DragResult r = drag_lockpoint(model, fb, args.threads);
  run.stage("drag");

  CsvWriter w("step,delta_MHz,lockpoint,mean_Iz");
  CsvWriter map("step,freq_MHz,density_per_MHz");
  for (std::size_t s = 0; s < r.steps.size(); ++s) {
    const DragStep& st = r.steps[s];
    w.row({std::to_string(s), fmt9(st.delta), fmt9(st.lock), fmt9(st.mean_iz)});
    SpectralDistribution p = extract_p_lattice(st.states, model, 0.0);  // absolute I_z axis
    for (std::size_t i = 0; i < p.freqs.size(); ++i)
      map.row({std::to_string(s), fmt9(p.freqs[i]), fmt9(p.dens[i])});
  }
  run.add("drag.csv", w.text());
  run.add("drag_map.csv", map.text());
  run.flush();
  return 0;
}

int cmd_semiclassical(const CommonArgs& args) {
  Run run(args, "semiclassical");
  const SemiclassicalParams p = run.cfg.semiclassical();
  const double iz_min = run.cfg.sc_iz_min, iz_max = run.cfg.sc_iz_max;
  run.stage("setup");

  CsvWriter rates("Iz,W_plus,W_minus,rate_per_us");
  const int n_pts = 512;
  for (int i = 0; i <= n_pts; ++i) {
    const double iz = iz_min + (iz_max - iz_min) * i / n_pts;
    const auto [wp, wm] = directional_rates(iz - p.Iz_lock, p);
    rates.row({fmt9(iz), fmt9(wp), fmt9(wm), fmt9(rate(iz, p))});
  }

  CsvWriter fixed("Iz,stable");
  for (const auto& fp : find_stable_points(p, iz_min, iz_max))
    fixed.row({fmt9(fp.iz), fp.stable ? "1" : "0"});

  CsvWriter traj("Iz0,t_us,Iz");
  for (double iz0 : run.cfg.sc_traj_iz0)
    for (const auto& s : integrate_trajectory(iz0, p, run.cfg.sc_t_end_us, run.cfg.sc_dt_us))
      traj.row({fmt9(iz0), fmt9(s.t_us), fmt9(s.iz)});
  run.stage("semiclassical");

  run.add("sc_rate.csv", rates.text());
  run.add("sc_fixed_points.csv", fixed.text());
  run.add("sc_trajectory.csv", traj.text());
  run.flush();
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& fid_path) {
  Run run(args, "analyze");
  const ProbeParams pp = run.cfg.probe();
  run.stage("setup");

  FidTrace fid = read_fid_csv(fid_path);
  fid.omega_serr = pp.omega_serr;
  FitResult fit = fit_stretched_exponential(fid);

  // A real-valued trace aliases f onto -2 omega_serr - f; recover only on
  // the band |f| < omega_serr, whose image lies entirely outside it.
  const double band = std::max(pp.omega_serr * 0.95, 1.0);
  const double lo = std::max(pp.f_min, -band), hi = std::min(pp.f_max, band);
  SpectralDistribution rec = fft_to_distribution(fid, lo, hi);
  run.stage("analyze");

  JsonWriter j;
  j.field("source", fid_path);
  j.field("n_samples", static_cast<long long>(fid.t_us.size()));
  j.field("T2_star_ns", fit.T2_us * 1e3);
  j.field("alpha", fit.alpha);
  j.field("amplitude", fit.amplitude);
  j.field("fit_residual", fit.residual);
  j.field("fit_converged", fit.converged);
  j.field("estimated_N", estimate_N(fit.T2_us, run.cfg.A_c_MHz));
  run.add("fit.json", j.text());
  run.add("recovered_p.csv", distribution_text(rec));
  run.flush();
  std::cout << "T2* = " << fmt9(fit.T2_us * 1e3) << " ns, alpha = " << fmt9(fit.alpha) << "\n";
  return 0;
}

int cmd_selftest(const CommonArgs& args) {
  Run run(args, "selftest");
  run.stage("setup");
  SelftestReport rep = run_selftest();
  run.stage("selftest");
  std::cout << rep.log;
  CsvWriter w("check,ok,detail");
  for (const auto& c : rep.checks)
    w.row({csv_safe(c.name), c.ok ? "1" : "0", csv_safe(c.detail)});
  run.add("selftest.csv", w.text());
  run.flush();
  if (!rep.all_ok()) throw NumericError("selftest: " + std::to_string(rep.n_failed()) +
                                        " check(s) failed");
  std::cout << "all " << rep.checks.size() << " checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-ensemble feedback cooling simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(spincool::kToolVersion));

  CommonArgs args;
  std::string fid_path;

  CLI::App* simulate = app.add_subcommand("simulate", "run the feedback sequence and probe it");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one parameter from [sweep]");
  CLI::App* scan_phi = app.add_subcommand("scan-phi", "sense-phase scan (bimodal engineering)");
  CLI::App* scan_tau = app.add_subcommand("scan-tau", "fixed-tau multistability scan");
  CLI::App* drag = app.add_subcommand("drag", "step the lockpoint through a delta schedule");
  CLI::App* semicl = app.add_subcommand("semiclassical", "rate curves, fixed points, trajectories");
  CLI::App* analyze = app.add_subcommand("analyze", "fit an externally supplied FID CSV");
  CLI::App* selftest = app.add_subcommand("selftest", "run the built-in invariant suite");
  for (CLI::App* c : {simulate, sweep_cmd, scan_phi, scan_tau, drag, semicl, analyze, selftest})
    add_common_flags(c, args);
  analyze->add_option("--fid", fid_path, "FID CSV (columns time_ns,Sz)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; any parse problem is a config error
  }

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (sweep_cmd->parsed()) return cmd_sweep(args);
    if (scan_phi->parsed()) return cmd_scan_phi(args);
    if (scan_tau->parsed()) return cmd_scan_tau(args);
    if (drag->parsed()) return cmd_drag(args);
    if (semicl->parsed()) return cmd_semiclassical(args);
    if (analyze->parsed()) return cmd_analyze(args, fid_path);
    if (selftest->parsed()) return cmd_selftest(args);
  } catch (const spincool::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const spincool::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
