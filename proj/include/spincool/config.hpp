#pragma once
// Declarative configuration: INI-style sections of key = value lines, units
// encoded in the key names (tau_min_ns, A_c_MHz, ...). An empty file yields
// the full nominal parameter set. Unknown keys, missing unit suffixes and
// constraint violations are reported with their section.key path.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spincool/engine.hpp"
#include "spincool/probe.hpp"
#include "spincool/semiclassical.hpp"
#include "spincool/util.hpp"

namespace spincool {

struct AppConfig {
  // [model]
  long long N = 49000;
  double A_c_MHz = 0.63;
  double A_nc_MHz = 0.156;
  double xi = 0.42;
  std::vector<std::pair<std::string, double>> species{{"As", 25.3}, {"In", 32.7}};

  // [sampling]
  int count = 46;
  int spacing = 14;
  int first_I = 0;
  double window_fraction = 1.0 / 14.0;

  // [noise]
  double Gamma_MHz = 6.0;
  double Gamma_opt_MHz = 1.7;

  // [cycle]
  int n_cycles = 44;
  std::string schedule = "linear";  // linear | fixed
  double tau_min_ns = 30.0;
  double tau_max_ns = 98.0;
  double tau_fixed_ns = 150.0;
  double T_ns = 86.0;
  double delta_MHz = 0.0;
  double phi_rad = 0.0;

  // [probe]
  double omega_serr_MHz = 60.0;
  double dt_ns = 0.5;
  double t_max_ns = 400.0;
  double f_min_MHz = -250.0;
  double f_max_MHz = 250.0;
  int grid_points = 1024;
  double lddp_m_per_GHz = 2.0;
  int lddp_points = 400;

  // [sweep] -- exactly one *_values key when the sweep subcommand is used
  std::string sweep_param;            // tau_max | T | phi | tau_fixed ("" = unset)
  std::vector<double> sweep_values;   // ns or rad, as entered

  // [scan_phi]
  std::vector<double> scan_phi_values_rad{0.0,        kPi / 8,     kPi / 4, 3 * kPi / 8,
                                          kPi / 2,    5 * kPi / 8, 3 * kPi / 4,
                                          7 * kPi / 8, kPi};

  // [scan_tau]
  std::vector<double> scan_tau_values_ns{30, 50, 70, 90, 110, 130, 150};
  int scan_tau_n_cycles = 800;

  // [drag] -- (delta, repeats of the base n_cycles sequence, default 3 each);
  // default schedule walks the lockpoint from 0 to 10 sites in steps of 2
  std::vector<std::pair<double, int>> drag_schedule_MHz{
      {0.0, 3}, {-1.26, 3}, {-2.52, 3}, {-3.78, 3}, {-5.04, 3}, {-6.30, 3}};
  int drag_first_I = 322;  // manifold subset with windows wide enough to drag in
  int drag_count = 12;

  // [semiclassical]
  double sc_A0_MHz = -1;    // -1: follow model A_c
  double sc_A_ff_MHz = -1;  // -1: follow model A_nc / 4
  double sc_tau_ns = 150.0;
  double sc_Gamma_d_Hz = 0.0;
  double sc_Iz_lock = 0.0;
  double sc_iz_min = -50.0;
  double sc_iz_max = 50.0;
  double sc_t_end_us = 400.0;
  double sc_dt_us = 0.1;
  std::vector<double> sc_traj_iz0{3.0, 8.0};

  // ------------------------------------------------------------------
  // materialized views
  // ------------------------------------------------------------------

  EnsembleModel model() const {
    EnsembleModel m;
    m.N = N;
    m.A_c = A_c_MHz;
    m.A_nc = A_nc_MHz;
    m.xi = xi;
    m.species.clear();
    for (const auto& [label, w] : species) m.species.push_back({label, w});
    m.manifolds = sample_manifolds(N, count, spacing, window_fraction, first_I);
    m.validate();
    return m;
  }

  EnsembleModel drag_model() const {
    AppConfig c = *this;
    c.first_I = drag_first_I;
    c.count = drag_count;
    return c.model();
  }

  FeedbackConfig feedback() const {
    FeedbackConfig f;
    f.n_cycles = n_cycles;
    f.schedule.kind = (schedule == "fixed") ? TauSchedule::Fixed : TauSchedule::Linear;
    f.schedule.tau_min_us = tau_min_ns * 1e-3;
    f.schedule.tau_max_us = tau_max_ns * 1e-3;
    f.schedule.tau_fixed_us = tau_fixed_ns * 1e-3;
    f.T_us = T_ns * 1e-3;
    f.delta = delta_MHz;
    f.phi = phi_rad;
    f.noise.Gamma = Gamma_MHz;
    f.noise.Gamma_opt = Gamma_opt_MHz;
    f.noise.A_nc = A_nc_MHz;
    f.drag_schedule.clear();
    for (const auto& [d, r] : drag_schedule_MHz) f.drag_schedule.emplace_back(d, r);
    f.validate();
    return f;
  }

  ProbeParams probe() const {
    ProbeParams p;
    p.omega_serr = omega_serr_MHz;
    p.dt_us = dt_ns * 1e-3;
    p.t_max_us = t_max_ns * 1e-3;
    p.f_min = f_min_MHz;
    p.f_max = f_max_MHz;
    p.n_grid = grid_points;
    p.lddp_m = lddp_m_per_GHz * 1e-3;
    p.lddp_n = lddp_points;
    p.validate();
    return p;
  }

  SemiclassicalParams semiclassical() const {
    SemiclassicalParams s;
    s.A0 = sc_A0_MHz > 0 ? sc_A0_MHz : A_c_MHz;
    s.A_ff = sc_A_ff_MHz > 0 ? sc_A_ff_MHz : A_nc_MHz / 4;
    s.tau_us = sc_tau_ns * 1e-3;
    s.Gamma_d = sc_Gamma_d_Hz * 1e-6;  // Hz -> per us
    s.Iz_lock = sc_Iz_lock;
    s.validate();
    return s;
  }

  // every effective value as "section.key=value", sorted; basis of the digest
  std::vector<std::string> canonical_lines() const;
  std::string digest() const {
    Fnv1a64 h;
    for (const auto& l : canonical_lines()) {
      h.update(l);
      h.update("\n");
    }
    return h.hex();
  }
};

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& path, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(path + ": not a number: '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& path, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(path + ": not an integer: '" + v + "'");
  return x;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::vector<double> parse_list(const std::string& path, const std::string& v) {
  std::vector<double> out;
  for (const auto& tok : split(v, ','))
    if (!tok.empty()) out.push_back(parse_double(path, tok));
  if (out.empty()) throw ConfigError(path + ": empty list");
  return out;
}

}  // namespace cfgdetail

// Parses and validates; unknown keys are hard errors so that a typo can
// never silently fall back to a default.
inline AppConfig parse_config_text(const std::string& text) {
  using namespace cfgdetail;
  AppConfig cfg;

  static const std::map<std::string, std::set<std::string>> schema = {
      {"model", {"N", "A_c_MHz", "A_nc_MHz", "xi", "species_omega_n_MHz"}},
      {"sampling", {"count", "spacing", "first_I", "window_fraction"}},
      {"noise", {"Gamma_MHz", "Gamma_opt_MHz"}},
      {"cycle",
       {"n_cycles", "schedule", "tau_min_ns", "tau_max_ns", "tau_fixed_ns", "T_ns", "delta_MHz",
        "phi_rad"}},
      {"probe",
       {"omega_serr_MHz", "dt_ns", "t_max_ns", "f_min_MHz", "f_max_MHz", "grid_points",
        "lddp_m_per_GHz", "lddp_points"}},
      {"sweep", {"tau_max_values_ns", "T_values_ns", "phi_values_rad", "tau_fixed_values_ns"}},
      {"scan_phi", {"values_rad"}},
      {"scan_tau", {"values_ns", "n_cycles"}},
      {"drag", {"delta_schedule_MHz", "first_I", "count"}},
      {"semiclassical",
       {"A0_MHz", "A_ff_MHz", "tau_ns", "Gamma_d_Hz", "Iz_lock", "iz_min", "iz_max", "t_end_us",
        "dt_us", "traj_iz0"}},
  };

  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.count(section))
        throw ConfigError(section + ": unknown section");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(key + ": key outside any [section]");
    const auto& keys = schema.at(section);
    const std::string path = section + "." + key;
    if (!keys.count(key)) {
      for (const auto& k : keys)
        if (k.rfind(key + "_", 0) == 0)
          throw ConfigError(path + ": missing units suffix; expected " + section + "." + k);
      throw ConfigError(path + ": unknown key");
    }

    if (section == "model") {
      if (key == "N") cfg.N = parse_int(path, val);
      else if (key == "A_c_MHz") cfg.A_c_MHz = parse_double(path, val);
      else if (key == "A_nc_MHz") cfg.A_nc_MHz = parse_double(path, val);
      else if (key == "xi") cfg.xi = parse_double(path, val);
      else if (key == "species_omega_n_MHz") {
        cfg.species.clear();
        for (const auto& tok : split(val, ',')) {
          if (tok.empty()) continue;
          auto pr = split(tok, ':');
          if (pr.size() != 2 || pr[0].empty())
            throw ConfigError(path + ": expected label:omega pairs, got '" + tok + "'");
          cfg.species.emplace_back(pr[0], parse_double(path, pr[1]));
        }
        if (cfg.species.empty()) throw ConfigError(path + ": empty species list");
      }
    } else if (section == "sampling") {
      if (key == "count") cfg.count = static_cast<int>(parse_int(path, val));
      else if (key == "spacing") cfg.spacing = static_cast<int>(parse_int(path, val));
      else if (key == "first_I") cfg.first_I = static_cast<int>(parse_int(path, val));
      else if (key == "window_fraction") cfg.window_fraction = parse_double(path, val);
    } else if (section == "noise") {
      if (key == "Gamma_MHz") cfg.Gamma_MHz = parse_double(path, val);
      else if (key == "Gamma_opt_MHz") cfg.Gamma_opt_MHz = parse_double(path, val);
    } else if (section == "cycle") {
      if (key == "n_cycles") cfg.n_cycles = static_cast<int>(parse_int(path, val));
      else if (key == "schedule") {
        if (val != "linear" && val != "fixed")
          throw ConfigError(path + ": must be 'linear' or 'fixed'");
        cfg.schedule = val;
      } else if (key == "tau_min_ns") cfg.tau_min_ns = parse_double(path, val);
      else if (key == "tau_max_ns") cfg.tau_max_ns = parse_double(path, val);
      else if (key == "tau_fixed_ns") cfg.tau_fixed_ns = parse_double(path, val);
      else if (key == "T_ns") cfg.T_ns = parse_double(path, val);
      else if (key == "delta_MHz") cfg.delta_MHz = parse_double(path, val);
      else if (key == "phi_rad") cfg.phi_rad = parse_double(path, val);
    } else if (section == "probe") {
      if (key == "omega_serr_MHz") cfg.omega_serr_MHz = parse_double(path, val);
      else if (key == "dt_ns") cfg.dt_ns = parse_double(path, val);
      else if (key == "t_max_ns") cfg.t_max_ns = parse_double(path, val);
      else if (key == "f_min_MHz") cfg.f_min_MHz = parse_double(path, val);
      else if (key == "f_max_MHz") cfg.f_max_MHz = parse_double(path, val);
      else if (key == "grid_points") cfg.grid_points = static_cast<int>(parse_int(path, val));
      else if (key == "lddp_m_per_GHz") cfg.lddp_m_per_GHz = parse_double(path, val);
      else if (key == "lddp_points") cfg.lddp_points = static_cast<int>(parse_int(path, val));
    } else if (section == "sweep") {
      if (!cfg.sweep_param.empty())
        throw ConfigError(path + ": only one sweep parameter may be given (already have " +
                          cfg.sweep_param + ")");
      cfg.sweep_values = parse_list(path, val);
      if (key == "tau_max_values_ns") cfg.sweep_param = "tau_max";
      else if (key == "T_values_ns") cfg.sweep_param = "T";
      else if (key == "phi_values_rad") cfg.sweep_param = "phi";
      else if (key == "tau_fixed_values_ns") cfg.sweep_param = "tau_fixed";
    } else if (section == "scan_phi") {
      if (key == "values_rad") cfg.scan_phi_values_rad = parse_list(path, val);
    } else if (section == "scan_tau") {
      if (key == "values_ns") cfg.scan_tau_values_ns = parse_list(path, val);
      else if (key == "n_cycles") cfg.scan_tau_n_cycles = static_cast<int>(parse_int(path, val));
    } else if (section == "drag") {
      if (key == "delta_schedule_MHz") {
        cfg.drag_schedule_MHz.clear();
        for (const auto& tok : split(val, ',')) {
          if (tok.empty()) continue;
          auto pr = split(tok, ':');
          if (pr.size() != 2)
            throw ConfigError(path + ": expected delta:repeats pairs, got '" + tok + "'");
          cfg.drag_schedule_MHz.emplace_back(parse_double(path, pr[0]),
                                             static_cast<int>(parse_int(path, pr[1])));
        }
        if (cfg.drag_schedule_MHz.empty()) throw ConfigError(path + ": empty schedule");
      } else if (key == "first_I") cfg.drag_first_I = static_cast<int>(parse_int(path, val));
      else if (key == "count") cfg.drag_count = static_cast<int>(parse_int(path, val));
    } else if (section == "semiclassical") {
      if (key == "A0_MHz") cfg.sc_A0_MHz = parse_double(path, val);
      else if (key == "A_ff_MHz") cfg.sc_A_ff_MHz = parse_double(path, val);
      else if (key == "tau_ns") cfg.sc_tau_ns = parse_double(path, val);
      else if (key == "Gamma_d_Hz") cfg.sc_Gamma_d_Hz = parse_double(path, val);
      else if (key == "Iz_lock") cfg.sc_Iz_lock = parse_double(path, val);
      else if (key == "iz_min") cfg.sc_iz_min = parse_double(path, val);
      else if (key == "iz_max") cfg.sc_iz_max = parse_double(path, val);
      else if (key == "t_end_us") cfg.sc_t_end_us = parse_double(path, val);
      else if (key == "dt_us") cfg.sc_dt_us = parse_double(path, val);
      else if (key == "traj_iz0") cfg.sc_traj_iz0 = parse_list(path, val);
    }
  }

  // cross-field checks that do not need the materialized objects
  if (cfg.tau_min_ns > cfg.tau_max_ns)
    throw ConfigError("cycle.tau_min_ns: must not exceed cycle.tau_max_ns");
  if (cfg.N <= 0 || cfg.N % 2 != 0) throw ConfigError("model.N: must be a positive even integer");
  if (cfg.n_cycles < 1) throw ConfigError("cycle.n_cycles: must be >= 1");
  if (cfg.scan_tau_n_cycles < 1) throw ConfigError("scan_tau.n_cycles: must be >= 1");
  if (cfg.sc_iz_max <= cfg.sc_iz_min)
    throw ConfigError("semiclassical.iz_max: must exceed iz_min");
  return cfg;
}

inline AppConfig parse_config_file(const std::string& path) {
  if (path.empty()) return parse_config_text("");
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline std::vector<std::string> AppConfig::canonical_lines() const {
  std::vector<std::string> ls;
  auto add = [&](const std::string& k, const std::string& v) { ls.push_back(k + "=" + v); };
  add("model.N", std::to_string(N));
  add("model.A_c_MHz", fmt9(A_c_MHz));
  add("model.A_nc_MHz", fmt9(A_nc_MHz));
  add("model.xi", fmt9(xi));
  {
    std::string sp;
    for (const auto& [l, w] : species) sp += (sp.empty() ? "" : ",") + l + ":" + fmt9(w);
    add("model.species_omega_n_MHz", sp);
  }
  add("sampling.count", std::to_string(count));
  add("sampling.spacing", std::to_string(spacing));
  add("sampling.first_I", std::to_string(first_I));
  add("sampling.window_fraction", fmt9(window_fraction));
  add("noise.Gamma_MHz", fmt9(Gamma_MHz));
  add("noise.Gamma_opt_MHz", fmt9(Gamma_opt_MHz));
  add("cycle.n_cycles", std::to_string(n_cycles));
  add("cycle.schedule", schedule);
  add("cycle.tau_min_ns", fmt9(tau_min_ns));
  add("cycle.tau_max_ns", fmt9(tau_max_ns));
  add("cycle.tau_fixed_ns", fmt9(tau_fixed_ns));
  add("cycle.T_ns", fmt9(T_ns));
  add("cycle.delta_MHz", fmt9(delta_MHz));
  add("cycle.phi_rad", fmt9(phi_rad));
  add("probe.omega_serr_MHz", fmt9(omega_serr_MHz));
  add("probe.dt_ns", fmt9(dt_ns));
  add("probe.t_max_ns", fmt9(t_max_ns));
  add("probe.f_min_MHz", fmt9(f_min_MHz));
  add("probe.f_max_MHz", fmt9(f_max_MHz));
  add("probe.grid_points", std::to_string(grid_points));
  add("probe.lddp_m_per_GHz", fmt9(lddp_m_per_GHz));
  add("probe.lddp_points", std::to_string(lddp_points));
  if (!sweep_param.empty()) {
    add("sweep.param", sweep_param);
    std::string v;
    for (double x : sweep_values) v += (v.empty() ? "" : ",") + fmt9(x);
    add("sweep.values", v);
  }
  {
    std::string v;
    for (double x : scan_phi_values_rad) v += (v.empty() ? "" : ",") + fmt9(x);
    add("scan_phi.values_rad", v);
  }
  {
    std::string v;
    for (double x : scan_tau_values_ns) v += (v.empty() ? "" : ",") + fmt9(x);
    add("scan_tau.values_ns", v);
    add("scan_tau.n_cycles", std::to_string(scan_tau_n_cycles));
  }
  {
    std::string v;
    for (const auto& [d, r] : drag_schedule_MHz)
      v += (v.empty() ? "" : ",") + fmt9(d) + ":" + std::to_string(r);
    add("drag.delta_schedule_MHz", v);
  }
  add("drag.first_I", std::to_string(drag_first_I));
  add("drag.count", std::to_string(drag_count));
  add("semiclassical.A0_MHz", fmt9(sc_A0_MHz > 0 ? sc_A0_MHz : A_c_MHz));
  add("semiclassical.A_ff_MHz", fmt9(sc_A_ff_MHz > 0 ? sc_A_ff_MHz : A_nc_MHz / 4));
  add("semiclassical.tau_ns", fmt9(sc_tau_ns));
  add("semiclassical.Gamma_d_Hz", fmt9(sc_Gamma_d_Hz));
  add("semiclassical.Iz_lock", fmt9(sc_Iz_lock));
  add("semiclassical.iz_min", fmt9(sc_iz_min));
  add("semiclassical.iz_max", fmt9(sc_iz_max));
  add("semiclassical.t_end_us", fmt9(sc_t_end_us));
  add("semiclassical.dt_us", fmt9(sc_dt_us));
  {
    std::string v;
    for (double x : sc_traj_iz0) v += (v.empty() ? "" : ",") + fmt9(x);
    add("semiclassical.traj_iz0", v);
  }
  return ls;
}

}  // namespace spincool
