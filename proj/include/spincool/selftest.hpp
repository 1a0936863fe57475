#pragma once
// Built-in invariant suite behind `spincool selftest`: quick structural
// checks of the algebra (degeneracies, unitarity, channel CPTP, sign
// conventions, noise-kernel quadrature, fit recovery, determinism) on small
// manifolds. Everything here runs in a few seconds; the heavyweight
// reproductions live in the test suite instead.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "spincool/channels.hpp"
#include "spincool/dicke.hpp"
#include "spincool/engine.hpp"
#include "spincool/gates.hpp"
#include "spincool/probe.hpp"
#include "spincool/semiclassical.hpp"
#include "spincool/util.hpp"

namespace spincool {

struct SelftestCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  std::string log;

  bool all_ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }
  int n_failed() const {
    int n = 0;
    for (const auto& c : checks)
      if (!c.ok) ++n;
    return n;
  }
};

namespace selftest_detail {

// 2-D composite-Simpson quadrature of the noise correlator double integral
//   B(tau) = int_0^tau dt1 int_0^t1 dt2 exp(-Gamma~ (t1-t2)/2) cos(omega~ (t1-t2))
// (angular rates Gamma~ = 2 pi Gamma, omega~ = 2 pi omega_n).
inline double quadrature_B(double tau, double Gamma, double omega_n, int n_outer = 1000,
                           int n_inner = 500) {
  const double gt = 2 * kPi * Gamma / 2, wt = 2 * kPi * omega_n;
  auto corr = [&](double u) { return std::exp(-gt * u) * std::cos(wt * u); };
  auto inner = [&](double t1) {  // int_0^t1 corr(t1 - t2) dt2 = int_0^t1 corr(u) du
    if (t1 == 0) return 0.0;
    const double h = t1 / n_inner;
    double s = corr(0) + corr(t1);
    for (int i = 1; i < n_inner; ++i) s += (i % 2 ? 4.0 : 2.0) * corr(i * h);
    return s * h / 3;
  };
  const double h = tau / n_outer;
  double s = inner(0) + inner(tau);
  for (int i = 1; i < n_outer; ++i) s += (i % 2 ? 4.0 : 2.0) * inner(i * h);
  return s * h / 3;
}

// deterministic dense density matrix ("random-looking" but reproducible)
inline Matrix pseudo_random_density(int dim, int seed_shift) {
  Matrix m(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k)
      m(j, k) = cplx(std::sin(3.0 * j + 5.0 * k + seed_shift),
                     std::cos(2.0 * j - k + 0.7 * seed_shift));
  Matrix rho = m * m.adjoint();
  rho /= rho.trace().real();
  return rho;
}

inline std::string state_digest(const ManifoldState& st) {
  Fnv1a64 h;
  for (int j = 0; j < st.rho.rows(); ++j)
    for (int k = 0; k < st.rho.cols(); ++k) {
      h.update(fmt9(st.rho(j, k).real()));
      h.update(fmt9(st.rho(j, k).imag()));
    }
  return h.hex();
}

}  // namespace selftest_detail

inline SelftestReport run_selftest() {
  using namespace selftest_detail;
  SelftestReport rep;
  std::ostringstream log;

  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    rep.checks.push_back({name, ok, detail});
    log << (ok ? "ok   " : "FAIL ") << name;
    if (!detail.empty()) log << "  (" << detail << ")";
    log << "\n";
  };

  // 1. Dicke completeness: sum over manifolds recovers the full Hilbert space
  {
    bool ok = true;
    std::string det;
    for (long long N = 2; N <= 24 && ok; N += 2) {
      unsigned long long total = 0;
      for (long long I = 0; I <= N / 2; ++I)
        total += static_cast<unsigned long long>(2 * I + 1) * degeneracy_exact(I, N);
      if (total != (1ull << N)) {
        ok = false;
        det = "N=" + std::to_string(N);
      }
    }
    check("dicke_completeness", ok, det);
  }

  // 2. approximate weights track the exact log-space weights near the peak
  {
    const long long N = 30000;
    const long long I_lo = static_cast<long long>(std::ceil(0.2 * std::sqrt(N / 2.0)));
    const long long I_hi = static_cast<long long>(std::floor(3.0 * std::sqrt(N / 2.0)));
    double worst = 0;
    for (long long I = I_lo; I <= I_hi; I += 2) {
      const double we = weight_exact(I, N);
      const double wa = weight_approx(static_cast<double>(I), static_cast<double>(N));
      worst = std::max(worst, std::abs(wa / we - 1.0));
    }
    check("weight_approx", worst < 0.03, "max rel dev " + fmt9(worst));
  }

  // 3. unitaries preserve trace and purity; 2 pi rotation is the identity
  {
    ManifoldSpec spec{14, -3, 3, 1.0};
    ManifoldState st{spec, pseudo_random_density(2 * spec.window(), 1)};
    const double pur0 = st.purity();
    apply_rotation(st, kPi / 2, 0.3);
    apply_sense(st, 0.05, 0.2, 0.63, 25.3);
    GateParams gp;
    gp.omega_n = 25.3;
    const BlockEigen be = build_actuation_blocks(spec, gp);
    apply_flipflop(st, be, 0.086);
    const bool ok1 = std::abs(st.trace() - 1) < 1e-10 && std::abs(st.purity() - pur0) < 1e-10;

    ManifoldState id_st{spec, pseudo_random_density(2 * spec.window(), 2)};
    Matrix before = id_st.rho;
    apply_rotation(id_st, 2 * kPi, 0.9);
    apply_rotation(id_st, 2 * kPi, 0.9);  // 4 pi returns even the spinor sign
    const bool ok2 = (id_st.rho - before).cwiseAbs().maxCoeff() < 1e-12;
    check("unitary_invariants", ok1 && ok2,
          ok1 ? (ok2 ? "" : "4pi rotation != identity") : "trace/purity drift");
  }

  // 4. sense signal: after the two pulses <S_z> = -1/2 sin(Phi + phi)
  {
    double worst = 0;
    for (int diz : {-3, -1, 0, 2}) {
      for (double tau : {0.03, 0.15}) {
        for (double phi : {0.0, 1.1}) {
          ManifoldSpec spec{14, diz, diz, 1.0};  // single-site window: pure detuning
          ManifoldState st = thermal_manifold(spec);
          apply_rotation(st, kPi / 2, kFirstPulseAxisOffset + phi);
          apply_sense(st, tau, 0.0, 0.63, 25.3);
          apply_rotation(st, kPi / 2, kSecondPulseAxisPhase);
          const double sz = st.electron_up_population() - 0.5;
          const double want = -0.5 * std::sin(2 * kPi * 0.63 * diz * tau + phi);
          worst = std::max(worst, std::abs(sz - want));
        }
      }
    }
    check("sense_signal", worst < 1e-9, "max dev " + fmt9(worst));
  }

  // 5. flip-flop at the swap time moves |dn, iz+1> fully to |up, iz>
  {
    ManifoldSpec spec{14, -3, 3, 1.0};
    GateParams gp;
    const BlockEigen be = build_actuation_blocks(spec, gp);
    const double f = enhancement_factor(std::sqrt(gp.xi) * spec.I, 0);
    const double T_swap = 2.0 / (gp.A_nc * f);
    ManifoldState st{spec, Matrix::Zero(2 * spec.window(), 2 * spec.window())};
    st.rho(st.idx(1, 1), st.idx(1, 1)) = 1.0;  // |down, iz = 1>
    apply_flipflop(st, be, T_swap);
    const double moved = st.rho(st.idx(0, 0), st.idx(0, 0)).real();
    check("flipflop_swap", std::abs(moved - 1) < 1e-9, "P(up, iz=0) = " + fmt9(moved));
  }

  // 6. channels are trace-preserving, hermiticity-preserving, positive
  {
    ManifoldSpec spec{28, -2, 2, 1.0};
    double worst_tr = 0, worst_herm = 0, worst_eig = 0;
    for (int s = 0; s < 4; ++s) {
      for (int which = 0; which < 4; ++which) {
        ManifoldState st{spec, pseudo_random_density(2 * spec.window(), 10 * s + which)};
        NoiseParams np;
        switch (which) {
          case 0: reset_channel(st); break;
          case 1: transverse_noise_channel(st, 0.05, np); break;
          case 2: optical_relaxation_channel(st, 0.086, 1.7); break;
          case 3: nuclear_dephasing_channel(st, 0.086, 6.0); break;
        }
        worst_tr = std::max(worst_tr, std::abs(st.trace() - 1));
        worst_herm = std::max(worst_herm, st.hermiticity_error());
        worst_eig = std::max(worst_eig, -st.min_eigenvalue());
      }
    }
    check("channels_cptp", worst_tr < 1e-12 && worst_herm < 1e-12 && worst_eig < 1e-10,
          "tr " + fmt9(worst_tr) + ", herm " + fmt9(worst_herm) + ", eig " + fmt9(worst_eig));
  }

  // 7. closed-form W(tau) against direct quadrature of the correlator
  {
    NoiseParams np;
    double worst = 0;
    const double I = 60, iz2 = I * (I + 1) / 3;
    for (auto [tau, G, w] : {std::tuple{0.03, 6.0, 25.3}, {0.15, 2.0, 10.0}, {0.098, 0.0, 0.0}}) {
      np.Gamma = G;
      np.omega_n = w;
      const double W_cf = std::exp(-0.5 * transverse_noise_sigma_sq(tau, I, iz2, np));
      const double amp = (I * I - iz2) * std::pow(2 * kPi * np.A_nc, 2);
      const double W_q = std::exp(-0.5 * amp * quadrature_B(tau, G, w));
      worst = std::max(worst, std::abs(W_cf - W_q));
    }
    check("noise_kernel_quadrature", worst < 1e-6, "max |dW| " + fmt9(worst));
  }

  // 8. LDDP entropy of the uniform density is exactly log 400
  {
    SpectralDistribution p = make_grid(-250, 250, 1001);
    for (auto& d : p.dens) d = 1.0 / 500.0;
    const double S = lddp_entropy(p);
    check("entropy_uniform", std::abs(S - std::log(400.0)) < 1e-9, "S_p = " + fmt9(S));
  }

  // 9. stretched-exponential fit recovers a Gaussian envelope
  {
    SpectralDistribution p = make_grid(-600, 600, 2001);
    const double sigma = 150;
    for (std::size_t i = 0; i < p.freqs.size(); ++i)
      p.dens[i] = std::exp(-0.5 * std::pow(p.freqs[i] / sigma, 2));
    p.normalize();
    FidTrace fid = synthesize_fid(p, 2001, 0.00001, 60.0);
    FitResult fit = fit_stretched_exponential(fid);
    const double T2_want = std::sqrt(2.0) / (2 * kPi * sigma);
    const bool ok = std::abs(fit.alpha - 2) < 0.05 && std::abs(fit.T2_us / T2_want - 1) < 0.01;
    check("fit_gaussian", ok,
          "alpha " + fmt9(fit.alpha) + ", T2 " + fmt9(fit.T2_us * 1e3) + " ns vs " +
              fmt9(T2_want * 1e3));
  }

  // 10. semiclassical design point: T0 * rate = -1 at one-site error
  {
    SemiclassicalParams p;
    p.tau_us = 1.0 / (4 * p.A0);
    const double v = p.T0() * rate(p.Iz_lock + 1, p);
    bool ok = std::abs(v + 1) < 1e-12;
    auto fps = find_stable_points(p, -3.5 / (p.A0 * p.tau_us), 3.5 / (p.A0 * p.tau_us));
    double worst_sp = 0;
    std::vector<double> stables;
    for (const auto& fp : fps)
      if (fp.stable) stables.push_back(fp.iz);
    for (std::size_t i = 1; i < stables.size(); ++i)
      worst_sp = std::max(worst_sp,
                          std::abs(stables[i] - stables[i - 1] - 1.0 / (p.A0 * p.tau_us)));
    ok = ok && stables.size() >= 3 && worst_sp < 1e-9;
    check("semiclassical_optimum", ok, "T0*rate " + fmt9(v) + ", spacing dev " + fmt9(worst_sp));
  }

  // 11. one ideal cycle corrects a one-site error to the lockpoint
  {
    EnsembleModel model;
    model.manifolds = {ManifoldSpec{14, -1, 1, 1.0}};
    FeedbackConfig cfg;
    cfg.n_cycles = 1;
    cfg.schedule.kind = TauSchedule::Fixed;
    cfg.schedule.tau_fixed_us = 1.0 / (4 * model.A_c);
    cfg.noise.Gamma = 0;
    cfg.noise.Gamma_opt = 0;
    cfg.ablate.no_transverse_noise = true;
    const double f = enhancement_factor(std::sqrt(model.xi) * 14, 0);
    cfg.T_us = 2.0 / (model.A_nc * f);

    GateParams gp;
    gp.delta = 0;
    gp.T_us = cfg.T_us;
    gp.omega_n = model.species[0].omega_n;
    const BlockEigen be = build_actuation_blocks(model.manifolds[0], gp);
    double worst = 0;
    for (int start : {-1, 1}) {
      ManifoldState st{model.manifolds[0], Matrix::Zero(6, 6)};
      st.rho(st.idx(0, start), st.idx(0, start)) = 1.0;  // electron up (reset), nuclear off lock
      run_cycle(st, cfg.schedule.tau_fixed_us, cfg, model.species[0], model, be);
      double p_lock = 0;
      for (int e = 0; e < 2; ++e) p_lock += st.rho(st.idx(e, 0), st.idx(e, 0)).real();
      worst = std::max(worst, 1.0 - p_lock);
    }
    check("limit_cycle_correction", worst < 0.01, "worst leak " + fmt9(worst));
  }

  // 12. bit determinism of a short two-manifold sequence
  {
    EnsembleModel model;
    model.manifolds = sample_manifolds(model.N, 2, 14, 1.0 / 14.0, 14);
    FeedbackConfig cfg;
    cfg.n_cycles = 6;
    std::string d1, d2;
    for (std::string* d : {&d1, &d2}) {
      SequenceResult seq = run_sequence(model, cfg, 2);
      Fnv1a64 h;
      for (const auto& per_species : seq.states)
        for (const auto& st : per_species) h.update(state_digest(st));
      *d = h.hex();
    }
    check("determinism", d1 == d2, d1 + (d1 == d2 ? "" : " != " + d2));
  }

  rep.log = log.str();
  return rep;
}

}  // namespace spincool
