#pragma once
// The four non-unitary channels of the cycle, each a CPTP Kraus map applied
// in the fixed basis of ManifoldState.
//
// Rate convention: Gamma, Gamma_opt are ordinary rates used directly in
// exponents (e^{-Gamma t}, Gamma in MHz, t in us). Inside the transverse
// noise transfer function W(tau) the Larmor frequency enters as an angular
// argument, so Gamma and omega_n are promoted to angular units (2 pi x)
// there and only there; see transverse_noise_sigma_sq.

#include <cmath>
#include <complex>

#include "spincool/dicke.hpp"
#include "spincool/gates.hpp"

namespace spincool {

struct NoiseParams {
  double Gamma = 6.0;       // pure nuclear dephasing rate, MHz
  double Gamma_opt = 1.7;   // optically induced electron relaxation rate, MHz
  double omega_n = 25.3;    // active-species Zeeman frequency, MHz
  double A_nc = 0.156;      // noncollinear hyperfine, MHz
};

// ---------------------------------------------------------------------------
// electron reset (amplitude damping to |up>)
// ---------------------------------------------------------------------------

// K0 = |up><up| x 1, K1 = |up><down| x 1: pumps the electron to |up| while
// the nuclear marginal is preserved exactly (up- and down-block nuclear
// matrices are summed); electron-nuclear coherences are destroyed.
inline void reset_channel(ManifoldState& st) {
  const int w = st.W();
  st.rho.block(0, 0, w, w) += st.rho.block(w, w, w, w);
  st.rho.block(0, w, w, w).setZero();
  st.rho.block(w, 0, w, w).setZero();
  st.rho.block(w, w, w, w).setZero();
}

// ---------------------------------------------------------------------------
// transverse noise (sensing-contrast transfer function)
// ---------------------------------------------------------------------------

// The noncollinear term A_nc S_z I_x is treated as a classical Gaussian
// field with correlator
//   <x(t1) x(t2)> = Var(I_x) e^{-G |t1-t2| / 2} cos(w (t1-t2)),
//   Var(I_x) = (I^2 - <I_z^2>)/2,  G = 2 pi Gamma,  w = 2 pi omega_n,
// giving W(tau) = exp(-sigma^2/2) with
//   sigma^2 = (2 pi A_nc)^2 (I^2 - <I_z^2>) * B(tau),
//   B(tau)  = integral_0^tau (tau - t) e^{-G t/2} cos(w t) dt  (closed form below).
inline double transverse_noise_sigma_sq(double tau_us, double I_tot, double iz_second_moment,
                                        const NoiseParams& np) {
  if (tau_us <= 0 || np.A_nc == 0) return 0.0;
  const double G = 2 * kPi * np.Gamma;
  const double w = 2 * kPi * np.omega_n;
  const double d = G * G / 4 + w * w;
  double B;
  if (d * tau_us * tau_us < 1.0) {
    // |G/2 + iw| tau < 1: the closed form below cancels catastrophically
    // (its two terms agree to O(d tau^2)), so sum the series
    //   B = tau^2 Re sum_k x^k / (k! (k+1)(k+2)),  x = -(G/2 + iw) tau,
    // whose consecutive-coefficient ratio is 1/(k+2). Covers G = w = 0.
    const std::complex<double> x(-G * tau_us / 2, -w * tau_us);
    std::complex<double> term(0.5, 0.0), s(0.5, 0.0);
    for (int k = 1; std::abs(term) > 1e-18 && k < 64; ++k) {
      term *= x / (k + 2.0);
      s += term;
    }
    B = tau_us * tau_us * s.real();
  } else {
    const double e = std::exp(-G * tau_us / 2);
    B = (G * tau_us / 2) / d -
        (G * w * e * std::sin(w * tau_us) + (G * G / 4 - w * w) * (1 - e * std::cos(w * tau_us))) /
            (d * d);
  }
  const double amp = std::max(0.0, I_tot * I_tot - iz_second_moment);
  return amp * (2 * kPi * np.A_nc) * (2 * kPi * np.A_nc) * B;
}

inline double transverse_noise_factor(double tau_us, double I_tot, double iz_second_moment,
                                      const NoiseParams& np) {
  return std::exp(-transverse_noise_sigma_sq(tau_us, I_tot, iz_second_moment, np) / 2);
}

// Electronic phase-damping set K0 = sqrt(W) 1, K1 = sqrt(1-W)|dn><up| x 1,
// K2 = sqrt(1-W)|up><dn| x 1. Coherences scale by W; populations mix across
// the electron blocks. <I_z^2> is taken from the live state on every call.
inline void transverse_noise_channel(ManifoldState& st, double tau_us, const NoiseParams& np) {
  const double iz2 = st.iz_second_moment();
  const double W = transverse_noise_factor(tau_us, st.spec.I, iz2, np);
  if (W >= 1.0) return;
  const int w = st.W();
  Matrix b00 = st.rho.block(0, 0, w, w);
  Matrix b11 = st.rho.block(w, w, w, w);
  st.rho.block(0, 0, w, w) = W * b00 + (1 - W) * b11;
  st.rho.block(w, w, w, w) = W * b11 + (1 - W) * b00;
  st.rho.block(0, w, w, w) *= W;
  st.rho.block(w, 0, w, w) *= W;
}

// ---------------------------------------------------------------------------
// optical relaxation (generalized amplitude damping, equilibrium 1/2)
// ---------------------------------------------------------------------------

// During the drive the electron relaxes toward the maximally mixed state at
// rate Gamma_opt; gamma = 1 - e^{-Gamma_opt T}. (The two-sided damping set
// with equal branch weights is the unique CPTP map with this equilibrium.)
inline void optical_relaxation_channel(ManifoldState& st, double T_us, double Gamma_opt) {
  if (T_us <= 0 || Gamma_opt <= 0) return;
  const double gamma = 1 - std::exp(-Gamma_opt * T_us);
  const double s = std::sqrt(1 - gamma);
  const int w = st.W();
  Matrix diff = st.rho.block(w, w, w, w) - st.rho.block(0, 0, w, w);
  st.rho.block(0, 0, w, w) += (gamma / 2) * diff;
  st.rho.block(w, w, w, w) -= (gamma / 2) * diff;
  st.rho.block(0, w, w, w) *= s;
  st.rho.block(w, 0, w, w) *= s;
}

// ---------------------------------------------------------------------------
// pure nuclear dephasing
// ---------------------------------------------------------------------------

// K0 = e^{-Gamma T/4} 1, K_i = sqrt(1 - e^{-Gamma T/2}) 1_e x |i><i|:
// every element off-diagonal in the nuclear index (within and across the
// electron blocks) scales by e^{-Gamma T/2}; nuclear-diagonal elements are
// untouched.
inline void nuclear_dephasing_channel(ManifoldState& st, double T_us, double Gamma) {
  if (T_us <= 0 || Gamma <= 0) return;
  const double k = std::exp(-Gamma * T_us / 2);
  const int w = st.W(), d = st.dim();
  for (int a = 0; a < d; ++a) {
    const int ja = a % w;
    for (int b = 0; b < d; ++b) {
      if (ja != b % w) st.rho(a, b) *= k;
    }
  }
}

}  // namespace spincool
