#pragma once
// Coarse-grained mean-field model of the feedback: directional rates,
// the macrostate rate equation, fixed-point / capture-range analysis, and
// fixed-step trajectory integration.

#include <cmath>
#include <vector>

#include "spincool/gates.hpp"
#include "spincool/util.hpp"

namespace spincool {

struct SemiclassicalParams {
  double A0 = 0.63;        // sensing coupling, MHz (A_c)
  double A_ff = 0.039;     // flip-flop coupling, MHz (A_nc / 4)
  double tau_us = 0.150;   // sensing time
  double Gamma_d = 0.0;    // diffusion rate, per us (config key is in Hz)
  double Iz_lock = 0.0;

  // coarse-grained cycle time
  double T0() const { return 1.0 / (4 * A0) + 1.0 / (2 * A_ff); }

  void validate() const {
    if (A0 <= 0 || A_ff <= 0) throw ConfigError("semiclassical: A0 and A_ff must be > 0");
    if (tau_us <= 0) throw ConfigError("semiclassical.tau_ns: must be > 0");
    if (Gamma_d < 0) throw ConfigError("semiclassical.Gamma_d_Hz: must be >= 0");
  }
};

// W+- = (1 -+ sin(2 pi A0 dIz tau)) / (2 tau + 1/A_ff)
inline std::pair<double, double> directional_rates(double delta_iz, const SemiclassicalParams& p) {
  const double s = std::sin(2 * kPi * p.A0 * delta_iz * p.tau_us);
  const double denom = 2 * p.tau_us + 1.0 / p.A_ff;
  return {(1 - s) / denom, (1 + s) / denom};
}

// d<I_z>/dt = -sin(2 pi A0 dIz tau) / (tau + 1/(2 A_ff)) - Gamma_d I_z
inline double rate(double iz, const SemiclassicalParams& p) {
  const double diz = iz - p.Iz_lock;
  return -std::sin(2 * kPi * p.A0 * diz * p.tau_us) / (p.tau_us + 1.0 / (2 * p.A_ff)) -
         p.Gamma_d * iz;
}

inline double rate_slope(double iz, const SemiclassicalParams& p) {
  const double diz = iz - p.Iz_lock;
  return -2 * kPi * p.A0 * p.tau_us * std::cos(2 * kPi * p.A0 * diz * p.tau_us) /
             (p.tau_us + 1.0 / (2 * p.A_ff)) -
         p.Gamma_d;
}

struct FixedPoint {
  double iz = 0;
  bool stable = false;  // local slope < 0
};

// All zero crossings of the rate inside [iz_min, iz_max]: dense scan with a
// grid step no coarser than 1/(20 A0 tau) (a fifth of the sin half-period,
// so no root can hide), then bisection.
inline std::vector<FixedPoint> find_stable_points(const SemiclassicalParams& p, double iz_min,
                                                  double iz_max) {
  p.validate();
  std::vector<FixedPoint> out;
  if (iz_max <= iz_min) return out;
  const double step = 1.0 / (20 * p.A0 * p.tau_us);
  const long n = std::max(8L, static_cast<long>(std::ceil((iz_max - iz_min) / step)));
  double prev_x = iz_min, prev_f = rate(prev_x, p);
  for (long i = 1; i <= n; ++i) {
    const double x = iz_min + (iz_max - iz_min) * static_cast<double>(i) / static_cast<double>(n);
    const double f = rate(x, p);
    if (prev_f == 0.0) {
      out.push_back({prev_x, rate_slope(prev_x, p) < 0});
    } else if (prev_f * f < 0) {
      double a = prev_x, b = x, fa = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double m = (a + b) / 2, fm = rate(m, p);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (fa * fm < 0) {
          b = m;
        } else {
          a = m;
          fa = fm;
        }
      }
      out.push_back({(a + b) / 2, rate_slope((a + b) / 2, p) < 0});
    }
    prev_x = x;
    prev_f = f;
  }
  if (prev_f == 0.0) out.push_back({prev_x, rate_slope(prev_x, p) < 0});
  return out;
}

struct TrajectorySample {
  double t_us = 0;
  double iz = 0;
};

// Classical RK4 with a fixed step (reproducibility over adaptivity).
inline std::vector<TrajectorySample> integrate_trajectory(double iz0, const SemiclassicalParams& p,
                                                          double t_end_us, double dt_us) {
  p.validate();
  if (dt_us <= 0 || t_end_us < 0) throw ConfigError("semiclassical: dt and t_end must be > 0");
  const double tc = p.tau_us + 1.0 / (2 * p.A_ff);
  if (dt_us > 0.01 * tc)
    throw ConfigError("semiclassical.dt_us: must be <= 0.01 (tau + 1/(2 A_ff)) = " +
                      fmt9(0.01 * tc));
  std::vector<TrajectorySample> out;
  const long n = static_cast<long>(std::ceil(t_end_us / dt_us));
  out.reserve(static_cast<std::size_t>(n) + 1);
  double x = iz0;
  out.push_back({0.0, x});
  for (long i = 0; i < n; ++i) {
    const double k1 = rate(x, p);
    const double k2 = rate(x + dt_us * k1 / 2, p);
    const double k3 = rate(x + dt_us * k2 / 2, p);
    const double k4 = rate(x + dt_us * k3, p);
    x += dt_us * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
    out.push_back({dt_us * static_cast<double>(i + 1), x});
  }
  return out;
}

}  // namespace spincool
