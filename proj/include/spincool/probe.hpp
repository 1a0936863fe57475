#pragma once
// Probe-side observables: macrostate distribution p(A_c dI_z), synthetic
// serrodyned FID, stretched-exponential fit, Fourier distribution recovery,
// LDDP entropy, FWHM / mode structure, and ensemble-size estimation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "spincool/dicke.hpp"
#include "spincool/engine.hpp"
#include "spincool/util.hpp"

namespace spincool {

// ---------------------------------------------------------------------------
// distributions
// ---------------------------------------------------------------------------

struct SpectralDistribution {
  std::vector<double> freqs;  // uniform grid, MHz (axis A_c * (I_z - lock))
  std::vector<double> dens;   // probability density, 1/MHz

  double df() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 1.0; }

  double integral() const {  // trapezoid
    if (freqs.size() < 2) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i + 1 < freqs.size(); ++i)
      s += 0.5 * (dens[i] + dens[i + 1]) * (freqs[i + 1] - freqs[i]);
    return s;
  }

  void normalize() {
    const double I = integral();
    if (!(I > 0)) throw NumericError("distribution: non-positive integral");
    for (auto& d : dens) d /= I;
  }
};

inline SpectralDistribution make_grid(double f_min, double f_max, int n) {
  if (n < 2 || f_max <= f_min) throw ConfigError("probe grid: need f_max > f_min and >= 2 points");
  SpectralDistribution p;
  p.freqs.resize(static_cast<std::size_t>(n));
  p.dens.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    p.freqs[static_cast<std::size_t>(i)] = f_min + i * (f_max - f_min) / (n - 1);
  return p;
}

namespace detail {

// accumulate the weighted nuclear diagonals of one manifold set into masses
// on the I_z lattice; mass[iz - iz_min] convention
inline void lattice_masses(const std::vector<std::vector<ManifoldState>>& sets,
                           std::vector<double>& mass, int& iz_min, int& iz_max) {
  iz_min = std::numeric_limits<int>::max();
  iz_max = std::numeric_limits<int>::min();
  for (const auto& per_species : sets)
    for (const auto& st : per_species) {
      iz_min = std::min(iz_min, st.spec.iz_lo);
      iz_max = std::max(iz_max, st.spec.iz_hi);
    }
  if (iz_min > iz_max) throw ConfigError("extract_p: empty manifold list");
  mass.assign(static_cast<std::size_t>(iz_max - iz_min + 1), 0.0);
  const double ns = static_cast<double>(sets.size());
  for (const auto& per_species : sets)
    for (const auto& st : per_species) {
      Eigen::VectorXd p = st.nuclear_diag();
      for (int j = 0; j < p.size(); ++j)
        mass[static_cast<std::size_t>(st.spec.iz_lo + j - iz_min)] += st.spec.weight * p[j] / ns;
    }
}

}  // namespace detail

// Species-averaged macrostate distribution binned onto a uniform frequency
// grid: p(I_z) = sum_I w' <I,I_z|rho_I|I,I_z>, mapped to f = A_c (I_z - lock).
inline SpectralDistribution extract_p(const std::vector<std::vector<ManifoldState>>& sets,
                                      const EnsembleModel& model, double lock, double f_min,
                                      double f_max, int n_grid) {
  std::vector<double> mass;
  int iz_min, iz_max;
  detail::lattice_masses(sets, mass, iz_min, iz_max);
  SpectralDistribution p = make_grid(f_min, f_max, n_grid);
  const double df = p.df();
  for (std::size_t j = 0; j < mass.size(); ++j) {
    if (mass[j] == 0) continue;
    const double f = model.A_c * (static_cast<double>(iz_min + static_cast<int>(j)) - lock);
    const long k = std::lround((f - f_min) / df);
    if (k < 0 || k >= static_cast<long>(p.freqs.size())) continue;  // outside the grid
    p.dens[static_cast<std::size_t>(k)] += mass[j] / df;
  }
  p.normalize();
  return p;
}

// Same distribution on its native macrostate lattice (grid spacing exactly
// A_c). Used for width and mode analysis, where binning a lattice of
// frequency combs onto an incommensurate grid would fabricate structure.
inline SpectralDistribution extract_p_lattice(const std::vector<std::vector<ManifoldState>>& sets,
                                              const EnsembleModel& model, double lock) {
  std::vector<double> mass;
  int iz_min, iz_max;
  detail::lattice_masses(sets, mass, iz_min, iz_max);
  SpectralDistribution p;
  p.freqs.resize(mass.size());
  p.dens.resize(mass.size());
  for (std::size_t j = 0; j < mass.size(); ++j) {
    p.freqs[j] = model.A_c * (static_cast<double>(iz_min + static_cast<int>(j)) - lock);
    p.dens[j] = mass[j] / model.A_c;
  }
  p.normalize();
  return p;
}

// Thermal reference for the full (untruncated) ensemble. The physical
// species carry spin 3/2, so the per-site I_z variance is 5/4 and the
// Overhauser distribution is Gaussian with sigma_f = A_c sqrt(5 N / 4).
inline SpectralDistribution analytic_thermal_distribution(long long N, double A_c, double f_min,
                                                          double f_max, int n_grid) {
  const double sigma_f = A_c * std::sqrt(5.0 * static_cast<double>(N) / 4.0);
  SpectralDistribution p = make_grid(f_min, f_max, n_grid);
  for (std::size_t i = 0; i < p.freqs.size(); ++i) {
    const double x = p.freqs[i] / sigma_f;
    p.dens[i] = std::exp(-0.5 * x * x);
  }
  p.normalize();
  return p;
}

// ---------------------------------------------------------------------------
// FID synthesis
// ---------------------------------------------------------------------------

struct FidTrace {
  std::vector<double> t_us;   // uniform probe delays
  std::vector<double> sz;     // <S_z>, in [-1/2, 1/2]
  double omega_serr = 60.0;   // serrodyne carrier, MHz
};

// <S_z(t)> = 1/2 integral p(f) cos(2 pi (f + omega_serr) t) df, trapezoid
// quadrature on p's own grid; the same rule normalizes p, so the value at
// t = 0 is exactly 1/2.
inline FidTrace synthesize_fid(const SpectralDistribution& p, int n_t, double dt_us,
                               double omega_serr) {
  if (n_t < 2 || dt_us <= 0) throw ConfigError("probe: need >= 2 FID samples and dt > 0");
  const std::size_t n = p.freqs.size();
  if (n < 2) throw ConfigError("probe: distribution grid too small");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = (i == 0) ? 0.0 : 0.5 * (p.freqs[i] - p.freqs[i - 1]);
    double hi = (i + 1 == n) ? 0.0 : 0.5 * (p.freqs[i + 1] - p.freqs[i]);
    w[i] = (lo + hi) * p.dens[i];
  }
  double norm = 0;
  for (double x : w) norm += x;
  if (!(norm > 0)) throw NumericError("synthesize_fid: zero distribution mass");

  FidTrace fid;
  fid.omega_serr = omega_serr;
  fid.t_us.resize(static_cast<std::size_t>(n_t));
  fid.sz.resize(static_cast<std::size_t>(n_t));
  for (int k = 0; k < n_t; ++k) {
    const double t = k * dt_us;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      s += w[i] * std::cos(2 * kPi * (p.freqs[i] + omega_serr) * t);
    fid.t_us[static_cast<std::size_t>(k)] = t;
    fid.sz[static_cast<std::size_t>(k)] = 0.5 * s / norm;
  }
  return fid;
}

// ---------------------------------------------------------------------------
// stretched-exponential fit
// ---------------------------------------------------------------------------

struct FitResult {
  double T2_us = 0;      // stretched-exponential time constant
  double alpha = 0;      // stretching exponent
  double amplitude = 0;  // carrier amplitude
  double residual = 0;   // euclidean norm of the final residuals
  bool converged = false;
};

// Levenberg-Marquardt fit of A cos(2 pi omega_serr t) exp(-(t/T2)^alpha)
// with the carrier frequency known. Initial guesses: A = 1/2, alpha = 1.5,
// T2 from the first 1/e crossing of the demodulated envelope; alpha bounded
// to [0.3, 4].
inline FitResult fit_stretched_exponential(const FidTrace& fid) {
  const std::size_t n = fid.t_us.size();
  if (n < 8) throw ConfigError("fit: need at least 8 FID samples");
  const double nu = fid.omega_serr;

  // demodulated-envelope estimate of T2
  double A0 = 0.5, T2 = 0;
  {
    double first_env = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = std::cos(2 * kPi * nu * fid.t_us[i]);
      if (std::abs(c) < 0.5) continue;
      const double e = std::abs(fid.sz[i] / c);
      if (first_env < 0) first_env = std::max(e, 1e-12);
      if (e < first_env / std::numbers::e) {
        T2 = fid.t_us[i];
        break;
      }
    }
    if (T2 <= 0) T2 = (fid.t_us.back() - fid.t_us.front()) / 2;
  }
  double alpha = 1.5, A = A0;

  auto model_at = [&](double t, double a, double tt, double al, double* dA, double* dT, double* dal) {
    const double c = std::cos(2 * kPi * nu * t);
    double x = t / tt;
    double E, xa;
    if (t <= 0) {
      E = 1.0;
      xa = 0.0;
    } else {
      xa = std::pow(x, al);
      E = std::exp(-xa);
    }
    if (dA) *dA = c * E;
    if (dT) *dT = (t <= 0) ? 0.0 : a * c * E * (al / tt) * xa;
    if (dal) *dal = (t <= 0) ? 0.0 : -a * c * E * xa * std::log(x);
    return a * c * E;
  };

  auto cost_of = [&](double a, double tt, double al) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = model_at(fid.t_us[i], a, tt, al, nullptr, nullptr, nullptr) - fid.sz[i];
      s += r * r;
    }
    return s;
  };

  const double t_span = fid.t_us.back() - fid.t_us.front();
  auto clamp_params = [&](double& tt, double& al) {
    al = std::clamp(al, 0.3, 4.0);
    tt = std::clamp(tt, t_span * 1e-6, t_span * 1e4);
  };
  clamp_params(T2, alpha);

  double cost = cost_of(A, T2, alpha);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 0; it < 300; ++it) {
    Eigen::Matrix3d JTJ = Eigen::Matrix3d::Zero();
    Eigen::Vector3d JTr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      double dA, dT, dal;
      const double r = model_at(fid.t_us[i], A, T2, alpha, &dA, &dT, &dal) - fid.sz[i];
      Eigen::Vector3d J(dA, dT, dal);
      JTJ += J * J.transpose();
      JTr += J * r;
    }
    Eigen::Matrix3d M = JTJ;
    for (int k = 0; k < 3; ++k) M(k, k) += lambda * std::max(JTJ(k, k), 1e-30);
    Eigen::Vector3d step = M.ldlt().solve(-JTr);
    if (!step.allFinite()) break;
    double A2 = A + step[0], T22 = T2 + step[1], al2 = alpha + step[2];
    clamp_params(T22, al2);
    const double c2 = cost_of(A2, T22, al2);
    if (c2 < cost) {
      const double rel = (cost - c2) / std::max(cost, 1e-300);
      A = A2;
      T2 = T22;
      alpha = al2;
      cost = c2;
      lambda = std::max(lambda / 3, 1e-12);
      if (rel < 1e-12) {
        converged = true;
        break;
      }
    } else {
      lambda *= 2.5;
      if (lambda > 1e12) {
        converged = true;  // flat to machine precision
        break;
      }
    }
  }

  FitResult out;
  out.T2_us = T2;
  out.alpha = alpha;
  out.amplitude = A;
  out.residual = std::sqrt(cost);
  out.converged = converged && std::isfinite(cost);
  return out;
}

// ---------------------------------------------------------------------------
// Fourier recovery
// ---------------------------------------------------------------------------

// Discrete Fourier (DTFT magnitude) of the FID, demodulated by omega_serr,
// on a grid of resolution 1/(trace length). The trace is a cosine FID,
// even in the delay, so it is extended symmetrically about t = 0 before
// transforming: the dispersive (imaginary) component cancels and the
// magnitude is the absorption spectrum itself. Only frequencies above
// -omega_serr are unaliased for a real-valued trace; callers pick the range.
inline SpectralDistribution fft_to_distribution(const FidTrace& fid, double f_min, double f_max) {
  const std::size_t n = fid.t_us.size();
  if (n < 4) throw ConfigError("fft: need at least 4 FID samples");
  const double dt = fid.t_us[1] - fid.t_us[0];
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(fid.t_us[i] - fid.t_us[i - 1] - dt) > 1e-9 * std::max(dt, 1.0))
      throw ConfigError("fft: non-uniform FID time grid");
  const double L = fid.t_us.back() - fid.t_us.front();
  const double dnu = 1.0 / L;
  const int n_out = static_cast<int>(std::floor((f_max - f_min) / dnu)) + 1;
  if (n_out < 2) throw ConfigError("fft: requested range narrower than the resolution");

  SpectralDistribution p;
  p.freqs.resize(static_cast<std::size_t>(n_out));
  p.dens.resize(static_cast<std::size_t>(n_out));
  for (int k = 0; k < n_out; ++k) {
    const double f = f_min + k * dnu;
    const double nu = f + fid.omega_serr;
    double acc = 0;  // trapezoid over the even extension [-T, T]
    for (std::size_t i = 0; i < n; ++i) {
      const double wgt = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
      acc += wgt * fid.sz[i] * std::cos(2 * kPi * nu * fid.t_us[i]);
    }
    p.freqs[static_cast<std::size_t>(k)] = f;
    p.dens[static_cast<std::size_t>(k)] = std::abs(2 * acc) * dt;
  }
  p.normalize();
  return p;
}

// ---------------------------------------------------------------------------
// entropy, size estimate, widths, modes
// ---------------------------------------------------------------------------

// Limiting-density-of-discrete-points entropy S_p = log n_points -
// integral p log(p / m), natural logs; defaults m = 2/GHz on the standard
// grid of 400 points.
inline double lddp_entropy(const SpectralDistribution& p, double m_density = 0.002,
                           int n_points = 400) {
  if (m_density <= 0 || n_points < 1) throw ConfigError("entropy: invalid m or point count");
  auto plogp = [&](double d) { return d > 0 ? d * std::log(d / m_density) : 0.0; };
  double s = 0;
  for (std::size_t i = 0; i + 1 < p.freqs.size(); ++i)
    s += 0.5 * (plogp(p.dens[i]) + plogp(p.dens[i + 1])) * (p.freqs[i + 1] - p.freqs[i]);
  return std::log(static_cast<double>(n_points)) - s;
}

// Invert T2* = 1/(sqrt(2) pi A_c sigma), sigma = sqrt(5N/4):
// N = 2 / (5 pi^2 A_c^2 T2*^2). T2 in us, A_c in MHz.
inline double estimate_N(double T2_us, double A_c) {
  if (T2_us <= 0 || A_c <= 0) throw ConfigError("estimate_N: T2 and A_c must be > 0");
  return 2.0 / (5.0 * kPi * kPi * A_c * A_c * T2_us * T2_us);
}

struct Mode {
  int index = 0;
  double freq = 0;
  double height = 0;
  double prominence = 0;
};

// A mode is a local maximum of the density exceeding 5% of the global
// maximum whose prominence is at least half its height.
inline std::vector<Mode> find_modes(const SpectralDistribution& p, double rel_height = 0.05,
                                    double prom_ratio = 0.5) {
  const std::size_t n = p.dens.size();
  std::vector<Mode> out;
  if (n < 3) return out;
  double pmax = *std::max_element(p.dens.begin(), p.dens.end());
  if (!(pmax > 0)) return out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(p.dens[i] > p.dens[i - 1] && p.dens[i] >= p.dens[i + 1])) continue;
    const double h = p.dens[i];
    if (h < rel_height * pmax) continue;
    // prominence: lowest saddle toward the nearest higher ground on each side
    double left_base = h, right_base = h;
    for (std::size_t j = i; j-- > 0;) {
      left_base = std::min(left_base, p.dens[j]);
      if (p.dens[j] > h) break;
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      right_base = std::min(right_base, p.dens[j]);
      if (p.dens[j] > h) break;
    }
    const double prom = h - std::max(left_base, right_base);
    if (prom < prom_ratio * h) continue;
    out.push_back({static_cast<int>(i), p.freqs[i], h, prom});
  }
  return out;
}

struct FwhmResult {
  double width = 0;        // MHz
  bool multimodal = false; // more than one detected mode; width is of the tallest
};

// Linear-interpolated full width at half of the global maximum, walking
// outward from the tallest point until the density first drops below half.
inline FwhmResult fwhm(const SpectralDistribution& p) {
  FwhmResult out;
  const std::size_t n = p.dens.size();
  if (n < 3) return out;
  std::size_t k = static_cast<std::size_t>(
      std::max_element(p.dens.begin(), p.dens.end()) - p.dens.begin());
  const double half = p.dens[k] / 2;
  if (!(half > 0)) return out;

  double left = p.freqs.front();
  for (std::size_t j = k; j-- > 0;) {
    if (p.dens[j] < half) {
      const double t = (half - p.dens[j]) / (p.dens[j + 1] - p.dens[j]);
      left = p.freqs[j] + t * (p.freqs[j + 1] - p.freqs[j]);
      break;
    }
  }
  double right = p.freqs.back();
  for (std::size_t j = k + 1; j < n; ++j) {
    if (p.dens[j] < half) {
      const double t = (p.dens[j - 1] - half) / (p.dens[j - 1] - p.dens[j]);
      right = p.freqs[j - 1] + t * (p.freqs[j] - p.freqs[j - 1]);
      break;
    }
  }
  out.width = right - left;
  out.multimodal = find_modes(p).size() > 1;
  return out;
}

// ---------------------------------------------------------------------------
// bundled probe pipeline
// ---------------------------------------------------------------------------

struct ProbeParams {
  double omega_serr = 60.0;  // MHz
  double dt_us = 0.0005;     // FID sample spacing (0.5 ns)
  double t_max_us = 0.400;   // FID span
  double f_min = -250.0, f_max = 250.0;
  int n_grid = 1024;
  double lddp_m = 0.002;     // 2 / GHz
  int lddp_n = 400;

  int n_t() const { return static_cast<int>(std::lround(t_max_us / dt_us)) + 1; }

  void validate() const {
    if (omega_serr < 0) throw ConfigError("probe.omega_serr_MHz: must be >= 0");
    if (dt_us <= 0 || t_max_us <= 0) throw ConfigError("probe.dt_ns/t_max_ns: must be > 0");
    if (n_grid < 2) throw ConfigError("probe.grid_points: must be >= 2");
    if (f_max <= f_min) throw ConfigError("probe.f_max_MHz: must exceed f_min_MHz");
    if (lddp_m <= 0 || lddp_n < 1) throw ConfigError("probe.lddp_*: must be positive");
  }
};

struct ProbeSummary {
  SpectralDistribution p;         // binned on the configured grid
  SpectralDistribution p_lattice; // native macrostate lattice
  FidTrace fid;
  FitResult fit;
  double S_p = 0;
  FwhmResult width;
  std::vector<Mode> modes;        // detected on the lattice
};

inline ProbeSummary run_probe(const std::vector<std::vector<ManifoldState>>& sets,
                              const EnsembleModel& model, double lock, const ProbeParams& pp) {
  pp.validate();
  ProbeSummary out;
  out.p = extract_p(sets, model, lock, pp.f_min, pp.f_max, pp.n_grid);
  out.p_lattice = extract_p_lattice(sets, model, lock);
  // FID from the native lattice: binning a comb first would shift every
  // line by up to half a bin
  out.fid = synthesize_fid(out.p_lattice, pp.n_t(), pp.dt_us, pp.omega_serr);
  out.fit = fit_stretched_exponential(out.fid);
  out.S_p = lddp_entropy(out.p, pp.lddp_m, pp.lddp_n);
  out.width = fwhm(out.p_lattice);
  out.modes = find_modes(out.p_lattice);
  return out;
}

}  // namespace spincool
