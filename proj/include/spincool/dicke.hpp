#pragma once
// Dicke-manifold bookkeeping for an ensemble of N spin-1/2 particles:
// degeneracies, statistical weights, manifold sampling with I_z truncation,
// and thermal-state construction.
//
// A manifold of total angular momentum I appears D_{I,N} times in the
// decomposition of the N-spin Hilbert space; together with the 2^N
// normalization this gives the statistical weight
//   w'_{I,N} = (2I+1) D_{I,N} / 2^N.
// N here is ~5e4, so everything above a small cutoff runs in log space.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "spincool/util.hpp"

namespace spincool {

using Matrix = Eigen::MatrixXcd;
using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// specs and states
// ---------------------------------------------------------------------------

struct ManifoldSpec {
  int I = 0;                   // total angular momentum (integer: N even)
  int iz_lo = 0, iz_hi = 0;    // truncated I_z window, inclusive
  double weight = 1.0;         // normalized statistical weight w'

  int window() const { return iz_hi - iz_lo + 1; }
};

// Electron (x) nuclear density matrix for one manifold. Basis ordering is
// fixed once and for all: index = e*W + (iz - iz_lo) with e = 0 for the
// electron up state and e = 1 for down, W = window size.
struct ManifoldState {
  ManifoldSpec spec;
  Matrix rho;

  int W() const { return spec.window(); }
  int dim() const { return 2 * spec.window(); }
  int idx(int e, int iz) const { return e * spec.window() + (iz - spec.iz_lo); }

  double trace() const { return rho.trace().real(); }

  double hermiticity_error() const {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es((rho + rho.adjoint()) / 2.0);
    return es.eigenvalues().minCoeff();
  }

  double purity() const { return (rho * rho).trace().real(); }

  // diagonal of the nuclear marginal, indexed iz_lo..iz_hi
  Eigen::VectorXd nuclear_diag() const {
    const int w = W();
    Eigen::VectorXd p(w);
    for (int j = 0; j < w; ++j) p[j] = rho(j, j).real() + rho(w + j, w + j).real();
    return p;
  }

  Matrix nuclear_marginal() const {
    const int w = W();
    return rho.block(0, 0, w, w) + rho.block(w, w, w, w);
  }

  double iz_mean() const {
    Eigen::VectorXd p = nuclear_diag();
    double s = 0, n = 0;
    for (int j = 0; j < p.size(); ++j) {
      s += p[j] * (spec.iz_lo + j);
      n += p[j];
    }
    return n > 0 ? s / n : 0.0;
  }

  double iz_second_moment() const {
    Eigen::VectorXd p = nuclear_diag();
    double s = 0, n = 0;
    for (int j = 0; j < p.size(); ++j) {
      double iz = spec.iz_lo + j;
      s += p[j] * iz * iz;
      n += p[j];
    }
    return n > 0 ? s / n : 0.0;
  }

  double electron_up_population() const {
    const int w = W();
    double s = 0;
    for (int j = 0; j < w; ++j) s += rho(j, j).real();
    return s;
  }
};

struct Species {
  std::string label;
  double omega_n = 0.0;  // nuclear Zeeman frequency, MHz
};

struct EnsembleModel {
  long long N = 49000;     // number of spin-1/2 nuclei, even
  double A_c = 0.63;       // collinear hyperfine per nucleus, MHz
  double A_nc = 0.156;     // noncollinear hyperfine, MHz
  double xi = 0.42;        // participating fraction, I -> sqrt(xi) I during actuation
  std::vector<Species> species{{"As", 25.3}, {"In", 32.7}};
  std::vector<ManifoldSpec> manifolds;

  void validate() const {
    if (N <= 0 || N % 2 != 0) throw ConfigError("model.N: must be a positive even integer");
    if (A_c <= 0) throw ConfigError("model.A_c_MHz: must be > 0");
    if (A_nc < 0) throw ConfigError("model.A_nc_MHz: must be >= 0");
    if (xi <= 0 || xi > 1) throw ConfigError("model.xi: must be in (0, 1]");
    if (species.empty()) throw ConfigError("model.species: at least one species required");
    for (const auto& s : species)
      if (s.omega_n <= 0) throw ConfigError("model.species: omega_n must be > 0 (" + s.label + ")");
  }
};

// ---------------------------------------------------------------------------
// degeneracies and weights
// ---------------------------------------------------------------------------

namespace detail {

inline void check_IN(long long I, long long N) {
  if (N <= 0 || N % 2 != 0) throw std::domain_error("degeneracy: N must be a positive even integer");
  if (I < 0 || I > N / 2) throw std::domain_error("degeneracy: require 0 <= I <= N/2");
}

inline unsigned long long binomial_ull(long long n, long long k) {
  if (k < 0 || k > n) return 0ull;
  if (k > n - k) k = n - k;
  unsigned long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * static_cast<unsigned long long>(n - k + i) / static_cast<unsigned long long>(i);
  return r;
}

}  // namespace detail

// Exact integer degeneracy, D_{I,N} = C(N, N/2-I) - C(N, N/2-I-1).
// Restricted to N <= 24 where 64-bit arithmetic is comfortably exact.
inline unsigned long long degeneracy_exact(long long I, long long N) {
  detail::check_IN(I, N);
  if (N > 24) throw std::domain_error("degeneracy_exact: N > 24, use log_degeneracy");
  return detail::binomial_ull(N, N / 2 - I) - detail::binomial_ull(N, N / 2 - I - 1);
}

// ln D_{I,N} via log-gamma: D = N! (2I+1) / ((N/2-I)! (N/2+I+1)!).
inline double log_degeneracy(long long I, long long N) {
  detail::check_IN(I, N);
  return std::lgamma(static_cast<double>(N) + 1.0) + std::log(2.0 * static_cast<double>(I) + 1.0) -
         std::lgamma(static_cast<double>(N / 2 - I) + 1.0) -
         std::lgamma(static_cast<double>(N / 2 + I) + 2.0);
}

inline double degeneracy(long long I, long long N) {
  if (N <= 24) return static_cast<double>(degeneracy_exact(I, N));
  return std::exp(log_degeneracy(I, N));
}

inline double log_weight_exact(long long I, long long N) {
  return std::log(2.0 * static_cast<double>(I) + 1.0) + log_degeneracy(I, N) -
         static_cast<double>(N) * std::log(2.0);
}

// w'_{I,N} = (2I+1) D_{I,N} / 2^N
inline double weight_exact(long long I, long long N) {
  if (N <= 24) {
    return (2.0 * static_cast<double>(I) + 1.0) * static_cast<double>(degeneracy_exact(I, N)) /
           std::pow(2.0, static_cast<double>(N));
  }
  return std::exp(log_weight_exact(I, N));
}

// large-N closed form: w' ~ 2^{5/2} I (2I+1) / (sqrt(pi) N^{3/2}) exp(-2 I^2 / N)
inline double weight_approx(double I, double N) {
  if (N <= 0) throw std::domain_error("weight_approx: N must be > 0");
  const double pref = std::pow(2.0, 2.5) / std::sqrt(std::numbers::pi);
  return pref * I * (2.0 * I + 1.0) / std::pow(N, 1.5) * std::exp(-2.0 * I * I / N);
}

// ---------------------------------------------------------------------------
// sampling and thermal states
// ---------------------------------------------------------------------------

// Evenly spaced manifolds I = first, first+spacing, ... with windows
// iz in [-floor(I*window_fraction), +floor(I*window_fraction)], weights
// renormalized to sum to 1 preserving ratios. Exact weights for small N,
// the closed-form approximation above that.
inline std::vector<ManifoldSpec> sample_manifolds(long long N, int count, int spacing,
                                                  double window_fraction, int first = 0) {
  if (count < 1) throw ConfigError("sampling.count: must be >= 1");
  if (spacing < 1) throw ConfigError("sampling.spacing: must be >= 1");
  if (window_fraction <= 0 || window_fraction > 1)
    throw ConfigError("sampling.window_fraction: must be in (0, 1]");
  if (first < 0) throw ConfigError("sampling.first_I: must be >= 0");
  long long top = static_cast<long long>(first) + static_cast<long long>(count - 1) * spacing;
  if (top > N / 2)
    throw ConfigError("sampling: largest sampled I = " + std::to_string(top) +
                      " exceeds N/2 = " + std::to_string(N / 2));

  std::vector<ManifoldSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  double total = 0;
  for (int k = 0; k < count; ++k) {
    long long I = first + static_cast<long long>(k) * spacing;
    ManifoldSpec s;
    s.I = static_cast<int>(I);
    s.iz_hi = static_cast<int>(std::floor(static_cast<double>(I) * window_fraction));
    s.iz_lo = -s.iz_hi;
    s.weight = (N <= 1000) ? weight_exact(I, N)
                           : weight_approx(static_cast<double>(I), static_cast<double>(N));
    total += s.weight;
    out.push_back(s);
  }
  if (total <= 0) throw NumericError("sample_manifolds: zero total weight");
  for (auto& s : out) s.weight /= total;
  return out;
}

// T = infinity initial state: electron up, nuclear maximally mixed over the window.
inline ManifoldState thermal_manifold(const ManifoldSpec& spec) {
  ManifoldState st;
  st.spec = spec;
  const int w = spec.window();
  st.rho = Matrix::Zero(2 * w, 2 * w);
  for (int j = 0; j < w; ++j) st.rho(j, j) = 1.0 / w;
  return st;
}

// <I_z^2> of the windowed uniform distribution
inline double thermal_iz_second_moment(const ManifoldSpec& spec) {
  double s = 0;
  for (int iz = spec.iz_lo; iz <= spec.iz_hi; ++iz) s += static_cast<double>(iz) * iz;
  return s / spec.window();
}

}  // namespace spincool
