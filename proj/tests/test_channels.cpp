#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "spincool/channels.hpp"
#include "spincool/dicke.hpp"

using namespace spincool;

namespace {

Matrix ginibre_density(int dim, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Matrix m(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k) m(j, k) = cplx(g(rng), g(rng));
  Matrix rho = m * m.adjoint();
  rho /= rho.trace().real();
  return rho;
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// a (x) 1_w in the index = e*w + j ordering
Matrix electron_op(const Eigen::Matrix2cd& a, int w) {
  Matrix K = Matrix::Zero(2 * w, 2 * w);
  for (int e1 = 0; e1 < 2; ++e1)
    for (int e2 = 0; e2 < 2; ++e2)
      for (int j = 0; j < w; ++j) K(e1 * w + j, e2 * w + j) = a(e1, e2);
  return K;
}

Matrix kraus_apply(const std::vector<Matrix>& Ks, const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& K : Ks) out += K * rho * K.adjoint();
  return out;
}

Matrix kraus_completeness(const std::vector<Matrix>& Ks) {
  Matrix s = Matrix::Zero(Ks[0].rows(), Ks[0].cols());
  for (const auto& K : Ks) s += K.adjoint() * K;
  return s;
}

std::vector<Matrix> reset_kraus(int w) {
  Eigen::Matrix2cd up_up, up_dn;
  up_up << 1, 0, 0, 0;
  up_dn << 0, 1, 0, 0;
  return {electron_op(up_up, w), electron_op(up_dn, w)};
}

std::vector<Matrix> transverse_noise_kraus(int w, double W) {
  Eigen::Matrix2cd dn_up, up_dn;
  dn_up << 0, 0, 1, 0;
  up_dn << 0, 1, 0, 0;
  return {std::sqrt(W) * Matrix::Identity(2 * w, 2 * w),
          std::sqrt(1 - W) * electron_op(dn_up, w), std::sqrt(1 - W) * electron_op(up_dn, w)};
}

std::vector<Matrix> gad_kraus(int w, double gamma) {
  const double s = std::sqrt(1 - gamma), r = std::sqrt(gamma), h = std::sqrt(0.5);
  Eigen::Matrix2cd a0, a1, a2, a3;
  a0 << 1, 0, 0, s;
  a1 << 0, r, 0, 0;
  a2 << s, 0, 0, 1;
  a3 << 0, 0, r, 0;
  return {h * electron_op(a0, w), h * electron_op(a1, w), h * electron_op(a2, w),
          h * electron_op(a3, w)};
}

std::vector<Matrix> dephasing_kraus(int w, double k2) {  // k2 = e^{-Gamma T / 2}
  std::vector<Matrix> Ks{std::sqrt(k2) * Matrix::Identity(2 * w, 2 * w)};
  for (int j = 0; j < w; ++j) {
    Matrix P = Matrix::Zero(2 * w, 2 * w);
    P(j, j) = P(w + j, w + j) = std::sqrt(1 - k2);
    Ks.push_back(P);
  }
  return Ks;
}

// direct Simpson quadrature of B(tau) = int_0^tau (tau - t) e^{-G t/2} cos(w t) dt
double simpson_B(double tau, double Gamma, double omega_n, int n = 20000) {
  const double G = 2 * kPi * Gamma, w = 2 * kPi * omega_n, h = tau / n;
  auto f = [&](double t) { return (tau - t) * std::exp(-G * t / 2) * std::cos(w * t); };
  double s = f(0) + f(tau);
  for (int k = 1; k < n; ++k) s += f(k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3;
}

double sigma_sq_to_B(double tau, double I, double iz2, const NoiseParams& np) {
  const double amp = I * I - iz2;
  return transverse_noise_sigma_sq(tau, I, iz2, np) / (amp * std::pow(2 * kPi * np.A_nc, 2));
}

}  // namespace

TEST_CASE("channel Kraus sets are complete and match the implementations") {
  const ManifoldSpec spec{42, -3, 3, 1.0};
  const int w = spec.window();
  const NoiseParams np;  // defaults: Gamma 6, Gamma_opt 1.7, omega_n 25.3, A_nc 0.156
  const double tau = 0.05, T = 0.086;
  std::mt19937 rng(1234);

  for (int trial = 0; trial < 25; ++trial) {
    Matrix rho = ginibre_density(2 * w, rng);

    {
      ManifoldState st{spec, rho};
      reset_channel(st);
      auto Ks = reset_kraus(w);
      REQUIRE(max_diff(kraus_completeness(Ks), Matrix::Identity(2 * w, 2 * w)) < 1e-14);
      REQUIRE(max_diff(st.rho, kraus_apply(Ks, rho)) < 1e-13);
    }
    {
      ManifoldState st{spec, rho};
      const double W = transverse_noise_factor(tau, spec.I, st.iz_second_moment(), np);
      transverse_noise_channel(st, tau, np);
      auto Ks = transverse_noise_kraus(w, W);
      REQUIRE(max_diff(kraus_completeness(Ks), Matrix::Identity(2 * w, 2 * w)) < 1e-14);
      REQUIRE(max_diff(st.rho, kraus_apply(Ks, rho)) < 1e-13);
    }
    {
      ManifoldState st{spec, rho};
      optical_relaxation_channel(st, T, np.Gamma_opt);
      const double gamma = 1 - std::exp(-np.Gamma_opt * T);
      auto Ks = gad_kraus(w, gamma);
      REQUIRE(max_diff(kraus_completeness(Ks), Matrix::Identity(2 * w, 2 * w)) < 1e-14);
      REQUIRE(max_diff(st.rho, kraus_apply(Ks, rho)) < 1e-13);
    }
    {
      ManifoldState st{spec, rho};
      nuclear_dephasing_channel(st, T, np.Gamma);
      auto Ks = dephasing_kraus(w, std::exp(-np.Gamma * T / 2));
      REQUIRE(max_diff(kraus_completeness(Ks), Matrix::Identity(2 * w, 2 * w)) < 1e-14);
      REQUIRE(max_diff(st.rho, kraus_apply(Ks, rho)) < 1e-13);
    }
  }
}

TEST_CASE("channels preserve trace, hermiticity and positivity on random states") {
  const ManifoldSpec spec{70, -5, 5, 1.0};
  const NoiseParams np;
  std::mt19937 rng(77);

  for (int trial = 0; trial < 100; ++trial) {
    for (int ch = 0; ch < 4; ++ch) {
      ManifoldState st{spec, ginibre_density(2 * spec.window(), rng)};
      switch (ch) {
        case 0: reset_channel(st); break;
        case 1: transverse_noise_channel(st, 0.05, np); break;
        case 2: optical_relaxation_channel(st, 0.086, np.Gamma_opt); break;
        case 3: nuclear_dephasing_channel(st, 0.086, np.Gamma); break;
      }
      INFO("trial " << trial << " channel " << ch);
      REQUIRE(std::abs(st.trace() - 1) < 1e-12);
      REQUIRE(st.hermiticity_error() < 1e-12);
      REQUIRE(st.min_eigenvalue() > -1e-10);
    }
  }
}

TEST_CASE("reset is idempotent and preserves the nuclear marginal") {
  const ManifoldSpec spec{28, -2, 2, 1.0};
  std::mt19937 rng(5);
  ManifoldState st{spec, ginibre_density(2 * spec.window(), rng)};
  const Matrix marg = st.nuclear_marginal();
  reset_channel(st);
  REQUIRE(max_diff(st.nuclear_marginal(), marg) < 1e-14);
  REQUIRE(st.electron_up_population() == Catch::Approx(1.0).margin(1e-14));
  Matrix once = st.rho;
  reset_channel(st);
  REQUIRE(max_diff(st.rho, once) == 0.0);
}

TEST_CASE("relaxation and dephasing compose as semigroups") {
  const ManifoldSpec spec{28, -2, 2, 1.0};
  std::mt19937 rng(6);
  Matrix rho = ginibre_density(2 * spec.window(), rng);

  ManifoldState a{spec, rho}, b{spec, rho};
  optical_relaxation_channel(a, 0.03, 1.7);
  optical_relaxation_channel(a, 0.056, 1.7);
  optical_relaxation_channel(b, 0.086, 1.7);
  REQUIRE(max_diff(a.rho, b.rho) < 1e-13);

  ManifoldState c{spec, rho}, d{spec, rho};
  nuclear_dephasing_channel(c, 0.03, 6.0);
  nuclear_dephasing_channel(c, 0.056, 6.0);
  nuclear_dephasing_channel(d, 0.086, 6.0);
  REQUIRE(max_diff(c.rho, d.rho) < 1e-13);
}

TEST_CASE("optical relaxation drives the electron to the maximally mixed state") {
  const ManifoldSpec spec{14, -1, 1, 1.0};
  ManifoldState st = thermal_manifold(spec);  // electron fully up
  optical_relaxation_channel(st, 50.0, 1.7);  // Gamma_opt T >> 1
  REQUIRE(st.electron_up_population() == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("noise kernel closed form matches direct quadrature") {
  NoiseParams np;
  np.A_nc = 0.156;
  double worst = 0;
  for (double tau : {0.005, 0.03, 0.098, 0.4})
    for (double Gamma : {0.0, 2.0, 6.0})
      for (double omega_n : {0.0, 25.3, 32.7}) {
        np.Gamma = Gamma;
        np.omega_n = omega_n;
        const double B = sigma_sq_to_B(tau, 60.0, 100.0, np);
        worst = std::max(worst, std::abs(B - simpson_B(tau, Gamma, omega_n)));
      }
  REQUIRE(worst < 1e-10);
}

TEST_CASE("noise kernel limits and continuity") {
  NoiseParams np;
  np.Gamma = 0;
  np.omega_n = 0;
  const double tau = 0.05;
  // G = w = 0: B = tau^2 / 2 exactly
  REQUIRE(sigma_sq_to_B(tau, 60.0, 100.0, np) == Catch::Approx(tau * tau / 2).epsilon(1e-12));
  // the closed form approaches the limit smoothly
  np.Gamma = 1e-7;
  np.omega_n = 1e-7;
  REQUIRE(sigma_sq_to_B(tau, 60.0, 100.0, np) == Catch::Approx(tau * tau / 2).epsilon(1e-6));
}

TEST_CASE("contrast is in (0, 1] and decreases with transverse variance") {
  const NoiseParams np;
  double prev = 1.1;
  for (double iz2 : {3600.0, 2500.0, 1600.0, 900.0, 400.0, 100.0, 0.0}) {
    const double W = transverse_noise_factor(0.05, 60.0, iz2, np);
    REQUIRE(W > 0);
    REQUIRE(W <= 1);
    REQUIRE(W < prev);  // amp = I^2 - iz2 grows down this list
    prev = W;
  }
  // variance argument above I^2: amp clamps at zero, contrast saturates at 1
  REQUIRE(transverse_noise_factor(0.05, 1.0, 2.0, np) == 1.0);
}

TEST_CASE("transverse noise reads <I_z^2> from the live state") {
  const ManifoldSpec spec{42, -3, 3, 1.0};
  const NoiseParams np;
  const int w = spec.window();

  auto coherent_state = [&](int iz_a, int iz_b) {
    // equal superposition of electron up/down on site iz_a, plus weight on iz_b
    ManifoldState st{spec, Matrix::Zero(2 * w, 2 * w)};
    const int a_up = st.idx(0, iz_a), a_dn = st.idx(1, iz_a), b_up = st.idx(0, iz_b);
    st.rho(a_up, a_up) = st.rho(a_dn, a_dn) = 0.25;
    st.rho(a_up, a_dn) = st.rho(a_dn, a_up) = 0.25;
    st.rho(b_up, b_up) = 0.5;
    return st;
  };

  ManifoldState narrow = coherent_state(0, 1);  // <I_z^2> = 0.5
  ManifoldState wide = coherent_state(0, 3);    // <I_z^2> = 4.5
  const double W_narrow = transverse_noise_factor(0.05, spec.I, 0.5, np);
  const double W_wide = transverse_noise_factor(0.05, spec.I, 4.5, np);
  REQUIRE(W_narrow < W_wide);  // larger amp = I^2 - iz2 for the narrow state

  transverse_noise_channel(narrow, 0.05, np);
  transverse_noise_channel(wide, 0.05, np);
  const int a_up = narrow.idx(0, 0), a_dn = narrow.idx(1, 0);
  REQUIRE(narrow.rho(a_up, a_dn).real() == Catch::Approx(0.25 * W_narrow).margin(1e-14));
  REQUIRE(wide.rho(a_up, a_dn).real() == Catch::Approx(0.25 * W_wide).margin(1e-14));
}

TEST_CASE("zero-duration and zero-rate channels are the identity") {
  const ManifoldSpec spec{28, -2, 2, 1.0};
  std::mt19937 rng(8);
  Matrix rho = ginibre_density(2 * spec.window(), rng);
  NoiseParams np;
  np.A_nc = 0;  // no transverse coupling: W = 1

  ManifoldState st{spec, rho};
  transverse_noise_channel(st, 0.05, np);
  REQUIRE(max_diff(st.rho, rho) == 0.0);
  optical_relaxation_channel(st, 0.0, 1.7);
  optical_relaxation_channel(st, 0.086, 0.0);
  nuclear_dephasing_channel(st, 0.0, 6.0);
  nuclear_dephasing_channel(st, 0.086, 0.0);
  REQUIRE(max_diff(st.rho, rho) == 0.0);
}
