#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ptag/levmar.hpp"
#include "ptag/oracle.hpp"
#include "ptag/rng.hpp"

using namespace ptag;
using doctest::Approx;

namespace {

G2Model reference_model() {
  G2Model m;
  m.beta = 1.18;
  m.gamma1_per_ns = 0.035;
  m.gamma2_per_ns = 1.18e-4;
  m.rho = 0.925;
  return m;
}

}  // namespace

TEST_CASE("correlation model limits") {
  G2Model two_level;
  two_level.beta = 1.0;
  two_level.gamma1_per_ns = 0.04;
  two_level.gamma2_per_ns = 1e-5;
  CHECK(g2_model(0.0, two_level, false) == Approx(0.0).epsilon(1e-12));

  const G2Model m = reference_model();
  CHECK(g2_model(1e9, m, true) == Approx(1.0).epsilon(1e-9));
  // At zero delay the background-corrected value collapses to 1 - rho^2.
  CHECK(g2_model(0.0, m, true) == Approx(1.0 - 0.925 * 0.925).epsilon(1e-12));
}

TEST_CASE("window kernel phi: value, series regime, branch continuity") {
  CHECK(window_kernel_phi(1.0) == Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(window_kernel_phi(1e-8) == Approx(0.5 - 1e-8 / 6.0).epsilon(1e-12));
  // Branch handover at x = 0.5: the jump must be only the genuine slope
  // (phi' ~ -0.13), not a series-vs-direct mismatch.
  const double below = window_kernel_phi(0.5 - 1e-9);
  const double above = window_kernel_phi(0.5 + 1e-9);
  CHECK(std::abs(below - above) < 1e-9);
}

TEST_CASE("simple closed form: Taylor and saturation limits") {
  // Short windows: g2_D -> Gamma T / 3.
  CHECK(g2_detected_simple(0.035, 1e-6) ==
        Approx(0.035e-6 / 3.0).epsilon(1e-6));
  // Long windows: averaging washes the dip out entirely.
  CHECK(g2_detected_simple(0.035, 1e9) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("numeric integration agrees with the simple closed form to 1e-9") {
  G2Model m;
  m.beta = 1.0;
  m.gamma1_per_ns = 0.035;
  m.gamma2_per_ns = 1e-9;  // inert: amplitude beta - 1 = 0
  m.rho = 1.0;
  for (const double T : {0.5, 2.0, 10.0, 100.0}) {
    const double numeric = g2_detected_numeric(m, T);
    const double closed = g2_detected_simple(0.035, T);
    CHECK(numeric == Approx(closed).epsilon(1e-9));
  }
}

TEST_CASE("numeric integration agrees with the full closed form to 1e-9") {
  const G2Model m = reference_model();
  for (const double T : {1.0, 2.0, 10.0, 50.0, 100.0, 1000.0}) {
    const double numeric = g2_detected_numeric(m, T);
    const double closed = g2_detected_full(m, T);
    CHECK(numeric == Approx(closed).epsilon(1e-9));
  }
}

TEST_CASE("full closed form reproduces the frozen reference table") {
  // Independently integrated (nested Simpson over the model curve),
  // frozen to 9 decimals.
  const G2Model m = reference_model();
  const struct { double T, value; } table[] = {
      {0.5, 0.150235846},  {1, 0.156045697},   {2, 0.167514530},
      {5, 0.200751175},    {10, 0.252480165},  {20, 0.343769396},
      {50, 0.544614992},   {100, 0.736333862}, {500, 1.042234150},
      {1000, 1.092084061},
  };
  for (const auto& row : table)
    CHECK(g2_detected_full(m, row.T) == Approx(row.value).epsilon(2e-9));
}

TEST_CASE("Poisson limit: vanishing correlation amplitudes average to 1") {
  G2Model m;
  m.beta = 1.0;
  m.gamma1_per_ns = 0.035;
  m.gamma2_per_ns = 1e-9;
  m.rho = 1e-6;  // suppresses both amplitudes by rho^2
  for (const double T : {1.0, 20.0, 300.0})
    CHECK(g2_detected_numeric(m, T) == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("window-averaged correlation is monotone in window length") {
  const G2Model m = reference_model();
  double prev = 0.0;
  for (double T = 0.1; T <= 1000.0; T *= 1.6) {
    const double v = g2_detected_full(m, T);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("analytic populations: reference flux, 20 ns window") {
  const G2Model m = reference_model();
  const double flux = 1.507e5;
  const OraclePopulations o = populations_from_g2(m, flux, 20.0);
  CHECK(o.mu == Approx(3.014e-3).epsilon(1e-12));
  CHECK(o.g2_detected == Approx(0.343769396).epsilon(1e-8));
  CHECK(o.p.p2 == Approx(o.g2_detected * o.mu * o.mu / 2).epsilon(1e-12));
  CHECK(o.p.p1 == Approx(o.mu - 2 * o.p.p2).epsilon(1e-12));
  CHECK(o.p.p0 + o.p.p1 + o.p.p2 == Approx(1.0).epsilon(1e-15));
  CHECK(o.low_flux);
  // p1 ~ mu in this regime.
  CHECK(o.p.p1 == Approx(o.mu).epsilon(1e-2));
}

TEST_CASE("analytic populations: regime flag trips at mu >= 0.1") {
  const G2Model m = reference_model();
  const OraclePopulations o = populations_from_g2(m, 1.507e5, 1e6);
  CHECK_FALSE(o.low_flux);
}

TEST_CASE("least-squares engine recovers a known exponential") {
  // y = 3 exp(-0.2 t) + 0.5 with reproducible Gaussian noise.
  Rng rng = make_rng(42, 0);
  std::normal_distribution<double> noise(0.0, 0.01);
  const int n = 200;
  Eigen::VectorXd t(n), y(n);
  for (int i = 0; i < n; ++i) {
    t[i] = 0.1 * i;
    y[i] = 3.0 * std::exp(-0.2 * t[i]) + 0.5 + noise(rng);
  }
  auto residuals = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i)
      r[i] = (y[i] - (q[0] * std::exp(-q[1] * t[i]) + q[2])) / 0.01;
    return r;
  };
  Eigen::VectorXd init(3);
  init << 1.0, 0.5, 0.0;
  const FitOutcome fit = levmar_fit(residuals, init);
  CHECK(fit.converged);
  CHECK(fit.params[0] == Approx(3.0).epsilon(0.02));
  CHECK(fit.params[1] == Approx(0.2).epsilon(0.02));
  CHECK(fit.params[2] == Approx(0.5).epsilon(0.05));
  // Parameter errors should be sane: positive and small relative to values.
  CHECK(fit.covariance(0, 0) > 0);
  CHECK(std::sqrt(fit.covariance(1, 1)) < 0.05 * 0.2 * 10);
}

TEST_CASE("least-squares engine rejects a degenerate problem") {
  // Second parameter does not influence the residuals at all.
  auto residuals = [](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(5);
    for (int i = 0; i < 5; ++i) r[i] = q[0] - static_cast<double>(i);
    return r;
  };
  Eigen::VectorXd init(2);
  init << 0.0, 1.0;
  CHECK_THROWS_AS(levmar_fit(residuals, init), std::runtime_error);
}
