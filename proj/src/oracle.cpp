#include "ptag/oracle.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace ptag {
namespace {

void require_valid_model(const G2Model& m) {
  auto problems = validate(m);
  if (!problems.empty())
    throw std::invalid_argument("invalid correlation model: " + problems.front());
}

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double window_kernel_phi(double x) {
  if (x < 0) throw std::invalid_argument("phi argument must be >= 0");
  if (x < 0.5) {
    // (x - 1 + e^{-x}) / x^2 = sum_{k>=2} (-x)^{k-2} / k!
    double sum = 0.0, term = 0.5;  // k = 2 term
    for (int k = 2; k < 40; ++k) {
      sum += term;
      term *= -x / static_cast<double>(k + 1);
      if (std::abs(term) < 1e-20 * std::abs(sum)) break;
    }
    return sum;
  }
  return (x - 1.0 + std::exp(-x)) / (x * x);
}

double g2_model(double tau_ns, const G2Model& m, bool with_background) {
  require_valid_model(m);
  const double scale = with_background ? m.rho * m.rho : 1.0;
  const double at = std::abs(tau_ns);
  return 1.0 - scale * m.beta * std::exp(-m.gamma1_per_ns * at) +
         scale * (m.beta - 1.0) * std::exp(-m.gamma2_per_ns * at);
}

double g2_detected_numeric(const G2Model& m, double window_ns) {
  require_valid_model(m);
  if (window_ns <= 0) throw std::invalid_argument("window must be > 0");
  const double T = window_ns;
  // Inner integrals are requested tight enough that the outer quadrature
  // still sees a smooth integrand at its own tolerance.
  const double outer_tol = 1e-11 * T * T;
  const double inner_tol = outer_tol / (64.0 * T);
  auto g2 = [&m](double tau) { return g2_model(tau, m, true); };
  auto inner = [&](double u) { return integrate(g2, 0.0, T - u, inner_tol); };
  const double total = integrate(inner, 0.0, T, outer_tol);
  return 2.0 * total / (T * T);
}

double g2_detected_simple(double gamma_per_ns, double window_ns) {
  if (gamma_per_ns <= 0) throw std::invalid_argument("gamma must be > 0");
  if (window_ns <= 0) throw std::invalid_argument("window must be > 0");
  // Equals (1 - e^{-gT} + g^2 T^2/2 - gT) / (g^2 T^2 / 2); the phi form is
  // the same expression with the cancellation-prone part isolated, and its
  // series covers g*T < 1e-3.
  return 1.0 - 2.0 * window_kernel_phi(gamma_per_ns * window_ns);
}

double g2_detected_full(const G2Model& m, double window_ns) {
  require_valid_model(m);
  if (window_ns <= 0) throw std::invalid_argument("window must be > 0");
  const double r2 = m.rho * m.rho;
  return 1.0 - 2.0 * r2 * m.beta * window_kernel_phi(m.gamma1_per_ns * window_ns) +
         2.0 * r2 * (m.beta - 1.0) * window_kernel_phi(m.gamma2_per_ns * window_ns);
}

OraclePopulations populations_from_g2(const G2Model& m, double flux_per_s,
                                      double window_ns) {
  if (flux_per_s <= 0) throw std::invalid_argument("flux must be > 0");
  OraclePopulations out;
  out.mu = flux_per_s * window_ns * 1e-9;
  out.g2_detected = g2_detected_full(m, window_ns);
  out.p.p2 = 0.5 * out.g2_detected * out.mu * out.mu;
  out.p.p1 = out.mu - 2.0 * out.p.p2;
  out.p.p0 = 1.0 - out.p.p1 - out.p.p2;
  out.low_flux = out.mu < 0.1;
  return out;
}

}  // namespace ptag
