#pragma once

#include "ptag/types.hpp"

namespace ptag {

/// Stationary second-order correlation of the three-level emitter at delay
/// tau (ns). With with_background the amplitudes are scaled by rho^2, which is
/// how an uncorrelated Poisson floor with signal fraction rho enters.
double g2_model(double tau_ns, const G2Model& m, bool with_background);

/// Detected (window-averaged) zero-delay correlation for a state-generation
/// window of length window_ns:
///
///   g2_D(0) = (2 / T^2) * Int_0^T du Int_0^{T-u} g2(tau) dtau
///
/// evaluated by nested adaptive Simpson quadrature to ~1e-10 absolute. This
/// is the independent cross-check for the closed forms below; it never uses
/// their algebra.
double g2_detected_numeric(const G2Model& m, double window_ns);

/// Closed form of the window-averaged correlation for the single-exponential
/// model g2(tau) = 1 - exp(-gamma |tau|):
///
///   g2_D(0) = (1 - e^{-gT} + g^2 T^2 / 2 - g T) / (g^2 T^2 / 2)
///
/// with a series fallback for g*T < 1e-3 where the direct expression loses
/// all significant digits to cancellation.
double g2_detected_simple(double gamma_per_ns, double window_ns);

/// Closed form of the window-averaged correlation for the full
/// background-corrected model. Algebraically regrouped around
/// phi(x) = (x - 1 + e^{-x}) / x^2 so it stays stable when gamma2 * T is
/// tiny; phi switches to its series automatically (covers T * gamma2 < 1e-6
/// and far beyond).
double g2_detected_full(const G2Model& m, double window_ns);

struct OraclePopulations {
  double mu = 0;           // mean photons per window, flux * T
  double g2_detected = 0;  // window-averaged correlation used
  Probabilities p;         // {p0, p1, p2}
  bool low_flux = true;    // mu < 0.1 regime check
};

/// Analytic window populations implied by the model: p2 = g2_D(0) mu^2 / 2,
/// p1 = mu - 2 p2, p0 = 1 - p1 - p2, valid in the low-flux regime mu << 1.
/// flux_per_s is the photon rate at the loss-correction reference plane.
OraclePopulations populations_from_g2(const G2Model& m, double flux_per_s,
                                      double window_ns);

/// Stable evaluation of (x - 1 + e^{-x}) / x^2, the window-averaging kernel
/// shared by the closed forms. Series for small x, direct otherwise.
double window_kernel_phi(double x);

}  // namespace ptag
