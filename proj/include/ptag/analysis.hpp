#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ptag/correlator.hpp"
#include "ptag/types.hpp"

namespace ptag {

struct Uncertain {
  double value = 0;
  double err = 0;
};

/// Classifies consecutive windows of window_ns over the paired detector
/// streams: empty / one channel only / both channels. Multi-tag windows on a
/// single channel count as p1 and are reported in the diagnostic field. The
/// final partial window is discarded. Returns the detected populations with
/// binomial standard errors; corrected fields are a copy of detected until
/// invert_losses is applied.
PopulationEstimate window_populations(const TagStream& dh, const TagStream& dv,
                                      double window_ns);

/// Which one-detected-of-a-pair subtraction the inversion uses: Verbatim uses
/// the detected pair probability in the p1 numerator; SelfConsistent uses the
/// already-corrected one, which makes inversion the exact inverse of binomial
/// thinning.
enum class InversionMode { Verbatim, SelfConsistent };

/// Inverts detector losses with lumped efficiency eta:
///   p2 = p2_D / eta^2
///   p1 = (p1_D - 2 eta (1 - eta) p2_ref) / eta
///   p0 = 1 - p1 - p2
/// with p2_ref = p2_D (Verbatim) or p2 corrected (SelfConsistent).
/// Uncertainties propagate to first order from (p1_D, p2_D, eta). Negative
/// corrected values are clamped to zero and flagged.
PopulationEstimate invert_losses(const PopulationEstimate& detected,
                                 const Uncertain& eta,
                                 InversionMode mode = InversionMode::Verbatim);

struct EfficiencyInputs {
  Uncertain input_power_uw;       // power sent into the analysis stage
  Uncertain filter_transmission;  // attenuation applied for the measurement
  Uncertain detected_power_uw;    // power reaching the detectors
  double qe_ratio = 1.0;          // quantum-efficiency ratio between the
                                  // calibration and signal wavelengths
};

/// Lumped detection efficiency eta = qe_ratio * P_detected / (P_in * T_filters)
/// with relative errors added in quadrature. Rejects non-physical results
/// (eta outside (0, 1]).
Uncertain detection_efficiency(const EfficiencyInputs& in);

/// Two-photon contamination y_c = 2 (N / (N-1)) p2 p0 / p1^2 for N detection
/// stages (N = 2 here). Classical light has y_c >= 1; y_c < 1 witnesses
/// suppressed two-photon emission. First-order error propagation treating the
/// three populations as independent.
Uncertain contamination(const Probabilities& p, const Probabilities& p_err,
                        int n_detectors = 2);

struct ScanPoint {
  double theta_deg = 0;
  std::uint64_t n_h = 0;
  std::uint64_t n_v = 0;
};

struct VisibilityResult {
  double visibility = 0;      // mean of per-fringe |P_H - P_V| extrema
  double visibility_err = 0;  // standard error over fringes
  double fit_visibility = 0;  // cross-check: counts fitted to A(1 +- V sin 4theta)/2
  double fit_visibility_err = 0;
  double fit_amplitude = 0;
  std::vector<double> fringe_extrema;
  bool fit_converged = false;
};

/// Fringe visibility from a half-wave-plate scan. Needs at least 8 angles
/// spanning a full 90-degree fringe period and at least one count somewhere.
VisibilityResult visibility_from_scan(const std::vector<ScanPoint>& points);

/// Entanglement figures from visibility, contamination and populations:
/// C_N = max(V - sqrt(y_c), 0), C = (V - sqrt(y_c)) p1 / p clamped at zero,
/// and the total-state bound p * C. p is the success probability of the
/// generation stage the heralded concurrence is conditioned on.
ConcurrenceResult concurrence(const Uncertain& visibility, const Uncertain& y_c,
                              const Uncertain& p1, const Uncertain& p,
                              double window_ns = 0);

struct G2FitOptions {
  bool fit_beta = true;
  bool fit_gamma1 = true;
  bool fit_gamma2 = true;
  bool fit_rho = false;  // default: rho is a measured input, not a fit param
};

struct G2Fit {
  G2Model model;
  G2Model error;  // per-parameter standard errors, 0 for fixed params
  Eigen::MatrixXd covariance;
  int iterations = 0;
  bool converged = false;
  double chi2 = 0;
};

/// Weighted fit of the three-level correlation model to a histogram. Bins are
/// weighted by their Poisson standard error; zero-count bins borrow a
/// standard error from the smallest symmetric neighborhood with at least one
/// count. Throws on degenerate input (e.g. a flat histogram).
G2Fit fit_g2(const G2Histogram& h, const G2Model& initial,
             const G2FitOptions& opts = {});

struct LifetimeFit {
  double cutoff_ns = 0;
  Uncertain gamma_per_ns;
  Uncertain amplitude;
  Uncertain background;
  bool converged = false;
  double chi2 = 0;
};

struct LifetimeScan {
  std::vector<LifetimeFit> fits;
  double recommended_gamma_per_ns = 0;
  std::size_t recommended_index = 0;
  bool plateau_found = false;
};

/// Fits amplitude * exp(-gamma t) + background to the delay histogram for
/// each start cutoff, excluding a 1 ns guard before the period end where
/// wrap-around and jitter spill distort the tail. The recommended gamma is
/// the first cutoff whose estimate differs from its predecessor by under 2%.
/// Requires the histogram to cover at least 3 decay constants past the
/// largest cutoff.
LifetimeScan fit_lifetime(const LifetimeHistogram& h,
                          const std::vector<double>& cutoffs_ns);

}  // namespace ptag
