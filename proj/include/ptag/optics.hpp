#pragma once

#include <cstdint>
#include <utility>

#include "ptag/rng.hpp"
#include "ptag/types.hpp"

namespace ptag {

/// How emissions are mapped onto the two analysis detectors.
/// Population: the interferometer is bypassed conceptually; each photon takes
/// path 1 (-> DV) with probability split_ratio, else path 2 (-> DH). Requires
/// the half-wave plate at zero. VisibilityScan: the photon is detected on DH
/// with the fringe probability P_H(theta, phi) below.
enum class RoutingMode { Population, VisibilityScan };

struct OpticsConfig {
  double split_ratio = 0.5;         // probability of path 1
  double phase_rad = 0.0;           // interferometer phase phi
  double hwp_angle_deg = 0.0;       // half-wave plate angle theta
  double intrinsic_visibility = 1.0;  // fringe amplitude actually realized
  double mz_loss = 0.5;             // combiner loss; survival = 1 - mz_loss
};

std::vector<std::string> validate(const OpticsConfig& c);

/// Single-photon detection probabilities behind the analyzer:
///   P_H = (1 + v sin(4 theta) cos phi) / 2,   P_V = 1 - P_H.
/// The fringe period in theta is 90 degrees.
std::pair<double, double> hwp_detection_probs(double theta_deg,
                                              double phase_rad,
                                              double intrinsic_visibility);

/// Streaming router: photon tags (Aux) survive the combiner with probability
/// 1 - mz_loss and are reassigned to DH / DV; all other channels pass through
/// untouched. Draw sequence is fixed, so results are reproducible per seed.
class RouterProcess {
 public:
  RouterProcess(const OpticsConfig& cfg, RoutingMode mode, std::uint64_t seed);

  /// Returns false when the photon is absorbed; otherwise fills routed.
  bool route(const TimeTag& in, TimeTag& routed);

 private:
  OpticsConfig cfg_;
  RoutingMode mode_;
  Rng rng_;
  double p_dh_ = 0.5;  // VisibilityScan detection probability for DH
};

/// One-shot routing of a full emission stream.
TagStream route_photons(const TagStream& emissions, const OpticsConfig& cfg,
                        RoutingMode mode, std::uint64_t seed);

}  // namespace ptag
