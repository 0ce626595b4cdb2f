#include "ptag/optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ptag {

std::vector<std::string> validate(const OpticsConfig& c) {
  std::vector<std::string> out;
  if (c.split_ratio < 0 || c.split_ratio > 1)
    out.push_back("split ratio must be in [0, 1]");
  if (c.mz_loss < 0 || c.mz_loss >= 1)
    out.push_back("combiner loss must be in [0, 1)");
  if (c.intrinsic_visibility < 0 || c.intrinsic_visibility > 1)
    out.push_back("intrinsic visibility must be in [0, 1]");
  return out;
}

std::pair<double, double> hwp_detection_probs(double theta_deg,
                                              double phase_rad,
                                              double intrinsic_visibility) {
  if (intrinsic_visibility < 0 || intrinsic_visibility > 1)
    throw std::invalid_argument("intrinsic visibility must be in [0, 1]");
  const double theta = theta_deg * std::numbers::pi / 180.0;
  const double ph =
      0.5 * (1.0 + intrinsic_visibility * std::sin(4.0 * theta) * std::cos(phase_rad));
  return {ph, 1.0 - ph};
}

RouterProcess::RouterProcess(const OpticsConfig& cfg, RoutingMode mode,
                             std::uint64_t seed)
    : cfg_(cfg), mode_(mode), rng_(make_rng(seed, 3)) {
  auto problems = validate(cfg);
  if (!problems.empty())
    throw std::invalid_argument("invalid optics config: " + problems.front());
  if (mode == RoutingMode::Population && cfg.hwp_angle_deg != 0.0)
    throw std::invalid_argument(
        "population routing requires the half-wave plate at zero");
  if (mode == RoutingMode::VisibilityScan)
    p_dh_ = hwp_detection_probs(cfg.hwp_angle_deg, cfg.phase_rad,
                                cfg.intrinsic_visibility)
                .first;
}

bool RouterProcess::route(const TimeTag& in, TimeTag& routed) {
  if (in.channel != Channel::Aux) {
    routed = in;
    return true;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) >= 1.0 - cfg_.mz_loss) return false;
  routed.time_ps = in.time_ps;
  if (mode_ == RoutingMode::Population) {
    routed.channel = u(rng_) < cfg_.split_ratio ? Channel::DV : Channel::DH;
  } else {
    routed.channel = u(rng_) < p_dh_ ? Channel::DH : Channel::DV;
  }
  return true;
}

TagStream route_photons(const TagStream& emissions, const OpticsConfig& cfg,
                        RoutingMode mode, std::uint64_t seed) {
  RouterProcess router(cfg, mode, seed);
  TagStream out;
  out.duration_ps = emissions.duration_ps;
  out.resolution_ps = emissions.resolution_ps;
  out.tags.reserve(emissions.tags.size());
  TimeTag routed;
  for (const TimeTag& t : emissions.tags)
    if (router.route(t, routed)) out.tags.push_back(routed);
  return out;
}

}  // namespace ptag
