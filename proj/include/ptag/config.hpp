#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>

#include "ptag/emitter.hpp"
#include "ptag/optics.hpp"
#include "ptag/types.hpp"

namespace ptag {

/// Flat key=value text, UTF-8, '#' starts a comment, blank lines ignored.
/// Unknown keys are rejected so typos fail loudly.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in);
ConfigMap load_config(const std::filesystem::path& path);

struct ScanGrid {
  double theta_start_deg = 0;
  double theta_stop_deg = 90;
  double theta_step_deg = 2.5;
  double point_duration_s = 20;
};

/// Everything a simulation run needs, assembled from a ConfigMap with
/// defaults filled in. Pump strength comes either from emitter.flux_per_s
/// (photon flux entering the analysis stage, converted via the rate
/// calibration) or directly from emitter.r12_per_ns.
struct SimSetup {
  G2Model target;
  double flux_per_s = -1;
  double r12_per_ns = -1;
  double excitation_prob = 0.1;
  double pulse_rate_mhz = 23.8;
  OpticsConfig optics;
  DetectorModel detector;
  double duration_s = 1;
  std::uint64_t seed = 1;
  std::uint32_t resolution_ps = kDefaultResolutionPs;
  double coherent_rate_per_s = -1;
  ScanGrid scan;

  /// The calibrated emitter for this setup (resolves flux vs r12).
  EmitterModel emitter() const;
};

enum class SimMode { CW, Pulsed, Coherent, MzScan };

/// Builds a SimSetup, enforcing the required keys for the given mode and
/// validating every value. Throws std::invalid_argument with the offending
/// key in the message.
SimSetup make_setup(const ConfigMap& cfg, SimMode mode);

}  // namespace ptag
