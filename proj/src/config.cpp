#include "ptag/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string_view>

namespace ptag {

namespace {

constexpr std::array kKnownKeys = {
    "emitter.beta",
    "emitter.gamma1_per_ns",
    "emitter.gamma2_per_ns",
    "emitter.rho",
    "emitter.flux_per_s",
    "emitter.r12_per_ns",
    "emitter.excitation_prob",
    "emitter.pulse_rate_mhz",
    "optics.split_ratio",
    "optics.phase_rad",
    "optics.theta_deg",
    "optics.v_intrinsic",
    "optics.mz_loss",
    "detector.eta",
    "detector.dead_time_ns",
    "detector.jitter_fwhm_ps",
    "detector.dark_rate_per_s",
    "sim.duration_s",
    "sim.seed",
    "sim.resolution_ps",
    "coherent.rate_per_s",
    "scan.theta_start_deg",
    "scan.theta_stop_deg",
    "scan.theta_step_deg",
    "scan.point_duration_s",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

double require_double(const ConfigMap& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end())
    throw std::invalid_argument("missing required key: " + key);
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("key " + key + ": not a number: '" +
                                it->second + "'");
  }
}

double get_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  return cfg.count(key) ? require_double(cfg, key) : fallback;
}

std::uint64_t get_u64(const ConfigMap& cfg, const std::string& key,
                      std::uint64_t fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  const auto [p, err] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (err != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("key " + key + ": not an unsigned integer: '" +
                                s + "'");
  return v;
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (const auto hash = sv.find('#'); hash != std::string_view::npos)
      sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key{trim(sv.substr(0, eq))};
    const std::string value{trim(sv.substr(eq + 1))};
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key or value");
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    if (!cfg.emplace(key, value).second)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
  }
  return cfg;
}

ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw std::runtime_error(path.string() + ": cannot open config");
  return parse_config(f);
}

EmitterModel SimSetup::emitter() const {
  const double r12 =
      flux_per_s > 0 ? pump_rate_for_flux(target, flux_per_s) : r12_per_ns;
  return calibrate_rates(target, r12);
}

SimSetup make_setup(const ConfigMap& cfg, SimMode mode) {
  SimSetup s;

  if (mode != SimMode::Coherent) {
    s.target.beta = require_double(cfg, "emitter.beta");
    s.target.gamma1_per_ns = require_double(cfg, "emitter.gamma1_per_ns");
    s.target.gamma2_per_ns = require_double(cfg, "emitter.gamma2_per_ns");
    s.target.rho = require_double(cfg, "emitter.rho");
    validate(s.target);
    const bool has_flux = cfg.count("emitter.flux_per_s") > 0;
    const bool has_r12 = cfg.count("emitter.r12_per_ns") > 0;
    if (has_flux == has_r12)
      throw std::invalid_argument(
          "exactly one of emitter.flux_per_s and emitter.r12_per_ns is required");
    if (has_flux) s.flux_per_s = require_double(cfg, "emitter.flux_per_s");
    if (has_r12) s.r12_per_ns = require_double(cfg, "emitter.r12_per_ns");
  } else {
    s.coherent_rate_per_s = require_double(cfg, "coherent.rate_per_s");
    if (!(s.coherent_rate_per_s > 0))
      throw std::invalid_argument("coherent.rate_per_s must be positive");
  }

  if (mode == SimMode::Pulsed) {
    s.excitation_prob = require_double(cfg, "emitter.excitation_prob");
    if (s.excitation_prob < 0 || s.excitation_prob > 1)
      throw std::invalid_argument("emitter.excitation_prob must lie in [0, 1]");
    s.pulse_rate_mhz = get_double(cfg, "emitter.pulse_rate_mhz", 23.8);
    if (!(s.pulse_rate_mhz > 0))
      throw std::invalid_argument("emitter.pulse_rate_mhz must be positive");
  }

  s.optics.split_ratio = get_double(cfg, "optics.split_ratio", 0.5);
  s.optics.phase_rad = get_double(cfg, "optics.phase_rad", 0.0);
  s.optics.hwp_angle_deg = get_double(cfg, "optics.theta_deg", 0.0);
  s.optics.intrinsic_visibility = get_double(cfg, "optics.v_intrinsic", 1.0);
  s.optics.mz_loss = get_double(cfg, "optics.mz_loss", 0.5);
  validate(s.optics);

  s.detector.efficiency = require_double(cfg, "detector.eta");
  s.detector.dead_time_ps = static_cast<std::uint64_t>(
      std::llround(get_double(cfg, "detector.dead_time_ns", 24.0) * kPsPerNs));
  s.detector.jitter_fwhm_ps = get_double(cfg, "detector.jitter_fwhm_ps", 350.0);
  s.detector.dark_rate_per_s = get_double(cfg, "detector.dark_rate_per_s", 0.0);
  validate(s.detector);

  s.duration_s = require_double(cfg, "sim.duration_s");
  if (!(s.duration_s > 0))
    throw std::invalid_argument("sim.duration_s must be positive");
  s.seed = get_u64(cfg, "sim.seed", 1);
  const std::uint64_t res = get_u64(cfg, "sim.resolution_ps", kDefaultResolutionPs);
  if (res == 0 || res > UINT32_MAX)
    throw std::invalid_argument("sim.resolution_ps out of range");
  s.resolution_ps = static_cast<std::uint32_t>(res);

  s.scan.theta_start_deg = get_double(cfg, "scan.theta_start_deg", 0.0);
  s.scan.theta_stop_deg = get_double(cfg, "scan.theta_stop_deg", 90.0);
  s.scan.theta_step_deg = get_double(cfg, "scan.theta_step_deg", 2.5);
  s.scan.point_duration_s = get_double(cfg, "scan.point_duration_s", 20.0);
  if (mode == SimMode::MzScan) {
    if (!(s.scan.theta_step_deg > 0))
      throw std::invalid_argument("scan.theta_step_deg must be positive");
    if (s.scan.theta_stop_deg < s.scan.theta_start_deg)
      throw std::invalid_argument("scan.theta_stop_deg below scan.theta_start_deg");
    if (!(s.scan.point_duration_s > 0))
      throw std::invalid_argument("scan.point_duration_s must be positive");
  }
  return s;
}

}  // namespace ptag
