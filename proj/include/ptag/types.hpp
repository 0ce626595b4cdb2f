#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ptag {

inline constexpr std::uint64_t kPsPerNs = 1000;
inline constexpr std::uint64_t kPsPerSec = 1'000'000'000'000ULL;
inline constexpr std::uint32_t kDefaultResolutionPs = 25;

/// Channels carried by time tags. DH / DV are the two polarization-resolved
/// detectors behind the analysis polarizing splitter, Sync marks excitation
/// pulses, Aux carries raw emission streams and calibration inputs.
enum class Channel : std::uint8_t { DH = 0, DV = 1, Sync = 2, Aux = 3 };

const char* channel_name(Channel c);

/// One event at integer picosecond resolution. Integer times avoid
/// floating-point drift over acquisitions of many minutes.
struct TimeTag {
  std::uint64_t time_ps = 0;
  Channel channel = Channel::Aux;

  friend constexpr bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Orders by time, then channel number for equal times.
constexpr bool time_order(const TimeTag& a, const TimeTag& b) {
  if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
  return static_cast<std::uint8_t>(a.channel) < static_cast<std::uint8_t>(b.channel);
}

/// A time-ordered acquisition over [0, duration_ps]. Tag times are multiples
/// of resolution_ps and never exceed the duration.
struct TagStream {
  std::vector<TimeTag> tags;
  std::uint64_t duration_ps = 0;
  std::uint32_t resolution_ps = kDefaultResolutionPs;

  double duration_s() const {
    return static_cast<double>(duration_ps) / static_cast<double>(kPsPerSec);
  }
  std::size_t count(Channel c) const;
};

struct StreamViolation {
  std::size_t index = 0;  // offending tag, or size() for stream-level rules
  std::string rule;
};

/// Pure validation pass over every stream invariant: monotone non-decreasing
/// times, times within duration, channel values in range, times on the
/// resolution grid. Returns one entry per violation; empty means valid.
std::vector<StreamViolation> validate_stream(const TagStream& s);

/// Merges two streams with identical resolution into one time-ordered stream.
/// Duration is the max of the inputs.
TagStream merge_streams(const TagStream& a, const TagStream& b);

/// Keeps only tags on the given channel.
TagStream select_channel(const TagStream& s, Channel c);

/// Three-level emitter: ground (1), excited (2), shelf (3). Rates are per
/// nanosecond: pump 1->2, radiative decay 2->1 (each such transition emits one
/// photon), shelving 2->3, deshelving 3->1. signal_fraction is the fraction
/// rho = S/(S+B) of emitted tags that come from the emitter rather than the
/// Poisson background floor.
struct EmitterModel {
  double pump_rate_per_ns = 0;        // r12
  double decay_rate_per_ns = 0;       // r21
  double shelving_rate_per_ns = 0;    // r23
  double deshelving_rate_per_ns = 0;  // r31
  double signal_fraction = 1.0;       // rho in (0, 1]
  double mean_flux_per_s = 0;         // diagnostic: total output rate, signal + background
};

std::vector<std::string> validate(const EmitterModel& m);

/// Parameters of the stationary second-order correlation of the three-level
/// emitter: g2(tau) = 1 - beta exp(-gamma1 |tau|) + (beta-1) exp(-gamma2 |tau|),
/// and with the background floor folded in through rho,
/// g2(tau) = 1 - rho^2 beta exp(-gamma1 |tau|) + rho^2 (beta-1) exp(-gamma2 |tau|).
struct G2Model {
  double beta = 1.0;
  double gamma1_per_ns = 0;  // antibunching rate, > gamma2
  double gamma2_per_ns = 0;  // bunching (shelving) rate
  double rho = 1.0;          // signal fraction S/(S+B)
};

std::vector<std::string> validate(const G2Model& m);

/// Detector response applied to a stream: Bernoulli efficiency, Gaussian
/// timing jitter (sigma = FWHM / 2.355), non-paralyzable per-channel dead
/// time, and an optional dark-count floor.
struct DetectorModel {
  double efficiency = 1.0;          // in (0, 1]
  std::uint64_t dead_time_ps = 24000;
  double jitter_fwhm_ps = 350.0;
  double dark_rate_per_s = 0.0;
};

std::vector<std::string> validate(const DetectorModel& m);

/// Start-stop correlation histogram. Bins are left-closed right-open, width
/// bin_width_ns, covering [-tau_max_ns, +tau_max_ns); pairs landing exactly on
/// +tau_max are kept in the last bin. g2 holds the normalized value
/// c(tau) * T / (N1 * N2 * w) (count rates in the textbook formula), so
/// uncorrelated Poisson streams normalize to 1. sigma is the per-bin Poisson
/// standard error g2/sqrt(c), zero where c = 0.
struct G2Histogram {
  double bin_width_ns = 1.0;
  double tau_max_ns = 200.0;
  std::vector<std::uint64_t> counts;
  Eigen::ArrayXd g2;
  Eigen::ArrayXd sigma;
  std::uint64_t n1 = 0;    // tags in the first stream
  std::uint64_t n2 = 0;    // tags in the second stream
  double total_time_s = 0;

  std::size_t bin_count() const { return counts.size(); }
  double tau_center_ns(std::size_t i) const {
    return -tau_max_ns + (static_cast<double>(i) + 0.5) * bin_width_ns;
  }
};

std::vector<std::string> validate(const G2Histogram& h);

struct Probabilities {
  double p0 = 0, p1 = 0, p2 = 0;
};

/// State-generation window statistics. The acquisition is partitioned into
/// consecutive windows of window_ns (final partial window discarded); each
/// window is empty (p0), has tags in exactly one channel (p1, which includes
/// multi-tag single-channel windows, counted separately in the diagnostic), or
/// has tags in both channels (p2). detected is the raw estimate, corrected the
/// loss-inverted one; errors are binomial / first-order propagated.
struct PopulationEstimate {
  double window_ns = 0;
  std::uint64_t window_count = 0;
  Probabilities detected;
  Probabilities detected_err;
  Probabilities corrected;
  Probabilities corrected_err;
  bool clamped = false;                          // negative corrected value clamped to 0
  std::uint64_t multi_single_channel_windows = 0;
};

std::vector<std::string> validate(const PopulationEstimate& e);

/// Entanglement figures for one window duration. contamination is the
/// classical two-photon contamination y_c (>= 1 for classical light);
/// normalized_concurrence is C_N = max(V - sqrt(y_c), 0); concurrence is the
/// heralded C = (V - sqrt(y_c)) p1 / p clamped at zero, and total_bound the
/// lower bound p * C on the unheralded concurrence.
struct ConcurrenceResult {
  double window_ns = 0;
  double visibility = 0;
  double visibility_err = 0;
  double contamination = 0;
  double contamination_err = 0;
  double normalized_concurrence = 0;
  double normalized_concurrence_err = 0;
  double concurrence = 0;
  double concurrence_err = 0;
  double total_bound = 0;
  bool clamped = false;
};

std::vector<std::string> validate(const ConcurrenceResult& r);

}  // namespace ptag
