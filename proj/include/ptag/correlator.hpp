#pragma once

#include <cstdint>
#include <deque>

#include "ptag/types.hpp"

namespace ptag {

/// Multistart-multistop correlation: every pair (ta, tb) with
/// |tb - ta| <= tau_max contributes one count to the bin holding tb - ta.
/// Bins are left-closed right-open from -tau_max; pairs exactly at +tau_max
/// land in the last bin. Sweep is two-pointer, O(|a| + |b| + pairs).
/// Both streams must be non-empty with equal durations, and 2 * tau_max must
/// be an integer number of bins.
G2Histogram estimate_g2(const TagStream& a, const TagStream& b,
                        double bin_width_ns, double tau_max_ns);

/// Same result, computed over time-partitioned chunks (tau_max overlap
/// margins) on worker threads. Chunks own disjoint start-tag ranges, so the
/// summed histogram is bit-identical to the sequential one.
G2Histogram estimate_g2_parallel(const TagStream& a, const TagStream& b,
                                 double bin_width_ns, double tau_max_ns,
                                 unsigned n_chunks);

/// Incremental version of estimate_g2 for runs too large to hold in memory.
/// Feed detected tags chunk by chunk in time order (DH tags are starts, DV
/// tags stops, everything else is ignored); each push states a completeness
/// frontier no future tag can precede, so pairs are counted exactly once.
/// finish() produces the same counts estimate_g2 would give on the
/// concatenated stream.
class StreamingG2 {
 public:
  StreamingG2(double bin_width_ns, double tau_max_ns);

  void push(const std::vector<TimeTag>& tags, std::uint64_t complete_before_ps);
  G2Histogram finish(std::uint64_t duration_ps);

  std::uint64_t starts_seen() const { return n1_; }
  std::uint64_t stops_seen() const { return n2_; }

 private:
  void drain();

  double bin_width_ns_;
  double tau_max_ns_;
  std::int64_t w_ps_ = 0;
  std::int64_t tau_ps_ = 0;
  std::size_t n_bins_ = 0;
  std::vector<std::uint64_t> counts_;
  std::deque<std::int64_t> a_;
  std::deque<std::int64_t> b_;
  std::uint64_t n1_ = 0;
  std::uint64_t n2_ = 0;
  std::uint64_t frontier_ = 0;
};

/// Excitation-relative delay histogram for pulsed streams: for every photon
/// tag, the delay to the most recent preceding Sync tag. Bins cover one pulse
/// period (taken as the median Sync spacing). Photons before the first Sync
/// are excluded and counted separately, as are delays falling past the period
/// (possible only through quantization wobble of the Sync grid).
struct LifetimeHistogram {
  std::uint32_t bin_width_ps = 25;
  std::uint64_t period_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t photons_before_first_sync = 0;
  std::uint64_t overflow = 0;
  std::uint64_t total_photons = 0;

  double bin_center_ns(std::size_t i) const {
    return (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps) / 1000.0;
  }
};

LifetimeHistogram lifetime_histogram(const TagStream& s,
                                     std::uint32_t bin_width_ps);

}  // namespace ptag
