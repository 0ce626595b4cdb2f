#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "ptag/rng.hpp"
#include "ptag/types.hpp"

namespace ptag {

/// Streaming detector chain: Bernoulli efficiency, Gaussian timing jitter
/// (sigma = FWHM / 2.355, clipped at 8 sigma so reordering stays inside a
/// deterministic margin), per-channel non-paralyzable dead time, optional
/// dark counts. Sync tags pass through untouched: they are electronic markers,
/// not photon detections. Jittered times are re-quantized to the resolution
/// grid, clamped at zero on the left, and dropped beyond the duration.
///
/// Input must be pushed in raw-time order; output comes back in jittered-time
/// order. Pushing chunk by chunk gives exactly the same output as pushing the
/// whole stream at once, which is what the long-run pipeline relies on.
class DetectorProcess {
 public:
  DetectorProcess(const DetectorModel& model, std::uint64_t seed,
                  std::uint32_t resolution_ps, std::uint64_t duration_ps,
                  const std::vector<Channel>& dark_channels = {});

  void push(const TimeTag& raw, std::vector<TimeTag>& out);
  void finish(std::vector<TimeTag>& out);

  /// Largest backward displacement jitter can give a tag. Every output
  /// earlier than the raw-time cursor minus this margin has been emitted.
  std::uint64_t reorder_margin_ps() const { return margin_ps_; }

 private:
  struct Later {
    bool operator()(const TimeTag& a, const TimeTag& b) const {
      return time_order(b, a);
    }
  };

  void ingest(const TimeTag& raw);
  void drain(std::uint64_t threshold_ps, std::vector<TimeTag>& out);
  void emit(const TimeTag& t, std::vector<TimeTag>& out);

  DetectorModel model_;
  std::uint32_t resolution_ps_;
  std::uint64_t duration_ps_;
  double sigma_ps_ = 0;
  std::uint64_t margin_ps_ = 0;
  Rng rng_;
  std::priority_queue<TimeTag, std::vector<TimeTag>, Later> pending_;
  std::vector<TimeTag> darks_;  // pre-generated, consumed in time order
  std::size_t next_dark_ = 0;
  std::uint64_t last_accept_ps_[4];
  bool armed_[4] = {false, false, false, false};
};

/// One-shot application of the detector chain to a stream. Dark counts are
/// injected on every non-Sync channel present in the input.
TagStream apply_detector(const TagStream& s, const DetectorModel& model,
                         std::uint64_t seed);

}  // namespace ptag
