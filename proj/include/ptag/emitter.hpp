#pragma once

#include <cstdint>
#include <vector>

#include "ptag/rng.hpp"
#include "ptag/types.hpp"

namespace ptag {

enum class ExcitationMode { CW, Pulsed };

struct ExcitationConfig {
  ExcitationMode mode = ExcitationMode::CW;
  double pulse_rate_mhz = 23.8;  // pulsed only
  double excitation_prob = 0.1;  // pulsed only: per-pulse ground->excited probability
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  std::uint32_t resolution_ps = kDefaultResolutionPs;

  /// Pulse period 1/rate rounded to integer picoseconds (the value actually
  /// used, so callers can record it).
  std::uint64_t pulse_period_ps() const;
  std::uint64_t duration_ps() const;
};

std::vector<std::string> validate(const ExcitationConfig& c);

/// Forward map from a rate tuple to the stationary correlation parameters it
/// realizes, via eigen-decomposition of the reduced 2x2 rate matrix of the
/// occupation dynamics. rho is copied through from signal_fraction.
G2Model g2_params_from_rates(const EmitterModel& m);

/// Stationary signal emission rate r21 * p2_inf, photons per second.
double stationary_flux_per_s(const EmitterModel& m);

/// Inverse map: the rate tuple realizing the target correlation parameters
/// with the pump rate pinned at pump_hint_per_ns (targets fix three of the
/// four rates; the pump is the remaining degree of freedom). beta = 1 targets
/// come back with zero shelving. The result is cross-checked through the
/// forward map to relative tolerance 1e-3 before being returned.
EmitterModel calibrate_rates(const G2Model& target, double pump_hint_per_ns);

/// Pump rate on the slow-pump branch whose total output rate (KMC signal
/// plus the background floor, i.e. what a counter at the source output sees)
/// equals flux_per_s, for use as the pump hint. Throws when the requested
/// flux exceeds what the target parameters allow.
double pump_rate_for_flux(const G2Model& target, double flux_per_s);

/// Streaming kinetic Monte Carlo emitter. Emits Aux photon tags plus the
/// Poisson background implied by signal_fraction, quantized to the resolution
/// grid and strictly increasing. advance() produces tags in [last, until_ps)
/// so long runs can be pushed through downstream stages chunk by chunk; the
/// emitted stream does not depend on how it is chunked, except that the
/// background rate tracks the realized signal rate per advance() span.
class EmitterProcess {
 public:
  EmitterProcess(const EmitterModel& m, std::uint64_t seed,
                 std::uint32_t resolution_ps = kDefaultResolutionPs);

  void advance(std::uint64_t until_ps, std::vector<TimeTag>& out);
  std::uint64_t signal_count() const { return signal_count_; }
  std::uint64_t background_count() const { return background_count_; }

 private:
  void schedule();

  EmitterModel model_;
  std::uint32_t resolution_ps_;
  Rng rng_;
  Rng background_rng_;
  int level_ = 1;
  std::uint64_t clock_ps_ = 0;      // time of the last scheduled-from event
  std::uint64_t next_event_ps_ = 0; // pending transition
  std::uint64_t cursor_ps_ = 0;     // start of the next advance() span
  std::uint64_t signal_count_ = 0;
  std::uint64_t background_count_ = 0;
};

/// Continuous-excitation run over the configured duration: KMC photon
/// emissions merged with the background floor, background rate set so the
/// whole-run realized signal fraction is signal_fraction. Deterministic per
/// (model, config).
TagStream simulate_cw(const EmitterModel& m, const ExcitationConfig& c);

/// Pulsed run: Sync tags at every pulse; each pulse excites ground -> excited
/// with the configured probability, decay between pulses follows the same
/// rates (the pump rate is ignored). Photons on Aux, background as in CW.
TagStream simulate_pulsed(const EmitterModel& m, const ExcitationConfig& c);

/// Poisson photon stream on Aux at the given rate: the coherent-light control
/// source. Deterministic per seed.
TagStream simulate_coherent(double rate_per_s, double duration_s,
                            std::uint64_t seed,
                            std::uint32_t resolution_ps = kDefaultResolutionPs);

/// Appends coherent-source tags falling in [start_ps, end_ps), quantized to
/// the resolution grid. Restarting the gap draw at a span edge is exact for a
/// Poisson process, so long runs can be produced span by span.
void coherent_tags(Rng& rng, double rate_per_s, std::uint64_t start_ps,
                   std::uint64_t end_ps, std::uint32_t resolution_ps,
                   std::vector<TimeTag>& out);

}  // namespace ptag
