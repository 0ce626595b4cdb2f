#include "ptag/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace ptag {
namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

void require_valid(const EmitterModel& m) {
  auto problems = validate(m);
  if (!problems.empty())
    throw std::invalid_argument("invalid emitter model: " + problems.front());
}

void require_valid(const G2Model& m) {
  auto problems = validate(m);
  if (!problems.empty())
    throw std::invalid_argument("invalid correlation model: " + problems.front());
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > kNever - b) ? kNever : a + b;
}

/// Exponential waiting time in integer picoseconds; kNever for rate <= 0.
std::uint64_t exp_wait_ps(Rng& rng, double rate_per_ns) {
  if (rate_per_ns <= 0) return kNever;
  std::exponential_distribution<double> dist(rate_per_ns);
  const double ps = dist(rng) * 1000.0;
  if (!(ps < 9.0e18)) return kNever;
  return static_cast<std::uint64_t>(std::llround(ps));
}

std::uint64_t quantize(std::uint64_t t_ps, std::uint32_t res) {
  const std::uint64_t rem = t_ps % res;
  const std::uint64_t down = t_ps - rem;
  return (rem * 2 >= res) ? sat_add(down, res) : down;
}

/// Homogeneous Poisson tags on channel, quantized and deduplicated, over
/// [start, end).
void poisson_tags(Rng& rng, double rate_per_ns, std::uint64_t start,
                  std::uint64_t end, std::uint32_t res, Channel channel,
                  std::vector<TimeTag>& out) {
  if (rate_per_ns <= 0) return;
  std::uint64_t t = start;
  std::uint64_t prev = kNever;
  while (true) {
    t = sat_add(t, exp_wait_ps(rng, rate_per_ns));
    if (t >= end) break;
    const std::uint64_t q = quantize(t, res);
    if (q >= end || q == prev) continue;
    out.push_back({q, channel});
    prev = q;
  }
}

/// Merge two sorted same-channel tag vectors, dropping equal-time collisions.
std::vector<TimeTag> merge_dedup(const std::vector<TimeTag>& a,
                                 const std::vector<TimeTag>& b) {
  std::vector<TimeTag> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  std::uint64_t prev = kNever;
  while (i < a.size() || j < b.size()) {
    const bool take_a =
        j >= b.size() || (i < a.size() && a[i].time_ps <= b[j].time_ps);
    const TimeTag& t = take_a ? a[i++] : b[j++];
    if (t.time_ps == prev) continue;
    out.push_back(t);
    prev = t.time_ps;
  }
  return out;
}

}  // namespace

std::uint64_t ExcitationConfig::pulse_period_ps() const {
  return static_cast<std::uint64_t>(std::llround(1e6 / pulse_rate_mhz));
}

std::uint64_t ExcitationConfig::duration_ps() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * 1e12));
}

std::vector<std::string> validate(const ExcitationConfig& c) {
  std::vector<std::string> out;
  if (c.duration_s <= 0) out.push_back("duration must be > 0");
  if (c.resolution_ps == 0) out.push_back("resolution must be > 0");
  if (c.mode == ExcitationMode::Pulsed) {
    if (c.pulse_rate_mhz <= 0) out.push_back("pulse rate must be > 0");
    if (c.excitation_prob < 0 || c.excitation_prob > 1)
      out.push_back("excitation probability must be in [0, 1]");
  }
  return out;
}

G2Model g2_params_from_rates(const EmitterModel& m) {
  require_valid(m);
  const double r12 = m.pump_rate_per_ns, r21 = m.decay_rate_per_ns;
  const double r23 = m.shelving_rate_per_ns, r31 = m.deshelving_rate_per_ns;
  if (r12 <= 0)
    throw std::invalid_argument("forward map needs a positive pump rate");
  const double a = r12 + r21 + r23;

  G2Model out;
  out.rho = m.signal_fraction;
  if (r23 == 0) {
    // Shelf unreachable: pure two-level antibunching; the slow mode carries
    // zero weight and is reported at the deshelving rate nominally.
    out.beta = 1.0;
    out.gamma1_per_ns = a;
    out.gamma2_per_ns = r31;
    return out;
  }

  Eigen::Matrix2d M;
  M << -a, -r12, r23, -r31;
  const Eigen::EigenSolver<Eigen::Matrix2d> es(M);
  if (std::abs(es.eigenvalues()[0].imag()) > 1e-12 * std::abs(es.eigenvalues()[0].real()))
    throw std::invalid_argument("rate tuple gives oscillatory occupation dynamics");
  const double l0 = es.eigenvalues()[0].real();
  const double l1 = es.eigenvalues()[1].real();
  const double g_fast = -std::min(l0, l1);
  const double g_slow = -std::max(l0, l1);
  if (!(g_slow > 0))
    throw std::invalid_argument("rate tuple has a non-decaying mode");

  const double p2inf = r12 * r31 / (a * r31 + r12 * r23);
  const double beta = (r12 / p2inf - g_slow) / (g_fast - g_slow);
  if (beta < 1.0 - 1e-9)
    throw std::invalid_argument("rate tuple outside the antibunched regime");

  out.beta = std::max(beta, 1.0);
  out.gamma1_per_ns = g_fast;
  out.gamma2_per_ns = g_slow;
  return out;
}

double stationary_flux_per_s(const EmitterModel& m) {
  require_valid(m);
  const double r12 = m.pump_rate_per_ns, r21 = m.decay_rate_per_ns;
  const double r23 = m.shelving_rate_per_ns, r31 = m.deshelving_rate_per_ns;
  if (r12 <= 0) return 0.0;
  const double a = r12 + r21 + r23;
  double p2inf;
  if (r23 == 0) {
    p2inf = r12 / a;
  } else {
    p2inf = r12 * r31 / (a * r31 + r12 * r23);
  }
  return r21 * p2inf * 1e9;
}

EmitterModel calibrate_rates(const G2Model& target, double pump_hint_per_ns) {
  require_valid(target);
  if (pump_hint_per_ns <= 0)
    throw std::invalid_argument("pump hint must be > 0");
  const double b = target.beta, g1 = target.gamma1_per_ns,
               g2 = target.gamma2_per_ns;

  // Stationary correlation of the three-level system pins three combinations
  // of the four rates:
  //   r31        = g1 g2 / (b (g1 - g2) + g2)
  //   r12+r21+r23 = g1 + g2 - r31
  //   r12 * r23  = g1 g2 - (r12+r21+r23) r31
  // leaving the pump as the free family parameter.
  const double r31 = g1 * g2 / (b * (g1 - g2) + g2);
  const double a = g1 + g2 - r31;
  const double K = std::max(g1 * g2 - a * r31, 0.0);

  EmitterModel m;
  m.pump_rate_per_ns = pump_hint_per_ns;
  m.deshelving_rate_per_ns = r31;
  m.shelving_rate_per_ns = K > 0 ? K / pump_hint_per_ns : 0.0;
  m.decay_rate_per_ns = a - m.pump_rate_per_ns - m.shelving_rate_per_ns;
  m.signal_fraction = target.rho;
  if (m.decay_rate_per_ns <= 0)
    throw std::invalid_argument(
        "pump hint incompatible with target: no positive decay rate remains");
  // Diagnostic total rate at the source output: signal plus background.
  m.mean_flux_per_s = stationary_flux_per_s(m) / m.signal_fraction;

  const G2Model check = g2_params_from_rates(m);
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max(std::abs(y), 1e-300);
  };
  if (rel(check.beta, b) > 1e-3 || rel(check.gamma1_per_ns, g1) > 1e-3 ||
      (K > 0 && rel(check.gamma2_per_ns, g2) > 1e-3))
    throw std::runtime_error("rate calibration failed its forward check");
  return m;
}

double pump_rate_for_flux(const G2Model& target, double flux_per_s) {
  require_valid(target);
  if (flux_per_s <= 0) throw std::invalid_argument("flux must be > 0");
  const double b = target.beta, g1 = target.gamma1_per_ns,
               g2 = target.gamma2_per_ns;
  const double r31 = g1 * g2 / (b * (g1 - g2) + g2);
  const double a = g1 + g2 - r31;
  const double K = std::max(g1 * g2 - a * r31, 0.0);
  // flux_per_s counts every photon at the source output (signal plus the
  // background floor), which is what a power meter at that plane reports.
  // The KMC signal carries fraction rho of it. Signal rate as a function of
  // the pump is the downward parabola
  //   R(r12) = (a r12 - r12^2 - K) * (b (g1-g2) + g2) / 1e9 ... per second,
  // so the requested flux is a quadratic root; take the slow-pump branch.
  const double scale = b * (g1 - g2) + g2;  // = g1 g2 / r31
  const double f_ns = flux_per_s * target.rho / 1e9;
  const double c = K + f_ns * scale;
  const double disc = a * a - 4.0 * c;
  if (disc < 0)
    throw std::invalid_argument(
        "requested flux exceeds the maximum reachable for this target");
  return 0.5 * (a - std::sqrt(disc));
}

EmitterProcess::EmitterProcess(const EmitterModel& m, std::uint64_t seed,
                               std::uint32_t resolution_ps)
    : model_(m),
      resolution_ps_(resolution_ps),
      rng_(make_rng(seed, 0)),
      background_rng_(make_rng(seed, 1)) {
  require_valid(m);
  if (resolution_ps == 0)
    throw std::invalid_argument("resolution must be > 0");
  schedule();
}

void EmitterProcess::schedule() {
  double rate = 0;
  switch (level_) {
    case 1: rate = model_.pump_rate_per_ns; break;
    case 2: rate = model_.decay_rate_per_ns + model_.shelving_rate_per_ns; break;
    case 3: rate = model_.deshelving_rate_per_ns; break;
  }
  next_event_ps_ = sat_add(clock_ps_, exp_wait_ps(rng_, rate));
}

void EmitterProcess::advance(std::uint64_t until_ps,
                             std::vector<TimeTag>& out) {
  if (until_ps <= cursor_ps_) return;
  std::vector<TimeTag> signal;
  std::uint64_t prev = kNever;
  while (next_event_ps_ < until_ps) {
    const std::uint64_t t = next_event_ps_;
    switch (level_) {
      case 1:
        level_ = 2;
        break;
      case 2: {
        const double total =
            model_.decay_rate_per_ns + model_.shelving_rate_per_ns;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng_) < model_.decay_rate_per_ns / total) {
          const std::uint64_t q = quantize(t, resolution_ps_);
          if (q < until_ps && q != prev) {
            signal.push_back({q, Channel::Aux});
            prev = q;
          }
          level_ = 1;
        } else {
          level_ = 3;
        }
        break;
      }
      case 3:
        level_ = 1;
        break;
    }
    clock_ps_ = t;
    schedule();
  }

  signal_count_ += signal.size();

  // Background floor: Poisson at the rate that makes the realized signal
  // fraction of this span equal signal_fraction.
  std::vector<TimeTag> background;
  if (model_.signal_fraction < 1.0 && !signal.empty()) {
    const double span_ns =
        static_cast<double>(until_ps - cursor_ps_) / 1000.0;
    const double signal_rate = static_cast<double>(signal.size()) / span_ns;
    const double bg_rate =
        signal_rate * (1.0 - model_.signal_fraction) / model_.signal_fraction;
    poisson_tags(background_rng_, bg_rate, cursor_ps_, until_ps,
                 resolution_ps_, Channel::Aux, background);
    background_count_ += background.size();
  }

  std::vector<TimeTag> merged = merge_dedup(signal, background);
  // Boundary collision with the previous span: times are non-decreasing
  // across spans, only an exact repeat is possible.
  if (!out.empty() && !merged.empty() &&
      merged.front().time_ps == out.back().time_ps)
    merged.erase(merged.begin());
  out.insert(out.end(), merged.begin(), merged.end());
  cursor_ps_ = until_ps;
}

TagStream simulate_cw(const EmitterModel& m, const ExcitationConfig& c) {
  auto problems = validate(c);
  if (!problems.empty())
    throw std::invalid_argument("invalid excitation config: " + problems.front());
  TagStream out;
  out.duration_ps = c.duration_ps();
  out.resolution_ps = c.resolution_ps;
  EmitterProcess proc(m, c.seed, c.resolution_ps);
  proc.advance(out.duration_ps, out.tags);
  return out;
}

TagStream simulate_pulsed(const EmitterModel& m, const ExcitationConfig& c) {
  require_valid(m);
  auto problems = validate(c);
  if (!problems.empty())
    throw std::invalid_argument("invalid excitation config: " + problems.front());
  if (c.mode != ExcitationMode::Pulsed)
    throw std::invalid_argument("pulsed run requires pulsed mode config");

  TagStream out;
  out.duration_ps = c.duration_ps();
  out.resolution_ps = c.resolution_ps;
  const std::uint64_t period = c.pulse_period_ps();

  Rng rng = make_rng(c.seed, 0);
  Rng bg_rng = make_rng(c.seed, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<TimeTag> sync;
  std::vector<TimeTag> photons;
  std::uint64_t prev_photon = kNever;

  int level = 1;
  std::uint64_t next_event = kNever;
  const double decay_total = m.decay_rate_per_ns + m.shelving_rate_per_ns;

  for (std::uint64_t pulse = 0; pulse < out.duration_ps; pulse = sat_add(pulse, period)) {
    const std::uint64_t next_pulse = sat_add(pulse, period);
    sync.push_back({quantize(pulse, c.resolution_ps), Channel::Sync});

    if (level == 1 && u(rng) < c.excitation_prob) {
      level = 2;
      next_event = sat_add(pulse, exp_wait_ps(rng, decay_total));
    }
    while (next_event < next_pulse && next_event < out.duration_ps) {
      const std::uint64_t t = next_event;
      if (level == 2) {
        if (u(rng) < m.decay_rate_per_ns / decay_total) {
          const std::uint64_t q = quantize(t, c.resolution_ps);
          if (q < out.duration_ps && q != prev_photon) {
            photons.push_back({q, Channel::Aux});
            prev_photon = q;
          }
          level = 1;
          next_event = kNever;
        } else {
          level = 3;
          next_event = sat_add(t, exp_wait_ps(rng, m.deshelving_rate_per_ns));
        }
      } else if (level == 3) {
        level = 1;
        next_event = kNever;
      }
    }
  }

  std::vector<TimeTag> background;
  if (m.signal_fraction < 1.0 && !photons.empty()) {
    const double span_ns = static_cast<double>(out.duration_ps) / 1000.0;
    const double bg_rate = static_cast<double>(photons.size()) / span_ns *
                           (1.0 - m.signal_fraction) / m.signal_fraction;
    poisson_tags(bg_rng, bg_rate, 0, out.duration_ps, c.resolution_ps,
                 Channel::Aux, background);
  }

  std::vector<TimeTag> all_photons = merge_dedup(photons, background);
  out.tags.resize(sync.size() + all_photons.size());
  std::merge(sync.begin(), sync.end(), all_photons.begin(), all_photons.end(),
             out.tags.begin(), time_order);
  return out;
}

TagStream simulate_coherent(double rate_per_s, double duration_s,
                            std::uint64_t seed, std::uint32_t resolution_ps) {
  if (rate_per_s <= 0) throw std::invalid_argument("rate must be > 0");
  if (duration_s <= 0) throw std::invalid_argument("duration must be > 0");
  TagStream out;
  out.duration_ps = static_cast<std::uint64_t>(std::llround(duration_s * 1e12));
  out.resolution_ps = resolution_ps;
  Rng rng = make_rng(seed, 2);
  poisson_tags(rng, rate_per_s / 1e9, 0, out.duration_ps, resolution_ps,
               Channel::Aux, out.tags);
  return out;
}

void coherent_tags(Rng& rng, double rate_per_s, std::uint64_t start_ps,
                   std::uint64_t end_ps, std::uint32_t resolution_ps,
                   std::vector<TimeTag>& out) {
  if (rate_per_s <= 0) throw std::invalid_argument("rate must be > 0");
  poisson_tags(rng, rate_per_s / 1e9, start_ps, end_ps, resolution_ps,
               Channel::Aux, out);
}

}  // namespace ptag
