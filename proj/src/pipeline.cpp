#include "ptag/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ptag/detector.hpp"
#include "ptag/emitter.hpp"
#include "ptag/rng.hpp"

namespace ptag {

namespace {

// RNG stream ids within one run's seed space. The emitter claims 0 and 1
// internally.
constexpr std::uint64_t kCoherentStream = 2;
constexpr std::uint64_t kRouterStream = 3;
constexpr std::uint64_t kDetectorStream = 4;
constexpr std::uint64_t kScanPointBase = 100;

constexpr double kChunkTagBudget = 8e6;  // in-flight tags per chunk, max

std::uint64_t chunk_length_ps(double tags_per_s, std::uint64_t duration_ps,
                              std::uint32_t res) {
  double chunk_s = tags_per_s > 0 ? kChunkTagBudget / tags_per_s : 1e9;
  chunk_s = std::clamp(chunk_s, 1e-3, 120.0);
  auto chunk_ps = static_cast<std::uint64_t>(chunk_s * kPsPerSec);
  chunk_ps -= chunk_ps % res;  // grid-aligned edges keep spans collision-free
  chunk_ps = std::max<std::uint64_t>(chunk_ps, res);
  return std::min(chunk_ps, duration_ps);
}

struct Chain {
  RouterProcess router;
  DetectorProcess detector;

  Chain(const SimSetup& s, RoutingMode routing, std::uint64_t duration_ps)
      : router(s.optics, routing, derive_seed(s.seed, kRouterStream)),
        detector(s.detector, derive_seed(s.seed, kDetectorStream),
                 s.resolution_ps, duration_ps,
                 {Channel::DH, Channel::DV}) {}

  void feed(const std::vector<TimeTag>& emitted, std::vector<TimeTag>& out) {
    TimeTag routed;
    for (const TimeTag& t : emitted)
      if (router.route(t, routed)) detector.push(routed, out);
  }
};

// Drives source chunks through the chain into the caller-owned detected
// buffer; consume() runs after each chunk with the settled frontier and may
// drain the buffer (streaming use) or leave it to accumulate.
template <typename Source, typename Consume>
void run_chunks(const SimSetup& s, RoutingMode routing,
                std::uint64_t duration_ps, double emitted_rate_per_s,
                std::vector<TimeTag>& detected, Source&& source,
                Consume&& consume) {
  Chain chain(s, routing, duration_ps);
  const std::uint64_t chunk_ps =
      chunk_length_ps(emitted_rate_per_s, duration_ps, s.resolution_ps);
  std::vector<TimeTag> emitted;
  const std::uint64_t margin = chain.detector.reorder_margin_ps();

  std::uint64_t t0 = 0;
  while (t0 < duration_ps) {
    const std::uint64_t t1 = std::min(t0 + chunk_ps, duration_ps);
    emitted.clear();
    source(t0, t1, emitted);
    chain.feed(emitted, detected);
    const std::uint64_t settled = t1 > margin ? t1 - margin : 0;
    consume(detected, settled);
    t0 = t1;
  }
  chain.detector.finish(detected);
  consume(detected, duration_ps + 1);
}

std::uint64_t duration_ps_of(const SimSetup& s) {
  return static_cast<std::uint64_t>(std::llround(s.duration_s * kPsPerSec));
}

}  // namespace

TagStream run_chain(const SimSetup& s, SimMode mode, RoutingMode routing) {
  const std::uint64_t duration_ps = duration_ps_of(s);
  TagStream out;
  out.duration_ps = duration_ps;
  out.resolution_ps = s.resolution_ps;

  if (mode == SimMode::Pulsed) {
    // Pulsed runs are short (lifetime calibrations); one-shot generation.
    ExcitationConfig cfg;
    cfg.mode = ExcitationMode::Pulsed;
    cfg.pulse_rate_mhz = s.pulse_rate_mhz;
    cfg.excitation_prob = s.excitation_prob;
    cfg.duration_s = s.duration_s;
    cfg.seed = s.seed;
    cfg.resolution_ps = s.resolution_ps;
    const TagStream emitted = simulate_pulsed(s.emitter(), cfg);
    Chain chain(s, routing, duration_ps);
    chain.feed(emitted.tags, out.tags);
    chain.detector.finish(out.tags);
    return out;
  }

  double rate = 0;
  if (mode == SimMode::CW) {
    rate = s.emitter().mean_flux_per_s;
  } else if (mode == SimMode::Coherent) {
    rate = s.coherent_rate_per_s;
  } else {
    throw std::invalid_argument("scan mode has no single chain");
  }
  out.tags.reserve(static_cast<std::size_t>(
      std::min(rate * s.duration_s * 1.15, 2.5e8)));

  const auto keep = [](std::vector<TimeTag>&, std::uint64_t) {};
  if (mode == SimMode::CW) {
    EmitterProcess em(s.emitter(), s.seed, s.resolution_ps);
    run_chunks(
        s, routing, duration_ps, rate, out.tags,
        [&](std::uint64_t, std::uint64_t t1, std::vector<TimeTag>& buf) {
          em.advance(t1, buf);
        },
        keep);
  } else {
    Rng rng = make_rng(s.seed, kCoherentStream);
    run_chunks(
        s, routing, duration_ps, rate, out.tags,
        [&](std::uint64_t t0, std::uint64_t t1, std::vector<TimeTag>& buf) {
          coherent_tags(rng, s.coherent_rate_per_s, t0, t1, s.resolution_ps,
                        buf);
        },
        keep);
  }
  return out;
}

G2Histogram run_chain_g2(const SimSetup& s, double bin_width_ns,
                         double tau_max_ns) {
  const std::uint64_t duration_ps = duration_ps_of(s);
  StreamingG2 acc(bin_width_ns, tau_max_ns);
  EmitterProcess em(s.emitter(), s.seed, s.resolution_ps);
  const double rate = s.emitter().mean_flux_per_s;
  std::vector<TimeTag> scratch;
  run_chunks(
      s, RoutingMode::Population, duration_ps, rate, scratch,
      [&](std::uint64_t, std::uint64_t t1, std::vector<TimeTag>& buf) {
        em.advance(t1, buf);
      },
      [&](std::vector<TimeTag>& detected, std::uint64_t settled) {
        acc.push(detected, settled);
        detected.clear();
      });
  return acc.finish(duration_ps);
}

std::vector<double> scan_angles(const ScanGrid& grid) {
  std::vector<double> angles;
  const double span = grid.theta_stop_deg - grid.theta_start_deg;
  const auto n = static_cast<std::size_t>(
      std::floor(span / grid.theta_step_deg + 1e-9));
  angles.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    angles.push_back(grid.theta_start_deg +
                     static_cast<double>(i) * grid.theta_step_deg);
  return angles;
}

std::vector<ScanPoint> run_scan(
    const SimSetup& s,
    const std::function<void(std::size_t, double, const TagStream&)>& sink) {
  const std::vector<double> angles = scan_angles(s.scan);
  std::vector<ScanPoint> points;
  points.reserve(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    SimSetup point = s;
    point.optics.hwp_angle_deg = angles[i];
    point.duration_s = s.scan.point_duration_s;
    point.seed = derive_seed(s.seed, kScanPointBase + i);
    const TagStream detected =
        run_chain(point, SimMode::CW, RoutingMode::VisibilityScan);
    ScanPoint sp;
    sp.theta_deg = angles[i];
    sp.n_h = detected.count(Channel::DH);
    sp.n_v = detected.count(Channel::DV);
    points.push_back(sp);
    if (sink) sink(i, angles[i], detected);
  }
  return points;
}

}  // namespace ptag
