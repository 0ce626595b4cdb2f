#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ptag/detector.hpp"
#include "ptag/optics.hpp"

using namespace ptag;
using doctest::Approx;

namespace {

TagStream aux_stream(std::size_t n, std::uint64_t spacing_ps,
                     std::uint64_t start_ps = 0) {
  TagStream s;
  s.tags.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    s.tags.push_back({start_ps + i * spacing_ps, Channel::Aux});
  s.duration_ps = start_ps + n * spacing_ps;
  return s;
}

}  // namespace

TEST_CASE("analyzer fringe probabilities") {
  SUBCASE("half-wave plate at zero splits evenly") {
    const auto [ph, pv] = hwp_detection_probs(0.0, 0.7, 1.0);
    CHECK(ph == Approx(0.5).epsilon(1e-15));
    CHECK(pv == Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("fringe extrema sit a quarter period apart") {
    CHECK(hwp_detection_probs(22.5, 0.0, 1.0).first == Approx(1.0).epsilon(1e-12));
    CHECK(hwp_detection_probs(67.5, 0.0, 1.0).first == Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(hwp_detection_probs(45.0, 0.0, 1.0).first == Approx(0.5).epsilon(1e-12));
    // A pi phase flips the fringe.
    CHECK(hwp_detection_probs(22.5, std::acos(-1.0), 1.0).first ==
          Approx(0.0).scale(1).epsilon(1e-12));
  }
  SUBCASE("amplitude scales with the intrinsic visibility") {
    const auto [ph, pv] = hwp_detection_probs(22.5, 0.0, 0.93);
    CHECK(ph == Approx((1.0 + 0.93) / 2.0).epsilon(1e-12));
    CHECK(ph + pv == Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("period is 90 degrees and probabilities always sum to one") {
    for (double th = -40.0; th <= 130.0; th += 7.3) {
      const auto [ph, pv] = hwp_detection_probs(th, 0.4, 0.8);
      const auto [ph2, pv2] = hwp_detection_probs(th + 90.0, 0.4, 0.8);
      CHECK(ph + pv == Approx(1.0).epsilon(1e-15));
      CHECK(ph == Approx(ph2).epsilon(1e-9));
    }
  }
  SUBCASE("visibility outside [0, 1] is rejected") {
    CHECK_THROWS_AS(hwp_detection_probs(10.0, 0.0, 1.5), std::invalid_argument);
  }
}

TEST_CASE("population routing: split statistics and loss") {
  const TagStream in = aux_stream(200000, 5000);
  OpticsConfig cfg;
  cfg.split_ratio = 0.5;
  cfg.mz_loss = 0.5;

  const TagStream out = route_photons(in, cfg, RoutingMode::Population, 42);
  const TagStream again = route_photons(in, cfg, RoutingMode::Population, 42);
  CHECK(out.tags == again.tags);
  CHECK(validate_stream(out).empty());

  const double n = static_cast<double>(out.tags.size());
  CHECK(n == Approx(100000.0).epsilon(0.03));  // half survive the combiner
  CHECK(out.count(Channel::DH) + out.count(Channel::DV) == out.tags.size());
  CHECK(static_cast<double>(out.count(Channel::DV)) ==
        Approx(n / 2.0).epsilon(0.03));
}

TEST_CASE("population routing: degenerate splits are exact") {
  const TagStream in = aux_stream(5000, 2000);
  OpticsConfig cfg;
  cfg.mz_loss = 0.0;

  cfg.split_ratio = 1.0;
  TagStream out = route_photons(in, cfg, RoutingMode::Population, 1);
  CHECK(out.tags.size() == in.tags.size());  // lossless combiner
  CHECK(out.count(Channel::DV) == in.tags.size());

  cfg.split_ratio = 0.0;
  out = route_photons(in, cfg, RoutingMode::Population, 1);
  CHECK(out.count(Channel::DH) == in.tags.size());
}

TEST_CASE("fringe routing follows the analyzer probabilities") {
  const TagStream in = aux_stream(20000, 3000);
  OpticsConfig cfg;
  cfg.mz_loss = 0.0;
  cfg.intrinsic_visibility = 1.0;

  cfg.hwp_angle_deg = 22.5;  // fringe maximum: every photon exits on DH
  TagStream out = route_photons(in, cfg, RoutingMode::VisibilityScan, 9);
  CHECK(out.count(Channel::DH) == in.tags.size());

  cfg.hwp_angle_deg = 67.5;  // fringe minimum
  out = route_photons(in, cfg, RoutingMode::VisibilityScan, 9);
  CHECK(out.count(Channel::DV) == in.tags.size());

  cfg.hwp_angle_deg = 10.0;
  cfg.intrinsic_visibility = 0.9;
  out = route_photons(in, cfg, RoutingMode::VisibilityScan, 9);
  const double p_dh = hwp_detection_probs(10.0, 0.0, 0.9).first;
  CHECK(static_cast<double>(out.count(Channel::DH)) ==
        Approx(p_dh * static_cast<double>(in.tags.size())).epsilon(0.03));
}

TEST_CASE("router passes non-photon channels through and validates config") {
  TagStream in;
  in.tags = {{0, Channel::Sync}, {1000, Channel::Aux}, {2000, Channel::Sync}};
  in.duration_ps = 3000;
  OpticsConfig cfg;
  cfg.mz_loss = 0.0;
  const TagStream out = route_photons(in, cfg, RoutingMode::Population, 5);
  CHECK(out.count(Channel::Sync) == 2);
  CHECK(out.tags.front() == TimeTag{0, Channel::Sync});

  OpticsConfig bad = cfg;
  bad.mz_loss = 1.0;
  CHECK_THROWS_AS(route_photons(in, bad, RoutingMode::Population, 5),
                  std::invalid_argument);

  OpticsConfig tilted = cfg;
  tilted.hwp_angle_deg = 5.0;  // population mode needs the plate at zero
  CHECK_THROWS_AS(route_photons(in, tilted, RoutingMode::Population, 5),
                  std::invalid_argument);
}

TEST_CASE("detector efficiency thins by a Bernoulli draw") {
  TagStream in = aux_stream(100000, 2000);
  for (TimeTag& t : in.tags) t.channel = Channel::DH;

  DetectorModel m;
  m.efficiency = 0.3;
  m.jitter_fwhm_ps = 0.0;
  m.dead_time_ps = 0;

  const TagStream out = apply_detector(in, m, 17);
  const TagStream again = apply_detector(in, m, 17);
  CHECK(out.tags == again.tags);
  CHECK(validate_stream(out).empty());
  CHECK(static_cast<double>(out.tags.size()) == Approx(30000.0).epsilon(0.025));
  // With no jitter the surviving tags keep their raw times.
  for (std::size_t i = 1; i < out.tags.size(); ++i)
    CHECK(out.tags[i].time_ps % 2000 == 0);
}

TEST_CASE("dead time suppresses close same-channel pairs") {
  TagStream in = aux_stream(100000, 10000);  // one tag every 10 ns
  for (TimeTag& t : in.tags) t.channel = Channel::DH;

  DetectorModel m;
  m.efficiency = 1.0;
  m.jitter_fwhm_ps = 0.0;
  m.dead_time_ps = 25000;

  const TagStream out = apply_detector(in, m, 3);
  REQUIRE(!out.tags.empty());
  for (std::size_t i = 1; i < out.tags.size(); ++i)
    CHECK(out.tags[i].time_ps - out.tags[i - 1].time_ps >= m.dead_time_ps);
  // Non-paralyzable recovery: accept, skip two, accept the third.
  CHECK(out.tags.size() == (in.tags.size() + 2) / 3);
}

TEST_CASE("dead time is tracked per channel") {
  TagStream in;
  in.tags = {{0, Channel::DH}, {5000, Channel::DV},
             {10000, Channel::DH}, {15000, Channel::DV}};
  in.duration_ps = 20000;
  DetectorModel m;
  m.efficiency = 1.0;
  m.jitter_fwhm_ps = 0.0;
  m.dead_time_ps = 8000;
  const TagStream out = apply_detector(in, m, 3);
  CHECK(out.tags.size() == 4);  // cross-channel spacing never blocks
}

TEST_CASE("jitter displaces times with the configured spread") {
  TagStream in = aux_stream(100000, 100000, 10000);  // sparse: no reordering
  for (TimeTag& t : in.tags) t.channel = Channel::DV;

  DetectorModel m;
  m.efficiency = 1.0;
  m.jitter_fwhm_ps = 350.0;
  m.dead_time_ps = 0;

  const TagStream out = apply_detector(in, m, 101);
  REQUIRE(out.tags.size() == in.tags.size());
  CHECK(validate_stream(out).empty());

  const double sigma = 350.0 / 2.355;
  DetectorProcess probe(m, 101, in.resolution_ps, in.duration_ps);
  double sum = 0, sum2 = 0, max_abs = 0;
  for (std::size_t i = 0; i < out.tags.size(); ++i) {
    const double d = static_cast<double>(out.tags[i].time_ps) -
                     static_cast<double>(in.tags[i].time_ps);
    sum += d;
    sum2 += d * d;
    max_abs = std::max(max_abs, std::abs(d));
  }
  const double n = static_cast<double>(out.tags.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  // Quantization to the 25 ps grid adds 25^2/12 of variance.
  const double expect_sd = std::sqrt(sigma * sigma + 25.0 * 25.0 / 12.0);
  CHECK(std::abs(mean) < 3.0);
  CHECK(sd == Approx(expect_sd).epsilon(0.02));
  CHECK(max_abs <= static_cast<double>(probe.reorder_margin_ps()));
}

TEST_CASE("sync markers pass the detector untouched") {
  TagStream in;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    in.tags.push_back({i * 50000, Channel::Sync});
    in.tags.push_back({i * 50000 + 12000, Channel::DH});
  }
  in.duration_ps = 2000 * 50000;

  DetectorModel m;
  m.efficiency = 0.25;
  m.jitter_fwhm_ps = 350.0;
  m.dead_time_ps = 24000;

  const TagStream out = apply_detector(in, m, 8);
  CHECK(out.count(Channel::Sync) == 2000);
  std::size_t k = 0;
  for (const TimeTag& t : out.tags)
    if (t.channel == Channel::Sync) CHECK(t.time_ps == (k++) * 50000);
}

TEST_CASE("dark counts arrive at the configured rate") {
  DetectorModel m;
  m.efficiency = 0.5;
  m.jitter_fwhm_ps = 350.0;
  m.dead_time_ps = 0;
  m.dark_rate_per_s = 500.0;

  const std::uint64_t duration = 2 * kPsPerSec;
  DetectorProcess proc(m, 77, kDefaultResolutionPs, duration,
                       {Channel::DH, Channel::DV});
  std::vector<TimeTag> out;
  proc.finish(out);  // no real photons pushed at all

  // Two channels, 500/s each, 2 s: darks bypass the efficiency draw.
  CHECK(static_cast<double>(out.size()) == Approx(2000.0).epsilon(0.1));
  for (const TimeTag& t : out) {
    CHECK(t.time_ps < duration);
    CHECK((t.channel == Channel::DH || t.channel == Channel::DV));
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    CHECK(!time_order(out[i], out[i - 1]));
}

TEST_CASE("per-tag pushes equal the one-shot application") {
  TagStream in;
  std::uint64_t t = 0;
  for (int i = 0; i < 50000; ++i) {
    t += 1000 + 25 * static_cast<std::uint64_t>((i * 7919) % 400);
    in.tags.push_back({t, (i % 3 == 0) ? Channel::DV : Channel::DH});
  }
  in.duration_ps = t + 1000;

  DetectorModel m;
  m.efficiency = 0.8;
  m.jitter_fwhm_ps = 350.0;
  m.dead_time_ps = 24000;
  m.dark_rate_per_s = 200.0;

  const TagStream oneshot = apply_detector(in, m, 13);

  DetectorProcess proc(m, 13, in.resolution_ps, in.duration_ps,
                       {Channel::DH, Channel::DV});
  std::vector<TimeTag> chunked;
  for (const TimeTag& tag : in.tags) proc.push(tag, chunked);
  proc.finish(chunked);
  CHECK(chunked == oneshot.tags);
}
