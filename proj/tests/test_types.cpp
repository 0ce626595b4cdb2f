#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ptag/types.hpp"

using namespace ptag;

namespace {

TagStream make_stream(std::vector<TimeTag> tags, std::uint64_t duration_ps,
                      std::uint32_t res = 25) {
  TagStream s;
  s.tags = std::move(tags);
  s.duration_ps = duration_ps;
  s.resolution_ps = res;
  return s;
}

}  // namespace

TEST_CASE("time_order sorts by time then channel") {
  CHECK(time_order({100, Channel::DH}, {125, Channel::DH}));
  CHECK(time_order({100, Channel::DH}, {100, Channel::DV}));
  CHECK_FALSE(time_order({100, Channel::DV}, {100, Channel::DH}));
  CHECK_FALSE(time_order({100, Channel::DH}, {100, Channel::DH}));
}

TEST_CASE("validate_stream accepts a sorted in-range stream") {
  const auto s = make_stream(
      {{0, Channel::DH}, {25, Channel::DV}, {25, Channel::Sync}, {100, Channel::DH}},
      100);
  CHECK(validate_stream(s).empty());
}

TEST_CASE("validate_stream flags out-of-order tags with the index") {
  const auto s = make_stream({{50, Channel::DH}, {25, Channel::DV}}, 100);
  const auto v = validate_stream(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].index == 1);
  CHECK(v[0].rule.find("monotone") != std::string::npos);
}

TEST_CASE("validate_stream flags a tag beyond the duration") {
  const auto s = make_stream({{150, Channel::DH}}, 100);
  const auto v = validate_stream(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].index == 0);
  CHECK(v[0].rule.find("duration") != std::string::npos);
}

TEST_CASE("validate_stream flags off-grid times and bad channels") {
  const auto off = make_stream({{30, Channel::DH}}, 100);
  CHECK(validate_stream(off).size() == 1);

  auto bad = make_stream({{25, static_cast<Channel>(7)}}, 100);
  CHECK(validate_stream(bad).size() == 1);
}

TEST_CASE("merge of two valid streams is valid") {
  const auto a = make_stream({{0, Channel::DH}, {50, Channel::DH}}, 100);
  const auto b = make_stream({{25, Channel::DV}, {50, Channel::DV}}, 200);
  const TagStream m = merge_streams(a, b);
  CHECK(validate_stream(m).empty());
  CHECK(m.duration_ps == 200);
  CHECK(m.tags.size() == 4);
  CHECK(m.count(Channel::DH) == 2);
  CHECK(m.count(Channel::DV) == 2);
}

TEST_CASE("select_channel keeps only the requested channel") {
  const auto s = make_stream(
      {{0, Channel::DH}, {25, Channel::DV}, {50, Channel::DH}}, 100);
  const TagStream dh = select_channel(s, Channel::DH);
  CHECK(dh.tags.size() == 2);
  CHECK(dh.duration_ps == s.duration_ps);
  for (const auto& t : dh.tags) CHECK(t.channel == Channel::DH);
}

TEST_CASE("G2Histogram validation checks the count-rate normalization") {
  G2Histogram h;
  h.bin_width_ns = 1.0;
  h.tau_max_ns = 2.0;
  h.counts = {4, 4, 4, 4};
  h.n1 = 100;
  h.n2 = 100;
  h.total_time_s = 1e-3;
  const double norm = h.total_time_s / (100.0 * 100.0 * 1e-9);
  h.g2.resize(4);
  h.sigma.resize(4);
  for (int i = 0; i < 4; ++i) {
    h.g2[i] = 4.0 * norm;
    h.sigma[i] = 2.0 * norm;
  }
  CHECK(validate(h).empty());

  h.g2[2] *= 1.5;
  CHECK_FALSE(validate(h).empty());
}

TEST_CASE("PopulationEstimate validation checks the distribution") {
  PopulationEstimate e;
  e.window_ns = 2.0;
  e.window_count = 1000;
  e.detected = {0.9, 0.08, 0.02};
  e.corrected = {0.85, 0.12, 0.03};
  CHECK(validate(e).empty());

  e.corrected.p2 = 0.5;  // sum now above 1
  CHECK_FALSE(validate(e).empty());

  e.corrected = {0.85, 0.12, 0.03};
  e.detected.p1 = -0.01;
  CHECK_FALSE(validate(e).empty());
}

TEST_CASE("ConcurrenceResult validation enforces the witness identity") {
  ConcurrenceResult r;
  r.window_ns = 2.0;
  r.visibility = 0.9;
  r.contamination = 0.25;
  r.normalized_concurrence = 0.4;  // 0.9 - 0.5
  r.concurrence = 0.1;
  r.total_bound = 0.05;
  CHECK(validate(r).empty());

  r.normalized_concurrence = 0.7;
  CHECK_FALSE(validate(r).empty());

  // Clamped case: V below sqrt(y_c) must come back as zero.
  r.visibility = 0.3;
  r.contamination = 0.5;
  r.normalized_concurrence = 0.0;
  r.clamped = true;
  r.concurrence = 0.0;
  r.total_bound = 0.0;
  CHECK(validate(r).empty());
}
