#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ptag/correlator.hpp"
#include "ptag/emitter.hpp"

using namespace ptag;
using doctest::Approx;

namespace {

// Deterministic irregular stream on the 25 ps grid.
TagStream lcg_stream(std::uint64_t seed, std::size_t n, Channel ch,
                     std::uint64_t duration_ps) {
  TagStream s;
  s.duration_ps = duration_ps;
  std::uint64_t x = seed, t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    t += 25 * (1 + (x >> 33) % 4000);
    if (t > duration_ps) break;
    s.tags.push_back({t, ch});
  }
  return s;
}

// O(n^2) reference counter with the same binning convention.
std::vector<std::uint64_t> brute_counts(const TagStream& a, const TagStream& b,
                                        double w_ns, double tau_ns) {
  const std::int64_t w = std::llround(w_ns * 1000.0);
  const std::int64_t tau = std::llround(tau_ns * 1000.0);
  const std::size_t n_bins = static_cast<std::size_t>(2 * tau / w);
  std::vector<std::uint64_t> counts(n_bins, 0);
  for (const TimeTag& ta : a.tags)
    for (const TimeTag& tb : b.tags) {
      const std::int64_t d = static_cast<std::int64_t>(tb.time_ps) -
                             static_cast<std::int64_t>(ta.time_ps);
      if (d < -tau || d > tau) continue;
      std::size_t bin = static_cast<std::size_t>((d + tau) / w);
      if (bin == n_bins) bin = n_bins - 1;
      ++counts[bin];
    }
  return counts;
}

}  // namespace

TEST_CASE("two-pointer counts match the all-pairs reference") {
  const TagStream a = lcg_stream(1, 400, Channel::DH, 20'000'000);
  const TagStream b = lcg_stream(2, 400, Channel::DV, 20'000'000);
  REQUIRE(a.tags.size() > 300);
  REQUIRE(b.tags.size() > 300);

  for (auto [w, tau] : {std::pair{1.0, 10.0}, {3.0, 7.5}, {0.5, 100.0}}) {
    const G2Histogram h = estimate_g2(a, b, w, tau);
    CHECK(h.counts == brute_counts(a, b, w, tau));
    CHECK(h.n1 == a.tags.size());
    CHECK(h.n2 == b.tags.size());
  }
}

TEST_CASE("bin edges: left-closed, right-open, +tau_max kept") {
  TagStream a;
  a.tags = {{100000, Channel::DH}};
  a.duration_ps = 200000;
  TagStream b;
  for (std::uint64_t t : {89999ULL, 90000ULL, 90999ULL, 91000ULL, 99999ULL,
                          100000ULL, 109999ULL, 110000ULL, 110001ULL})
    b.tags.push_back({t, Channel::DV});
  b.duration_ps = 200000;

  const G2Histogram h = estimate_g2(a, b, 1.0, 10.0);
  REQUIRE(h.bin_count() == 20);
  std::vector<std::uint64_t> want(20, 0);
  want[0] = 2;   // -10000 and -9001 ps
  want[1] = 1;   // -9000 sits on the edge, left-closed
  want[9] = 1;   // -1
  want[10] = 1;  // 0
  want[19] = 2;  // +9999 and the +10000 boundary pair
  CHECK(h.counts == want);  // 89999 and 110001 fall outside
}

TEST_CASE("uncorrelated Poisson streams normalize to one") {
  const TagStream a = simulate_coherent(1e5, 20.0, 21);
  const TagStream b = simulate_coherent(1e5, 20.0, 22);
  const G2Histogram h = estimate_g2(a, b, 1.0, 200.0);
  REQUIRE(h.bin_count() == 400);
  CHECK(h.g2.mean() == Approx(1.0).epsilon(0.02));
  for (Eigen::Index i = 0; i < h.g2.size(); ++i) {
    CHECK(h.g2[i] == Approx(1.0).epsilon(0.5));
    CHECK(h.sigma[i] > 0);
  }
  CHECK(h.total_time_s == Approx(20.0));
}

TEST_CASE("input validation") {
  TagStream a = lcg_stream(1, 50, Channel::DH, 1'000'000);
  TagStream b = lcg_stream(2, 50, Channel::DV, 1'000'000);
  TagStream empty;
  empty.duration_ps = 1'000'000;

  CHECK_THROWS_AS(estimate_g2(empty, b, 1.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_g2(a, empty, 1.0, 10.0), std::invalid_argument);

  TagStream shorter = b;
  shorter.duration_ps = 999'975;
  CHECK_THROWS_AS(estimate_g2(a, shorter, 1.0, 10.0), std::invalid_argument);

  CHECK_THROWS_AS(estimate_g2(a, b, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_g2(a, b, 0.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_g2(a, b, 1.0, -5.0), std::invalid_argument);
}

TEST_CASE("partitioned evaluation is bit-identical to sequential") {
  const TagStream a = simulate_coherent(5e4, 8.0, 31);
  const TagStream b = simulate_coherent(5e4, 8.0, 32);
  const G2Histogram serial = estimate_g2(a, b, 1.0, 200.0);
  for (unsigned chunks : {1u, 2u, 3u, 8u, 64u}) {
    const G2Histogram par = estimate_g2_parallel(a, b, 1.0, 200.0, chunks);
    CHECK(par.counts == serial.counts);
    CHECK((par.g2 == serial.g2).all());
  }
  CHECK_THROWS_AS(estimate_g2_parallel(a, b, 1.0, 200.0, 0),
                  std::invalid_argument);
}

TEST_CASE("incremental correlation equals the one-shot result") {
  const TagStream a = simulate_coherent(4e4, 5.0, 41);
  const TagStream b = simulate_coherent(4e4, 5.0, 42);
  const G2Histogram whole = estimate_g2(a, b, 2.0, 150.0);

  TagStream merged;
  {
    TagStream ah = a, bv = b;
    for (TimeTag& t : ah.tags) t.channel = Channel::DH;
    for (TimeTag& t : bv.tags) t.channel = Channel::DV;
    merged = merge_streams(ah, bv);
  }

  SUBCASE("uneven chunks with tight frontiers") {
    StreamingG2 inc(2.0, 150.0);
    std::size_t i = 0, step = 1;
    while (i < merged.tags.size()) {
      const std::size_t j = std::min(i + step, merged.tags.size());
      std::vector<TimeTag> chunk(merged.tags.begin() + i,
                                 merged.tags.begin() + j);
      const std::uint64_t frontier =
          j < merged.tags.size() ? merged.tags[j].time_ps : merged.duration_ps;
      inc.push(chunk, frontier);
      i = j;
      step = step * 3 + 1;  // 1, 4, 13, 40, ... exercises many boundary shapes
    }
    const G2Histogram h = inc.finish(merged.duration_ps);
    CHECK(h.counts == whole.counts);
    CHECK(inc.starts_seen() == a.tags.size());
    CHECK(inc.stops_seen() == b.tags.size());
    CHECK(h.total_time_s == Approx(whole.total_time_s));
  }

  SUBCASE("single push with a zero frontier defers all work to finish") {
    StreamingG2 inc(2.0, 150.0);
    inc.push(merged.tags, 0);
    const G2Histogram h = inc.finish(merged.duration_ps);
    CHECK(h.counts == whole.counts);
  }

  SUBCASE("a frontier that moves backwards is ignored, not honored") {
    StreamingG2 inc(2.0, 150.0);
    const std::size_t half = merged.tags.size() / 2;
    std::vector<TimeTag> first(merged.tags.begin(), merged.tags.begin() + half);
    std::vector<TimeTag> rest(merged.tags.begin() + half, merged.tags.end());
    inc.push(first, merged.tags[half].time_ps);
    inc.push(rest, 0);
    const G2Histogram h = inc.finish(merged.duration_ps);
    CHECK(h.counts == whole.counts);
  }

  SUBCASE("a side with no tags is rejected at finish") {
    StreamingG2 inc(2.0, 150.0);
    std::vector<TimeTag> only_dh = {{1000, Channel::DH}};
    inc.push(only_dh, 0);
    CHECK_THROWS_AS(inc.finish(10000), std::invalid_argument);
  }
}

TEST_CASE("excitation-relative delay histogram") {
  TagStream s;
  s.tags = {{500, Channel::DH},   // before the first sync
            {1000, Channel::Sync}, {1100, Channel::DH},
            {2000, Channel::Sync}, {2025, Channel::DV},
            {3000, Channel::Sync}, {3990, Channel::DH},
            {4000, Channel::Sync}};
  s.duration_ps = 5000;

  const LifetimeHistogram h = lifetime_histogram(s, 25);
  CHECK(h.period_ps == 1000);
  REQUIRE(h.counts.size() == 40);
  CHECK(h.total_photons == 4);
  CHECK(h.photons_before_first_sync == 1);
  CHECK(h.overflow == 0);
  CHECK(h.counts[4] == 1);   // delay 100 ps
  CHECK(h.counts[1] == 1);   // delay 25 ps
  CHECK(h.counts[39] == 1);  // delay 990 ps
  std::uint64_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(total == 3);
  CHECK(h.bin_center_ns(0) == Approx(0.0125));

  SUBCASE("needs two sync tags") {
    TagStream bad;
    bad.tags = {{0, Channel::Sync}, {10, Channel::DH}};
    bad.duration_ps = 100;
    CHECK_THROWS_AS(lifetime_histogram(bad, 25), std::invalid_argument);
  }
  SUBCASE("zero bin width rejected") {
    CHECK_THROWS_AS(lifetime_histogram(s, 0), std::invalid_argument);
  }
  SUBCASE("degenerate sync spacing rejected") {
    TagStream bad;
    bad.tags = {{100, Channel::Sync}, {100, Channel::Sync}, {100, Channel::Sync}};
    bad.duration_ps = 200;
    CHECK_THROWS_AS(lifetime_histogram(bad, 25), std::invalid_argument);
  }
}
