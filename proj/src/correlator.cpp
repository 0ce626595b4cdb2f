#include "ptag/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ptag {
namespace {

struct BinSpec {
  std::int64_t w_ps = 0;
  std::int64_t tau_ps = 0;
  std::size_t n_bins = 0;
};

BinSpec make_bins(double bin_width_ns, double tau_max_ns) {
  if (bin_width_ns <= 0) throw std::invalid_argument("bin width must be > 0");
  if (tau_max_ns <= 0) throw std::invalid_argument("tau_max must be > 0");
  BinSpec spec;
  spec.w_ps = std::llround(bin_width_ns * 1000.0);
  spec.tau_ps = std::llround(tau_max_ns * 1000.0);
  if (spec.w_ps <= 0) throw std::invalid_argument("bin width below 1 ps");
  if ((2 * spec.tau_ps) % spec.w_ps != 0)
    throw std::invalid_argument("2 * tau_max must be a whole number of bins");
  spec.n_bins = static_cast<std::size_t>(2 * spec.tau_ps / spec.w_ps);
  return spec;
}

void check_inputs(const TagStream& a, const TagStream& b) {
  if (a.tags.empty() || b.tags.empty())
    throw std::invalid_argument("correlation needs non-empty streams");
  if (a.duration_ps != b.duration_ps)
    throw std::invalid_argument("streams have inconsistent durations");
}

/// Counts pairs whose start tag index lies in [a_lo, a_hi).
void count_pairs(const std::vector<TimeTag>& a, const std::vector<TimeTag>& b,
                 std::size_t a_lo, std::size_t a_hi, const BinSpec& spec,
                 std::vector<std::uint64_t>& counts) {
  std::size_t lo = 0;
  for (std::size_t i = a_lo; i < a_hi; ++i) {
    const std::int64_t ta = static_cast<std::int64_t>(a[i].time_ps);
    const std::int64_t wmin = ta - spec.tau_ps;
    const std::int64_t wmax = ta + spec.tau_ps;
    while (lo < b.size() && static_cast<std::int64_t>(b[lo].time_ps) < wmin)
      ++lo;
    for (std::size_t j = lo;
         j < b.size() && static_cast<std::int64_t>(b[j].time_ps) <= wmax; ++j) {
      const std::int64_t d = static_cast<std::int64_t>(b[j].time_ps) - ta;
      std::size_t bin = static_cast<std::size_t>((d + spec.tau_ps) / spec.w_ps);
      if (bin == spec.n_bins) bin = spec.n_bins - 1;  // d == +tau_max
      ++counts[bin];
    }
  }
}

G2Histogram assemble_counts(std::uint64_t n1, std::uint64_t n2,
                            double total_time_s, double bin_width_ns,
                            double tau_max_ns,
                            std::vector<std::uint64_t> counts) {
  G2Histogram h;
  h.bin_width_ns = bin_width_ns;
  h.tau_max_ns = tau_max_ns;
  h.counts = std::move(counts);
  h.n1 = n1;
  h.n2 = n2;
  h.total_time_s = total_time_s;
  const double norm = h.total_time_s /
                      (static_cast<double>(h.n1) * static_cast<double>(h.n2) *
                       bin_width_ns * 1e-9);
  h.g2.resize(static_cast<Eigen::Index>(h.counts.size()));
  h.sigma.resize(static_cast<Eigen::Index>(h.counts.size()));
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double c = static_cast<double>(h.counts[i]);
    h.g2[static_cast<Eigen::Index>(i)] = c * norm;
    h.sigma[static_cast<Eigen::Index>(i)] = c > 0 ? c * norm / std::sqrt(c) : 0.0;
  }
  return h;
}

G2Histogram assemble(const TagStream& a, const TagStream& b,
                     double bin_width_ns, double tau_max_ns,
                     std::vector<std::uint64_t> counts) {
  return assemble_counts(a.tags.size(), b.tags.size(), a.duration_s(),
                         bin_width_ns, tau_max_ns, std::move(counts));
}

}  // namespace

G2Histogram estimate_g2(const TagStream& a, const TagStream& b,
                        double bin_width_ns, double tau_max_ns) {
  check_inputs(a, b);
  const BinSpec spec = make_bins(bin_width_ns, tau_max_ns);
  std::vector<std::uint64_t> counts(spec.n_bins, 0);
  count_pairs(a.tags, b.tags, 0, a.tags.size(), spec, counts);
  return assemble(a, b, bin_width_ns, tau_max_ns, std::move(counts));
}

G2Histogram estimate_g2_parallel(const TagStream& a, const TagStream& b,
                                 double bin_width_ns, double tau_max_ns,
                                 unsigned n_chunks) {
  check_inputs(a, b);
  if (n_chunks == 0) throw std::invalid_argument("need at least one chunk");
  const BinSpec spec = make_bins(bin_width_ns, tau_max_ns);

  // Start-tag index ranges from a time partition of [0, duration): each chunk
  // owns the a-tags of one time slice and scans b across the slice edges, so
  // no pair is ever split or double counted.
  std::vector<std::size_t> edges(n_chunks + 1, 0);
  edges[n_chunks] = a.tags.size();
  const std::uint64_t slice = a.duration_ps / n_chunks + 1;
  for (unsigned k = 1; k < n_chunks; ++k) {
    const std::uint64_t t_edge = static_cast<std::uint64_t>(k) * slice;
    edges[k] = static_cast<std::size_t>(
        std::lower_bound(a.tags.begin(), a.tags.end(),
                         TimeTag{t_edge, Channel::DH},
                         [](const TimeTag& x, const TimeTag& y) {
                           return x.time_ps < y.time_ps;
                         }) -
        a.tags.begin());
  }

  std::vector<std::vector<std::uint64_t>> partial(
      n_chunks, std::vector<std::uint64_t>(spec.n_bins, 0));
  std::vector<std::thread> workers;
  workers.reserve(n_chunks);
  for (unsigned k = 0; k < n_chunks; ++k) {
    workers.emplace_back([&, k] {
      count_pairs(a.tags, b.tags, edges[k], edges[k + 1], spec, partial[k]);
    });
  }
  for (auto& w : workers) w.join();

  std::vector<std::uint64_t> counts(spec.n_bins, 0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < spec.n_bins; ++i) counts[i] += p[i];
  return assemble(a, b, bin_width_ns, tau_max_ns, std::move(counts));
}

StreamingG2::StreamingG2(double bin_width_ns, double tau_max_ns)
    : bin_width_ns_(bin_width_ns), tau_max_ns_(tau_max_ns) {
  const BinSpec spec = make_bins(bin_width_ns, tau_max_ns);
  w_ps_ = spec.w_ps;
  tau_ps_ = spec.tau_ps;
  n_bins_ = spec.n_bins;
  counts_.assign(n_bins_, 0);
}

void StreamingG2::push(const std::vector<TimeTag>& tags,
                       std::uint64_t complete_before_ps) {
  for (const TimeTag& t : tags) {
    if (t.channel == Channel::DH) {
      a_.push_back(static_cast<std::int64_t>(t.time_ps));
      ++n1_;
    } else if (t.channel == Channel::DV) {
      b_.push_back(static_cast<std::int64_t>(t.time_ps));
      ++n2_;
    }
  }
  frontier_ = std::max(frontier_, complete_before_ps);
  drain();
}

void StreamingG2::drain() {
  // A start is settled once every stop within +tau_max of it is known.
  while (!a_.empty() &&
         a_.front() + tau_ps_ < static_cast<std::int64_t>(frontier_)) {
    const std::int64_t ta = a_.front();
    a_.pop_front();
    // Starts are processed in time order, so stops before ta - tau_max can
    // never pair again.
    while (!b_.empty() && b_.front() < ta - tau_ps_) b_.pop_front();
    for (const std::int64_t tb : b_) {
      if (tb > ta + tau_ps_) break;
      std::size_t bin = static_cast<std::size_t>((tb - ta + tau_ps_) / w_ps_);
      if (bin == n_bins_) bin = n_bins_ - 1;
      ++counts_[bin];
    }
  }
}

G2Histogram StreamingG2::finish(std::uint64_t duration_ps) {
  if (n1_ == 0 || n2_ == 0)
    throw std::invalid_argument("correlation needs non-empty streams");
  frontier_ = duration_ps + static_cast<std::uint64_t>(tau_ps_) + 1;
  drain();
  a_.clear();
  b_.clear();
  return assemble_counts(n1_, n2_, static_cast<double>(duration_ps) / kPsPerSec,
                         bin_width_ns_, tau_max_ns_, counts_);
}

LifetimeHistogram lifetime_histogram(const TagStream& s,
                                     std::uint32_t bin_width_ps) {
  if (bin_width_ps == 0) throw std::invalid_argument("bin width must be > 0");

  std::vector<std::uint64_t> sync_times;
  for (const TimeTag& t : s.tags)
    if (t.channel == Channel::Sync) sync_times.push_back(t.time_ps);
  if (sync_times.size() < 2)
    throw std::invalid_argument("lifetime histogram needs at least two Sync tags");

  std::vector<std::uint64_t> gaps(sync_times.size() - 1);
  for (std::size_t i = 1; i < sync_times.size(); ++i)
    gaps[i - 1] = sync_times[i] - sync_times[i - 1];
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const std::uint64_t period = gaps[gaps.size() / 2];
  if (period == 0) throw std::invalid_argument("Sync tags are not periodic");

  LifetimeHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.period_ps = period;
  h.counts.assign(static_cast<std::size_t>((period + bin_width_ps - 1) / bin_width_ps), 0);

  bool have_sync = false;
  std::uint64_t last_sync = 0;
  for (const TimeTag& t : s.tags) {
    if (t.channel == Channel::Sync) {
      have_sync = true;
      last_sync = t.time_ps;
      continue;
    }
    ++h.total_photons;
    if (!have_sync) {
      ++h.photons_before_first_sync;
      continue;
    }
    const std::uint64_t delay = t.time_ps - last_sync;
    const std::size_t bin = static_cast<std::size_t>(delay / bin_width_ps);
    if (bin < h.counts.size())
      ++h.counts[bin];
    else
      ++h.overflow;
  }
  return h;
}

}  // namespace ptag
