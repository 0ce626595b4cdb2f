#include "ptag/types.hpp"

#include <algorithm>
#include <cmath>

namespace ptag {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::DH: return "DH";
    case Channel::DV: return "DV";
    case Channel::Sync: return "SYNC";
    case Channel::Aux: return "AUX";
  }
  return "?";
}

std::size_t TagStream::count(Channel c) const {
  return static_cast<std::size_t>(
      std::count_if(tags.begin(), tags.end(),
                    [c](const TimeTag& t) { return t.channel == c; }));
}

std::vector<StreamViolation> validate_stream(const TagStream& s) {
  std::vector<StreamViolation> out;
  if (s.resolution_ps == 0) {
    out.push_back({s.tags.size(), "resolution_ps must be positive"});
    return out;
  }
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    const TimeTag& t = s.tags[i];
    if (i > 0 && t.time_ps < s.tags[i - 1].time_ps)
      out.push_back({i, "times not monotone non-decreasing"});
    if (t.time_ps > s.duration_ps)
      out.push_back({i, "time exceeds stream duration"});
    if (static_cast<std::uint8_t>(t.channel) > 3)
      out.push_back({i, "channel out of range"});
    if (t.time_ps % s.resolution_ps != 0)
      out.push_back({i, "time not on resolution grid"});
  }
  return out;
}

TagStream merge_streams(const TagStream& a, const TagStream& b) {
  TagStream out;
  out.resolution_ps = a.resolution_ps;
  out.duration_ps = std::max(a.duration_ps, b.duration_ps);
  out.tags.resize(a.tags.size() + b.tags.size());
  std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(),
             out.tags.begin(), time_order);
  return out;
}

TagStream select_channel(const TagStream& s, Channel c) {
  TagStream out;
  out.duration_ps = s.duration_ps;
  out.resolution_ps = s.resolution_ps;
  for (const TimeTag& t : s.tags)
    if (t.channel == c) out.tags.push_back(t);
  return out;
}

std::vector<std::string> validate(const EmitterModel& m) {
  std::vector<std::string> out;
  if (m.pump_rate_per_ns < 0) out.push_back("pump rate must be >= 0");
  if (m.decay_rate_per_ns <= 0) out.push_back("decay rate must be > 0");
  if (m.shelving_rate_per_ns < 0) out.push_back("shelving rate must be >= 0");
  if (m.deshelving_rate_per_ns < 0) out.push_back("deshelving rate must be >= 0");
  if (m.shelving_rate_per_ns > 0 && m.deshelving_rate_per_ns <= 0)
    out.push_back("deshelving rate must be > 0 when shelving is enabled");
  if (!(m.signal_fraction > 0) || m.signal_fraction > 1)
    out.push_back("signal fraction must be in (0, 1]");
  return out;
}

std::vector<std::string> validate(const G2Model& m) {
  std::vector<std::string> out;
  if (m.beta < 1) out.push_back("beta must be >= 1");
  if (m.gamma1_per_ns <= 0) out.push_back("gamma1 must be > 0");
  if (m.gamma2_per_ns < 0) out.push_back("gamma2 must be >= 0");
  if (m.gamma2_per_ns >= m.gamma1_per_ns)
    out.push_back("gamma2 must be < gamma1");
  if (!(m.rho > 0) || m.rho > 1) out.push_back("rho must be in (0, 1]");
  return out;
}

std::vector<std::string> validate(const DetectorModel& m) {
  std::vector<std::string> out;
  if (!(m.efficiency > 0) || m.efficiency > 1)
    out.push_back("efficiency must be in (0, 1]");
  if (m.jitter_fwhm_ps < 0) out.push_back("jitter FWHM must be >= 0");
  if (m.dark_rate_per_s < 0) out.push_back("dark rate must be >= 0");
  return out;
}

std::vector<std::string> validate(const G2Histogram& h) {
  std::vector<std::string> out;
  if (h.bin_width_ns <= 0) out.push_back("bin width must be > 0");
  if (h.tau_max_ns <= 0) out.push_back("tau_max must be > 0");
  const double nbins = 2.0 * h.tau_max_ns / h.bin_width_ns;
  if (std::abs(nbins - std::round(nbins)) > 1e-9)
    out.push_back("2 * tau_max must be an integer number of bins");
  if (h.counts.size() != static_cast<std::size_t>(h.g2.size()) ||
      h.counts.size() != static_cast<std::size_t>(h.sigma.size()))
    out.push_back("counts / g2 / sigma sizes differ");
  if (h.total_time_s <= 0) out.push_back("total time must be > 0");
  const double norm = h.total_time_s /
                      (static_cast<double>(h.n1) * static_cast<double>(h.n2) *
                       h.bin_width_ns * 1e-9);
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double expect = static_cast<double>(h.counts[i]) * norm;
    if (std::abs(h.g2[i] - expect) > 1e-9 * std::max(1.0, expect)) {
      out.push_back("normalized value inconsistent with counts");
      break;
    }
  }
  return out;
}

std::vector<std::string> validate(const PopulationEstimate& e) {
  std::vector<std::string> out;
  if (e.window_ns <= 0) out.push_back("window must be > 0");
  auto check = [&out](const Probabilities& p, const char* which) {
    if (p.p0 < 0 || p.p1 < 0 || p.p2 < 0)
      out.push_back(std::string(which) + " probabilities must be >= 0");
    const double sum = p.p0 + p.p1 + p.p2;
    if (std::abs(sum - 1.0) > 1e-9)
      out.push_back(std::string(which) + " probabilities must sum to 1");
  };
  check(e.detected, "detected");
  check(e.corrected, "corrected");
  return out;
}

std::vector<std::string> validate(const ConcurrenceResult& r) {
  std::vector<std::string> out;
  if (r.window_ns <= 0) out.push_back("window must be > 0");
  if (r.visibility < 0 || r.visibility > 1)
    out.push_back("visibility must be in [0, 1]");
  if (r.contamination < 0) out.push_back("contamination must be >= 0");
  if (r.normalized_concurrence < 0)
    out.push_back("normalized concurrence must be >= 0 (clamped)");
  if (r.concurrence < 0) out.push_back("concurrence must be >= 0 (clamped)");
  if (r.contamination >= 0 && r.visibility >= 0) {
    const double expect =
        std::max(r.visibility - std::sqrt(r.contamination), 0.0);
    if (std::abs(r.normalized_concurrence - expect) > 1e-9)
      out.push_back("normalized concurrence != max(V - sqrt(y_c), 0)");
  }
  return out;
}

}  // namespace ptag
