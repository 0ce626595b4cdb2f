#include "ptag/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ptag {
namespace {

constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();

std::uint64_t quantize(std::uint64_t t_ps, std::uint32_t res) {
  const std::uint64_t rem = t_ps % res;
  const std::uint64_t down = t_ps - rem;
  return (rem * 2 >= res) ? down + res : down;
}

}  // namespace

DetectorProcess::DetectorProcess(const DetectorModel& model, std::uint64_t seed,
                                 std::uint32_t resolution_ps,
                                 std::uint64_t duration_ps,
                                 const std::vector<Channel>& dark_channels)
    : model_(model),
      resolution_ps_(resolution_ps),
      duration_ps_(duration_ps),
      rng_(make_rng(seed, 4)) {
  auto problems = validate(model);
  if (!problems.empty())
    throw std::invalid_argument("invalid detector model: " + problems.front());
  if (resolution_ps == 0) throw std::invalid_argument("resolution must be > 0");
  sigma_ps_ = model.jitter_fwhm_ps / 2.355;
  margin_ps_ = static_cast<std::uint64_t>(std::ceil(8.0 * sigma_ps_)) +
               resolution_ps_;
  for (auto& t : last_accept_ps_) t = 0;

  if (model.dark_rate_per_s > 0 && !dark_channels.empty()) {
    Rng dark_rng = make_rng(seed, 5);
    std::exponential_distribution<double> gap(model.dark_rate_per_s / 1e12);
    for (Channel c : dark_channels) {
      double t = 0;
      while (true) {
        t += gap(dark_rng);
        if (t >= static_cast<double>(duration_ps)) break;
        darks_.push_back(
            {quantize(static_cast<std::uint64_t>(t), resolution_ps_), c});
      }
    }
    std::sort(darks_.begin(), darks_.end(), time_order);
  }
}

void DetectorProcess::ingest(const TimeTag& raw) {
  if (raw.channel == Channel::Sync) {
    pending_.push(raw);
    return;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) >= model_.efficiency) return;
  std::uint64_t t = raw.time_ps;
  if (sigma_ps_ > 0) {
    std::normal_distribution<double> jitter(0.0, sigma_ps_);
    double dt = jitter(rng_);
    const double clip = 8.0 * sigma_ps_;
    dt = std::clamp(dt, -clip, clip);
    const double shifted = static_cast<double>(raw.time_ps) + dt;
    t = shifted <= 0 ? 0 : static_cast<std::uint64_t>(std::llround(shifted));
    t = quantize(t, resolution_ps_);
  }
  if (t > duration_ps_) return;
  pending_.push({t, raw.channel});
}

void DetectorProcess::emit(const TimeTag& t, std::vector<TimeTag>& out) {
  if (t.channel != Channel::Sync && model_.dead_time_ps > 0) {
    const auto ch = static_cast<std::size_t>(t.channel);
    if (armed_[ch] && t.time_ps - last_accept_ps_[ch] < model_.dead_time_ps)
      return;  // inside the dead window; window is not extended
    armed_[ch] = true;
    last_accept_ps_[ch] = t.time_ps;
  }
  out.push_back(t);
}

void DetectorProcess::drain(std::uint64_t threshold_ps,
                            std::vector<TimeTag>& out) {
  while (!pending_.empty() && pending_.top().time_ps < threshold_ps) {
    emit(pending_.top(), out);
    pending_.pop();
  }
}

void DetectorProcess::push(const TimeTag& raw, std::vector<TimeTag>& out) {
  while (next_dark_ < darks_.size() &&
         darks_[next_dark_].time_ps <= raw.time_ps)
    pending_.push(darks_[next_dark_++]);
  ingest(raw);
  const std::uint64_t safe =
      raw.time_ps > margin_ps_ ? raw.time_ps - margin_ps_ : 0;
  drain(safe, out);
}

void DetectorProcess::finish(std::vector<TimeTag>& out) {
  while (next_dark_ < darks_.size()) pending_.push(darks_[next_dark_++]);
  drain(kMax, out);
}

TagStream apply_detector(const TagStream& s, const DetectorModel& model,
                         std::uint64_t seed) {
  std::set<Channel> seen;
  for (const TimeTag& t : s.tags)
    if (t.channel != Channel::Sync) seen.insert(t.channel);
  DetectorProcess proc(model, seed, s.resolution_ps, s.duration_ps,
                       {seen.begin(), seen.end()});
  TagStream out;
  out.duration_ps = s.duration_ps;
  out.resolution_ps = s.resolution_ps;
  out.tags.reserve(
      static_cast<std::size_t>(model.efficiency * static_cast<double>(s.tags.size())) + 16);
  for (const TimeTag& t : s.tags) proc.push(t, out.tags);
  proc.finish(out.tags);
  return out;
}

}  // namespace ptag
