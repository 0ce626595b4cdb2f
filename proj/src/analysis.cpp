#include "ptag/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ptag/levmar.hpp"

namespace ptag {

namespace {

double binomial_err(double p, double n) {
  if (n <= 0) return 0;
  return std::sqrt(std::max(p * (1 - p), 0.0) / n);
}

}  // namespace

PopulationEstimate window_populations(const TagStream& dh, const TagStream& dv,
                                      double window_ns) {
  if (window_ns <= 0) throw std::invalid_argument("window must be positive");
  if (dh.duration_ps != dv.duration_ps)
    throw std::invalid_argument("streams have inconsistent durations");
  const auto w_ps =
      static_cast<std::uint64_t>(std::llround(window_ns * kPsPerNs));
  const std::uint32_t res =
      std::max(dh.resolution_ps, dv.resolution_ps);
  if (w_ps < res)
    throw std::invalid_argument("window shorter than the tag resolution");
  const std::uint64_t n_windows = dh.duration_ps / w_ps;
  if (n_windows == 0)
    throw std::invalid_argument("window longer than the acquisition");

  std::uint64_t n_one = 0, n_two = 0, n_multi_single = 0;
  std::uint64_t cur = UINT64_MAX;
  std::uint64_t h_in_cur = 0, v_in_cur = 0;
  auto close_window = [&] {
    if (cur == UINT64_MAX) return;
    if (h_in_cur > 0 && v_in_cur > 0) {
      ++n_two;
    } else if (h_in_cur + v_in_cur > 0) {
      ++n_one;
      if (h_in_cur + v_in_cur >= 2) ++n_multi_single;
    }
  };

  std::size_t i = 0, j = 0;
  while (i < dh.tags.size() || j < dv.tags.size()) {
    bool take_h;
    if (i >= dh.tags.size()) {
      take_h = false;
    } else if (j >= dv.tags.size()) {
      take_h = true;
    } else {
      take_h = dh.tags[i].time_ps <= dv.tags[j].time_ps;
    }
    const TimeTag& t = take_h ? dh.tags[i] : dv.tags[j];
    if (take_h) ++i; else ++j;

    const std::uint64_t wid = t.time_ps / w_ps;
    if (wid >= n_windows) continue;  // partial window at the end, discarded
    if (wid != cur) {
      close_window();
      cur = wid;
      h_in_cur = 0;
      v_in_cur = 0;
    }
    if (take_h) ++h_in_cur; else ++v_in_cur;
  }
  close_window();

  const double w = static_cast<double>(n_windows);
  PopulationEstimate est;
  est.window_ns = window_ns;
  est.window_count = n_windows;
  est.multi_single_channel_windows = n_multi_single;
  est.detected.p1 = static_cast<double>(n_one) / w;
  est.detected.p2 = static_cast<double>(n_two) / w;
  est.detected.p0 = 1.0 - est.detected.p1 - est.detected.p2;
  est.detected_err.p0 = binomial_err(est.detected.p0, w);
  est.detected_err.p1 = binomial_err(est.detected.p1, w);
  est.detected_err.p2 = binomial_err(est.detected.p2, w);
  est.corrected = est.detected;
  est.corrected_err = est.detected_err;
  return est;
}

PopulationEstimate invert_losses(const PopulationEstimate& detected,
                                 const Uncertain& eta, InversionMode mode) {
  const double e = eta.value;
  if (!(e > 0) || e > 1)
    throw std::invalid_argument("efficiency must lie in (0, 1]");
  const double p1d = detected.detected.p1;
  const double p2d = detected.detected.p2;
  const double s1 = detected.detected_err.p1;
  const double s2 = detected.detected_err.p2;
  const double se = eta.err;

  // p2 = p2_D / eta^2 in both modes.
  const double p2 = p2d / (e * e);
  const double d2_dp2d = 1.0 / (e * e);
  const double d2_de = -2.0 * p2d / (e * e * e);

  // p1 numerator subtracts windows where one photon of a pair was lost.
  double p1, d1_dp1d, d1_dp2d, d1_de;
  if (mode == InversionMode::Verbatim) {
    p1 = (p1d - 2.0 * e * (1.0 - e) * p2d) / e;
    d1_dp1d = 1.0 / e;
    d1_dp2d = -2.0 * (1.0 - e);
    d1_de = -p1d / (e * e) + 2.0 * p2d;
  } else {
    p1 = p1d / e - 2.0 * (1.0 - e) * p2d / (e * e);
    d1_dp1d = 1.0 / e;
    d1_dp2d = -2.0 * (1.0 - e) / (e * e);
    d1_de = -p1d / (e * e) + 2.0 * p2d / (e * e) +
            4.0 * p2d * (1.0 - e) / (e * e * e);
  }

  const double d0_dp1d = -d1_dp1d;
  const double d0_dp2d = -d1_dp2d - d2_dp2d;
  const double d0_de = -d1_de - d2_de;

  auto quad = [&](double a, double b, double c) {
    return std::sqrt(a * a * s1 * s1 + b * b * s2 * s2 + c * c * se * se);
  };

  PopulationEstimate out = detected;
  out.corrected.p1 = p1;
  out.corrected.p2 = p2;
  out.corrected.p0 = 1.0 - p1 - p2;
  out.corrected_err.p1 = quad(d1_dp1d, d1_dp2d, d1_de);
  out.corrected_err.p2 = quad(0, d2_dp2d, d2_de);
  out.corrected_err.p0 = quad(d0_dp1d, d0_dp2d, d0_de);

  out.clamped = false;
  for (double* v : {&out.corrected.p1, &out.corrected.p2}) {
    if (*v < 0) {
      *v = 0;
      out.clamped = true;
    }
  }
  out.corrected.p0 = 1.0 - out.corrected.p1 - out.corrected.p2;
  if (out.corrected.p0 < 0) {
    // Pathological input: renormalize the remainder so probabilities stay a
    // distribution.
    const double s = out.corrected.p1 + out.corrected.p2;
    out.corrected.p1 /= s;
    out.corrected.p2 /= s;
    out.corrected.p0 = 0;
    out.clamped = true;
  }
  return out;
}

Uncertain detection_efficiency(const EfficiencyInputs& in) {
  if (!(in.input_power_uw.value > 0))
    throw std::invalid_argument("input power must be positive");
  if (!(in.filter_transmission.value > 0))
    throw std::invalid_argument("filter transmission must be positive");
  if (in.detected_power_uw.value < 0)
    throw std::invalid_argument("detected power must be non-negative");
  if (!(in.qe_ratio > 0))
    throw std::invalid_argument("quantum-efficiency ratio must be positive");

  const double eta = in.qe_ratio * in.detected_power_uw.value /
                     (in.input_power_uw.value * in.filter_transmission.value);
  if (eta > 1)
    throw std::invalid_argument("efficiency above one is non-physical");

  auto rel = [](const Uncertain& u) {
    return u.value != 0 ? u.err / u.value : 0.0;
  };
  const double r = std::sqrt(rel(in.detected_power_uw) * rel(in.detected_power_uw) +
                             rel(in.input_power_uw) * rel(in.input_power_uw) +
                             rel(in.filter_transmission) * rel(in.filter_transmission));
  return {eta, eta * r};
}

Uncertain contamination(const Probabilities& p, const Probabilities& p_err,
                        int n_detectors) {
  if (n_detectors < 2)
    throw std::invalid_argument("contamination needs at least two detection stages");
  if (!(p.p1 > 0))
    throw std::invalid_argument("contamination undefined for p1 = 0");
  const double k = 2.0 * n_detectors / (n_detectors - 1.0);
  const double yc = k * p.p2 * p.p0 / (p.p1 * p.p1);
  const double d_p2 = k * p.p0 / (p.p1 * p.p1);
  const double d_p0 = k * p.p2 / (p.p1 * p.p1);
  const double d_p1 = -2.0 * k * p.p2 * p.p0 / (p.p1 * p.p1 * p.p1);
  const double err = std::sqrt(d_p2 * d_p2 * p_err.p2 * p_err.p2 +
                               d_p0 * d_p0 * p_err.p0 * p_err.p0 +
                               d_p1 * d_p1 * p_err.p1 * p_err.p1);
  return {yc, err};
}

VisibilityResult visibility_from_scan(const std::vector<ScanPoint>& points) {
  if (points.size() < 8)
    throw std::invalid_argument("visibility scan needs at least 8 angles");
  double lo = points.front().theta_deg, hi = points.front().theta_deg;
  std::uint64_t total = 0;
  for (const auto& pt : points) {
    lo = std::min(lo, pt.theta_deg);
    hi = std::max(hi, pt.theta_deg);
    total += pt.n_h + pt.n_v;
  }
  if (hi - lo < 90.0 - 1e-9)
    throw std::invalid_argument("scan must span a full 90-degree fringe period");
  if (total == 0) throw std::invalid_argument("scan has no counts");

  // |P_H - P_V| = v |sin 4theta| peaks once per 45-degree segment; group by
  // segment and keep each segment's extremum. Only segments the scan covers
  // in full count as fringes: points in a trailing partial segment (e.g. the
  // closing 90-degree boundary angle) join the last full one, where the
  // running maximum ignores them unless they genuinely peak.
  struct Extremum {
    double diff = -1;
    double err = 0;
  };
  const long long n_full = std::max<long long>(
      1, static_cast<long long>(std::floor((hi - lo) / 45.0 + 1e-9)));
  std::map<long long, Extremum> fringes;
  for (const auto& pt : points) {
    const double tot = static_cast<double>(pt.n_h + pt.n_v);
    if (tot == 0) continue;
    const double ph = static_cast<double>(pt.n_h) / tot;
    const double diff = std::abs(2.0 * ph - 1.0);
    const double err = 2.0 * binomial_err(ph, tot);
    const long long seg = std::min(
        n_full - 1,
        static_cast<long long>(std::floor((pt.theta_deg - lo) / 45.0)));
    auto& ex = fringes[seg];
    if (diff > ex.diff) ex = {diff, err};
  }
  if (fringes.empty()) throw std::invalid_argument("scan has no counts");

  VisibilityResult out;
  double sum = 0, sum2 = 0, err2 = 0;
  for (const auto& [seg, ex] : fringes) {
    out.fringe_extrema.push_back(ex.diff);
    sum += ex.diff;
    sum2 += ex.diff * ex.diff;
    err2 += ex.err * ex.err;
  }
  const double k = static_cast<double>(fringes.size());
  out.visibility = sum / k;
  double spread = 0;
  if (k > 1) spread = std::sqrt(std::max(sum2 - k * out.visibility * out.visibility, 0.0) / (k - 1) / k);
  const double propagated = std::sqrt(err2) / k;
  out.visibility_err = std::max(spread, propagated);

  // Cross-check: joint weighted fit of both count channels to
  // A (1 +- V sin 4theta) / 2 with Poisson errors.
  const double deg = std::numbers::pi / 180.0;
  auto residuals = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(2 * points.size());
    for (std::size_t n = 0; n < points.size(); ++n) {
      const double s = std::sin(4.0 * points[n].theta_deg * deg);
      const double mh = q[0] * (1.0 + q[1] * s) / 2.0;
      const double mv = q[0] * (1.0 - q[1] * s) / 2.0;
      const double nh = static_cast<double>(points[n].n_h);
      const double nv = static_cast<double>(points[n].n_v);
      r[2 * n] = (nh - mh) / std::sqrt(std::max(nh, 1.0));
      r[2 * n + 1] = (nv - mv) / std::sqrt(std::max(nv, 1.0));
    }
    return r;
  };
  Eigen::VectorXd init(2);
  init << static_cast<double>(total) / static_cast<double>(points.size()),
      std::clamp(out.visibility, 0.1, 0.99);
  try {
    const FitOutcome fit = levmar_fit(residuals, init, {});
    out.fit_amplitude = fit.params[0];
    out.fit_visibility = std::abs(fit.params[1]);
    out.fit_visibility_err = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
    out.fit_converged = fit.converged;
  } catch (const std::runtime_error&) {
    out.fit_converged = false;
  }
  return out;
}

ConcurrenceResult concurrence(const Uncertain& visibility, const Uncertain& y_c,
                              const Uncertain& p1, const Uncertain& p,
                              double window_ns) {
  if (y_c.value < 0) throw std::invalid_argument("contamination must be non-negative");
  if (!(p.value > 0)) throw std::invalid_argument("success probability must be positive");
  if (p1.value < 0) throw std::invalid_argument("p1 must be non-negative");

  const double root = std::sqrt(y_c.value);
  // d sqrt(y)/dy blows up at y = 0; the forward difference sqrt(sigma) is the
  // honest scale there.
  const double root_err =
      y_c.value > 0 ? y_c.err / (2.0 * root) : std::sqrt(y_c.err);
  const double core = visibility.value - root;
  const double core_err =
      std::sqrt(visibility.err * visibility.err + root_err * root_err);

  ConcurrenceResult out;
  out.window_ns = window_ns;
  out.visibility = visibility.value;
  out.visibility_err = visibility.err;
  out.contamination = y_c.value;
  out.contamination_err = y_c.err;

  out.normalized_concurrence = std::max(core, 0.0);
  out.normalized_concurrence_err = core_err;
  out.clamped = core < 0;

  const double f = p1.value / p.value;
  const double c = core * f;
  double rel2 = 0;
  if (p1.value > 0) rel2 += (p1.err / p1.value) * (p1.err / p1.value);
  rel2 += (p.err / p.value) * (p.err / p.value);
  const double c_err =
      std::sqrt(f * f * core_err * core_err + core * core * f * f * rel2);
  out.concurrence = std::max(c, 0.0);
  out.concurrence_err = c_err;
  // p * C: the p factors cancel against the heralding denominator.
  out.total_bound = std::max(core * p1.value, 0.0);
  return out;
}

namespace {

// Standard error per bin; zero-count bins borrow the rate of the smallest
// symmetric neighborhood holding at least one count.
Eigen::ArrayXd effective_sigma(const G2Histogram& h) {
  const auto n = static_cast<Eigen::Index>(h.counts.size());
  const double norm = h.total_time_s /
                      (static_cast<double>(h.n1) * static_cast<double>(h.n2) *
                       h.bin_width_ns * 1e-9);
  Eigen::ArrayXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (h.counts[i] > 0) {
      sigma[i] = h.sigma[i];
      continue;
    }
    double lambda = 0;
    for (Eigen::Index r = 1; r < n; ++r) {
      const Eigen::Index a = std::max<Eigen::Index>(0, i - r);
      const Eigen::Index b = std::min(n - 1, i + r);
      std::uint64_t c = 0;
      for (Eigen::Index k = a; k <= b; ++k) c += h.counts[k];
      if (c > 0) {
        lambda = static_cast<double>(c) / static_cast<double>(b - a + 1);
        break;
      }
    }
    if (lambda == 0)
      throw std::invalid_argument("histogram has no counts to weight by");
    sigma[i] = norm * std::sqrt(lambda);
  }
  return sigma;
}

}  // namespace

G2Fit fit_g2(const G2Histogram& h, const G2Model& initial,
             const G2FitOptions& opts) {
  if (h.counts.empty()) throw std::invalid_argument("empty histogram");
  const Eigen::ArrayXd sigma = effective_sigma(h);

  // Pack the free parameters; fixed ones stay at their initial values.
  std::vector<int> which;  // 0 beta, 1 gamma1, 2 gamma2, 3 rho
  if (opts.fit_beta) which.push_back(0);
  if (opts.fit_gamma1) which.push_back(1);
  if (opts.fit_gamma2) which.push_back(2);
  if (opts.fit_rho) which.push_back(3);
  if (which.empty()) throw std::invalid_argument("no free parameters");

  auto unpack = [&](const Eigen::VectorXd& q) {
    G2Model m = initial;
    for (std::size_t k = 0; k < which.size(); ++k) {
      const double v = q[static_cast<Eigen::Index>(k)];
      switch (which[k]) {
        case 0: m.beta = v; break;
        case 1: m.gamma1_per_ns = v; break;
        case 2: m.gamma2_per_ns = v; break;
        default: m.rho = v; break;
      }
    }
    return m;
  };

  const auto n = static_cast<Eigen::Index>(h.counts.size());
  auto residuals = [&](const Eigen::VectorXd& q) {
    const G2Model m = unpack(q);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double tau = h.tau_center_ns(static_cast<std::size_t>(i));
      const double a = m.rho * m.rho;
      const double model = 1.0 -
                           a * m.beta * std::exp(-m.gamma1_per_ns * std::abs(tau)) +
                           a * (m.beta - 1.0) * std::exp(-m.gamma2_per_ns * std::abs(tau));
      r[i] = (h.g2[i] - model) / sigma[i];
    }
    return r;
  };

  Eigen::VectorXd init(static_cast<Eigen::Index>(which.size()));
  for (std::size_t k = 0; k < which.size(); ++k) {
    switch (which[k]) {
      case 0: init[static_cast<Eigen::Index>(k)] = initial.beta; break;
      case 1: init[static_cast<Eigen::Index>(k)] = initial.gamma1_per_ns; break;
      case 2: init[static_cast<Eigen::Index>(k)] = initial.gamma2_per_ns; break;
      default: init[static_cast<Eigen::Index>(k)] = initial.rho; break;
    }
  }

  const FitOutcome fit = levmar_fit(residuals, init, {});
  G2Fit out;
  out.model = unpack(fit.params);
  out.error = G2Model{0, 0, 0, 0};
  for (std::size_t k = 0; k < which.size(); ++k) {
    const double e = std::sqrt(
        std::max(fit.covariance(static_cast<Eigen::Index>(k),
                                static_cast<Eigen::Index>(k)),
                 0.0));
    switch (which[k]) {
      case 0: out.error.beta = e; break;
      case 1: out.error.gamma1_per_ns = e; break;
      case 2: out.error.gamma2_per_ns = e; break;
      default: out.error.rho = e; break;
    }
  }
  out.covariance = fit.covariance;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  out.chi2 = fit.chi2;
  return out;
}

LifetimeScan fit_lifetime(const LifetimeHistogram& h,
                          const std::vector<double>& cutoffs_ns) {
  if (cutoffs_ns.empty()) throw std::invalid_argument("no cutoffs given");
  if (h.counts.empty()) throw std::invalid_argument("empty histogram");
  const double period_ns = static_cast<double>(h.period_ps) / kPsPerNs;
  const double guard_ns = 1.0;  // wrap-around + jitter spill near the period end
  const double max_cutoff = *std::max_element(cutoffs_ns.begin(), cutoffs_ns.end());

  // Crude starting point: background from the last decile, decay scale from
  // the 1/e crossing of the excess over background.
  const std::size_t nb = h.counts.size();
  double bg0 = 0;
  {
    const std::size_t from = nb - std::max<std::size_t>(nb / 10, 1);
    std::uint64_t s = 0;
    for (std::size_t i = from; i < nb; ++i) s += h.counts[i];
    bg0 = static_cast<double>(s) / static_cast<double>(nb - from);
  }

  LifetimeScan scan;
  for (const double cutoff : cutoffs_ns) {
    if (cutoff < 0) throw std::invalid_argument("cutoff must be non-negative");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < nb; ++i) {
      const double t = h.bin_center_ns(i);
      if (t >= cutoff && t < period_ns - guard_ns) idx.push_back(i);
    }
    if (idx.size() < 8)
      throw std::invalid_argument("too few bins past the cutoff");

    double amp0 = 0, t_first = h.bin_center_ns(idx.front());
    for (const auto i : idx)
      amp0 = std::max(amp0, static_cast<double>(h.counts[i]) - bg0);
    if (amp0 <= 0) throw std::invalid_argument("no excess over background");
    double gamma0 = 0;
    for (const auto i : idx) {
      if (static_cast<double>(h.counts[i]) - bg0 <= amp0 / std::numbers::e) {
        const double dt = h.bin_center_ns(i) - t_first;
        if (dt > 0) gamma0 = 1.0 / dt;
        break;
      }
    }
    if (gamma0 <= 0) gamma0 = 4.0 / (period_ns - guard_ns - cutoff);

    auto residuals = [&](const Eigen::VectorXd& q) {
      Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double t = h.bin_center_ns(idx[k]);
        const double c = static_cast<double>(h.counts[idx[k]]);
        const double model = q[0] * std::exp(-q[1] * t) + q[2];
        r[static_cast<Eigen::Index>(k)] = (c - model) / std::sqrt(std::max(c, 1.0));
      }
      return r;
    };
    Eigen::VectorXd init(3);
    // amp0 is the excess at the cutoff; refer it back to t = 0.
    init << amp0 * std::exp(gamma0 * t_first), gamma0, std::max(bg0, 1e-3);

    LifetimeFit f;
    f.cutoff_ns = cutoff;
    const FitOutcome fit = levmar_fit(residuals, init, {});
    f.amplitude = {fit.params[0], std::sqrt(std::max(fit.covariance(0, 0), 0.0))};
    f.gamma_per_ns = {fit.params[1], std::sqrt(std::max(fit.covariance(1, 1), 0.0))};
    f.background = {fit.params[2], std::sqrt(std::max(fit.covariance(2, 2), 0.0))};
    f.converged = fit.converged;
    f.chi2 = fit.chi2;

    if (f.gamma_per_ns.value > 0 &&
        (period_ns - guard_ns - max_cutoff) * f.gamma_per_ns.value < 3.0)
      throw std::invalid_argument(
          "histogram covers fewer than 3 decay constants past the largest cutoff");
    scan.fits.push_back(f);
  }

  scan.recommended_index = scan.fits.size() - 1;
  scan.recommended_gamma_per_ns = scan.fits.back().gamma_per_ns.value;
  scan.plateau_found = false;
  for (std::size_t k = 1; k < scan.fits.size(); ++k) {
    const double prev = scan.fits[k - 1].gamma_per_ns.value;
    const double curr = scan.fits[k].gamma_per_ns.value;
    if (prev > 0 && std::abs(curr - prev) / prev < 0.02) {
      scan.recommended_index = k;
      scan.recommended_gamma_per_ns = curr;
      scan.plateau_found = true;
      break;
    }
  }
  return scan;
}

}  // namespace ptag
