#include "ptag/cli.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptag/analysis.hpp"
#include "ptag/config.hpp"
#include "ptag/correlator.hpp"
#include "ptag/oracle.hpp"
#include "ptag/pipeline.hpp"
#include "ptag/tagfile.hpp"

namespace ptag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest round-trip decimal form, so CSV output is byte-stable.
std::string fmt(double v) {
  std::array<char, 32> buf;
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), p) : std::string("nan");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  return f;
}

std::vector<double> parse_windows(const std::string& spec) {
  double start = 0, stop = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' ||
      !in.eof())
    throw std::invalid_argument("window spec must be start:stop:step (ns)");
  if (!(start > 0) || !(step > 0) || stop < start)
    throw std::invalid_argument("window spec values out of order");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double w = start + i * step;
    if (w > stop + 1e-9) break;
    out.push_back(w);
  }
  return out;
}

std::vector<double> parse_list(const std::string& spec) {
  std::vector<double> out;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

SimMode parse_mode(const std::string& mode) {
  if (mode == "cw") return SimMode::CW;
  if (mode == "pulsed") return SimMode::Pulsed;
  if (mode == "coherent") return SimMode::Coherent;
  if (mode == "mz-scan") return SimMode::MzScan;
  throw std::invalid_argument("unknown mode: " + mode);
}

struct PopulationRow {
  Probabilities p;
  Probabilities err;
};

void write_population_csv(std::ofstream& f, double window_ns,
                          const PopulationRow& row) {
  double yc = std::numeric_limits<double>::quiet_NaN();
  double yc_err = yc;
  if (row.p.p1 > 0) {
    const Uncertain y = contamination(row.p, row.err);
    yc = y.value;
    yc_err = y.err;
  }
  f << fmt(window_ns) << ',' << fmt(row.p.p0) << ',' << fmt(row.p.p1) << ','
    << fmt(row.p.p2) << ',' << fmt(row.err.p0) << ',' << fmt(row.err.p1)
    << ',' << fmt(row.err.p2) << ',' << fmt(yc) << ',' << fmt(yc_err) << '\n';
}

// ---- simulate ----

struct SimulateArgs {
  std::string config;
  std::string mode = "cw";
  std::string out;
};

void cmd_simulate(const SimulateArgs& a) {
  const SimMode mode = parse_mode(a.mode);
  const SimSetup setup = make_setup(load_config(a.config), mode);

  if (mode == SimMode::MzScan) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::vector<std::pair<double, std::string>> manifest;
    run_scan(setup, [&](std::size_t i, double theta, const TagStream& s) {
      char name[32];
      std::snprintf(name, sizeof(name), "theta_%02zu.ptag", i);
      write_tagfile(dir / name, s);
      manifest.emplace_back(theta, name);
    });
    auto mf = open_out(dir / "manifest.csv");
    mf << "theta_deg,file\n";
    for (const auto& [theta, file] : manifest)
      mf << fmt(theta) << ',' << file << '\n';
    return;
  }

  const RoutingMode routing = RoutingMode::Population;
  const TagStream detected = run_chain(setup, mode, routing);
  write_tagfile(a.out, detected);
}

// ---- g2 ----

struct G2Args {
  std::string in;
  double bin_width_ns = 1.0;
  double tau_max_ns = 200.0;
  std::string out;
  std::string fit_json;
  double init_beta = 1.2;
  double init_gamma1 = 0.03;
  double init_gamma2 = 1e-4;
  double init_rho = 1.0;
  bool fix_beta = false;
  bool fix_gamma1 = false;
  bool fix_gamma2 = false;
  bool fit_rho = false;
  unsigned parallel = 1;
};

void cmd_g2(const G2Args& a) {
  const TagStream s = read_tagfile(a.in);
  const TagStream dh = select_channel(s, Channel::DH);
  const TagStream dv = select_channel(s, Channel::DV);
  const G2Histogram h =
      a.parallel > 1
          ? estimate_g2_parallel(dh, dv, a.bin_width_ns, a.tau_max_ns, a.parallel)
          : estimate_g2(dh, dv, a.bin_width_ns, a.tau_max_ns);

  auto f = open_out(a.out);
  f << "tau_ns,g2,stderr\n";
  for (std::size_t i = 0; i < h.bin_count(); ++i)
    f << fmt(h.tau_center_ns(i)) << ',' << fmt(h.g2[static_cast<Eigen::Index>(i)])
      << ',' << fmt(h.sigma[static_cast<Eigen::Index>(i)]) << '\n';

  if (a.fit_json.empty()) return;
  G2Model init;
  init.beta = a.init_beta;
  init.gamma1_per_ns = a.init_gamma1;
  init.gamma2_per_ns = a.init_gamma2;
  init.rho = a.init_rho;
  G2FitOptions opts;
  opts.fit_beta = !a.fix_beta;
  opts.fit_gamma1 = !a.fix_gamma1;
  opts.fit_gamma2 = !a.fix_gamma2;
  opts.fit_rho = a.fit_rho;
  const G2Fit fit = fit_g2(h, init, opts);
  json j;
  j["beta"] = fit.model.beta;
  j["beta_err"] = fit.error.beta;
  j["gamma1_per_ns"] = fit.model.gamma1_per_ns;
  j["gamma1_per_ns_err"] = fit.error.gamma1_per_ns;
  j["gamma2_per_ns"] = fit.model.gamma2_per_ns;
  j["gamma2_per_ns_err"] = fit.error.gamma2_per_ns;
  j["rho"] = fit.model.rho;
  j["rho_err"] = fit.error.rho;
  j["chi2"] = fit.chi2;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["n_bins"] = h.bin_count();
  auto jf = open_out(a.fit_json);
  jf << j.dump(2) << '\n';
}

// ---- lifetime ----

struct LifetimeArgs {
  std::string in;
  unsigned bin_width_ps = 25;
  std::string cutoffs = "0.5,1,1.5,2,2.5,3,4,5";
  std::string out;
  std::string fit_json;
};

void cmd_lifetime(const LifetimeArgs& a) {
  const TagStream s = read_tagfile(a.in);
  const LifetimeHistogram h = lifetime_histogram(s, a.bin_width_ps);

  auto f = open_out(a.out);
  f << "t_ns,counts\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    f << fmt(h.bin_center_ns(i)) << ',' << h.counts[i] << '\n';

  if (a.fit_json.empty()) return;
  const LifetimeScan scan = fit_lifetime(h, parse_list(a.cutoffs));
  json j;
  j["period_ns"] = static_cast<double>(h.period_ps) / kPsPerNs;
  j["bin_width_ps"] = h.bin_width_ps;
  j["total_photons"] = h.total_photons;
  j["photons_before_first_sync"] = h.photons_before_first_sync;
  j["overflow"] = h.overflow;
  j["recommended_gamma_per_ns"] = scan.recommended_gamma_per_ns;
  j["recommended_index"] = scan.recommended_index;
  j["plateau_found"] = scan.plateau_found;
  j["fits"] = json::array();
  for (const LifetimeFit& fit : scan.fits) {
    json e;
    e["cutoff_ns"] = fit.cutoff_ns;
    e["gamma_per_ns"] = fit.gamma_per_ns.value;
    e["gamma_per_ns_err"] = fit.gamma_per_ns.err;
    e["amplitude"] = fit.amplitude.value;
    e["amplitude_err"] = fit.amplitude.err;
    e["background"] = fit.background.value;
    e["background_err"] = fit.background.err;
    e["chi2"] = fit.chi2;
    e["converged"] = fit.converged;
    j["fits"].push_back(e);
  }
  auto jf = open_out(a.fit_json);
  jf << j.dump(2) << '\n';
}

// ---- populations ----

struct PopulationsArgs {
  std::string in;
  std::string windows = "2:100:2";
  std::string out;
  double eta = 0;
  double eta_err = 0;
  std::string out_corrected;
  bool self_consistent = false;
};

void cmd_populations(const PopulationsArgs& a) {
  if (!a.out_corrected.empty() && !(a.eta > 0))
    throw std::invalid_argument(
        "corrected populations need --eta (lumped detection efficiency)");
  const TagStream s = read_tagfile(a.in);
  const TagStream dh = select_channel(s, Channel::DH);
  const TagStream dv = select_channel(s, Channel::DV);

  auto fd = open_out(a.out);
  fd << "window_ns,p0,p1,p2,p0_err,p1_err,p2_err,yc,yc_err\n";
  std::ofstream fc;
  if (!a.out_corrected.empty()) {
    fc = open_out(a.out_corrected);
    fc << "window_ns,p0,p1,p2,p0_err,p1_err,p2_err,yc,yc_err\n";
  }

  const InversionMode mode = a.self_consistent ? InversionMode::SelfConsistent
                                               : InversionMode::Verbatim;
  for (const double w : parse_windows(a.windows)) {
    const PopulationEstimate est = window_populations(dh, dv, w);
    write_population_csv(fd, w, {est.detected, est.detected_err});
    if (fc.is_open()) {
      const PopulationEstimate inv =
          invert_losses(est, {a.eta, a.eta_err}, mode);
      write_population_csv(fc, w, {inv.corrected, inv.corrected_err});
    }
  }
}

// ---- visibility ----

struct VisibilityArgs {
  std::string manifest;
  std::string out_csv;
  std::string out_json;
};

std::vector<std::pair<double, fs::path>> read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path.string() + ": cannot open manifest");
  std::string line;
  if (!std::getline(f, line) || line != "theta_deg,file")
    throw std::runtime_error(path.string() +
                             ": manifest must start with 'theta_deg,file'");
  std::vector<std::pair<double, fs::path>> rows;
  const fs::path base = path.parent_path();
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path.string() + ": malformed manifest row");
    rows.emplace_back(std::stod(line.substr(0, comma)),
                      base / line.substr(comma + 1));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty manifest");
  return rows;
}

void cmd_visibility(const VisibilityArgs& a) {
  const auto rows = read_manifest(a.manifest);
  std::vector<ScanPoint> points;
  points.reserve(rows.size());
  for (const auto& [theta, file] : rows) {
    const TagStream s = read_tagfile(file);
    ScanPoint pt;
    pt.theta_deg = theta;
    pt.n_h = s.count(Channel::DH);
    pt.n_v = s.count(Channel::DV);
    points.push_back(pt);
  }

  auto f = open_out(a.out_csv);
  f << "theta_deg,n_h,n_v,p_h,p_v\n";
  for (const ScanPoint& pt : points) {
    const double tot = static_cast<double>(pt.n_h + pt.n_v);
    const double ph = tot > 0 ? static_cast<double>(pt.n_h) / tot : 0.0;
    const double pv = tot > 0 ? static_cast<double>(pt.n_v) / tot : 0.0;
    f << fmt(pt.theta_deg) << ',' << pt.n_h << ',' << pt.n_v << ','
      << fmt(ph) << ',' << fmt(pv) << '\n';
  }

  const VisibilityResult v = visibility_from_scan(points);
  json j;
  j["visibility"] = v.visibility;
  j["visibility_err"] = v.visibility_err;
  j["fit_visibility"] = v.fit_visibility;
  j["fit_visibility_err"] = v.fit_visibility_err;
  j["fit_amplitude"] = v.fit_amplitude;
  j["fit_converged"] = v.fit_converged;
  j["fringe_extrema"] = v.fringe_extrema;
  j["n_points"] = points.size();
  auto jf = open_out(a.out_json);
  jf << j.dump(2) << '\n';
}

// ---- concurrence ----

struct ConcurrenceArgs {
  std::string in;
  std::string windows = "2:100:2";
  double v = -1;
  double v_err = 0;
  double eta = 0;
  double eta_err = 0;
  bool self_consistent = false;
  std::string out;
};

void cmd_concurrence(const ConcurrenceArgs& a) {
  if (!(a.v >= 0 && a.v <= 1))
    throw std::invalid_argument("--v (measured visibility) must lie in [0, 1]");
  const TagStream s = read_tagfile(a.in);
  const TagStream dh = select_channel(s, Channel::DH);
  const TagStream dv = select_channel(s, Channel::DV);

  json arr = json::array();
  for (const double w : parse_windows(a.windows)) {
    PopulationEstimate est = window_populations(dh, dv, w);
    Probabilities p = est.detected;
    Probabilities perr = est.detected_err;
    if (a.eta > 0) {
      const InversionMode mode = a.self_consistent
                                     ? InversionMode::SelfConsistent
                                     : InversionMode::Verbatim;
      est = invert_losses(est, {a.eta, a.eta_err}, mode);
      p = est.corrected;
      perr = est.corrected_err;
    }
    const Uncertain yc = contamination(p, perr);
    const ConcurrenceResult c = concurrence(
        {a.v, a.v_err}, yc, {p.p1, perr.p1}, {1.0, 0.0}, w);
    json e;
    e["window_ns"] = c.window_ns;
    e["visibility"] = c.visibility;
    e["visibility_err"] = c.visibility_err;
    e["contamination"] = c.contamination;
    e["contamination_err"] = c.contamination_err;
    e["normalized_concurrence"] = c.normalized_concurrence;
    e["normalized_concurrence_err"] = c.normalized_concurrence_err;
    e["concurrence"] = c.concurrence;
    e["concurrence_err"] = c.concurrence_err;
    e["total_bound"] = c.total_bound;
    e["clamped"] = c.clamped;
    arr.push_back(e);
  }
  auto jf = open_out(a.out);
  jf << arr.dump(2) << '\n';
}

// ---- oracle ----

struct OracleArgs {
  double beta = 1.18;
  double gamma1 = 0.035;
  double gamma2 = 1.18e-4;
  double rho = 0.925;
  double flux = -1;
  double v = 1.0;
  std::string windows = "2:100:2";
  std::string out;
};

void cmd_oracle(const OracleArgs& a) {
  if (!(a.flux > 0))
    throw std::invalid_argument("--flux-per-s must be positive");
  G2Model m;
  m.beta = a.beta;
  m.gamma1_per_ns = a.gamma1;
  m.gamma2_per_ns = a.gamma2;
  m.rho = a.rho;
  validate(m);

  auto f = open_out(a.out);
  f << "window_ns,g2_detected,mu,p0,p1,p2,yc,cn\n";
  for (const double w : parse_windows(a.windows)) {
    const OraclePopulations o = populations_from_g2(m, a.flux, w);
    // The analytic p2 is the total two-photon probability, so the
    // contamination proxy uses the true-pair form 2 p2 p0 / p1^2 (an ideal
    // Poisson model gives exactly 1). Windowed two-detector measurements see
    // only the one-in-each-path half of p2 and put the factor N/(N-1) back.
    const double yc = o.p.p1 > 0 ? 2.0 * o.p.p2 * o.p.p0 / (o.p.p1 * o.p.p1)
                                 : std::numeric_limits<double>::quiet_NaN();
    const double cn =
        o.p.p1 > 0 ? std::max(a.v - std::sqrt(yc), 0.0)
                   : std::numeric_limits<double>::quiet_NaN();
    f << fmt(w) << ',' << fmt(o.g2_detected) << ',' << fmt(o.mu) << ','
      << fmt(o.p.p0) << ',' << fmt(o.p.p1) << ',' << fmt(o.p.p2) << ','
      << fmt(yc) << ',' << fmt(cn) << '\n';
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{
      "Photon time-tag simulator and analysis tool: three-level emitter, "
      "interferometer and detector chain, correlation and entanglement "
      "witnesses"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand(
      "simulate", "Run the source->optics->detector chain and write tag files");
  c_sim->add_option("--config", sim.config, "key=value experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  c_sim->add_option("--mode", sim.mode, "cw | pulsed | coherent | mz-scan")
      ->required();
  c_sim->add_option("--out", sim.out,
                    "output tag file (mz-scan: output directory)")
      ->required();
  c_sim->callback([&] { cmd_simulate(sim); });

  G2Args g2;
  auto* c_g2 = app.add_subcommand(
      "g2", "Correlation histogram (and optional model fit) from a tag file");
  c_g2->add_option("--in", g2.in, "input tag file")->required()
      ->check(CLI::ExistingFile);
  c_g2->add_option("--bin-width-ns", g2.bin_width_ns, "histogram bin width");
  c_g2->add_option("--tau-max-ns", g2.tau_max_ns, "correlation range");
  c_g2->add_option("--out", g2.out, "histogram CSV path")->required();
  c_g2->add_option("--fit-json", g2.fit_json, "write model-fit JSON here");
  c_g2->add_option("--init-beta", g2.init_beta, "fit start value");
  c_g2->add_option("--init-gamma1", g2.init_gamma1, "fit start value (1/ns)");
  c_g2->add_option("--init-gamma2", g2.init_gamma2, "fit start value (1/ns)");
  c_g2->add_option("--init-rho", g2.init_rho, "signal fraction used by the fit");
  c_g2->add_flag("--fix-beta", g2.fix_beta, "hold beta at its start value");
  c_g2->add_flag("--fix-gamma1", g2.fix_gamma1, "hold gamma1 at its start value");
  c_g2->add_flag("--fix-gamma2", g2.fix_gamma2, "hold gamma2 at its start value");
  c_g2->add_flag("--fit-rho", g2.fit_rho, "treat rho as a free parameter");
  c_g2->add_option("--parallel", g2.parallel, "worker chunks (1 = sequential)");
  c_g2->callback([&] { cmd_g2(g2); });

  LifetimeArgs lt;
  auto* c_lt = app.add_subcommand(
      "lifetime", "Excitation-relative delay histogram and decay-rate fits");
  c_lt->add_option("--in", lt.in, "input tag file (needs Sync tags)")
      ->required()
      ->check(CLI::ExistingFile);
  c_lt->add_option("--bin-width-ps", lt.bin_width_ps, "histogram bin width");
  c_lt->add_option("--cutoffs-ns", lt.cutoffs,
                   "comma-separated fit start cutoffs");
  c_lt->add_option("--out", lt.out, "histogram CSV path")->required();
  c_lt->add_option("--fit-json", lt.fit_json, "write cutoff-scan JSON here");
  c_lt->callback([&] { cmd_lifetime(lt); });

  PopulationsArgs pop;
  auto* c_pop = app.add_subcommand(
      "populations", "Per-window photon-number populations from a tag file");
  c_pop->add_option("--in", pop.in, "input tag file")->required()
      ->check(CLI::ExistingFile);
  c_pop->add_option("--windows", pop.windows, "window grid start:stop:step, ns");
  c_pop->add_option("--out", pop.out, "detected-populations CSV path")
      ->required();
  c_pop->add_option("--eta", pop.eta, "lumped detection efficiency");
  c_pop->add_option("--eta-err", pop.eta_err, "efficiency standard error");
  c_pop->add_option("--out-corrected", pop.out_corrected,
                    "loss-corrected CSV path (needs --eta)");
  c_pop->add_flag("--self-consistent", pop.self_consistent,
                  "exact inversion of binomial thinning instead of the "
                  "detected-value subtraction");
  c_pop->callback([&] { cmd_populations(pop); });

  VisibilityArgs vis;
  auto* c_vis = app.add_subcommand(
      "visibility", "Fringe visibility from an angle-scan manifest");
  c_vis->add_option("--manifest", vis.manifest, "scan manifest CSV")
      ->required()
      ->check(CLI::ExistingFile);
  c_vis->add_option("--out-csv", vis.out_csv, "per-angle counts CSV")
      ->required();
  c_vis->add_option("--out-json", vis.out_json, "visibility summary JSON")
      ->required();
  c_vis->callback([&] { cmd_visibility(vis); });

  ConcurrenceArgs con;
  auto* c_con = app.add_subcommand(
      "concurrence", "Entanglement witnesses per window from a tag file");
  c_con->add_option("--in", con.in, "input tag file")->required()
      ->check(CLI::ExistingFile);
  c_con->add_option("--windows", con.windows, "window grid start:stop:step, ns");
  c_con->add_option("--v", con.v, "measured fringe visibility")->required();
  c_con->add_option("--v-err", con.v_err, "visibility standard error");
  c_con->add_option("--eta", con.eta,
                    "lumped detection efficiency (use corrected populations)");
  c_con->add_option("--eta-err", con.eta_err, "efficiency standard error");
  c_con->add_flag("--self-consistent", con.self_consistent,
                  "exact loss inversion instead of the detected-value form");
  c_con->add_option("--out", con.out, "result JSON path")->required();
  c_con->callback([&] { cmd_concurrence(con); });

  OracleArgs ora;
  auto* c_ora = app.add_subcommand(
      "oracle", "Analytic window-statistics curves for overlay plots");
  c_ora->add_option("--beta", ora.beta, "bunching amplitude");
  c_ora->add_option("--gamma1", ora.gamma1, "fast decay rate, 1/ns");
  c_ora->add_option("--gamma2", ora.gamma2, "slow decay rate, 1/ns");
  c_ora->add_option("--rho", ora.rho, "signal fraction");
  c_ora->add_option("--flux-per-s", ora.flux, "photon flux entering the stage")
      ->required();
  c_ora->add_option("--v", ora.v, "visibility used for the witness column");
  c_ora->add_option("--windows", ora.windows, "window grid start:stop:step, ns");
  c_ora->add_option("--out", ora.out, "CSV path")->required();
  c_ora->callback([&] { cmd_oracle(ora); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ptag
