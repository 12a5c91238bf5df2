#pragma once

// Command implementations behind the CLI: pump sweeps, g2 curves, trajectory
// record generation, and the estimation pipeline. Kept header-side so the
// test suite can drive them in-process.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "oal/config.hpp"
#include "oal/correlations.hpp"
#include "oal/estimator.hpp"
#include "oal/evolve.hpp"
#include "oal/io.hpp"
#include "oal/parallel.hpp"
#include "oal/semiclassical.hpp"
#include "oal/trajectory.hpp"

namespace oal {

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void write_text(const std::string& path, const std::string& body) {
  auto out = open_out(path);
  out << body;
}

}  // namespace detail

// Quantum sweep and semiclassical scan on the same grid; writes
// quantum.csv, semiclassical.csv and sweep_summary.txt.
inline SweepCurve cmd_sweep(const RunConfig& cfg, int threads = 1,
                            std::ostream& log = std::cout) {
  const CqedParams p = cfg.cqed();
  const DriveParams d = cfg.drive();
  const HilbertSpace space = cfg.space();
  const std::vector<double> xs = cfg.sweep_grid();
  if (xs.size() < 2) throw ConfigError("cmd_sweep: zero-length grid");

  SweepCurve curve;
  curve.points.resize(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    DriveParams di = d;
    di.I3 = pump_intensity_for_ratio(xs[i], di.I4);
    try {
      auto rho = steady_state(build_generator(p, di, space));
      auto pops = populations(rho);
      const double fr =
          pops.p3p > 0.0 ? flux_ratio_from_populations(p, pops.nbar, pops.p3p) : 0.0;
      curve.points[i] = {xs[i], pops.nbar, pops.p3p, pops.p4, fr};
    } catch (const SteadyStateError& e) {
      throw SteadyStateError("sweep at x = " + std::to_string(xs[i]) + ": " + e.what(),
                             e.null_space_dim);
    }
  });
  curve.validate();

  ThresholdScan scan = threshold_scan(p, d, xs);

  const auto header = cfg.csv_header();
  write_sweep_csv(detail::join_path(cfg.out_dir, "quantum.csv"), curve, header);
  write_semiclassical_csv(detail::join_path(cfg.out_dir, "semiclassical.csv"), scan, header);

  const auto* best = &curve.points[0];
  for (const auto& pt : curve.points)
    if (pt.nbar > best->nbar) best = &pt;
  double fr_min = 1e300, fr_max = 0.0;
  for (const auto& pt : curve.points)
    if (pt.x > 0.0) {
      fr_min = std::min(fr_min, pt.flux_ratio);
      fr_max = std::max(fr_max, pt.flux_ratio);
    }
  std::ostringstream summary;
  summary << "# config_hash = " << cfg.config_hash() << "\n"
          << "x_star = " << fmt_double(best->x) << "\n"
          << "nbar_max = " << fmt_double(best->nbar) << "\n"
          << "x_th = " << (scan.x_th ? fmt_double(*scan.x_th) : std::string("absent")) << "\n"
          << "flux_ratio_min = " << fmt_double(fr_min) << "\n"
          << "flux_ratio_max = " << fmt_double(fr_max) << "\n";
  detail::write_text(detail::join_path(cfg.out_dir, "sweep_summary.txt"), summary.str());
  log << "sweep: " << xs.size() << " points, x* = " << fmt_double(best->x)
      << ", nbar_max = " << fmt_double(best->nbar) << ", x_th = "
      << (scan.x_th ? fmt_double(*scan.x_th) : std::string("absent")) << "\n";
  return curve;
}

// Regression g2, raw and smoothed, over the symmetric tau window.
inline G2Curve cmd_g2(const RunConfig& cfg, std::ostream& log = std::cout) {
  const CqedParams p = cfg.cqed();
  const DriveParams d = cfg.drive();
  if (!(d.I3 > 0.0) && !(d.probe_epsilon != 0.0))
    throw ConfigError("cmd_g2: needs x > 0 (or a probe drive); the dark cavity has no g2");
  const HilbertSpace space = cfg.space();
  auto gen = build_generator(p, d, space);
  auto rho = steady_state(gen);

  const auto taus = symmetric_tau_grid(cfg.tau_max_us, cfg.tau_intervals);
  G2Curve raw = g2_regression(gen, rho, taus, cfg.integrator());
  G2Curve smoothed = smooth_gaussian(raw, cfg.smoothing_sigma_ns * 1e-3);
  write_g2_csv(detail::join_path(cfg.out_dir, "g2.csv"), raw, smoothed, cfg.csv_header());
  const std::size_t i0 = taus.size() / 2;
  log << "g2: nbar = " << fmt_double(populations(rho).nbar)
      << ", g2(0) = " << fmt_double(raw.values[i0])
      << ", smoothed g2(0) = " << fmt_double(smoothed.values[i0]) << "\n";
  return raw;
}

struct TrajectoriesResult {
  std::vector<TrajectoryRun> runs;
  double nbar_steady = 0.0;
  double predicted_rate = 0.0;  // clicks per us, both detectors
  double observed_rate = 0.0;
  std::uint64_t master_seed = 0;
};

// N seeded trajectory runs started in the stationary ensemble; per-run click
// records, a 5 ms binned count-rate trace per run, and the ensemble-averaged
// photon number.
inline TrajectoriesResult cmd_trajectories(const RunConfig& cfg, int threads = 1,
                                           std::ostream& log = std::cout) {
  const CqedParams p = cfg.cqed();
  const DriveParams d = cfg.drive();
  const HilbertSpace space = cfg.space();
  const DetectionChain chain = cfg.chain();
  auto gen = build_generator(p, d, space);
  auto rho_ss = steady_state(gen);

  TrajectoriesResult result;
  result.master_seed = cfg.seed;
  if (result.master_seed == 0) {
    result.master_seed = std::random_device{}();
    log << "master seed not set; generated seed = " << result.master_seed << "\n";
  }
  result.nbar_steady = populations(rho_ss).nbar;
  result.predicted_rate =
      2.0 * p.kappa * result.nbar_steady * chain.xi() + 2.0 * chain.background_rate;

  const double duration = cfg.trajectory_duration_ms * 1e3;  // us
  TrajectoryOptions opts;
  opts.initial_mixture = rho_ss;
  opts.dt_max = cfg.dt_max_us;
  opts.burn_in = cfg.burn_in_us;
  opts.method = cfg.method();
  opts.integrator = cfg.integrator();
  for (double t = 0.0; t <= duration; t += cfg.sample_dt_us) opts.sample_times.push_back(t);

  const int n = cfg.trajectory_count;
  result.runs.resize(n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t k) {
    TrajectoryRun run =
        run_trajectory(gen, chain, duration, trajectory_seed(result.master_seed, k), opts);
    run.config_digest = cfg.config_hash();
    run.record.meta.emplace_back("config_hash", cfg.config_hash());
    run.record.meta.emplace_back("master_seed", std::to_string(result.master_seed));
    run.record.meta.emplace_back("trajectory_index", std::to_string(k));
    run.record.meta.emplace_back("seed", std::to_string(run.seed));
    run.record.meta.emplace_back("xi", fmt_double(chain.xi()));
    run.record.meta.emplace_back("background_per_us", fmt_double(chain.background_rate));
    result.runs[k] = std::move(run);
  });

  std::uint64_t clicks = 0;
  char name[64];
  for (int k = 0; k < n; ++k) {
    const auto& run = result.runs[k];
    clicks += run.record.events.size();
    std::snprintf(name, sizeof name, "records/run_%04d.txt", k);
    write_click_record(detail::join_path(cfg.out_dir, name), run.record);

    // Fig. 2 style presentation: counts summed over 5 ms bins.
    const std::int64_t bin_ns = 5'000'000;
    const auto n_bins = static_cast<std::size_t>((run.record.duration_ns + bin_ns - 1) / bin_ns);
    std::vector<std::uint64_t> bins(std::max<std::size_t>(n_bins, 1), 0);
    for (const auto& e : run.record.events) bins[static_cast<std::size_t>(e.t_ns / bin_ns)]++;
    std::snprintf(name, sizeof name, "rates/run_%04d.csv", k);
    auto out = detail::open_out(detail::join_path(cfg.out_dir, name));
    for (const auto& line : cfg.csv_header()) out << "# " << line << "\n";
    out << "t_ms,counts_per_5ms\n";
    for (std::size_t b = 0; b < bins.size(); ++b)
      out << fmt_double(5.0 * b) << ',' << bins[b] << "\n";
  }
  result.observed_rate = static_cast<double>(clicks) / (duration * n);

  if (n >= 2) {
    auto trace = ensemble_average(result.runs, TraceObservable::Nbar);
    write_ensemble_csv(detail::join_path(cfg.out_dir, "ensemble_nbar.csv"), trace, "nbar",
                       cfg.csv_header());
  }

  std::ostringstream summary;
  summary << "# config_hash = " << cfg.config_hash() << "\n"
          << "master_seed = " << result.master_seed << "\n"
          << "runs = " << n << "\n"
          << "duration_ms_each = " << fmt_double(cfg.trajectory_duration_ms) << "\n"
          << "nbar_steady = " << fmt_double(result.nbar_steady) << "\n"
          << "predicted_click_rate_per_us = " << fmt_double(result.predicted_rate) << "\n"
          << "observed_click_rate_per_us = " << fmt_double(result.observed_rate) << "\n";
  detail::write_text(detail::join_path(cfg.out_dir, "trajectories_summary.txt"), summary.str());
  log << "trajectories: " << n << " runs, observed rate " << fmt_double(result.observed_rate)
      << " /us vs predicted " << fmt_double(result.predicted_rate) << " /us\n";
  return result;
}

struct EstimateResult {
  G2Curve g2;
  G2Curve g2_smoothed;
  double nbar = 0.0;
  double nbar_stderr = 0.0;
  double total_rate = 0.0;  // per us
};

// Full estimator pipeline over one or more click-record files: merged
// cross-correlation histogram, normalization, background correction,
// Gaussian smoothing, and the inferred intracavity photon number.
inline EstimateResult cmd_estimate(const std::vector<std::string>& record_paths,
                                   const RunConfig& cfg, std::ostream& log = std::cout) {
  if (record_paths.empty()) throw ConfigError("cmd_estimate: no record files given");
  const DetectionChain chain = cfg.chain();
  const double kappa = rate_from_mhz(cfg.kappa_mhz);
  const auto bin_ns = static_cast<std::int64_t>(cfg.bin_width_ns);
  const auto tau_max_ns = static_cast<std::int64_t>(cfg.estimator_tau_max_ns);

  CoincidenceHistogram merged;
  double total_duration = 0.0;
  std::uint64_t n1 = 0, n2 = 0;
  bool first = true;
  for (const auto& path : record_paths) {
    ClickRecord rec = read_click_record(path);
    CoincidenceHistogram h = cross_correlate(rec, bin_ns, tau_max_ns);
    if (first) {
      merged = h;
      first = false;
    } else {
      if (h.counts.size() != merged.counts.size())
        throw std::runtime_error("cmd_estimate: records produced mismatched histograms");
      for (std::size_t i = 0; i < h.counts.size(); ++i) merged.counts[i] += h.counts[i];
    }
    total_duration += rec.duration_ns * 1e-3;
    n1 += rec.count(0);
    n2 += rec.count(1);
  }
  merged.duration = total_duration;
  merged.rate1 = static_cast<double>(n1) / total_duration;
  merged.rate2 = static_cast<double>(n2) / total_duration;
  merged.background1 = merged.background2 = chain.background_rate;

  EstimateResult res;
  res.g2 = normalize_g2(merged);
  res.g2_smoothed = smooth_gaussian(res.g2, cfg.smoothing_sigma_ns * 1e-3);
  res.total_rate = static_cast<double>(n1 + n2) / total_duration;
  res.nbar = infer_nbar(res.total_rate, chain, kappa);
  res.nbar_stderr =
      std::sqrt(static_cast<double>(n1 + n2)) / total_duration / (2.0 * kappa * chain.xi());

  write_g2_csv(detail::join_path(cfg.out_dir, "g2_estimated.csv"), res.g2, res.g2_smoothed,
               cfg.csv_header());
  std::ostringstream summary;
  summary << "# config_hash = " << cfg.config_hash() << "\n"
          << "records = " << record_paths.size() << "\n"
          << "total_clicks = " << (n1 + n2) << "\n"
          << "duration_us = " << fmt_double(total_duration) << "\n"
          << "total_rate_per_us = " << fmt_double(res.total_rate) << "\n"
          << "nbar_inferred = " << fmt_double(res.nbar) << "\n"
          << "nbar_stderr = " << fmt_double(res.nbar_stderr) << "\n";
  detail::write_text(detail::join_path(cfg.out_dir, "nbar_summary.txt"), summary.str());
  log << "estimate: " << (n1 + n2) << " clicks over " << fmt_double(total_duration * 1e-6)
      << " s, nbar = " << fmt_double(res.nbar) << " +- " << fmt_double(res.nbar_stderr) << "\n";
  return res;
}

}  // namespace oal
