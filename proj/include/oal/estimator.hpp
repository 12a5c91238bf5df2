#pragma once

// Reconstruction of g2(tau) and nbar from click records, the way the
// experiment does it: cross-correlation histogram, rate normalization,
// uncorrelated-background correction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oal/correlations.hpp"
#include "oal/trajectory.hpp"

namespace oal {

// Cross-detector coincidence counts n(tau) on bins centered at integer
// multiples of bin_width_ns (tau = t_D2 - t_D1, signed). Rates are in
// clicks per us; duration in us.
struct CoincidenceHistogram {
  std::int64_t bin_width_ns = 10;
  std::vector<double> tau_centers_ns;
  std::vector<std::uint64_t> counts;
  double rate1 = 0.0, rate2 = 0.0;        // per us
  double background1 = 0.0, background2 = 0.0;  // per us
  double duration = 0.0;                  // us

  double bin_width_us() const { return bin_width_ns * 1e-3; }
};

// Ordered cross-detector pairs (D1 at t, D2 at t + tau) binned over
// tau in [-tau_max, tau_max]. Every pair in the window is counted, not just
// nearest neighbours, so the estimate is unbiased at all tau.
inline CoincidenceHistogram cross_correlate(const ClickRecord& record,
                                            std::int64_t bin_width_ns,
                                            std::int64_t tau_max_ns) {
  if (bin_width_ns < 1) throw std::invalid_argument("cross_correlate: bin width must be >= 1 ns");
  if (tau_max_ns < bin_width_ns)
    throw std::invalid_argument("cross_correlate: tau_max must cover at least one bin");
  std::vector<std::int64_t> t1, t2;
  for (const auto& e : record.events) (e.detector == 0 ? t1 : t2).push_back(e.t_ns);
  if (t1.empty() || t2.empty())
    throw std::invalid_argument("cross_correlate: record must contain events on both detectors");

  const std::int64_t k_max = tau_max_ns / bin_width_ns;
  const std::int64_t n_bins = 2 * k_max + 1;
  CoincidenceHistogram h;
  h.bin_width_ns = bin_width_ns;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  h.tau_centers_ns.resize(static_cast<std::size_t>(n_bins));
  for (std::int64_t j = -k_max; j <= k_max; ++j)
    h.tau_centers_ns[static_cast<std::size_t>(j + k_max)] = static_cast<double>(j * bin_width_ns);

  // Window edges: bin j covers [j*b - b/2, j*b + b/2).
  const double lo = (-static_cast<double>(k_max) - 0.5) * bin_width_ns;
  const double hi = (static_cast<double>(k_max) + 0.5) * bin_width_ns;
  std::size_t begin = 0, end = 0;
  for (const std::int64_t t : t1) {
    while (begin < t2.size() && static_cast<double>(t2[begin] - t) < lo) ++begin;
    if (end < begin) end = begin;
    while (end < t2.size() && static_cast<double>(t2[end] - t) < hi) ++end;
    for (std::size_t i = begin; i < end; ++i) {
      const double tau = static_cast<double>(t2[i] - t);
      const auto j = static_cast<std::int64_t>(std::floor(tau / bin_width_ns + 0.5));
      h.counts[static_cast<std::size_t>(j + k_max)] += 1;
    }
  }

  h.duration = record.duration_ns * 1e-3;
  h.rate1 = static_cast<double>(t1.size()) / h.duration;
  h.rate2 = static_cast<double>(t2.size()) / h.duration;
  return h;
}

// g2_raw(tau) = n(tau) / (R1 R2 T dtau); the background-corrected value
// assumes the background is Poissonian, uncorrelated with the signal and
// across detectors:
//   g2 = (g2_raw R1 R2 - R1 B2 - B1 R2 + B1 B2) / ((R1-B1)(R2-B2)).
// Errors are sqrt(n) counting errors pushed through the same algebra.
inline G2Curve normalize_g2(const CoincidenceHistogram& h) {
  if (!(h.rate1 > h.background1) || !(h.rate2 > h.background2) || h.background1 < 0.0 ||
      h.background2 < 0.0)
    throw std::invalid_argument("normalize_g2: need R1 > B1 >= 0 and R2 > B2 >= 0");
  if (!(h.duration > 0.0)) throw std::invalid_argument("normalize_g2: empty record");

  const double denom_raw = h.rate1 * h.rate2 * h.duration * h.bin_width_us();
  const double corr_scale = h.rate1 * h.rate2 /
                            ((h.rate1 - h.background1) * (h.rate2 - h.background2));
  const double offset = (h.rate1 * h.background2 + h.background1 * h.rate2 -
                         h.background1 * h.background2) /
                        ((h.rate1 - h.background1) * (h.rate2 - h.background2));

  G2Curve out;
  out.taus.reserve(h.counts.size());
  out.values.reserve(h.counts.size());
  out.errors.reserve(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double g_raw = static_cast<double>(h.counts[i]) / denom_raw;
    const double err_raw = std::sqrt(static_cast<double>(h.counts[i])) / denom_raw;
    out.taus.push_back(h.tau_centers_ns[i] * 1e-3);
    out.values.push_back(std::max(0.0, g_raw * corr_scale - offset));
    out.errors.push_back(err_raw * corr_scale);
  }
  out.validate();
  return out;
}

// Intracavity photon number from the total detected rate (per us):
// nbar = (R_total - backgrounds) / (2 kappa xi).
inline double infer_nbar(double total_rate, const DetectionChain& chain, double kappa) {
  chain.validate();
  if (!(kappa > 0.0)) throw std::invalid_argument("infer_nbar: kappa must be > 0");
  if (!(chain.xi() > 0.0)) throw std::invalid_argument("infer_nbar: detection efficiency is zero");
  const double signal = total_rate - 2.0 * chain.background_rate;
  if (signal < 0.0)
    throw std::invalid_argument("infer_nbar: detected rate is below the declared background");
  return signal / (2.0 * kappa * chain.xi());
}

}  // namespace oal
