#pragma once

// Two-time correlations by quantum regression, the cavity-vs-fluorescence
// flux comparison, and Gaussian post-smoothing of g2 curves.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "oal/evolve.hpp"

namespace oal {

// Sampled g2(tau). taus are signed and, for regression output, symmetric
// about 0 with g2(-tau) = g2(tau) exact by construction (stationarity).
// errors is empty for regression curves and carries per-bin counting errors
// for estimator curves. smoothing_sigma is 0 for raw curves.
struct G2Curve {
  std::vector<double> taus;    // us
  std::vector<double> values;
  std::vector<double> errors;  // empty or same length as values
  double smoothing_sigma = 0.0;
  std::string params_note;

  void validate() const {
    if (values.size() != taus.size())
      throw std::invalid_argument("G2Curve: value/tau length mismatch");
    if (!errors.empty() && errors.size() != taus.size())
      throw std::invalid_argument("G2Curve: error/tau length mismatch");
    for (double v : values)
      if (v < 0.0) throw std::invalid_argument("G2Curve: values must be >= 0");
  }
};

inline std::vector<double> symmetric_tau_grid(double tau_max, int intervals = 2048) {
  if (!(tau_max > 0.0) || intervals < 2 || intervals % 2 != 0)
    throw std::invalid_argument("symmetric_tau_grid: need tau_max > 0 and an even interval count");
  std::vector<double> taus(intervals + 1);
  const double dt = 2.0 * tau_max / intervals;
  for (int i = 0; i <= intervals; ++i) taus[i] = -tau_max + i * dt;
  taus[intervals / 2] = 0.0;
  return taus;
}

// g2(tau) = Tr[a^dag a  e^{L tau}(a rho_ss a^dag)] / nbar^2 for tau >= 0,
// mirrored to tau < 0. The seeded operator is normalized to unit trace, so
// the propagator sees an ordinary density matrix; the trace is restored in
// the readout.
inline G2Curve g2_regression(const LindbladGenerator& gen, const DensityMatrix& rho_ss,
                             const std::vector<double>& taus,
                             const IntegratorOptions& opts = {}) {
  if (rho_ss.space != gen.space()) throw std::invalid_argument("g2_regression: space mismatch");

  // The regression formula only holds from the stationary state.
  {
    detail::LindbladRhs rhs(gen);
    const int d = gen.dim();
    VectorXcd v = Eigen::Map<const VectorXcd>(rho_ss.m.data(), d * d), dv;
    rhs(0.0, v, dv);
    double scale = gen.H.m.norm();
    for (const auto& c : gen.channels) scale += c.rate;
    if (dv.norm() > 1e-6 * (1.0 + scale))
      throw std::invalid_argument("g2_regression: rho_ss is not stationary under gen");
  }

  const Operator a = annihilator(gen.space());
  MatrixXcd seed = a.m * rho_ss.m * a.m.adjoint();
  const double nbar = seed.trace().real();
  if (!(nbar > 0.0))
    throw std::invalid_argument("g2_regression: nbar = 0, correlation undefined");
  seed /= nbar;

  std::vector<double> abs_taus;
  abs_taus.reserve(taus.size());
  for (double t : taus) abs_taus.push_back(std::abs(t));
  std::sort(abs_taus.begin(), abs_taus.end());
  abs_taus.erase(std::unique(abs_taus.begin(), abs_taus.end()), abs_taus.end());

  const int d = gen.dim();
  detail::LindbladRhs rhs(gen);
  VectorXcd v0 = Eigen::Map<const VectorXcd>(seed.data(), d * d);
  std::map<double, double> g2_at;
  integrate_sampled(rhs, v0, 0.0, abs_taus, opts, [&](std::size_t i, double, const VectorXcd& v) {
    Eigen::Map<const MatrixXcd> rho(v.data(), d, d);
    double n_tau = 0.0;
    for (int k = 0; k < d; ++k) n_tau += rho(k, k).real() * gen.space().photons_of(k);
    g2_at[abs_taus[i]] = n_tau / nbar;
  });

  G2Curve out;
  out.taus = taus;
  out.values.reserve(taus.size());
  for (double t : taus) out.values.push_back(std::max(0.0, g2_at.at(std::abs(t))));
  out.validate();
  return out;
}

// kappa*nbar / (gamma_43' <sigma_3'3'>) from steady-state expectations.
inline double flux_ratio(const CqedParams& p, const DensityMatrix& rho_ss,
                         CavityRateConvention conv = CavityRateConvention::Kappa) {
  auto pops = populations(rho_ss);
  return flux_ratio_from_populations(p, pops.nbar, pops.p3p, conv);
}

// Same ratio from the generator's jump-channel rates Tr(L^dag L rho); agrees
// with the expectation route to solver precision and cross-checks the rate
// bookkeeping.
inline double flux_ratio_from_channels(const LindbladGenerator& gen, const DensityMatrix& rho_ss,
                                       CavityRateConvention conv = CavityRateConvention::Kappa) {
  double cavity = -1.0, fluor = -1.0;
  for (const auto& c : gen.channels) {
    const double r = std::real((c.op.m.adjoint() * c.op.m * rho_ss.m).trace());
    if (c.kind == ChannelKind::CavityLoss) cavity = r;
    if (c.kind == ChannelKind::Decay3pTo4) fluor = r;
  }
  if (cavity < 0.0 || fluor < 0.0)
    throw std::invalid_argument("flux_ratio_from_channels: generator lacks the required channels");
  if (!(fluor > 0.0)) throw std::invalid_argument("flux ratio: fluorescence rate is zero");
  const double cavity_flux = (conv == CavityRateConvention::Kappa) ? 0.5 * cavity : cavity;
  return cavity_flux / fluor;
}

// Discrete convolution with a normalized Gaussian kernel; the truncated
// kernel mass is renormalized near the edges. Requires a uniform tau grid.
inline G2Curve smooth_gaussian(const G2Curve& curve, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("smooth_gaussian: sigma must be >= 0");
  if (curve.taus.size() >= 2) {
    const double dt = curve.taus[1] - curve.taus[0];
    for (std::size_t i = 1; i < curve.taus.size(); ++i)
      if (std::abs((curve.taus[i] - curve.taus[i - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
        throw std::invalid_argument("smooth_gaussian: non-uniform tau grid");
  }
  G2Curve out = curve;
  out.smoothing_sigma = sigma;
  if (sigma == 0.0 || curve.taus.size() < 2) return out;

  const double dt = curve.taus[1] - curve.taus[0];
  const int half = static_cast<int>(std::ceil(5.0 * sigma / std::abs(dt)));
  std::vector<double> kernel(2 * half + 1);
  for (int j = -half; j <= half; ++j)
    kernel[j + half] = std::exp(-0.5 * (j * dt) * (j * dt) / (sigma * sigma));

  const int n = static_cast<int>(curve.values.size());
  const bool with_err = !curve.errors.empty();
  for (int i = 0; i < n; ++i) {
    double acc = 0.0, mass = 0.0, var = 0.0;
    for (int j = -half; j <= half; ++j) {
      const int k = i + j;
      if (k < 0 || k >= n) continue;
      const double w = kernel[j + half];
      acc += w * curve.values[k];
      if (with_err) var += w * w * curve.errors[k] * curve.errors[k];
      mass += w;
    }
    out.values[i] = acc / mass;
    if (with_err) out.errors[i] = std::sqrt(var) / mass;
  }
  return out;
}

}  // namespace oal
