#include <catch2/catch_amalgamated.hpp>

#include "oal/correlations.hpp"

using namespace oal;
using Catch::Approx;

namespace {

struct Setup {
  CqedParams p;
  DriveParams d;
  HilbertSpace sp{8};
  LindbladGenerator gen;
  DensityMatrix rho;

  explicit Setup(double x) : d(), gen(make(x)), rho(steady_state(gen)) {}

 private:
  LindbladGenerator make(double x) {
    d.I4 = 13.0;
    d.I3 = pump_intensity_for_ratio(x, d.I4);
    return build_generator(p, d, sp);
  }
};

}  // namespace

TEST_CASE("coherent output of a driven empty cavity has g2 = 1", "[correlations]") {
  CqedParams p;
  p.g_scale = 0.0;
  DriveParams d;
  d.I3 = 0.0;
  d.I4 = 13.0;  // recycler pins the decoupled atom; see test_evolve
  d.probe_epsilon = rate_from_mhz(1.2);
  d.probe_detuning = rate_from_mhz(1.0);
  HilbertSpace sp(8);
  auto gen = build_generator(p, d, sp);
  auto rho = steady_state(gen);
  auto curve = g2_regression(gen, rho, symmetric_tau_grid(1.0, 64));
  for (double v : curve.values) REQUIRE(std::abs(v - 1.0) < 1e-8);
}

TEST_CASE("regression consistency at tau = 0", "[correlations]") {
  Setup s(0.17);
  Operator a = annihilator(s.sp);
  const double nbar = std::real(expectation(number_operator(s.sp), s.rho));
  // direct normal-ordered moment <a^dag a^dag a a>
  Operator adag_adag_a_a(s.sp, a.m.adjoint() * a.m.adjoint() * a.m * a.m);
  const double direct = std::real(expectation(adag_adag_a_a, s.rho)) / (nbar * nbar);
  auto curve = g2_regression(s.gen, s.rho, {0.0});
  REQUIRE(std::abs(curve.values[0] - direct) < 1e-10 * std::max(1.0, direct));
}

TEST_CASE("sub-Poissonian statistics and antibunching at the operating point", "[correlations]") {
  Setup low(0.17);
  auto taus = symmetric_tau_grid(3.0, 2048);
  auto raw = g2_regression(low.gen, low.rho, taus);
  auto smooth = smooth_gaussian(raw, 5e-3);
  const std::size_t i0 = taus.size() / 2;

  REQUIRE(raw.values[i0] < 1.0);
  REQUIRE(smooth.values[i0] < 1.0);
  // antibunching: smoothed g2(0) is the strict minimum over (0, 200 ns]
  for (std::size_t i = i0 + 1; i < taus.size() && taus[i] <= 0.2; ++i)
    REQUIRE(smooth.values[i0] < smooth.values[i]);
  // long-time factorization at the window edge
  REQUIRE(std::abs(raw.values.front() - 1.0) < 0.01);
  REQUIRE(std::abs(raw.values.back() - 1.0) < 0.01);

  // even symmetry is exact by construction
  for (std::size_t i = 0; i < taus.size(); ++i)
    REQUIRE(raw.values[i] == raw.values[taus.size() - 1 - i]);

  Setup high(0.83);
  auto raw_high = g2_regression(high.gen, high.rho, {0.0});
  REQUIRE(raw_high.values[0] > raw.values[i0]);
}

TEST_CASE("long-time factorization at 20 / min-rate", "[correlations]") {
  Setup s(0.1);
  const double tau_max = 20.0 / s.gen.min_rate();
  auto curve = g2_regression(s.gen, s.rho, {tau_max});
  REQUIRE(std::abs(curve.values[0] - 1.0) < 1e-3);
}

TEST_CASE("g2 regression rejects a dark cavity and a non-stationary seed", "[correlations]") {
  CqedParams p;
  DriveParams d;
  d.I3 = 0.0;
  d.I4 = 13.0;
  HilbertSpace sp(4);
  auto gen = build_generator(p, d, sp);
  auto rho = steady_state(gen);  // nbar = 0
  REQUIRE_THROWS_AS(g2_regression(gen, rho, {0.0}), std::invalid_argument);

  Setup s(0.17);
  auto not_ss = DensityMatrix::pure(basis_state(s.sp, Level::F3, 1));
  REQUIRE_THROWS_AS(g2_regression(s.gen, not_ss, {0.0}), std::invalid_argument);
}

TEST_CASE("flux ratio: expectation route equals channel-rate route", "[correlations]") {
  Setup s(0.17);
  const double via_obs = flux_ratio(s.p, s.rho);
  const double via_channels = flux_ratio_from_channels(s.gen, s.rho);
  REQUIRE(std::abs(via_obs - via_channels) < 1e-10 * via_obs);

  const double via_obs2 = flux_ratio(s.p, s.rho, CavityRateConvention::TwoKappa);
  const double via_channels2 = flux_ratio_from_channels(s.gen, s.rho, CavityRateConvention::TwoKappa);
  REQUIRE(via_obs2 == Approx(2.0 * via_obs).epsilon(1e-12));
  REQUIRE(std::abs(via_obs2 - via_channels2) < 1e-10 * via_obs2);
}

TEST_CASE("flux ratio vanishes when the cavity decouples", "[correlations]") {
  CqedParams p;
  p.g_scale = 0.0;
  DriveParams d;
  d.I4 = 13.0;
  d.I3 = pump_intensity_for_ratio(0.17, 13.0);
  HilbertSpace sp(4);
  auto rho = steady_state(build_generator(p, d, sp));
  auto pops = populations(rho);
  REQUIRE(pops.p3p > 0.0);  // pump still populates 3'
  REQUIRE(flux_ratio(p, rho) == Approx(0.0).margin(1e-12));
}

TEST_CASE("flux ratio rejects zero fluorescence population", "[correlations]") {
  CqedParams p;
  DriveParams d;
  d.I3 = 0.0;
  d.I4 = 13.0;
  HilbertSpace sp(4);
  auto rho = steady_state(build_generator(p, d, sp));  // everything in |3,0>
  REQUIRE_THROWS_AS(flux_ratio(p, rho), std::invalid_argument);
}

TEST_CASE("gaussian smoothing basics", "[correlations]") {
  G2Curve flat;
  flat.taus = symmetric_tau_grid(1.0, 200);
  flat.values.assign(flat.taus.size(), 1.37);

  auto same = smooth_gaussian(flat, 0.0);
  REQUIRE(same.values == flat.values);
  REQUIRE(same.smoothing_sigma == 0.0);

  auto smoothed = smooth_gaussian(flat, 0.02);
  for (double v : smoothed.values) REQUIRE(v == Approx(1.37).margin(1e-12));
  REQUIRE(smoothed.smoothing_sigma == 0.02);
}

TEST_CASE("gaussian smoothing of a unit impulse", "[correlations]") {
  // fine grid so the discrete kernel approaches the closed-form Gaussian
  const double dt = 1e-3, sigma = 5e-3;
  G2Curve impulse;
  for (int i = -100; i <= 100; ++i) impulse.taus.push_back(i * dt);
  impulse.values.assign(impulse.taus.size(), 0.0);
  impulse.values[100] = 1.0;

  auto smoothed = smooth_gaussian(impulse, sigma);
  const double peak_want = dt / (sigma * std::sqrt(2.0 * M_PI));
  REQUIRE(smoothed.values[100] == Approx(peak_want).epsilon(0.01));
  // kernel mass is conserved away from the edges
  double total = 0.0;
  for (double v : smoothed.values) total += v;
  REQUIRE(total == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gaussian smoothing rejects non-uniform grids", "[correlations]") {
  G2Curve bad;
  bad.taus = {0.0, 0.1, 0.3};
  bad.values = {1.0, 1.0, 1.0};
  REQUIRE_THROWS_AS(smooth_gaussian(bad, 0.05), std::invalid_argument);
}
