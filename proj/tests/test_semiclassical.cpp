#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oal/semiclassical.hpp"

using namespace oal;
using Catch::Approx;

namespace {

DriveParams drive_at(double x, double I4 = 13.0) {
  DriveParams d;
  d.I4 = I4;
  d.I3 = pump_intensity_for_ratio(x, I4);
  return d;
}

MeanFieldState random_state(std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Matrix4cd m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = complexd(g(rng), g(rng));
  MeanFieldState s;
  s.atomic = m * m.adjoint();
  s.atomic /= s.atomic.trace().real();
  s.alpha = complexd(g(rng), g(rng));
  return s;
}

double rhs_norm(const MeanFieldState& ds) {
  return std::sqrt(std::norm(ds.alpha) + ds.atomic.squaredNorm());
}

}  // namespace

TEST_CASE("ground state with drives off is a fixed point", "[semiclassical]") {
  CqedParams p;
  DriveParams d;
  d.I3 = d.I4 = 0.0;
  auto ds = mean_field_rhs(MeanFieldState::ground(), p, d);
  REQUIRE(rhs_norm(ds) < 1e-14);
}

TEST_CASE("decoupled field equation is pure cavity decay", "[semiclassical]") {
  CqedParams p;
  p.g_scale = 0.0;
  DriveParams d = drive_at(0.17);
  MeanFieldState s = MeanFieldState::ground();
  s.alpha = complexd(0.7, -0.2);
  auto ds = mean_field_rhs(s, p, d);
  REQUIRE(std::abs(ds.alpha - (-p.kappa * s.alpha)) < 1e-14);
}

TEST_CASE("population derivatives sum to zero", "[semiclassical]") {
  CqedParams p;
  DriveParams d = drive_at(0.3);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto ds = mean_field_rhs(random_state(rng), p, d);
    const double sum = ds.atomic.trace().real();
    REQUIRE(std::abs(sum) < 1e-12);
  }
}

TEST_CASE("gauge covariance of the mean-field flow", "[semiclassical]") {
  CqedParams p;
  DriveParams d = drive_at(0.2);
  std::mt19937 rng(17);
  MeanFieldState s = random_state(rng);

  const double phi = 0.83;
  const complexd ph(std::cos(phi), std::sin(phi));
  // charge rotation: alpha -> alpha e^{i phi}, |4>,|4'> -> e^{i phi}|4>,|4'>
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
  u(1, 1) = ph;
  u(3, 3) = ph;
  MeanFieldState rotated;
  rotated.alpha = s.alpha * ph;
  rotated.atomic = u * s.atomic * u.adjoint();

  auto ds = mean_field_rhs(s, p, d);
  auto ds_rot = mean_field_rhs(rotated, p, d);
  // the derivative transforms covariantly
  REQUIRE(std::abs(ds_rot.alpha - ds.alpha * ph) < 1e-12);
  REQUIRE((ds_rot.atomic - u * ds.atomic * u.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero branch stability flips across the lasing window", "[semiclassical]") {
  CqedParams p;
  REQUIRE(semiclassical_growth_rate(p, drive_at(0.005)) < 0.0);
  REQUIRE(semiclassical_growth_rate(p, drive_at(0.17)) > 0.0);
  REQUIRE(semiclassical_growth_rate(p, drive_at(2.33)) < 0.0);
}

TEST_CASE("steady solutions below and above threshold", "[semiclassical]") {
  CqedParams p;

  auto below = semiclassical_steady(p, drive_at(0.005));
  REQUIRE_FALSE(below.lasing);
  REQUIRE(std::abs(below.state.alpha) == 0.0);
  REQUIRE(below.max_transverse_eig < 0.0);

  auto above = semiclassical_steady(p, drive_at(0.17));
  REQUIRE(above.lasing);
  REQUIRE(std::norm(above.state.alpha) > 1e-3);
  REQUIRE(above.max_transverse_eig < 0.0);
  REQUIRE_FALSE(above.marginal);

  // the returned state is a genuine root of the co-rotating flow
  auto ds = mean_field_rhs(above.state, p, drive_at(0.17), above.nu);
  REQUIRE(rhs_norm(ds) < 1e-10);

  // x = 0: alpha = 0 branch with everything in |3>
  DriveParams d0 = drive_at(0.0);
  auto dark = semiclassical_steady(p, d0);
  REQUIRE_FALSE(dark.lasing);
  REQUIRE(dark.state.p3() == Approx(1.0).margin(1e-9));
}

TEST_CASE("threshold scan locates the bifurcation", "[semiclassical]") {
  CqedParams p;
  DriveParams d;
  std::vector<double> xs = {0.002, 0.005, 0.01, 0.03, 0.08, 0.17, 0.3, 0.45, 0.7, 1.2, 2.33};
  auto scan = threshold_scan(p, d, xs);
  REQUIRE(scan.x_th.has_value());
  REQUIRE(*scan.x_th > 0.005);
  REQUIRE(*scan.x_th < 0.05);
  // growth rate changes sign exactly at the reported threshold
  REQUIRE(semiclassical_growth_rate(p, drive_at(*scan.x_th * 0.9)) < 0.0);
  REQUIRE(semiclassical_growth_rate(p, drive_at(*scan.x_th * 1.1)) > 0.0);

  // |alpha|^2 is zero below threshold, positive and smooth inside the window
  for (const auto& pt : scan.points) {
    if (pt.x < *scan.x_th) REQUIRE(pt.alpha_sq == 0.0);
  }
  bool any_lasing = false;
  for (const auto& pt : scan.points) any_lasing |= pt.lasing;
  REQUIRE(any_lasing);
}

TEST_CASE("lasing branch matches an exhaustive root scan", "[semiclassical]") {
  // oracle: scan |alpha| and nu on a grid and locate the residual minimum
  // independently of the Newton solver
  CqedParams p;
  DriveParams d = drive_at(0.17);
  auto sol = semiclassical_steady(p, d);
  REQUIRE(sol.lasing);

  double best = 1e300, best_a = 0.0, best_nu = 0.0;
  for (int ia = 1; ia <= 60; ++ia) {
    const double a = 0.005 * ia;
    for (int in = -60; in <= 60; ++in) {
      const double nu = 0.5 * in;
      const double r = std::abs(semiclassical_field_residual(p, d, a, nu));
      if (r < best) {
        best = r;
        best_a = a;
        best_nu = nu;
      }
    }
  }
  REQUIRE(best_a == Approx(std::abs(sol.state.alpha)).margin(0.006));
  REQUIRE(best_nu == Approx(sol.nu).margin(0.6));
}

TEST_CASE("no lasing root exists when C1 < 1", "[semiclassical]") {
  CqedParams p;
  p.g0 = rate_from_mhz(1.5);  // C1 ~ 0.10
  REQUIRE(critical_numbers(p).C1 < 1.0);

  for (double x : {0.05, 0.17, 0.83, 2.33}) {
    DriveParams d = drive_at(x);
    REQUIRE(semiclassical_growth_rate(p, d) < 0.0);
    auto sol = semiclassical_steady(p, d);
    REQUIRE_FALSE(sol.lasing);
    // root-scan oracle: the field residual stays bounded away from zero for
    // every nonzero amplitude
    double min_res = 1e300;
    for (int ia = 1; ia <= 30; ++ia) {
      const double a = 0.01 * ia;
      for (int in = -20; in <= 20; ++in)
        min_res = std::min(min_res,
                           std::abs(semiclassical_field_residual(p, d, a, 1.0 * in)) / a);
    }
    REQUIRE(min_res > 0.1 * p.kappa);
  }
  auto scan = threshold_scan(p, DriveParams{}, {0.01, 0.1, 0.5, 1.0, 2.33});
  REQUIRE_FALSE(scan.x_th.has_value());
}

TEST_CASE("scan grid must ascend", "[semiclassical]") {
  CqedParams p;
  REQUIRE_THROWS_AS(threshold_scan(p, DriveParams{}, {0.1, 0.05}), std::invalid_argument);
}
