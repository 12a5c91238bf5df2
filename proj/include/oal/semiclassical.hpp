#pragma once

// Mean-field (factorized) theory of the same four-state model: every
// atom-field moment <a sigma> is replaced by <a><sigma>, which closes the
// equations on a c-number field amplitude plus the full 4x4 atomic density
// matrix. Exhibits a conventional laser threshold, unlike the quantum model.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <vector>

#include "oal/common.hpp"
#include "oal/model.hpp"

namespace oal {

using Matrix4cd = Eigen::Matrix4cd;

// alpha = <a> plus the atomic state. The closure needs all six atomic
// coherences; the three named accessors are the ones that appear in the
// field equation and in reported output.
struct MeanFieldState {
  complexd alpha{0.0, 0.0};
  Matrix4cd atomic = Matrix4cd::Zero();  // <i|rho_A|j>, levels ordered 3,4,3',4'

  static MeanFieldState ground() {
    MeanFieldState s;
    s.atomic(0, 0) = 1.0;
    return s;
  }

  double p3() const { return atomic(0, 0).real(); }
  double p4() const { return atomic(1, 1).real(); }
  double p3p() const { return atomic(2, 2).real(); }
  double p4p() const { return atomic(3, 3).real(); }
  complexd coh_33p() const { return atomic(2, 0); }   // <sigma_33'> = <3'|rho|3>
  complexd coh_43p() const { return atomic(2, 1); }   // <sigma_43'>
  complexd coh_44p() const { return atomic(3, 1); }   // <sigma_44'>

  void validate() const {
    const double sum = p3() + p4() + p3p() + p4p();
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("MeanFieldState: populations must sum to 1");
    for (double pop : {p3(), p4(), p3p(), p4p()})
      if (pop < -1e-9 || pop > 1.0 + 1e-9)
        throw std::invalid_argument("MeanFieldState: populations must lie in [0, 1]");
  }
};

namespace detail {

inline Matrix4cd level_op(Level a, Level b) {
  Matrix4cd m = Matrix4cd::Zero();
  m(static_cast<int>(a), static_cast<int>(b)) = 1.0;
  return m;
}

// U(1) charge of the lasing transition; generates the gauge orbit
// alpha -> alpha e^{i phi}, |4>,|4'> -> e^{i phi} |4>,|4'>.
inline Matrix4cd charge_op() {
  return level_op(Level::F4, Level::F4) + level_op(Level::F4p, Level::F4p);
}

inline Matrix4cd atomic_hamiltonian(const CqedParams& p, const DriveParams& d, complexd alpha,
                                    double nu) {
  using L = Level;
  const double om3 = d.omega3(p), om4 = d.omega4(p);
  Matrix4cd h = Matrix4cd::Zero();
  h += -d.delta3 * level_op(L::F3p, L::F3p);
  h += (d.delta_ca - d.delta3) * level_op(L::F4, L::F4);
  h += (d.delta_ca - d.delta3 - d.delta4) * level_op(L::F4p, L::F4p);
  h += 0.5 * om3 * (level_op(L::F3p, L::F3) + level_op(L::F3, L::F3p));
  h += 0.5 * om4 * (level_op(L::F4p, L::F4) + level_op(L::F4, L::F4p));
  // In the frame co-rotating at the lasing frequency nu (alpha(t) = A
  // e^{-i nu t} stationary), the charge operator enters with +nu.
  h += p.g() * (std::conj(alpha) * level_op(L::F4, L::F3p) + alpha * level_op(L::F3p, L::F4));
  if (nu != 0.0) h += nu * charge_op();
  return h;
}

inline std::vector<std::pair<Matrix4cd, double>> atomic_jumps(const CqedParams& p) {
  using L = Level;
  return {
      {level_op(L::F3, L::F3p), 2.0 * p.gamma * p.b_3p_to_3},
      {level_op(L::F4, L::F3p), 2.0 * p.gamma * p.b_3p_to_4},
      {level_op(L::F4, L::F4p), 2.0 * p.gamma * p.b_4p_to_4},
      {level_op(L::F3, L::F4p), 2.0 * p.gamma * p.b_4p_to_3},
  };
}

}  // namespace detail

// Time derivative of the factorized system, in a frame co-rotating at nu
// relative to the standard rotating frame (nu = 0 gives the plain mean-field
// equations). The field picks up -kappa alpha - i g <sigma_43'> (+ i nu
// alpha); the atomic block evolves under the Lindblad equation with the
// field replaced by the c-number alpha.
inline MeanFieldState mean_field_rhs(const MeanFieldState& s, const CqedParams& p,
                                     const DriveParams& d, double nu = 0.0) {
  p.validate();
  d.validate();
  const Matrix4cd h = detail::atomic_hamiltonian(p, d, s.alpha, nu);
  Matrix4cd drho = complexd(0.0, -1.0) * (h * s.atomic - s.atomic * h);
  for (const auto& [l, rate] : detail::atomic_jumps(p)) {
    const Matrix4cd ldl = l.adjoint() * l;
    drho += rate * (l * s.atomic * l.adjoint() -
                    0.5 * (ldl * s.atomic + s.atomic * ldl));
  }
  MeanFieldState out;
  out.atomic = drho;
  out.alpha = complexd(0.0, nu) * s.alpha - p.kappa * s.alpha -
              complexd(0.0, 1.0) * p.g() * s.coh_43p();
  return out;
}

// Exact steady state of the atomic block for a frozen field amplitude, via
// the vectorized 4-level Liouvillian with a trace row.
inline Matrix4cd semiclassical_atomic_steady(const CqedParams& p, const DriveParams& d,
                                             complexd alpha, double nu) {
  const Matrix4cd h = detail::atomic_hamiltonian(p, d, alpha, nu);
  Eigen::Matrix<complexd, 16, 16> super = Eigen::Matrix<complexd, 16, 16>::Zero();
  auto addL = [&](const Matrix4cd& a, complexd w) {  // w * (I (x) a)
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) super(b * 4 + i, b * 4 + j) += w * a(i, j);
  };
  auto addR = [&](const Matrix4cd& b, complexd w) {  // w * (b^T (x) I)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int r = 0; r < 4; ++r) super(i * 4 + r, j * 4 + r) += w * b(i, j);
  };
  addL(h, complexd(0.0, -1.0));
  addR(h, complexd(0.0, 1.0));
  for (const auto& [l, rate] : detail::atomic_jumps(p)) {
    const Matrix4cd lc = l.conjugate();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int m = 0; m < 4; ++m)
            super(i * 4 + k, j * 4 + m) += rate * lc(i, j) * l(k, m);
    const Matrix4cd ldl = l.adjoint() * l;
    addL(ldl, complexd(-0.5 * rate, 0.0));
    addR(ldl, complexd(-0.5 * rate, 0.0));
  }
  for (int j = 0; j < 16; ++j) super(0, j) = 0.0;
  for (int k = 0; k < 4; ++k) super(0, k * 4 + k) = 1.0;
  Eigen::Matrix<complexd, 16, 1> rhs = Eigen::Matrix<complexd, 16, 1>::Zero();
  rhs(0) = 1.0;
  Eigen::Matrix<complexd, 16, 1> v = super.partialPivLu().solve(rhs);
  Matrix4cd rho;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) rho(i, j) = v(j * 4 + i);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return rho;
}

// Field fixed-point residual at a gauge-fixed real amplitude A >= 0:
// (i nu - kappa) A - i g <sigma_43'>_ss(A, nu). A lasing solution is a
// simultaneous zero of the real and imaginary parts.
inline complexd semiclassical_field_residual(const CqedParams& p, const DriveParams& d, double A,
                                             double nu) {
  const Matrix4cd rho = semiclassical_atomic_steady(p, d, complexd(A, 0.0), nu);
  const complexd s43p = rho(2, 1);
  return complexd(-p.kappa, nu) * A - complexd(0.0, 1.0) * p.g() * s43p;
}

namespace detail {

// Traceless real packing (17 dims): Re/Im alpha, p4, p3p, p4p, then the six
// upper-triangle coherences as Re/Im pairs. p3 is implied by the trace.
inline void pack_state(const MeanFieldState& s, double* v) {
  v[0] = s.alpha.real();
  v[1] = s.alpha.imag();
  v[2] = s.p4();
  v[3] = s.p3p();
  v[4] = s.p4p();
  int k = 5;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      v[k++] = s.atomic(i, j).real();
      v[k++] = s.atomic(i, j).imag();
    }
}

inline MeanFieldState unpack_state(const double* v) {
  MeanFieldState s;
  s.alpha = complexd(v[0], v[1]);
  s.atomic(1, 1) = v[2];
  s.atomic(2, 2) = v[3];
  s.atomic(3, 3) = v[4];
  s.atomic(0, 0) = 1.0 - v[2] - v[3] - v[4];
  int k = 5;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      s.atomic(i, j) = complexd(v[k], v[k + 1]);
      s.atomic(j, i) = std::conj(s.atomic(i, j));
      k += 2;
    }
  return s;
}

inline void pack_derivative(const MeanFieldState& ds, double* v) {
  // same layout; the implied-p3 slot is consistent because populations sum
  // to a conserved total
  pack_state(ds, v);
  // pack_state reads p4/p3p/p4p straight from the diagonal, which for a
  // derivative is exactly what we want; nothing else to fix up.
}

constexpr int kPackedDim = 17;

inline Eigen::VectorXd packed_rhs(const Eigen::VectorXd& v, const CqedParams& p,
                                  const DriveParams& d, double nu) {
  MeanFieldState s = unpack_state(v.data());
  MeanFieldState ds = mean_field_rhs(s, p, d, nu);
  Eigen::VectorXd out(kPackedDim);
  pack_derivative(ds, out.data());
  return out;
}

}  // namespace detail

// Eigenvalues of the Jacobian of the (co-rotating) mean-field flow at a
// given state, on the traceless coordinates. On a lasing solution one
// eigenvalue is the exact gauge zero mode.
inline Eigen::VectorXcd mean_field_jacobian_eigs(const MeanFieldState& s, const CqedParams& p,
                                                 const DriveParams& d, double nu = 0.0) {
  Eigen::VectorXd v0(detail::kPackedDim);
  detail::pack_state(s, v0.data());
  const Eigen::VectorXd f0 = detail::packed_rhs(v0, p, d, nu);
  Eigen::MatrixXd jac(detail::kPackedDim, detail::kPackedDim);
  for (int k = 0; k < detail::kPackedDim; ++k) {
    Eigen::VectorXd v = v0;
    const double h = 1e-7 * std::max(1.0, std::abs(v0(k)));
    v(k) += h;
    jac.col(k) = (detail::packed_rhs(v, p, d, nu) - f0) / h;
  }
  return Eigen::EigenSolver<Eigen::MatrixXd>(jac, false).eigenvalues();
}

// Largest growth rate of perturbations around the alpha = 0 (non-lasing)
// branch; positive means the branch is unstable and the system lases.
inline double semiclassical_growth_rate(const CqedParams& p, const DriveParams& d) {
  MeanFieldState s;
  s.atomic = semiclassical_atomic_steady(p, d, complexd(0.0, 0.0), 0.0);
  return mean_field_jacobian_eigs(s, p, d, 0.0).real().maxCoeff();
}

struct SemiclassicalSolution {
  MeanFieldState state;
  double nu = 0.0;       // lasing frequency offset from the rotating frame
  bool lasing = false;
  double max_transverse_eig = 0.0;  // largest Re eigenvalue outside the gauge mode
  bool marginal = false;            // extra near-zero modes were present
};

struct SemiclassicalOptions {
  std::optional<std::pair<double, double>> seed;  // (A, nu) continuation seed
  double zero_tol = 1e-8;       // |Re eig| below this is neutral
  double newton_tol = 1e-13;    // on |residual| / kappa
  int max_iterations = 80;
  double relax_time = 150.0;    // us; attractor integration horizon
};

namespace detail {

// Fixed-step RK4 relaxation toward the attractor; returns (A, nu) estimated
// from the settled amplitude and the unwrapped phase winding.
inline std::optional<std::pair<double, double>> relax_to_attractor(const CqedParams& p,
                                                                   const DriveParams& d,
                                                                   double t_final) {
  MeanFieldState s = MeanFieldState::ground();
  s.alpha = complexd(0.05, 0.0);
  double scale = p.kappa + 2.0 * p.gamma + d.omega3(p) + d.omega4(p) + p.g() +
                 std::abs(d.delta3) + std::abs(d.delta4) + std::abs(d.delta_ca);
  const double dt = std::min(2e-3, 1.2 / scale);
  auto step = [&](MeanFieldState& st) {
    const MeanFieldState k1 = mean_field_rhs(st, p, d);
    MeanFieldState t2;
    t2.alpha = st.alpha + 0.5 * dt * k1.alpha;
    t2.atomic = st.atomic + 0.5 * dt * k1.atomic;
    const MeanFieldState k2 = mean_field_rhs(t2, p, d);
    MeanFieldState t3;
    t3.alpha = st.alpha + 0.5 * dt * k2.alpha;
    t3.atomic = st.atomic + 0.5 * dt * k2.atomic;
    const MeanFieldState k3 = mean_field_rhs(t3, p, d);
    MeanFieldState t4;
    t4.alpha = st.alpha + dt * k3.alpha;
    t4.atomic = st.atomic + dt * k3.atomic;
    const MeanFieldState k4 = mean_field_rhs(t4, p, d);
    st.alpha += dt / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha);
    st.atomic += dt / 6.0 * (k1.atomic + 2.0 * k2.atomic + 2.0 * k3.atomic + k4.atomic);
  };
  // relax in chunks until |alpha| settles (limit circle or zero)
  const double t_chunk = 2.0;
  const long per_chunk = std::max<long>(1, static_cast<long>(t_chunk / dt));
  double prev_mag = -1.0;
  double t = 0.0;
  while (t < t_final) {
    for (long i = 0; i < per_chunk; ++i) step(s);
    t += per_chunk * dt;
    const double mag = std::abs(s.alpha);
    if (prev_mag >= 0.0 && std::abs(mag - prev_mag) < 1e-10 * std::max(mag, 1e-4)) break;
    prev_mag = mag;
  }
  if (std::abs(s.alpha) < 1e-7) return std::nullopt;
  // unwrapped phase winding over a short tail gives the pulled frequency;
  // per-step increments stay far below pi, so no aliasing
  const double t_tail = 0.5;
  const long m = std::max<long>(1, static_cast<long>(t_tail / dt));
  double phase = 0.0;
  complexd prev = s.alpha;
  for (long i = 0; i < m; ++i) {
    step(s);
    phase += std::arg(s.alpha / prev);
    prev = s.alpha;
  }
  const double nu = -phase / (m * dt);
  return std::make_pair(std::abs(s.alpha), nu);
}

}  // namespace detail

// Steady state of the mean-field theory. The alpha = 0 branch is solved
// exactly; if it is unstable, the lasing branch is located by a damped
// 2-variable Newton iteration on (A, nu) (the atomic block being solved
// exactly at each iterate), seeded from continuation data or from a
// relaxation run. Stability is decided by the Jacobian spectrum with the
// gauge zero mode excluded; ties are reported via `marginal`, never broken
// silently.
inline SemiclassicalSolution semiclassical_steady(const CqedParams& p, const DriveParams& d,
                                                  const SemiclassicalOptions& opts = {}) {
  p.validate();
  d.validate();

  MeanFieldState zero;
  zero.atomic = semiclassical_atomic_steady(p, d, complexd(0.0, 0.0), 0.0);
  const Eigen::VectorXcd eigs0 = mean_field_jacobian_eigs(zero, p, d, 0.0);
  const double grow0 = eigs0.real().maxCoeff();

  auto newton = [&](double A0, double nu0) -> std::optional<std::pair<double, double>> {
    double A = A0, nu = nu0;
    const double f_tol = opts.newton_tol * p.kappa * (1.0 + A0);
    const double f_floor = 1e-10 * std::max(1.0, p.kappa);  // arithmetic floor fallback
    for (int it = 0; it < opts.max_iterations; ++it) {
      const complexd f = semiclassical_field_residual(p, d, A, nu);
      if (std::abs(f) < f_tol) return A > 1e-6 ? std::make_optional(std::make_pair(A, nu))
                                               : std::nullopt;
      const double hA = 1e-7 * std::max(1.0, A);
      const double hn = 1e-7 * std::max(1.0, std::abs(nu));
      const complexd fA = (semiclassical_field_residual(p, d, A + hA, nu) - f) / hA;
      const complexd fn = (semiclassical_field_residual(p, d, A, nu + hn) - f) / hn;
      Eigen::Matrix2d jac;
      jac << fA.real(), fn.real(), fA.imag(), fn.imag();
      Eigen::Vector2d rhs(-f.real(), -f.imag());
      const Eigen::Vector2d delta = jac.fullPivLu().solve(rhs);
      if (!delta.allFinite()) return std::nullopt;
      double step = 1.0;
      const double f0n = std::abs(f);
      while (step > 1e-4) {
        const double At = std::abs(A + step * delta(0));
        const double nut = nu + step * delta(1);
        if (std::abs(semiclassical_field_residual(p, d, At, nut)) < f0n) {
          A = At;
          nu = nut;
          break;
        }
        step *= 0.5;
      }
      if (step <= 1e-4) {
        // no further decrease achievable; accept if already at the floor
        if (f0n < f_floor && A > 1e-6) return std::make_pair(A, nu);
        return std::nullopt;
      }
      if (A > 1e4) return std::nullopt;
    }
    return std::nullopt;
  };

  std::optional<std::pair<double, double>> root;
  if (opts.seed) root = newton(opts.seed->first, opts.seed->second);
  if (!root && grow0 > opts.zero_tol) {
    if (auto est = detail::relax_to_attractor(p, d, opts.relax_time)) {
      root = newton(est->first, est->second);
      if (!root) root = est;  // relaxation itself converged to the attractor
    }
  }

  auto finalize = [&](const MeanFieldState& st, double nu, bool lasing) {
    SemiclassicalSolution sol;
    sol.state = st;
    sol.nu = nu;
    sol.lasing = lasing;
    const Eigen::VectorXcd eigs = mean_field_jacobian_eigs(st, p, d, nu);
    // Sort out the gauge zero mode (one is expected on the lasing branch).
    std::vector<double> res;
    for (int i = 0; i < eigs.size(); ++i) res.push_back(eigs(i).real());
    std::sort(res.begin(), res.end());
    int neutral = 0;
    double max_transverse = -1e300;
    for (double rr : res) {
      if (std::abs(rr) <= opts.zero_tol * std::max(1.0, p.kappa)) { ++neutral; continue; }
      max_transverse = std::max(max_transverse, rr);
    }
    sol.max_transverse_eig = max_transverse;
    const int expected_neutral = lasing ? 1 : 0;
    sol.marginal = neutral > expected_neutral;
    return sol;
  };

  if (root) {
    MeanFieldState st;
    st.alpha = complexd(root->first, 0.0);
    st.atomic = semiclassical_atomic_steady(p, d, st.alpha, root->second);
    SemiclassicalSolution sol = finalize(st, root->second, true);
    if (sol.max_transverse_eig < opts.zero_tol) return sol;
    // fell onto an unstable saddle; fall through to the zero branch check
  }
  SemiclassicalSolution sol0 = finalize(zero, 0.0, false);
  sol0.max_transverse_eig = grow0;
  if (grow0 <= opts.zero_tol) return sol0;
  throw std::runtime_error(
      "semiclassical_steady: non-lasing branch is unstable but no stable lasing root converged "
      "within the iteration budget");
}

struct SemiclassicalPoint {
  double x;
  double alpha_sq;
  double pop_3p;
  double pop_4;
  double nu;
  bool lasing;
};

struct ThresholdScan {
  std::vector<SemiclassicalPoint> points;
  std::optional<double> x_th;
};

// Per-x steady solutions on an ascending pump grid, with continuation
// between points, plus the threshold located by bisection on the stability
// of the alpha = 0 branch (the |alpha|^2 = 0 -> > 0 transition for this
// supercritical bifurcation).
inline ThresholdScan threshold_scan(const CqedParams& p, const DriveParams& d_template,
                                    const std::vector<double>& x_values,
                                    const SemiclassicalOptions& opts = {}) {
  for (std::size_t i = 1; i < x_values.size(); ++i)
    if (!(x_values[i] > x_values[i - 1]))
      throw std::invalid_argument("threshold_scan: x grid must ascend");

  ThresholdScan out;
  SemiclassicalOptions local = opts;
  for (double x : x_values) {
    DriveParams d = d_template;
    d.I3 = pump_intensity_for_ratio(x, d.I4);
    SemiclassicalSolution sol = semiclassical_steady(p, d, local);
    out.points.push_back({x, std::norm(sol.state.alpha), sol.state.p3p(), sol.state.p4(),
                          sol.nu, sol.lasing});
    local.seed = sol.lasing
                     ? std::make_optional(std::make_pair(std::abs(sol.state.alpha), sol.nu))
                     : std::nullopt;
  }

  auto grow = [&](double x) {
    DriveParams d = d_template;
    d.I3 = pump_intensity_for_ratio(x, d.I4);
    return semiclassical_growth_rate(p, d);
  };
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (!out.points[i - 1].lasing && out.points[i].lasing) {
      double lo = out.points[i - 1].x, hi = out.points[i].x;
      if (lo <= 0.0) lo = std::min(1e-6, 0.5 * hi);
      for (int it = 0; it < 60 && (hi - lo) > 1e-6 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (grow(mid) > 0.0 ? hi : lo) = mid;
      }
      out.x_th = 0.5 * (lo + hi);
      break;
    }
  }
  return out;
}

}  // namespace oal
