#pragma once

// Lindblad master-equation propagation, steady states via the vectorized
// generator's null space, and pump-sweep curves.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oal/common.hpp"
#include "oal/integrate.hpp"
#include "oal/model.hpp"

namespace oal {

using SparseXcd = Eigen::SparseMatrix<complexd>;

// drho/dt = -i[H, rho] + sum_k ( L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho} ),
// with the L_k pre-scaled by sqrt(rate).
struct LindbladGenerator {
  Operator H;
  std::vector<CollapseChannel> channels;

  LindbladGenerator(Operator h, std::vector<CollapseChannel> ch)
      : H(std::move(h)), channels(std::move(ch)) {
    for (const auto& c : channels)
      if (c.op.space != H.space)
        throw std::invalid_argument("LindbladGenerator: channel space mismatch");
  }

  const HilbertSpace& space() const { return H.space; }
  int dim() const { return H.space.total_dim(); }

  // Smallest nonzero dissipation rate; sets the slow relaxation scale used
  // by "t >> 1/min_rate" style checks.
  double min_rate() const {
    double r = 0.0;
    for (const auto& c : channels)
      if (c.rate > 0.0 && (r == 0.0 || c.rate < r)) r = c.rate;
    return r;
  }
};

inline LindbladGenerator build_generator(const CqedParams& p, const DriveParams& d,
                                         const HilbertSpace& space) {
  return {build_hamiltonian(p, d, space), build_collapse_ops(p, space)};
}

namespace detail {

inline SparseXcd to_sparse(const MatrixXcd& m, double prune = 0.0) {
  SparseXcd s = m.sparseView(prune, 1.0);
  s.makeCompressed();
  return s;
}

// Right-hand side of the master equation in the form
//   drho = A rho + rho A^dag + sum_k L_k rho L_k^dag,  A = -iH - 1/2 sum L^dag L.
// The drift A is dense; the jump sandwiches use the channels' sparsity.
class LindbladRhs {
 public:
  explicit LindbladRhs(const LindbladGenerator& gen) : dim_(gen.dim()) {
    MatrixXcd damp = MatrixXcd::Zero(dim_, dim_);
    for (const auto& c : gen.channels) damp += c.op.m.adjoint() * c.op.m;
    drift_ = complexd(0.0, -1.0) * gen.H.m - 0.5 * damp;
    for (const auto& c : gen.channels) jumps_.push_back(to_sparse(c.op.m));
    scratch_.resize(dim_, dim_);
  }

  int dim() const { return dim_; }

  void operator()(double /*t*/, const VectorXcd& v, VectorXcd& dv) {
    using CMap = Eigen::Map<const MatrixXcd>;
    using Map = Eigen::Map<MatrixXcd>;
    CMap rho(v.data(), dim_, dim_);
    if (dv.size() != v.size()) dv.resize(v.size());
    Map out(dv.data(), dim_, dim_);
    out.noalias() = drift_ * rho;
    out.noalias() += rho * drift_.adjoint();
    for (const auto& l : jumps_) {
      scratch_.noalias() = l * rho;
      out.noalias() += scratch_ * l.adjoint();
    }
  }

 private:
  int dim_;
  MatrixXcd drift_;
  std::vector<SparseXcd> jumps_;
  MatrixXcd scratch_;
};

// Vectorized generator, column-major convention: vec(A rho B) = (B^T (x) A) vec(rho).
inline SparseXcd build_superoperator(const LindbladGenerator& gen) {
  const int d = gen.dim();
  const SparseXcd h = to_sparse(gen.H.m);
  std::vector<Eigen::Triplet<complexd>> trips;
  trips.reserve(static_cast<std::size_t>(8) * d * d);

  auto add_left = [&](const SparseXcd& a, complexd w) {  // w * (I (x) a)
    for (int k = 0; k < a.outerSize(); ++k)
      for (SparseXcd::InnerIterator it(a, k); it; ++it)
        for (int b = 0; b < d; ++b)
          trips.emplace_back(b * d + it.row(), b * d + it.col(), w * it.value());
  };
  auto add_right = [&](const SparseXcd& b, complexd w) {  // w * (b^T (x) I)
    for (int k = 0; k < b.outerSize(); ++k)
      for (SparseXcd::InnerIterator it(b, k); it; ++it)
        for (int r = 0; r < d; ++r)
          trips.emplace_back(it.row() * d + r, it.col() * d + r, w * it.value());
  };
  auto add_sandwich = [&](const SparseXcd& l) {  // conj(L) (x) L
    for (int kb = 0; kb < l.outerSize(); ++kb)
      for (SparseXcd::InnerIterator itb(l, kb); itb; ++itb)
        for (int ka = 0; ka < l.outerSize(); ++ka)
          for (SparseXcd::InnerIterator ita(l, ka); ita; ++ita)
            trips.emplace_back(itb.row() * d + ita.row(), itb.col() * d + ita.col(),
                               std::conj(itb.value()) * ita.value());
  };

  add_left(h, complexd(0.0, -1.0));
  add_right(h, complexd(0.0, 1.0));
  for (const auto& c : gen.channels) {
    const SparseXcd l = to_sparse(c.op.m);
    SparseXcd ldl = (l.adjoint() * l).pruned();
    add_sandwich(l);
    add_left(ldl, complexd(-0.5, 0.0));
    add_right(ldl, complexd(-0.5, 0.0));
  }

  SparseXcd super(d * d, d * d);
  super.setFromTriplets(trips.begin(), trips.end());
  super.makeCompressed();
  return super;
}

}  // namespace detail

// rho(t) on an ascending time grid starting at t >= 0. Trace and Hermiticity
// ride along to integrator accuracy; both are checked by the test suite, not
// re-imposed here.
inline std::vector<DensityMatrix> propagate(const LindbladGenerator& gen,
                                            const DensityMatrix& rho0,
                                            const std::vector<double>& t_grid,
                                            const IntegratorOptions& opts = {}) {
  if (rho0.space != gen.space()) throw std::invalid_argument("propagate: space mismatch");
  if (!rho0.is_valid()) throw std::invalid_argument("propagate: rho0 is not a valid density matrix");
  if (t_grid.empty()) return {};
  if (t_grid.front() < 0.0 || !std::is_sorted(t_grid.begin(), t_grid.end()))
    throw std::invalid_argument("propagate: t_grid must ascend from 0");

  const int d = gen.dim();
  detail::LindbladRhs rhs(gen);
  VectorXcd v0 = Eigen::Map<const VectorXcd>(rho0.m.data(), d * d);
  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  integrate_sampled(rhs, v0, 0.0, t_grid, opts, [&](std::size_t, double, const VectorXcd& v) {
    out.emplace_back(gen.space(), Eigen::Map<const MatrixXcd>(v.data(), d, d));
  });
  return out;
}

struct SteadyStateOptions {
  double residual_tol = 1e-10;  // on |L rho| / |L|_F
  // Rank diagnostics on failure use a dense decomposition; above this
  // superoperator dimension only singularity is reported, not the exact
  // null-space dimension.
  int dense_diag_limit = 2500;
};

namespace detail {

inline int null_space_dimension(const SparseXcd& super) {
  MatrixXcd dense = MatrixXcd(super);
  Eigen::CompleteOrthogonalDecomposition<MatrixXcd> cod(dense);
  cod.setThreshold(1e-9);
  return static_cast<int>(dense.cols() - cod.rank());
}

}  // namespace detail

// Null space of the vectorized generator with the trace constraint replacing
// one row. A degenerate (non-unique) null space is an error: it signals a
// parameter set with a dynamically disconnected subspace (e.g. recycling
// switched off), never something to average over.
inline DensityMatrix steady_state(const LindbladGenerator& gen,
                                  const SteadyStateOptions& opts = {}) {
  if (gen.channels.empty())
    throw std::invalid_argument("steady_state: generator has no dissipative channel");
  const int d = gen.dim();
  const int n = d * d;
  SparseXcd super = detail::build_superoperator(gen);

  SparseXcd m = super;
  // Zero row 0, then write the trace functional there.
  for (int col = 0; col < n; ++col) {
    for (SparseXcd::InnerIterator it(m, col); it; ++it)
      if (it.row() == 0) it.valueRef() = complexd(0.0, 0.0);
  }
  std::vector<Eigen::Triplet<complexd>> trace_trips;
  for (int k = 0; k < d; ++k) trace_trips.emplace_back(0, k * d + k, complexd(1.0, 0.0));
  SparseXcd trace_row(n, n);
  trace_row.setFromTriplets(trace_trips.begin(), trace_trips.end());
  m = (m + trace_row).pruned();
  m.makeCompressed();

  auto fail = [&](const std::string& why) -> DensityMatrix {
    int null_dim = (n <= opts.dense_diag_limit) ? detail::null_space_dimension(super) : -1;
    throw SteadyStateError(
        "steady_state: " + why +
            (null_dim >= 0 ? " (null-space dimension " + std::to_string(null_dim) + ")"
                           : " (null-space dimension not determined at this size)"),
        null_dim);
  };

  Eigen::SparseLU<SparseXcd> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) return fail("singular constrained generator");

  VectorXcd rhs = VectorXcd::Zero(n);
  rhs(0) = 1.0;
  VectorXcd v = lu.solve(rhs);
  if (lu.info() != Eigen::Success) return fail("solve failed");

  const double resid = (super * v).norm() / super.norm();
  if (!(resid < opts.residual_tol)) {
    return fail("residual " + std::to_string(resid) + " exceeds tolerance; null space likely degenerate");
  }

  MatrixXcd rho = Eigen::Map<const MatrixXcd>(v.data(), d, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  if (!(std::abs(tr) > 1e-12)) return fail("traceless null vector");
  rho /= tr;

  DensityMatrix out(gen.space(), std::move(rho));
  if (out.min_eigenvalue() < -1e-8) return fail("null vector is not positive semidefinite");
  return out;
}

// Populations and mean photon number read off the product-basis diagonal.
struct PopulationSummary {
  double nbar = 0.0;
  double p3 = 0.0, p4 = 0.0, p3p = 0.0, p4p = 0.0;

  double of(Level l) const {
    switch (l) {
      case Level::F3: return p3;
      case Level::F4: return p4;
      case Level::F3p: return p3p;
      case Level::F4p: return p4p;
    }
    return 0.0;
  }
};

inline PopulationSummary populations(const DensityMatrix& rho) {
  PopulationSummary s;
  const auto& sp = rho.space;
  for (int i = 0; i < sp.total_dim(); ++i) {
    const double w = rho.m(i, i).real();
    s.nbar += w * sp.photons_of(i);
    switch (sp.level_of(i)) {
      case Level::F3: s.p3 += w; break;
      case Level::F4: s.p4 += w; break;
      case Level::F3p: s.p3p += w; break;
      case Level::F4p: s.p4p += w; break;
    }
  }
  return s;
}

// Cavity output flux over fluorescence flux on the lasing transition,
// kappa*nbar / (gamma_43' * <sigma_3'3'>). The cavity side follows the
// kappa*nbar convention; TwoKappa is exposed because the literature is split
// on which rate to quote.
enum class CavityRateConvention { Kappa, TwoKappa };

inline double flux_ratio_from_populations(const CqedParams& p, double nbar, double p3p,
                                          CavityRateConvention conv = CavityRateConvention::Kappa) {
  if (!(p3p > 0.0)) throw std::invalid_argument("flux ratio: fluorescence population is zero");
  const double cavity = (conv == CavityRateConvention::Kappa ? p.kappa : 2.0 * p.kappa) * nbar;
  return cavity / (p.gamma_43p() * p3p);
}

struct SweepPoint {
  double x;
  double nbar;
  double pop_3p;
  double pop_4;
  double flux_ratio;
};

struct SweepCurve {
  std::vector<SweepPoint> points;

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].nbar < 0.0) throw std::invalid_argument("SweepCurve: nbar must be >= 0");
      if (i > 0 && !(points[i].x > points[i - 1].x))
        throw std::invalid_argument("SweepCurve: x must be strictly increasing");
    }
  }
};

// One steady-state solve per pump ratio x at fixed I4; x = 0 is the dark
// point with nbar = 0 and an undefined flux ratio (recorded as 0).
inline SweepCurve sweep_nbar(const CqedParams& p, const DriveParams& d_template,
                             const std::vector<double>& x_values,
                             const SteadyStateOptions& ss_opts = {},
                             const HilbertSpace& space = HilbertSpace(8)) {
  SweepCurve curve;
  curve.points.resize(x_values.size());
  for (std::size_t i = 0; i < x_values.size(); ++i) {
    const double x = x_values[i];
    DriveParams d = d_template;
    d.I3 = pump_intensity_for_ratio(x, d.I4);
    try {
      auto rho = steady_state(build_generator(p, d, space), ss_opts);
      auto pops = populations(rho);
      const double fr = pops.p3p > 0.0 ? flux_ratio_from_populations(p, pops.nbar, pops.p3p) : 0.0;
      curve.points[i] = {x, pops.nbar, pops.p3p, pops.p4, fr};
    } catch (const SteadyStateError& e) {
      throw SteadyStateError("sweep_nbar at x = " + std::to_string(x) + ": " + e.what(),
                             e.null_space_dim);
    }
  }
  curve.validate();
  return curve;
}

}  // namespace oal
