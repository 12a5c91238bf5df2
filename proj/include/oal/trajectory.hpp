#pragma once

// Monte-Carlo wave-function unraveling of the master equation and the
// detection chain that turns cavity-emission jumps into timestamped
// detector clicks.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oal/evolve.hpp"

namespace oal {

// Photon path from the cavity to a detection event: escape (eta), one-mirror
// output (T), propagation (zeta), detector quantum efficiency (alpha). The
// product xi is the probability that an intracavity photon loss produces a
// click on either detector; the 50/50 split downstream routes it to D1/D2.
struct DetectionChain {
  double eta = 0.60;
  double t_mirror = 0.50;
  double zeta = 1.0 / 3.0;  // quoted as 0.33; exactly 1/3 makes xi = 0.05
  double alpha = 0.50;
  double background_rate = 0.0;  // clicks per us, per detector
  static constexpr std::int64_t timestamp_resolution_ns = 1;

  double xi() const { return eta * t_mirror * zeta * alpha; }

  void validate() const {
    for (double f : {eta, t_mirror, zeta, alpha})
      if (f < 0.0 || f > 1.0)
        throw std::invalid_argument("DetectionChain: efficiencies must lie in [0, 1]");
    if (background_rate < 0.0)
      throw std::invalid_argument("DetectionChain: background rate must be >= 0");
  }
};

struct ClickEvent {
  int detector;  // 0 = D1, 1 = D2
  std::int64_t t_ns;
};

struct ClickRecord {
  std::vector<ClickEvent> events;
  std::int64_t duration_ns = 0;
  std::vector<std::pair<std::string, std::string>> meta;

  void validate() const {
    std::int64_t last[2] = {-1, -1};
    for (const auto& e : events) {
      if (e.detector != 0 && e.detector != 1)
        throw std::invalid_argument("ClickRecord: detector id must be 0 or 1");
      if (e.t_ns < 0 || e.t_ns >= duration_ns)
        throw std::invalid_argument("ClickRecord: timestamp outside record duration");
      if (e.t_ns < last[e.detector])
        throw std::invalid_argument("ClickRecord: timestamps must be non-decreasing per detector");
      last[e.detector] = e.t_ns;
    }
  }

  std::size_t count(int detector) const {
    std::size_t n = 0;
    for (const auto& e : events) n += (e.detector == detector);
    return n;
  }
};

// --- deterministic random streams ------------------------------------------

// SplitMix64 finalizer; used to derive per-trajectory seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Splitting rule: trajectory k runs on mt19937_64 seeded with
// splitmix64(master_seed ^ splitmix64(k)). This mapping is part of the
// reproducibility contract for click records.
inline std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed ^ splitmix64(index));
}

// 53-bit uniform in [0, 1). Built from raw generator words so that records
// do not depend on the standard library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

// --- trajectory runs --------------------------------------------------------

enum class TrajectoryMethod {
  Auto,        // exact propagator when the effective Hamiltonian allows it
  Eigenbasis,  // exact piecewise propagation via eigendecomposition of H_eff
  Integrator,  // adaptive stepping with in-step norm bisection (reference)
};

struct TrajectoryOptions {
  // Initial state: an explicit vector, or a mixture sampled by eigenvalue
  // weight (used to start records in the stationary ensemble). Defaults to
  // |3> (x) |0>.
  std::optional<StateVector> initial_state;
  std::optional<DensityMatrix> initial_mixture;
  std::vector<double> sample_times;  // us; observable trace sample points
  double dt_max = 0.0;               // us; 0 = automatic
  double burn_in = 0.0;              // us; simulated but excluded from the record
  TrajectoryMethod method = TrajectoryMethod::Auto;
  IntegratorOptions integrator;
};

struct TrajectoryRun {
  std::uint64_t seed = 0;
  double duration = 0.0;  // us, excluding burn-in
  std::vector<double> sample_times;
  std::vector<double> trace_nbar;
  std::vector<double> trace_p3, trace_p4, trace_p3p, trace_p4p;
  ClickRecord record;
  std::vector<long> jump_counts;  // indexed like the generator's channels
  long cavity_emissions = 0;
  std::string config_digest;
};

namespace detail {

struct PsiObservables {
  double nbar, p3, p4, p3p, p4p;
};

inline PsiObservables psi_observables(const HilbertSpace& sp, const VectorXcd& psi) {
  PsiObservables o{0, 0, 0, 0, 0};
  double norm2 = 0.0;
  for (int i = 0; i < sp.total_dim(); ++i) {
    const double w = std::norm(psi(i));
    norm2 += w;
    o.nbar += w * sp.photons_of(i);
    switch (sp.level_of(i)) {
      case Level::F3: o.p3 += w; break;
      case Level::F4: o.p4 += w; break;
      case Level::F3p: o.p3p += w; break;
      case Level::F4p: o.p4p += w; break;
    }
  }
  o.nbar /= norm2; o.p3 /= norm2; o.p4 /= norm2; o.p3p /= norm2; o.p4p /= norm2;
  return o;
}

// Piecewise-exact no-jump propagation: H_eff = H - i/2 sum L^dag L is
// diagonalized once, psi(t) = V exp(-i Lambda t) V^{-1} psi(0) between
// jumps, and the norm-threshold crossing ||psi(t)||^2 = r is located by a
// bracketed Newton solve on the eigenbasis quadratic form. Only eigenmode
// coefficients above a relative floor enter the quadratic forms; the floor
// (1e-8 of the leading coefficient) keeps the dropped weight near 1e-16.
class EigenbasisWalker {
 public:
  EigenbasisWalker(const LindbladGenerator& gen, double cond_limit = 1e8) {
    const int d = gen.dim();
    MatrixXcd heff = gen.H.m;
    MatrixXcd damp = MatrixXcd::Zero(d, d);
    for (const auto& c : gen.channels) damp += c.op.m.adjoint() * c.op.m;
    heff -= complexd(0.0, 0.5) * damp;

    Eigen::ComplexEigenSolver<MatrixXcd> es(heff);
    if (es.info() != Eigen::Success)
      throw IntegratorError("trajectory: eigendecomposition of H_eff failed");
    lambda_ = es.eigenvalues();
    v_ = es.eigenvectors();
    vinv_ = v_.inverse();
    ok_ = v_.norm() * vinv_.norm() < cond_limit * std::sqrt(double(d));
    gram_ = v_.adjoint() * v_;
    // d||psi||^2/dt = z^dag i(Lambda^dag G - G Lambda) z
    MatrixXcd lam = lambda_.asDiagonal();
    gram_dot_ = complexd(0.0, 1.0) * (lam.adjoint() * gram_ - gram_ * lam);
    dim_ = d;
  }

  bool well_conditioned() const { return ok_; }

  // Enter a segment at the (normalized) state psi.
  void start_segment(const VectorXcd& psi) {
    phi_ = vinv_ * psi;
    select_active();
  }

  // Same, for a sparse post-jump state.
  void start_segment_sparse(const VectorXcd& psi, double nnz_floor = 1e-12) {
    phi_.setZero(dim_);
    const double thresh = nnz_floor * psi.norm();
    for (int i = 0; i < dim_; ++i)
      if (std::abs(psi(i)) > thresh) phi_ += psi(i) * vinv_.col(i);
    select_active();
  }

  double norm2(double dt) const { return form_pair(dt).first; }

  const VectorXcd& state_at(double dt) const {
    build_z(dt);
    psi_scratch_.setZero(dim_);
    for (std::size_t i = 0; i < active_.size(); ++i)
      psi_scratch_ += z_[i] * v_.col(active_[i]);
    return psi_scratch_;
  }

  // First dt in (0, dt_max] with ||psi(dt)||^2 = r, if any. The norm is
  // non-increasing, so a sign check at dt_max decides existence.
  std::optional<double> find_crossing(double r, double dt_max, double t_tol) const {
    const auto [f0, s0] = form_pair(0.0);
    if (f0 <= r) return 0.0;
    if (norm2(dt_max) > r) return std::nullopt;
    double lo = 0.0, hi = dt_max;
    // Newton with bisection safeguard on the monotone norm decay;
    // exponential-decay ansatz for the first iterate.
    double t = (s0 < 0.0) ? std::min(dt_max, f0 * std::log(f0 / r) / (-s0)) : 0.5 * dt_max;
    for (int it = 0; it < 200 && (hi - lo) > t_tol; ++it) {
      if (!(t > lo) || !(t < hi)) t = 0.5 * (lo + hi);
      const auto [f, fp] = form_pair(t);
      if (f > r) lo = t; else hi = t;
      t = (fp < 0.0) ? t + (r - f) / fp : 0.5 * (lo + hi);
    }
    return 0.5 * (lo + hi);
  }

 private:
  void build_z(double dt) const {
    const std::size_t m = active_.size();
    z_.resize(m);
    if (dt == 0.0) {
      for (std::size_t i = 0; i < m; ++i) z_[i] = phi_(active_[i]);
      return;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const complexd lam = lambda_(active_[i]);
      // exp(-i lam dt) with lam = omega - i Gamma/2
      const double decay = std::exp(lam.imag() * dt);
      const double ph = -lam.real() * dt;
      z_[i] = phi_(active_[i]) * (decay * complexd(std::cos(ph), std::sin(ph)));
    }
  }

  // ||psi(dt)||^2 and its time derivative from one z build.
  std::pair<double, double> form_pair(double dt) const {
    build_z(dt);
    const std::size_t m = active_.size();
    complexd f = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const complexd zi = std::conj(z_[i]);
      const int a = active_[i];
      complexd rowf = 0.0, rowp = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        rowf += gram_(a, active_[j]) * z_[j];
        rowp += gram_dot_(a, active_[j]) * z_[j];
      }
      f += zi * rowf;
      fp += zi * rowp;
    }
    return {f.real(), fp.real()};
  }

  void select_active() {
    active_.clear();
    double peak = 0.0;
    for (int i = 0; i < dim_; ++i) peak = std::max(peak, std::abs(phi_(i)));
    const double floor = 1e-8 * peak;
    for (int i = 0; i < dim_; ++i)
      if (std::abs(phi_(i)) > floor) active_.push_back(i);
  }

  int dim_ = 0;
  bool ok_ = false;
  VectorXcd lambda_;
  MatrixXcd v_, vinv_, gram_, gram_dot_;
  VectorXcd phi_;
  std::vector<int> active_;
  mutable std::vector<complexd> z_;
  mutable VectorXcd psi_scratch_;
};

}  // namespace detail

// Piecewise-deterministic evolution under H_eff with norm-threshold jumps.
// Every cavity jump becomes a candidate photon: kept with probability xi,
// routed to D1/D2 with probability 1/2 each, stamped at 1 ns resolution.
// Atomic-decay jumps are counted (for flux bookkeeping) but produce no
// clicks. Per-detector Poisson background clicks are superposed afterwards,
// from the same random stream.
inline TrajectoryRun run_trajectory(const LindbladGenerator& gen, const DetectionChain& chain,
                                    double duration, std::uint64_t seed,
                                    const TrajectoryOptions& opts = {}) {
  chain.validate();
  if (!(duration > 0.0)) throw std::invalid_argument("run_trajectory: duration must be > 0");
  const int d = gen.dim();

  // Largest total jump rate on the truncated space; sum_k L_k^dag L_k is
  // diagonal in the product basis for this model, so the bound is exact.
  MatrixXcd damp = MatrixXcd::Zero(d, d);
  for (const auto& c : gen.channels) damp += c.op.m.adjoint() * c.op.m;
  const double rate_bound = damp.diagonal().real().maxCoeff();
  double dt_max = opts.dt_max;
  if (dt_max == 0.0) dt_max = std::min(0.05, rate_bound > 0.0 ? 0.1 / rate_bound : 0.05);
  if (dt_max <= 0.0 || (rate_bound > 0.0 && dt_max * rate_bound > 0.1 + 1e-12))
    throw std::invalid_argument(
        "run_trajectory: dt_max too coarse, jump probability per step would exceed 0.1");

  std::mt19937_64 rng(seed);

  VectorXcd psi;
  if (opts.initial_state) {
    if (opts.initial_state->space != gen.space())
      throw std::invalid_argument("run_trajectory: initial state space mismatch");
    psi = opts.initial_state->v.normalized();
  } else if (opts.initial_mixture) {
    if (opts.initial_mixture->space != gen.space())
      throw std::invalid_argument("run_trajectory: initial mixture space mismatch");
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(opts.initial_mixture->m);
    const auto& w = es.eigenvalues();
    double u = uniform01(rng) * std::max(w.sum(), 1e-300);
    int pick = d - 1;
    double acc = 0.0;
    for (int i = d - 1; i >= 0; --i) {  // descending weight order
      acc += std::max(0.0, w(i));
      if (u <= acc) { pick = i; break; }
    }
    psi = es.eigenvectors().col(pick).normalized();
  } else {
    psi = basis_state(gen.space(), Level::F3, 0).v;
  }

  const double t_total = opts.burn_in + duration;
  std::vector<CollapseChannel> const& channels = gen.channels;
  std::vector<SparseXcd> jump_ops;
  for (const auto& c : channels) jump_ops.push_back(detail::to_sparse(c.op.m));

  TrajectoryRun run;
  run.seed = seed;
  run.duration = duration;
  run.sample_times = opts.sample_times;
  run.jump_counts.assign(channels.size(), 0);
  run.record.duration_ns = static_cast<std::int64_t>(std::llround(duration * 1000.0));

  const std::size_t n_samples = opts.sample_times.size();
  run.trace_nbar.resize(n_samples);
  run.trace_p3.resize(n_samples);
  run.trace_p4.resize(n_samples);
  run.trace_p3p.resize(n_samples);
  run.trace_p4p.resize(n_samples);
  std::size_t next_sample = 0;
  auto record_sample = [&](std::size_t i, const VectorXcd& state) {
    auto o = detail::psi_observables(gen.space(), state);
    run.trace_nbar[i] = o.nbar;
    run.trace_p3[i] = o.p3;
    run.trace_p4[i] = o.p4;
    run.trace_p3p[i] = o.p3p;
    run.trace_p4p[i] = o.p4p;
  };

  std::vector<VectorXcd> candidates(channels.size(), VectorXcd(d));
  std::vector<double> weights(channels.size());
  auto handle_jump = [&](double t_jump, const VectorXcd& state_at_jump, VectorXcd& psi_out) {
    // Channel selection by relative jump weight ||L_k psi||^2.
    double total = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      candidates[k].noalias() = jump_ops[k] * state_at_jump;
      weights[k] = candidates[k].squaredNorm();
      total += weights[k];
    }
    std::size_t pick = channels.size() - 1;
    if (total > 0.0) {
      const double u = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t k = 0; k < channels.size(); ++k) {
        acc += weights[k];
        if (u <= acc) { pick = k; break; }
      }
    }
    ++run.jump_counts[pick];
    if (channels[pick].kind == ChannelKind::CavityLoss) {
      ++run.cavity_emissions;
      const double u_keep = uniform01(rng);
      if (u_keep < chain.xi()) {
        const int det = uniform01(rng) < 0.5 ? 0 : 1;
        const double t_click = t_jump - opts.burn_in;
        if (t_click >= 0.0) {
          const std::int64_t ns = std::llround(t_click * 1000.0);
          if (ns < run.record.duration_ns) run.record.events.push_back({det, ns});
        }
      }
    }
    psi_out = candidates[pick] / std::sqrt(weights[pick]);
  };

  const bool want_eigen = opts.method != TrajectoryMethod::Integrator;
  std::optional<detail::EigenbasisWalker> walker;
  if (want_eigen) {
    walker.emplace(gen);
    if (!walker->well_conditioned()) {
      if (opts.method == TrajectoryMethod::Eigenbasis)
        throw IntegratorError("run_trajectory: H_eff eigenbasis too ill-conditioned");
      walker.reset();  // Auto falls back to the integrator
    }
  }

  if (walker) {
    double t = 0.0;  // segment start time
    walker->start_segment(psi);
    double r = 1.0 - uniform01(rng);
    VectorXcd psi_new(d);
    while (t < t_total) {
      const double span = t_total - t;
      auto hit = walker->find_crossing(r, span, 1e-6);
      const double t_seg_end = hit ? *hit : span;
      while (next_sample < n_samples && opts.sample_times[next_sample] <= t + t_seg_end) {
        record_sample(next_sample, walker->state_at(opts.sample_times[next_sample] - t));
        ++next_sample;
      }
      if (!hit) break;
      const VectorXcd& state = walker->state_at(*hit);
      t += *hit;
      handle_jump(t, state, psi_new);
      walker->start_segment_sparse(psi_new);
      r = 1.0 - uniform01(rng);
    }
    while (next_sample < n_samples) {
      record_sample(next_sample, walker->state_at(t_total - t));
      ++next_sample;
    }
  } else {
    // Reference path: adaptive stepping of dpsi/dt = -i H_eff psi with the
    // norm threshold located by bisection on the dense interpolant, refined
    // to 1e-3 of the step size.
    MatrixXcd heff_m = gen.H.m - complexd(0.0, 0.5) * damp;
    auto rhs = [&heff_m](double, const VectorXcd& y, VectorXcd& dy) {
      dy.noalias() = complexd(0.0, -1.0) * (heff_m * y);
    };
    IntegratorOptions iopts = opts.integrator;
    iopts.h_max = dt_max;
    DormandPrince5<decltype(rhs)> stepper(rhs, psi, 0.0, iopts);
    double r = 1.0 - uniform01(rng);
    VectorXcd psi_new(d);
    while (stepper.time() < t_total) {
      stepper.step(t_total);
      const double n2_prev = stepper.prev_state().squaredNorm();
      const double n2 = stepper.state().squaredNorm();
      if (n2_prev > 0.0 && (n2_prev - n2) / n2_prev > 0.1 + 1e-9)
        throw IntegratorError("run_trajectory: jump probability per step exceeded 0.1");
      if (n2 <= r) {
        double lo = stepper.prev_time(), hi = stepper.time();
        const double tol = 1e-3 * (hi - lo);
        while (hi - lo > tol) {
          const double mid = 0.5 * (lo + hi);
          if (stepper.dense_eval(mid).squaredNorm() > r) lo = mid; else hi = mid;
        }
        const double t_jump = 0.5 * (lo + hi);
        while (next_sample < n_samples && opts.sample_times[next_sample] <= t_jump) {
          record_sample(next_sample, stepper.dense_eval(opts.sample_times[next_sample]));
          ++next_sample;
        }
        VectorXcd state = stepper.dense_eval(t_jump);
        handle_jump(t_jump, state, psi_new);
        stepper.set_state(t_jump, psi_new);
        r = 1.0 - uniform01(rng);
      } else {
        while (next_sample < n_samples && opts.sample_times[next_sample] <= stepper.time()) {
          record_sample(next_sample, stepper.dense_eval(opts.sample_times[next_sample]));
          ++next_sample;
        }
      }
    }
    while (next_sample < n_samples) {
      record_sample(next_sample, stepper.state());
      ++next_sample;
    }
  }

  // Background clicks, one Poisson stream per detector, appended after the
  // signal pass so the draw order is fixed.
  if (chain.background_rate > 0.0) {
    for (int det = 0; det < 2; ++det) {
      double t = exponential(rng, chain.background_rate);
      while (t < duration) {
        const std::int64_t ns = std::llround(t * 1000.0);
        if (ns < run.record.duration_ns) run.record.events.push_back({det, ns});
        t += exponential(rng, chain.background_rate);
      }
    }
  }
  std::sort(run.record.events.begin(), run.record.events.end(),
            [](const ClickEvent& a, const ClickEvent& b) {
              return a.t_ns != b.t_ns ? a.t_ns < b.t_ns : a.detector < b.detector;
            });
  run.record.validate();
  return run;
}

// --- ensemble averaging -----------------------------------------------------

enum class TraceObservable { Nbar, P3, P4, P3p, P4p };

struct EnsembleTrace {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

inline EnsembleTrace ensemble_average(const std::vector<TrajectoryRun>& runs,
                                      TraceObservable obs) {
  if (runs.size() < 2) throw std::invalid_argument("ensemble_average: need at least 2 runs");
  const auto& t0 = runs.front().sample_times;
  for (const auto& r : runs) {
    if (r.sample_times != t0 || r.config_digest != runs.front().config_digest)
      throw std::invalid_argument("ensemble_average: runs have mixed configurations");
  }
  auto select = [obs](const TrajectoryRun& r) -> const std::vector<double>& {
    switch (obs) {
      case TraceObservable::Nbar: return r.trace_nbar;
      case TraceObservable::P3: return r.trace_p3;
      case TraceObservable::P4: return r.trace_p4;
      case TraceObservable::P3p: return r.trace_p3p;
      case TraceObservable::P4p: return r.trace_p4p;
    }
    return r.trace_nbar;
  };
  const std::size_t n = t0.size();
  const double cnt = static_cast<double>(runs.size());
  EnsembleTrace out;
  out.times = t0;
  out.mean.assign(n, 0.0);
  out.stderr_.assign(n, 0.0);
  for (const auto& r : runs)
    for (std::size_t i = 0; i < n; ++i) out.mean[i] += select(r)[i];
  for (double& m : out.mean) m /= cnt;
  for (const auto& r : runs)
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = select(r)[i] - out.mean[i];
      out.stderr_[i] += dev * dev;
    }
  for (double& s : out.stderr_) s = std::sqrt(s / (cnt - 1.0) / cnt);
  return out;
}

}  // namespace oal
