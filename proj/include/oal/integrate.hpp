#pragma once

// Adaptive Dormand-Prince 5(4) stepper on complex vectors, with the classic
// 4th-order continuous extension for dense output. Used for density-matrix
// propagation (state = vec(rho)) and as the reference path for trajectory
// evolution (state = psi).

#include <algorithm>
#include <cmath>
#include <string>

#include "oal/algebra.hpp"
#include "oal/common.hpp"

namespace oal {

struct IntegratorOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_max = 0.0;   // 0 = no cap
  double h_min = 1e-12; // giving up below this step size
  long max_steps = 50'000'000;
};

// One-step-at-a-time interface so callers can watch quantities (e.g. the
// decaying norm of a trajectory state) and query the interpolant inside the
// last accepted step.
template <class Rhs>
class DormandPrince5 {
 public:
  DormandPrince5(Rhs rhs, VectorXcd y0, double t0, IntegratorOptions opts)
      : rhs_(std::move(rhs)), opts_(opts), t_(t0), y_(std::move(y0)) {
    const auto n = y_.size();
    for (auto& k : k_) k.resize(n);
    y_tmp_.resize(n);
    y_prev_ = y_;
    rhs_(t_, y_, k_[0]);  // FSAL seed
    h_ = initial_step();
  }

  double time() const { return t_; }
  double prev_time() const { return t_prev_; }
  const VectorXcd& state() const { return y_; }
  const VectorXcd& prev_state() const { return y_prev_; }
  double step_size() const { return h_; }

  // Replace the state mid-integration (trajectory jumps). Re-seeds FSAL.
  void set_state(double t, const VectorXcd& y) {
    t_ = t;
    y_ = y;
    y_prev_ = y;
    t_prev_ = t;
    rhs_(t_, y_, k_[0]);
  }

  void limit_next_step(double h_cap) {
    if (h_cap > 0.0) h_ = std::min(h_, h_cap);
  }

  // Advance by one accepted step, at most to t_end. Returns the new time.
  double step(double t_end) {
    if (t_ >= t_end) return t_;
    for (int attempt = 0; attempt < 64; ++attempt) {
      if (++steps_taken_ > opts_.max_steps)
        throw IntegratorError("DormandPrince5: step budget exhausted at t = " + std::to_string(t_));
      double h = h_;
      if (opts_.h_max > 0.0) h = std::min(h, opts_.h_max);
      bool clipped = false;
      if (t_ + h >= t_end) {
        h = t_end - t_;
        clipped = true;
      }
      const double err = attempt_step(h);
      if (err <= 1.0) {
        finish_step(h);
        const double grow = err > 1e-10 ? 0.9 * std::pow(err, -0.2) : 5.0;
        if (!clipped) h_ = h * std::clamp(grow, 0.2, 5.0);
        else h_ = std::max(h_, h);
        return t_;
      }
      h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      if (h_ < opts_.h_min)
        throw IntegratorError("DormandPrince5: tolerance unmet, step size underflow at t = " +
                              std::to_string(t_) + " (err = " + std::to_string(err) + ")");
    }
    throw IntegratorError("DormandPrince5: too many consecutive step rejections at t = " +
                          std::to_string(t_));
  }

  // 4th-order interpolant on [prev_time(), time()].
  VectorXcd dense_eval(double t) const {
    const double h = t_ - t_prev_;
    if (h == 0.0) return y_;
    const double th = (t - t_prev_) / h;
    const double th1 = 1.0 - th;
    return cont_[0] + th * (cont_[1] + th1 * (cont_[2] + th * (cont_[3] + th1 * cont_[4])));
  }

 private:
  double initial_step() const {
    const double ynorm = y_.norm();
    const double fnorm = k_[0].norm();
    double h = (fnorm > 1e-300) ? 0.01 * (ynorm + opts_.atol) / fnorm : 1e-4;
    if (opts_.h_max > 0.0) h = std::min(h, opts_.h_max);
    return std::max(h, opts_.h_min * 10.0);
  }

  // Stage coefficients of the Dormand-Prince RK5(4)7M pair.
  double attempt_step(double h) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    y_tmp_ = y_ + h * (a21 * k_[0]);
    rhs_(t_ + h / 5.0, y_tmp_, k_[1]);
    y_tmp_ = y_ + h * (a31 * k_[0] + a32 * k_[1]);
    rhs_(t_ + 3.0 * h / 10.0, y_tmp_, k_[2]);
    y_tmp_ = y_ + h * (a41 * k_[0] + a42 * k_[1] + a43 * k_[2]);
    rhs_(t_ + 4.0 * h / 5.0, y_tmp_, k_[3]);
    y_tmp_ = y_ + h * (a51 * k_[0] + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]);
    rhs_(t_ + 8.0 * h / 9.0, y_tmp_, k_[4]);
    y_tmp_ = y_ + h * (a61 * k_[0] + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]);
    rhs_(t_ + h, y_tmp_, k_[5]);
    y_new_ = y_ + h * (b1 * k_[0] + b3 * k_[2] + b4 * k_[3] + b5 * k_[4] + b6 * k_[5]);
    rhs_(t_ + h, y_new_, k_[6]);

    err_vec_ = h * (e1 * k_[0] + e3 * k_[2] + e4 * k_[3] + e5 * k_[4] + e6 * k_[5] + e7 * k_[6]);
    double err2 = 0.0;
    const auto n = y_.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale =
          opts_.atol + opts_.rtol * std::max(std::abs(y_(i)), std::abs(y_new_(i)));
      const double e = std::abs(err_vec_(i)) / scale;
      err2 += e * e;
    }
    return std::sqrt(err2 / double(n));
  }

  void finish_step(double h) {
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;

    cont_[0] = y_;
    cont_[1] = y_new_ - y_;
    cont_[2] = h * k_[0] - cont_[1];
    cont_[3] = cont_[1] - h * k_[6] - cont_[2];
    cont_[4] = h * (d1 * k_[0] + d3 * k_[2] + d4 * k_[3] + d5 * k_[4] + d6 * k_[5] + d7 * k_[6]);

    y_prev_ = y_;
    t_prev_ = t_;
    y_.swap(y_new_);
    t_ += h;
    k_[0].swap(k_[6]);  // FSAL
  }

  Rhs rhs_;
  IntegratorOptions opts_;
  double t_;
  double t_prev_ = 0.0;
  double h_ = 1e-4;
  long steps_taken_ = 0;
  VectorXcd y_, y_prev_, y_new_, y_tmp_, err_vec_;
  VectorXcd k_[7];
  VectorXcd cont_[5];
};

// Integrate to each sample time in ascending `t_samples` (t0 <= first),
// invoking sink(index, t, y) with dense-output states.
template <class Rhs, class Sink>
void integrate_sampled(Rhs rhs, const VectorXcd& y0, double t0,
                       const std::vector<double>& t_samples, const IntegratorOptions& opts,
                       Sink&& sink) {
  DormandPrince5<Rhs> stepper(std::move(rhs), y0, t0, opts);
  std::size_t next = 0;
  while (next < t_samples.size() && t_samples[next] <= t0) {
    sink(next, t_samples[next], y0);
    ++next;
  }
  if (next >= t_samples.size()) return;
  const double t_end = t_samples.back();
  while (stepper.time() < t_end) {
    stepper.step(t_end);
    while (next < t_samples.size() && t_samples[next] <= stepper.time() + 1e-30) {
      sink(next, t_samples[next],
           t_samples[next] >= stepper.time() ? stepper.state()
                                             : stepper.dense_eval(t_samples[next]));
      ++next;
    }
  }
  while (next < t_samples.size()) {
    sink(next, t_samples[next], stepper.state());
    ++next;
  }
}

}  // namespace oal
