#pragma once

// Four-state one-atom-laser model: physical parameters, the rotating-frame
// Hamiltonian, and the five collapse channels.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oal/algebra.hpp"
#include "oal/common.hpp"

namespace oal {

// Physical rates (angular frequency, rad/us) and branching fractions.
//
// kappa and gamma are amplitude decay rates, so the photon escape rate is
// 2*kappa and the total population decay rate of either excited level is
// 2*gamma. That factor of two appears exactly once, in build_collapse_ops.
//
// The branching fractions are the Cs D2 hyperfine values obtained from the
// Wigner 6-j sum S(F'->F) = (2F+1)(2J'+1) {J J' 1; F' F I}^2 with J=1/2,
// J'=3/2, I=7/2; the defaults below are the exact rationals. They stay
// configurable (test_model recomputes them from GSL as an oracle).
struct CqedParams {
  double g0 = rate_from_mhz(16.0);
  double kappa = rate_from_mhz(4.2);
  double gamma = rate_from_mhz(2.6);
  double b_3p_to_3 = 3.0 / 4.0;
  double b_3p_to_4 = 1.0 / 4.0;
  double b_4p_to_4 = 7.0 / 12.0;
  double b_4p_to_3 = 5.0 / 12.0;
  // Effective coupling in units of g0. The trapped atom samples couplings
  // between about 0.5*g0 and g0; 1.0 is the on-axis value.
  double g_scale = 1.0;

  double g() const { return g_scale * g0; }
  // Population decay rate 4' -> 3 (the recycling bottleneck).
  double gamma_34() const { return 2.0 * gamma * b_4p_to_3; }
  // Population decay rate 3' -> 4 (fluorescence on the lasing transition).
  double gamma_43p() const { return 2.0 * gamma * b_3p_to_4; }

  void validate() const {
    if (!(kappa > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("CqedParams: kappa and gamma must be > 0");
    if (g0 < 0.0) throw std::invalid_argument("CqedParams: g0 must be >= 0");
    if (g_scale < 0.0 || g_scale > 1.0) throw std::invalid_argument("CqedParams: g_scale must lie in [0, 1]");
    auto frac = [](double b) { return b >= 0.0 && b <= 1.0; };
    if (!frac(b_3p_to_3) || !frac(b_3p_to_4) || !frac(b_4p_to_4) || !frac(b_4p_to_3))
      throw std::invalid_argument("CqedParams: branching fractions must lie in [0, 1]");
    if (std::abs(b_3p_to_3 + b_3p_to_4 - 1.0) > 1e-12 || std::abs(b_4p_to_4 + b_4p_to_3 - 1.0) > 1e-12)
      throw std::invalid_argument("CqedParams: branching fractions must sum to 1 per excited level");
  }
};

// Pump/recycle drive settings. The dimensionless intensities are defined by
// I_i = (Omega_i / 2 gamma)^2, so Omega_i = 2 gamma sqrt(I_i).
//
// Detuning signs: delta3 = omega_L3 - omega(3->3'), delta4 likewise for
// 4->4', both positive for blue-detuned lasers; delta_ca = omega_C -
// omega(3'->4).
//
// probe_epsilon/probe_detuning add a coherent drive eps*(a + a^dag) +
// Delta*a^dag a used for driven-empty-cavity diagnostics. The implied frame
// rotates at the probe frequency, which is only consistent with the atomic
// terms when the atom is decoupled (g_scale = 0, I3 = I4 = 0).
struct DriveParams {
  double I3 = 0.0;
  double I4 = 13.0;
  double delta3 = rate_from_mhz(10.0);
  double delta4 = rate_from_mhz(17.0);
  double delta_ca = rate_from_mhz(9.0);
  double probe_epsilon = 0.0;
  double probe_detuning = 0.0;

  double omega3(const CqedParams& p) const { return 2.0 * p.gamma * std::sqrt(I3); }
  double omega4(const CqedParams& p) const { return 2.0 * p.gamma * std::sqrt(I4); }

  void validate() const {
    if (I3 < 0.0 || I4 < 0.0) throw std::invalid_argument("DriveParams: intensities must be >= 0");
  }
};

struct CriticalNumbers {
  double n0;  // critical photon number gamma^2 / (2 g0^2)
  double N0;  // critical atom number 2 kappa gamma / g0^2
  double C1;  // single-atom cooperativity 1/N0
};

inline CriticalNumbers critical_numbers(const CqedParams& p) {
  p.validate();
  if (!(p.g0 > 0.0)) throw std::invalid_argument("critical_numbers: g0 must be > 0");
  CriticalNumbers c;
  c.n0 = p.gamma * p.gamma / (2.0 * p.g0 * p.g0);
  c.N0 = 2.0 * p.kappa * p.gamma / (p.g0 * p.g0);
  c.C1 = 1.0 / c.N0;
  return c;
}

// x = (7/9) I3/I4; the 7/9 accounts for the different dipole moments of the
// pump and recycling transitions, making x a ratio of lab intensities.
inline double pump_ratio(double I3, double I4) {
  if (!(I4 > 0.0)) throw std::invalid_argument("pump_ratio: I4 must be > 0");
  if (I3 < 0.0) throw std::invalid_argument("pump_ratio: I3 must be >= 0");
  return (7.0 / 9.0) * (I3 / I4);
}

inline double pump_intensity_for_ratio(double x, double I4) {
  if (!(I4 > 0.0)) throw std::invalid_argument("pump_intensity_for_ratio: I4 must be > 0");
  if (x < 0.0) throw std::invalid_argument("pump_intensity_for_ratio: x must be >= 0");
  return x * I4 * (9.0 / 7.0);
}

// Time-independent Hamiltonian in the frame rotating with both drive lasers
// and the cavity (hbar = 1):
//
//   H = -delta3 sigma_3'3' + (delta_ca - delta3) sigma_44
//       + (delta_ca - delta3 - delta4) sigma_4'4'
//       + Omega3/2 (sigma_3'3 + sigma_33') + Omega4/2 (sigma_4'4 + sigma_44')
//       + g (a^dag sigma_43' + a sigma_3'4)
//
// The level chain 3 -O3- 3' -g- 4 -O4- 4' is open, so this frame removes all
// explicit time dependence; the cavity a^dag a term is absorbed into it.
inline Operator build_hamiltonian(const CqedParams& p, const DriveParams& d,
                                  const HilbertSpace& space) {
  p.validate();
  d.validate();
  using L = Level;
  const double om3 = d.omega3(p), om4 = d.omega4(p);

  MatrixXcd h = MatrixXcd::Zero(space.total_dim(), space.total_dim());
  h += -d.delta3 * atomic_sigma(space, L::F3p, L::F3p).m;
  h += (d.delta_ca - d.delta3) * atomic_sigma(space, L::F4, L::F4).m;
  h += (d.delta_ca - d.delta3 - d.delta4) * atomic_sigma(space, L::F4p, L::F4p).m;
  if (om3 != 0.0)
    h += 0.5 * om3 * (atomic_sigma(space, L::F3p, L::F3).m + atomic_sigma(space, L::F3, L::F3p).m);
  if (om4 != 0.0)
    h += 0.5 * om4 * (atomic_sigma(space, L::F4p, L::F4).m + atomic_sigma(space, L::F4, L::F4p).m);
  if (p.g() != 0.0) {
    Operator a = annihilator(space);
    MatrixXcd coupling = a.m.adjoint() * atomic_sigma(space, L::F4, L::F3p).m;
    h += p.g() * (coupling + coupling.adjoint());
  }
  if (d.probe_epsilon != 0.0 || d.probe_detuning != 0.0) {
    Operator a = annihilator(space);
    h += d.probe_detuning * (a.m.adjoint() * a.m);
    h += d.probe_epsilon * (a.m + a.m.adjoint());
  }
  return {space, std::move(h)};
}

enum class ChannelKind { CavityLoss, Decay3pTo3, Decay3pTo4, Decay4pTo4, Decay4pTo3 };

inline const char* channel_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::CavityLoss: return "cavity";
    case ChannelKind::Decay3pTo3: return "3'->3";
    case ChannelKind::Decay3pTo4: return "3'->4";
    case ChannelKind::Decay4pTo4: return "4'->4";
    case ChannelKind::Decay4pTo3: return "4'->3";
  }
  return "?";
}

// Jump operator already scaled by sqrt(rate); `rate` is kept alongside for
// bookkeeping (flux ratios, click-rate oracles).
struct CollapseChannel {
  Operator op;
  double rate;
  ChannelKind kind;
};

// The five dissipative channels: photon escape at 2*kappa plus the four
// spontaneous branches out of 3' and 4'.
inline std::vector<CollapseChannel> build_collapse_ops(const CqedParams& p,
                                                       const HilbertSpace& space) {
  p.validate();
  using L = Level;
  std::vector<CollapseChannel> out;
  out.reserve(5);
  auto add = [&](Operator op, double rate, ChannelKind kind) {
    out.push_back({std::sqrt(rate) * op, rate, kind});
  };
  add(annihilator(space), 2.0 * p.kappa, ChannelKind::CavityLoss);
  add(atomic_sigma(space, L::F3, L::F3p), 2.0 * p.gamma * p.b_3p_to_3, ChannelKind::Decay3pTo3);
  add(atomic_sigma(space, L::F4, L::F3p), 2.0 * p.gamma * p.b_3p_to_4, ChannelKind::Decay3pTo4);
  add(atomic_sigma(space, L::F4, L::F4p), 2.0 * p.gamma * p.b_4p_to_4, ChannelKind::Decay4pTo4);
  add(atomic_sigma(space, L::F3, L::F4p), 2.0 * p.gamma * p.b_4p_to_3, ChannelKind::Decay4pTo3);
  return out;
}

}  // namespace oal
