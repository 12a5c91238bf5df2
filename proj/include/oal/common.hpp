#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace oal {

using complexd = std::complex<double>;

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Unit conventions, fixed once for the whole library:
//   - time is measured in microseconds,
//   - every rate/frequency is an angular frequency in rad/us,
//   - kappa and gamma are *amplitude* decay rates, so photon loss and
//     excited-state population decay run at 2*kappa and 2*gamma.
// A quantity quoted as "value over 2pi in MHz" (the usual lab convention)
// converts to rad/us by multiplying with 2pi, since 1 MHz = 1/us.
inline double rate_from_mhz(double mhz_over_2pi) { return two_pi * mhz_over_2pi; }
inline double rate_to_mhz(double rad_per_us) { return rad_per_us / two_pi; }

// Thrown when a steady-state solve cannot produce a unique physical state.
// null_space_dim < 0 means the dimension could not be determined cheaply.
class SteadyStateError : public std::runtime_error {
 public:
  SteadyStateError(const std::string& msg, int null_dim)
      : std::runtime_error(msg), null_space_dim(null_dim) {}
  int null_space_dim;
};

// Thrown when adaptive time stepping fails to meet its tolerance.
class IntegratorError : public std::runtime_error {
 public:
  explicit IntegratorError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oal
