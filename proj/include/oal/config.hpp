#pragma once

// Flat key = value run configuration. Rates are entered the way they are
// quoted in the lab (value over 2pi, in MHz, keys suffixed _mhz) and
// converted to angular frequencies exactly once, here.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oal/common.hpp"
#include "oal/integrate.hpp"
#include "oal/io.hpp"
#include "oal/model.hpp"
#include "oal/trajectory.hpp"

namespace oal {

struct RunConfig {
  // cqed
  double g0_mhz = 16.0;
  double kappa_mhz = 4.2;
  double gamma_mhz = 2.6;
  double branch_3p_to_3 = 3.0 / 4.0;
  double branch_3p_to_4 = 1.0 / 4.0;
  double branch_4p_to_4 = 7.0 / 12.0;
  double branch_4p_to_3 = 5.0 / 12.0;
  double g_scale = 1.0;
  // drive; i3 and x are alternatives (x wins may not be set together)
  double i3 = -1.0;  // < 0 = unset
  double i4 = 13.0;
  double x = -1.0;  // < 0 = unset
  double delta3_mhz = 10.0;
  double delta4_mhz = 17.0;
  double delta_ca_mhz = 9.0;
  double probe_epsilon_mhz = 0.0;
  double probe_detuning_mhz = 0.0;
  // space / solver
  int fock_cutoff = 8;
  double rtol = 1e-8;
  double atol = 1e-10;
  // sweep grid: x = 0 plus sweep_points-1 log-spaced values in
  // [sweep_x_min, sweep_x_max]
  double sweep_x_min = 0.005;
  double sweep_x_max = 2.33;
  int sweep_points = 41;
  // g2
  double tau_max_us = 3.0;
  int tau_intervals = 2048;
  double smoothing_sigma_ns = 5.0;
  // trajectories
  std::uint64_t seed = 0;  // 0 = pick one and print it
  int trajectory_count = 1;
  double trajectory_duration_ms = 1.0;
  double dt_max_us = 0.0;  // 0 = automatic
  double sample_dt_us = 1.0;
  double burn_in_us = 5.0;
  std::string trajectory_method = "auto";  // auto | eigenbasis | integrator
  // detection chain
  double eta = 0.60;
  double t_mirror = 0.50;
  double zeta = 1.0 / 3.0;
  double alpha_det = 0.50;
  double background_khz = 0.0;  // per detector
  // estimator
  double bin_width_ns = 10.0;
  double estimator_tau_max_ns = 3000.0;
  // output
  std::string out_dir = "out";
  std::string preset;

  // --- conversions to solver objects ---------------------------------------

  CqedParams cqed() const {
    CqedParams p;
    p.g0 = rate_from_mhz(g0_mhz);
    p.kappa = rate_from_mhz(kappa_mhz);
    p.gamma = rate_from_mhz(gamma_mhz);
    p.b_3p_to_3 = branch_3p_to_3;
    p.b_3p_to_4 = branch_3p_to_4;
    p.b_4p_to_4 = branch_4p_to_4;
    p.b_4p_to_3 = branch_4p_to_3;
    p.g_scale = g_scale;
    p.validate();
    return p;
  }

  DriveParams drive() const {
    DriveParams d;
    d.I4 = i4;
    if (x >= 0.0 && i3 >= 0.0)
      throw ConfigError("set either 'x' or 'i3', not both");
    if (x >= 0.0) d.I3 = pump_intensity_for_ratio(x, i4);
    else if (i3 >= 0.0) d.I3 = i3;
    else d.I3 = 0.0;
    d.delta3 = rate_from_mhz(delta3_mhz);
    d.delta4 = rate_from_mhz(delta4_mhz);
    d.delta_ca = rate_from_mhz(delta_ca_mhz);
    d.probe_epsilon = rate_from_mhz(probe_epsilon_mhz);
    d.probe_detuning = rate_from_mhz(probe_detuning_mhz);
    d.validate();
    return d;
  }

  HilbertSpace space() const { return HilbertSpace(fock_cutoff); }

  DetectionChain chain() const {
    DetectionChain c;
    c.eta = eta;
    c.t_mirror = t_mirror;
    c.zeta = zeta;
    c.alpha = alpha_det;
    c.background_rate = background_khz * 1e-3;  // kHz -> clicks per us
    c.validate();
    return c;
  }

  IntegratorOptions integrator() const {
    IntegratorOptions o;
    o.rtol = rtol;
    o.atol = atol;
    return o;
  }

  TrajectoryMethod method() const {
    if (trajectory_method == "auto") return TrajectoryMethod::Auto;
    if (trajectory_method == "eigenbasis") return TrajectoryMethod::Eigenbasis;
    if (trajectory_method == "integrator") return TrajectoryMethod::Integrator;
    throw ConfigError("trajectory_method must be auto, eigenbasis or integrator");
  }

  std::vector<double> sweep_grid() const {
    if (sweep_points < 2 || !(sweep_x_max > sweep_x_min) || !(sweep_x_min > 0.0))
      throw ConfigError("sweep grid needs sweep_points >= 2 and 0 < sweep_x_min < sweep_x_max");
    std::vector<double> xs;
    xs.push_back(0.0);
    const int n = sweep_points - 1;
    for (int i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      xs.push_back(sweep_x_min * std::pow(sweep_x_max / sweep_x_min, f));
    }
    xs.back() = sweep_x_max;
    return xs;
  }

  // --- canonical form / hashing ---------------------------------------------

  std::string canonical() const;
  std::string config_hash() const { return hex64(fnv1a64(canonical())); }
  std::vector<std::string> csv_header() const {
    std::vector<std::string> h;
    h.push_back("config_hash = " + config_hash());
    if (!preset.empty()) h.push_back("preset = " + preset);
    return h;
  }
};

namespace detail {

struct KeyBinding {
  const char* key;
  enum { Double, Int, Uint64, String } type;
  void* ptr;
};

inline std::vector<KeyBinding> bindings(RunConfig& c) {
  using B = KeyBinding;
  return {
      {"g0_mhz", B::Double, &c.g0_mhz},
      {"kappa_mhz", B::Double, &c.kappa_mhz},
      {"gamma_mhz", B::Double, &c.gamma_mhz},
      {"branch_3p_to_3", B::Double, &c.branch_3p_to_3},
      {"branch_3p_to_4", B::Double, &c.branch_3p_to_4},
      {"branch_4p_to_4", B::Double, &c.branch_4p_to_4},
      {"branch_4p_to_3", B::Double, &c.branch_4p_to_3},
      {"g_scale", B::Double, &c.g_scale},
      {"i3", B::Double, &c.i3},
      {"i4", B::Double, &c.i4},
      {"x", B::Double, &c.x},
      {"delta3_mhz", B::Double, &c.delta3_mhz},
      {"delta4_mhz", B::Double, &c.delta4_mhz},
      {"delta_ca_mhz", B::Double, &c.delta_ca_mhz},
      {"probe_epsilon_mhz", B::Double, &c.probe_epsilon_mhz},
      {"probe_detuning_mhz", B::Double, &c.probe_detuning_mhz},
      {"fock_cutoff", B::Int, &c.fock_cutoff},
      {"rtol", B::Double, &c.rtol},
      {"atol", B::Double, &c.atol},
      {"sweep_x_min", B::Double, &c.sweep_x_min},
      {"sweep_x_max", B::Double, &c.sweep_x_max},
      {"sweep_points", B::Int, &c.sweep_points},
      {"tau_max_us", B::Double, &c.tau_max_us},
      {"tau_intervals", B::Int, &c.tau_intervals},
      {"smoothing_sigma_ns", B::Double, &c.smoothing_sigma_ns},
      {"seed", B::Uint64, &c.seed},
      {"trajectory_count", B::Int, &c.trajectory_count},
      {"trajectory_duration_ms", B::Double, &c.trajectory_duration_ms},
      {"dt_max_us", B::Double, &c.dt_max_us},
      {"sample_dt_us", B::Double, &c.sample_dt_us},
      {"burn_in_us", B::Double, &c.burn_in_us},
      {"trajectory_method", B::String, &c.trajectory_method},
      {"eta", B::Double, &c.eta},
      {"t_mirror", B::Double, &c.t_mirror},
      {"zeta", B::Double, &c.zeta},
      {"alpha_det", B::Double, &c.alpha_det},
      {"background_khz", B::Double, &c.background_khz},
      {"bin_width_ns", B::Double, &c.bin_width_ns},
      {"estimator_tau_max_ns", B::Double, &c.estimator_tau_max_ns},
      {"out_dir", B::String, &c.out_dir},
  };
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::string RunConfig::canonical() const {
  RunConfig& self = const_cast<RunConfig&>(*this);
  std::ostringstream out;
  for (const auto& b : detail::bindings(self)) {
    out << b.key << " = ";
    switch (b.type) {
      case detail::KeyBinding::Double: out << fmt_double(*static_cast<double*>(b.ptr)); break;
      case detail::KeyBinding::Int: out << *static_cast<int*>(b.ptr); break;
      case detail::KeyBinding::Uint64: out << *static_cast<std::uint64_t*>(b.ptr); break;
      case detail::KeyBinding::String: out << *static_cast<std::string*>(b.ptr); break;
    }
    out << "\n";
  }
  if (!preset.empty()) out << "preset = " << preset << "\n";
  return out.str();
}

// Presets carry only the paper-anchored operating points.
inline void apply_preset(RunConfig& c, const std::string& name) {
  c.preset = name;
  if (name == "fig3") {
    c.i4 = 13.0;
    c.sweep_x_max = 2.33;
  } else if (name == "fig4_low") {
    c.i4 = 13.0;
    c.x = 0.17;
    c.smoothing_sigma_ns = 5.0;
  } else if (name == "fig4_high") {
    c.i4 = 13.0;
    c.x = 0.83;
    c.smoothing_sigma_ns = 5.0;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

// Parse "key = value" lines; '#' starts a comment; unknown keys are
// rejected with their line number.
inline void apply_config_text(RunConfig& c, const std::string& text,
                              const std::string& origin = "<config>") {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  auto binds = detail::bindings(c);
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    bool found = false;
    for (auto& b : binds) {
      if (key != b.key) continue;
      found = true;
      try {
        switch (b.type) {
          case detail::KeyBinding::Double: *static_cast<double*>(b.ptr) = std::stod(val); break;
          case detail::KeyBinding::Int: *static_cast<int*>(b.ptr) = std::stoi(val); break;
          case detail::KeyBinding::Uint64:
            *static_cast<std::uint64_t*>(b.ptr) = std::stoull(val);
            break;
          case detail::KeyBinding::String: *static_cast<std::string*>(b.ptr) = val; break;
        }
      } catch (const std::exception&) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad value for '" + key +
                          "'");
      }
      break;
    }
    if (!found)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  // cheap schema validation up front, before any solve
  c.cqed();
  c.drive();
  c.chain();
  if (c.fock_cutoff < 1) throw ConfigError("fock_cutoff must be >= 1");
  if (c.trajectory_count < 1) throw ConfigError("trajectory_count must be >= 1");
  c.method();
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  apply_config_text(c, body.str(), path);
}

}  // namespace oal
