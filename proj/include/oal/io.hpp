#pragma once

// CSV serialization, the click-record text format, and the config hash that
// stamps every output file.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oal/correlations.hpp"
#include "oal/estimator.hpp"
#include "oal/evolve.hpp"
#include "oal/semiclassical.hpp"
#include "oal/trajectory.hpp"

namespace oal {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Repeatable shortest-ish float formatting; all CSV output funnels through
// here so reruns are byte-identical.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);  // fixed newlines on every platform
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

inline void write_header(std::ofstream& out, const std::vector<std::string>& header_lines) {
  for (const auto& line : header_lines) out << "# " << line << "\n";
}

}  // namespace detail

inline void write_sweep_csv(const std::string& path, const SweepCurve& curve,
                            const std::vector<std::string>& header_lines = {}) {
  auto out = detail::open_out(path);
  detail::write_header(out, header_lines);
  out << "x,nbar,pop_3p,pop_4,flux_ratio\n";
  for (const auto& pt : curve.points)
    out << fmt_double(pt.x) << ',' << fmt_double(pt.nbar) << ',' << fmt_double(pt.pop_3p) << ','
        << fmt_double(pt.pop_4) << ',' << fmt_double(pt.flux_ratio) << "\n";
}

inline void write_semiclassical_csv(const std::string& path, const ThresholdScan& scan,
                                    const std::vector<std::string>& header_lines = {}) {
  auto out = detail::open_out(path);
  detail::write_header(out, header_lines);
  out << "x,alpha_sq,pop_3p,pop_4,nu_mhz,lasing\n";
  for (const auto& pt : scan.points)
    out << fmt_double(pt.x) << ',' << fmt_double(pt.alpha_sq) << ',' << fmt_double(pt.pop_3p)
        << ',' << fmt_double(pt.pop_4) << ',' << fmt_double(rate_to_mhz(pt.nu)) << ','
        << (pt.lasing ? 1 : 0) << "\n";
  out << "# x_th," << (scan.x_th ? fmt_double(*scan.x_th) : std::string("absent")) << "\n";
}

// Raw and smoothed curves share the tau grid; an error column is appended
// when the raw curve carries counting errors.
inline void write_g2_csv(const std::string& path, const G2Curve& raw, const G2Curve& smoothed,
                         const std::vector<std::string>& header_lines = {}) {
  if (raw.taus != smoothed.taus)
    throw std::invalid_argument("write_g2_csv: raw/smoothed tau grids differ");
  auto out = detail::open_out(path);
  detail::write_header(out, header_lines);
  const bool with_err = !raw.errors.empty();
  out << (with_err ? "tau_ns,g2,g2_smoothed,g2_err\n" : "tau_ns,g2,g2_smoothed\n");
  for (std::size_t i = 0; i < raw.taus.size(); ++i) {
    out << fmt_double(raw.taus[i] * 1000.0) << ',' << fmt_double(raw.values[i]) << ','
        << fmt_double(smoothed.values[i]);
    if (with_err) out << ',' << fmt_double(raw.errors[i]);
    out << "\n";
  }
}

inline void write_ensemble_csv(const std::string& path, const EnsembleTrace& trace,
                               const std::string& observable,
                               const std::vector<std::string>& header_lines = {}) {
  auto out = detail::open_out(path);
  detail::write_header(out, header_lines);
  out << "t_us," << observable << ",stderr\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i)
    out << fmt_double(trace.times[i]) << ',' << fmt_double(trace.mean[i]) << ','
        << fmt_double(trace.stderr_[i]) << "\n";
}

// --- click record text format ------------------------------------------------
//
// Line-oriented: '#'-prefixed header lines carry the config snapshot (always
// including duration_ns), then one event per line as "D1<TAB>timestamp_ns".
// Bit-exact across platforms: integers only, '\n' newlines.

inline void write_click_record(const std::string& path, const ClickRecord& record) {
  record.validate();
  auto out = detail::open_out(path);
  out << "# duration_ns = " << record.duration_ns << "\n";
  for (const auto& [k, v] : record.meta) out << "# " << k << " = " << v << "\n";
  for (const auto& e : record.events)
    out << (e.detector == 0 ? "D1" : "D2") << '\t' << e.t_ns << "\n";
}

inline ClickRecord read_click_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open click record: " + path);
  ClickRecord rec;
  std::string line;
  long line_no = 0;
  bool have_duration = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        auto trim = [](std::string s) {
          const auto a = s.find_first_not_of(" \t");
          const auto b = s.find_last_not_of(" \t");
          return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(body.substr(0, eq));
        const std::string val = trim(body.substr(eq + 1));
        if (key == "duration_ns") {
          rec.duration_ns = std::stoll(val);
          have_duration = true;
        } else {
          rec.meta.emplace_back(key, val);
        }
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed event line");
    const std::string det = line.substr(0, tab);
    int detector;
    if (det == "D1") detector = 0;
    else if (det == "D2") detector = 1;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown detector id '" +
                               det + "'");
    std::int64_t t;
    try {
      std::size_t used = 0;
      t = std::stoll(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad timestamp");
    }
    rec.events.push_back({detector, t});
  }
  if (!have_duration)
    throw std::runtime_error(path + ": missing '# duration_ns = ...' header line");
  rec.validate();
  return rec;
}

}  // namespace oal
