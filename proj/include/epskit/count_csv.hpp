#pragma once

// Count-record CSV:
//   theta_s_deg,theta_i_deg,duration_s,Ns_hz,Ni_hz,N_hz,bg_subtracted,seed
// Spaces around fields are ignored on input; bg_subtracted is 0/1 or
// true/false.

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "epskit/entanglement.hpp"
#include "epskit/error.hpp"

namespace epskit {

inline constexpr const char *kCountCsvHeader = "theta_s_deg,theta_i_deg,duration_s,Ns_hz,Ni_hz,N_hz,bg_subtracted,seed";

inline void write_count_csv(std::ostream &os, const std::vector<CountRecord> &records) {
  os << kCountCsvHeader << '\n';
  for (const auto &r : records) {
    fmt::print(os, "{},{},{},{},{},{},{},{}\n", r.theta_s_deg, r.theta_i_deg, r.duration_s, r.Ns_hz, r.Ni_hz, r.N_hz,
               r.bg_subtracted ? 1 : 0, r.seed);
  }
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T> T parse_field(const std::string &s, const std::string &origin, int line, const char *col) {
  T v{};
  const auto *end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != end)
    throw IoError("csv", fmt::format("{}:{}: bad value '{}' in column {}", origin, line, s, col));
  return v;
}

} // namespace detail

inline std::vector<CountRecord> read_count_csv(std::istream &is, const std::string &origin = "<stream>") {
  static const char *cols[] = {"theta_s_deg", "theta_i_deg", "duration_s", "Ns_hz", "Ni_hz", "N_hz", "bg_subtracted", "seed"};
  std::vector<CountRecord> out;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty() || detail::trim(line)[0] == '#') continue;
    const auto f = detail::split_csv(line);
    if (!header) {
      if (f.size() != 8) throw IoError("csv", fmt::format("{}:{}: expected the 8-column count header", origin, lineno));
      for (std::size_t k = 0; k < 8; ++k)
        if (f[k] != cols[k])
          throw IoError("csv", fmt::format("{}:{}: header column {} is '{}', expected '{}'", origin, lineno, k + 1, f[k], cols[k]));
      header = true;
      continue;
    }
    if (f.size() != 8) throw IoError("csv", fmt::format("{}:{}: expected 8 fields, got {}", origin, lineno, f.size()));
    CountRecord r;
    r.theta_s_deg = detail::parse_field<double>(f[0], origin, lineno, cols[0]);
    r.theta_i_deg = detail::parse_field<double>(f[1], origin, lineno, cols[1]);
    r.duration_s = detail::parse_field<double>(f[2], origin, lineno, cols[2]);
    r.Ns_hz = detail::parse_field<double>(f[3], origin, lineno, cols[3]);
    r.Ni_hz = detail::parse_field<double>(f[4], origin, lineno, cols[4]);
    r.N_hz = detail::parse_field<double>(f[5], origin, lineno, cols[5]);
    if (f[6] == "1" || f[6] == "true") r.bg_subtracted = true;
    else if (f[6] == "0" || f[6] == "false") r.bg_subtracted = false;
    else throw IoError("csv", fmt::format("{}:{}: bad value '{}' in column bg_subtracted", origin, lineno, f[6]));
    r.seed = detail::parse_field<std::uint64_t>(f[7], origin, lineno, cols[7]);
    if (r.duration_s < 0 || r.Ns_hz < 0 || r.Ni_hz < 0 || r.N_hz < 0)
      throw DomainError("csv", DomainReason::Generic, fmt::format("{}:{}: negative duration or rate", origin, lineno));
    if (r.N_hz > std::min(r.Ns_hz, r.Ni_hz) * (1.0 + 1e-12))
      throw DomainError("csv", DomainReason::Generic,
                        fmt::format("{}:{}: coincidence rate exceeds a singles rate", origin, lineno));
    out.push_back(r);
  }
  return out;
}

} // namespace epskit
