#pragma once

// Run configuration: INI-style text, one section per module.
//
//   [pump]
//   wavelength_nm = 523.6   # inline comments after whitespace
//
// Every key is declared in the schema below; unknown sections or keys,
// duplicates and malformed values are rejected with the line that caused
// them. `--set section.key=value` overrides are applied on top of the file.

#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "epskit/entanglement.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"
#include "epskit/phasematch.hpp"

namespace epskit {

struct StackElementSpec {
  std::string material;
  double length_mm = 0.0;
  Axis axis = Axis::Ordinary;
};

struct ConfigEntry {
  std::string section, key, value, origin; // origin: "file:line", "--set" or "default"
};

struct RunConfig {
  std::string materials_database; // empty = built-in default path

  PumpSpec pump;

  std::string crystal_material;
  double crystal_length_mm = 0.0;
  double poling_period_um = 0.0;
  double poling_reference_C = 25.0;
  std::optional<double> crystal_temperature_C; // nullopt = solve for target_signal_nm
  double target_signal_nm = 0.0;

  std::string displacer_material;
  double displacer_length_mm = 0.0;
  double optic_angle_deg = 45.0;
  double displacer_temperature_C = 20.0;

  std::string wedge_material;
  double wedge_angle_deg = 0.0;
  double wedge_aperture_mm = 0.0;
  double wedge_temperature_C = 20.0;
  std::optional<double> walkoff_signal_mm; // nullopt = predicted by the displacer model
  std::optional<double> walkoff_idler_mm;

  double fwhm_signal_mm = 0.6;
  double fwhm_idler_mm = 0.8;
  std::string sweep_arm = "idler";
  std::vector<double> sweep_separations_mm;

  double efficiency_signal = 1.0, efficiency_idler = 1.0;
  double coupling_signal = 1.0, coupling_idler = 1.0;
  double dark_signal_hz = 0.0, dark_idler_hz = 0.0;
  double window_ns = 1.5;
  double pair_rate_per_mW = 0.0;
  std::optional<std::array<double, 3>> calibration_counts_hz; // Ns, Ni, N
  double calibration_power_mW = 1.0;

  BellStateModel state;

  double excursion_K = 1.0;
  double stability_baseline_C = 20.0;
  // cw_pump, cw_signal, cw_idler, ccw_pump, ccw_signal, ccw_idler; empty = displacer default
  std::array<std::vector<StackElementSpec>, 6> stacks;

  PhaseMatchKnobs knobs;
  double temperature_min_C = -50.0, temperature_max_C = 250.0;
  double thickness_max_mm = 100.0;

  double duration_s = 1.0;
  double scan_step_deg = 10.0;
  std::vector<double> power_scan_mW;
  double power_scan_duration_s = 10.0;
  bool background_subtracted = true;
  std::array<double, 4> chsh_angles_deg{0.0, 22.5, 45.0, 67.5};

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  std::vector<ConfigEntry> entries; // effective values, for the report echo
};

namespace detail {

struct KeySpec {
  const char *section;
  const char *key;
  const char *fallback; // nullptr = required
};

// clang-format off
inline constexpr KeySpec kSchema[] = {
  {"materials", "database", ""},
  {"pump", "wavelength_nm", nullptr},
  {"pump", "bandwidth_nm", "0"},
  {"pump", "power_mW", "1"},
  {"crystal", "material", nullptr},
  {"crystal", "length_mm", nullptr},
  {"crystal", "poling_period_um", nullptr},
  {"crystal", "poling_reference_C", "25"},
  {"crystal", "temperature_C", "auto"},
  {"crystal", "target_signal_nm", "0"},
  {"displacer", "material", nullptr},
  {"displacer", "length_mm", nullptr},
  {"displacer", "optic_angle_deg", "45"},
  {"displacer", "temperature_C", "20"},
  {"wedge", "material", nullptr},
  {"wedge", "wedge_angle_deg", nullptr},
  {"wedge", "aperture_mm", "0"},
  {"wedge", "temperature_C", "20"},
  {"wedge", "walkoff_signal_mm", "predicted"},
  {"wedge", "walkoff_idler_mm", "predicted"},
  {"beams", "fwhm_signal_mm", "0.6"},
  {"beams", "fwhm_idler_mm", "0.8"},
  {"beams", "sweep_arm", "idler"},
  {"beams", "sweep_separations_mm", "0, 1.6, 3.6, 6.6, 9.6, 11.6"},
  {"detection", "efficiency_signal", "1"},
  {"detection", "efficiency_idler", "1"},
  {"detection", "coupling_signal", "1"},
  {"detection", "coupling_idler", "1"},
  {"detection", "dark_rate_signal_hz", "0"},
  {"detection", "dark_rate_idler_hz", "0"},
  {"detection", "coincidence_window_ns", "1.5"},
  {"detection", "pair_rate_per_mW", "0"},
  {"detection", "calibration_counts_hz", "none"},
  {"detection", "calibration_power_mW", "1"},
  {"state", "phase_rad", "0"},
  {"state", "visibilities", "1, 1, 1, 1"},
  {"stability", "temperature_excursion_K", "1"},
  {"stability", "baseline_C", "20"},
  {"stability", "cw_pump", "default"},
  {"stability", "cw_signal", "default"},
  {"stability", "cw_idler", "default"},
  {"stability", "ccw_pump", "default"},
  {"stability", "ccw_signal", "default"},
  {"stability", "ccw_idler", "default"},
  {"solver", "scan_step_nm", "0.1"},
  {"solver", "tolerance", "1e-6"},
  {"solver", "max_iterations", "200"},
  {"solver", "temperature_min_C", "-50"},
  {"solver", "temperature_max_C", "250"},
  {"solver", "thickness_max_mm", "100"},
  {"simulate", "duration_s", "1"},
  {"simulate", "scan_step_deg", "10"},
  {"simulate", "power_scan_mW", "0.2, 0.4, 0.6, 0.8, 1.0"},
  {"simulate", "power_scan_duration_s", "10"},
  {"simulate", "background_subtracted", "true"},
  {"simulate", "chsh_angles_deg", "0, 22.5, 45, 67.5"},
  {"run", "seed", "1"},
  {"run", "output_dir", "out"},
};
inline constexpr const char *kRequiredSections[] = {"pump", "crystal", "displacer", "wedge"};
// clang-format on

struct RawValue {
  std::string value;
  std::string origin;
};

using RawConfig = std::map<std::string, std::map<std::string, RawValue>>;

inline const KeySpec *find_key(std::string_view section, std::string_view key) {
  for (const auto &k : kSchema)
    if (section == k.section && key == k.key) return &k;
  return nullptr;
}

inline bool known_section(std::string_view section) {
  for (const auto &k : kSchema)
    if (section == k.section) return true;
  return false;
}

inline std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string drop_comment(const std::string &line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if ((line[i] == '#' || line[i] == ';') && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t'))
      return line.substr(0, i);
  }
  return line;
}

class Reader {
public:
  explicit Reader(const RawConfig &raw) : raw_(raw) {}

  const RawValue &raw(const char *section, const char *key) const { return raw_.at(section).at(key); }

  [[noreturn]] void fail(const char *section, const char *key, const std::string &why) const {
    const auto &r = raw(section, key);
    throw ConfigError("config", fmt::format("{}: [{}] {} = '{}': {}", r.origin, section, key, r.value, why));
  }

  std::string str(const char *s, const char *k) const { return raw(s, k).value; }

  double num(const char *s, const char *k) const { return parse_number(s, k, raw(s, k).value); }

  double positive(const char *s, const char *k) const {
    const double v = num(s, k);
    if (!(v > 0.0)) fail(s, k, "must be > 0");
    return v;
  }

  double nonneg(const char *s, const char *k) const {
    const double v = num(s, k);
    if (!(v >= 0.0)) fail(s, k, "must be >= 0");
    return v;
  }

  double unit(const char *s, const char *k) const {
    const double v = num(s, k);
    if (!(v >= 0.0 && v <= 1.0)) fail(s, k, "must lie in [0, 1]");
    return v;
  }

  std::optional<double> num_or(const char *s, const char *k, std::string_view word) const {
    if (raw(s, k).value == word) return std::nullopt;
    return num(s, k);
  }

  std::vector<double> list(const char *s, const char *k) const {
    std::vector<double> out;
    std::stringstream ss(raw(s, k).value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(s, k, strip(item)));
    return out;
  }

  bool boolean(const char *s, const char *k) const {
    const auto &v = raw(s, k).value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(s, k, "expected true or false");
  }

  std::uint64_t u64(const char *s, const char *k) const {
    const auto &v = raw(s, k).value;
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) fail(s, k, "expected an unsigned integer");
    return out;
  }

  std::vector<StackElementSpec> stack(const char *s, const char *k) const {
    std::vector<StackElementSpec> out;
    if (raw(s, k).value == "default") return out;
    std::stringstream ss(raw(s, k).value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = strip(item);
      const auto p2 = item.rfind(':');
      const auto p1 = p2 == std::string::npos || p2 == 0 ? std::string::npos : item.rfind(':', p2 - 1);
      if (p1 == std::string::npos) fail(s, k, "expected material:length_mm:axis entries");
      StackElementSpec e;
      e.material = strip(item.substr(0, p1));
      e.length_mm = parse_number(s, k, strip(item.substr(p1 + 1, p2 - p1 - 1)));
      const auto ax = strip(item.substr(p2 + 1));
      if (ax == "o") e.axis = Axis::Ordinary;
      else if (ax == "e") e.axis = Axis::Extraordinary;
      else fail(s, k, fmt::format("axis '{}' must be o or e", ax));
      if (!(e.length_mm > 0.0)) fail(s, k, "stack lengths must be > 0");
      out.push_back(e);
    }
    if (out.empty()) fail(s, k, "empty stack");
    return out;
  }

private:
  double parse_number(const char *s, const char *k, const std::string &v) const {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
      fail(s, k, fmt::format("'{}' is not a number", v));
    return out;
  }

  const RawConfig &raw_;
};

inline void set_raw(RawConfig &raw, const std::string &section, const std::string &key, const std::string &value,
                    const std::string &origin, bool allow_replace) {
  if (!known_section(section)) throw ConfigError("config", fmt::format("{}: unknown section [{}]", origin, section));
  if (!find_key(section, key))
    throw ConfigError("config", fmt::format("{}: unknown key '{}' in section [{}]", origin, key, section));
  auto &slot = raw[section];
  if (!allow_replace && slot.count(key))
    throw ConfigError("config", fmt::format("{}: duplicate key '{}' in section [{}] (first at {})", origin, key,
                                            section, slot.at(key).origin));
  slot[key] = {value, origin};
}

} // namespace detail

/// Parses `text`, applies `overrides` ("section.key=value") and validates.
inline RunConfig parse_config(std::string_view text, const std::string &origin = "<config>",
                              const std::vector<std::string> &overrides = {}) {
  using detail::strip;
  detail::RawConfig raw;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto where = fmt::format("{}:{}", origin, lineno);
    const auto s = strip(detail::drop_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("config", fmt::format("{}: malformed section header '{}'", where, s));
      section = strip(s.substr(1, s.size() - 2));
      if (!detail::known_section(section))
        throw ConfigError("config", fmt::format("{}: unknown section [{}]", where, section));
      if (raw.count(section)) throw ConfigError("config", fmt::format("{}: duplicate section [{}]", where, section));
      raw[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("config", fmt::format("{}: expected key = value, got '{}'", where, s));
    if (section.empty()) throw ConfigError("config", fmt::format("{}: key outside of any section", where));
    const auto key = strip(s.substr(0, eq));
    const auto value = strip(s.substr(eq + 1));
    if (value.empty()) throw ConfigError("config", fmt::format("{}: empty value for '{}'", where, key));
    detail::set_raw(raw, section, key, value, where, false);
  }
  for (const auto &o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("config", fmt::format("--set '{}': expected section.key=value", o));
    const auto sec = strip(o.substr(0, dot));
    raw[sec];
    detail::set_raw(raw, sec, strip(o.substr(dot + 1, eq - dot - 1)), strip(o.substr(eq + 1)), "--set", true);
  }
  for (const char *req : detail::kRequiredSections) {
    if (!raw.count(req)) throw ConfigError("config", fmt::format("{}: missing required section [{}]", origin, req));
  }

  RunConfig c;
  for (const auto &k : detail::kSchema) {
    auto &slot = raw[k.section];
    if (!slot.count(k.key)) {
      if (!k.fallback)
        throw ConfigError("config", fmt::format("{}: missing required key '{}' in section [{}]", origin, k.key, k.section));
      slot[k.key] = {k.fallback, "default"};
    }
    c.entries.push_back({k.section, k.key, slot.at(k.key).value, slot.at(k.key).origin});
  }

  const detail::Reader r(raw);
  c.materials_database = r.str("materials", "database");

  c.pump.wavelength_nm = r.positive("pump", "wavelength_nm");
  c.pump.bandwidth_nm = r.nonneg("pump", "bandwidth_nm");
  c.pump.power_mW = r.nonneg("pump", "power_mW");

  c.crystal_material = r.str("crystal", "material");
  c.crystal_length_mm = r.positive("crystal", "length_mm");
  c.poling_period_um = r.positive("crystal", "poling_period_um");
  c.poling_reference_C = r.num("crystal", "poling_reference_C");
  c.crystal_temperature_C = r.num_or("crystal", "temperature_C", "auto");
  c.target_signal_nm = r.nonneg("crystal", "target_signal_nm");
  if (!c.crystal_temperature_C && !(c.target_signal_nm > c.pump.wavelength_nm))
    r.fail("crystal", "target_signal_nm", "temperature_C = auto needs a target signal longer than the pump");

  c.displacer_material = r.str("displacer", "material");
  c.displacer_length_mm = r.positive("displacer", "length_mm");
  c.optic_angle_deg = r.num("displacer", "optic_angle_deg");
  if (!(c.optic_angle_deg >= 0.0 && c.optic_angle_deg <= 90.0))
    r.fail("displacer", "optic_angle_deg", "must lie in [0, 90]");
  c.displacer_temperature_C = r.num("displacer", "temperature_C");

  c.wedge_material = r.str("wedge", "material");
  c.wedge_angle_deg = r.num("wedge", "wedge_angle_deg");
  if (!(c.wedge_angle_deg > 0.0 && c.wedge_angle_deg < 90.0)) r.fail("wedge", "wedge_angle_deg", "must lie in (0, 90)");
  c.wedge_aperture_mm = r.nonneg("wedge", "aperture_mm");
  c.wedge_temperature_C = r.num("wedge", "temperature_C");
  c.walkoff_signal_mm = r.num_or("wedge", "walkoff_signal_mm", "predicted");
  c.walkoff_idler_mm = r.num_or("wedge", "walkoff_idler_mm", "predicted");
  if (c.walkoff_signal_mm && *c.walkoff_signal_mm < 0) r.fail("wedge", "walkoff_signal_mm", "must be >= 0");
  if (c.walkoff_idler_mm && *c.walkoff_idler_mm < 0) r.fail("wedge", "walkoff_idler_mm", "must be >= 0");

  c.fwhm_signal_mm = r.positive("beams", "fwhm_signal_mm");
  c.fwhm_idler_mm = r.positive("beams", "fwhm_idler_mm");
  c.sweep_arm = r.str("beams", "sweep_arm");
  if (c.sweep_arm != "signal" && c.sweep_arm != "idler") r.fail("beams", "sweep_arm", "must be signal or idler");
  c.sweep_separations_mm = r.list("beams", "sweep_separations_mm");
  for (std::size_t k = 1; k < c.sweep_separations_mm.size(); ++k)
    if (!(c.sweep_separations_mm[k] > c.sweep_separations_mm[k - 1]))
      r.fail("beams", "sweep_separations_mm", "must be strictly increasing");

  c.efficiency_signal = r.unit("detection", "efficiency_signal");
  c.efficiency_idler = r.unit("detection", "efficiency_idler");
  c.coupling_signal = r.unit("detection", "coupling_signal");
  c.coupling_idler = r.unit("detection", "coupling_idler");
  c.dark_signal_hz = r.nonneg("detection", "dark_rate_signal_hz");
  c.dark_idler_hz = r.nonneg("detection", "dark_rate_idler_hz");
  c.window_ns = r.positive("detection", "coincidence_window_ns");
  c.pair_rate_per_mW = r.nonneg("detection", "pair_rate_per_mW");
  if (r.str("detection", "calibration_counts_hz") != "none") {
    const auto v = r.list("detection", "calibration_counts_hz");
    if (v.size() != 3 || !(v[0] > 0 && v[1] > 0 && v[2] > 0))
      r.fail("detection", "calibration_counts_hz", "expected three positive rates Ns, Ni, N");
    c.calibration_counts_hz = std::array<double, 3>{v[0], v[1], v[2]};
  }
  c.calibration_power_mW = r.positive("detection", "calibration_power_mW");

  c.state.phase_rad = r.num("state", "phase_rad");
  {
    const auto v = r.list("state", "visibilities");
    if (v.size() != 4) r.fail("state", "visibilities", "expected four values for idler bases 0, 45, 90, 135 deg");
    for (std::size_t k = 0; k < 4; ++k) {
      if (!(v[k] >= 0.0 && v[k] <= 1.0)) r.fail("state", "visibilities", "values must lie in [0, 1]");
      c.state.visibility[k] = v[k];
    }
  }

  c.excursion_K = r.num("stability", "temperature_excursion_K");
  c.stability_baseline_C = r.num("stability", "baseline_C");
  const char *stack_keys[] = {"cw_pump", "cw_signal", "cw_idler", "ccw_pump", "ccw_signal", "ccw_idler"};
  for (std::size_t k = 0; k < 6; ++k) c.stacks[k] = r.stack("stability", stack_keys[k]);

  c.knobs.scan_step_nm = r.positive("solver", "scan_step_nm");
  c.knobs.tolerance = r.positive("solver", "tolerance");
  c.knobs.max_iterations = r.u64("solver", "max_iterations");
  c.temperature_min_C = r.num("solver", "temperature_min_C");
  c.temperature_max_C = r.num("solver", "temperature_max_C");
  if (!(c.temperature_max_C > c.temperature_min_C))
    r.fail("solver", "temperature_max_C", "must exceed temperature_min_C");
  c.thickness_max_mm = r.positive("solver", "thickness_max_mm");

  c.duration_s = r.nonneg("simulate", "duration_s");
  c.scan_step_deg = r.positive("simulate", "scan_step_deg");
  c.power_scan_mW = r.list("simulate", "power_scan_mW");
  for (double p : c.power_scan_mW)
    if (!(p > 0.0)) r.fail("simulate", "power_scan_mW", "powers must be > 0");
  c.power_scan_duration_s = r.positive("simulate", "power_scan_duration_s");
  c.background_subtracted = r.boolean("simulate", "background_subtracted");
  {
    const auto v = r.list("simulate", "chsh_angles_deg");
    if (v.size() != 4) r.fail("simulate", "chsh_angles_deg", "expected alpha, beta, gamma, delta");
    for (std::size_t k = 0; k < 4; ++k) c.chsh_angles_deg[k] = v[k];
  }

  c.seed = r.u64("run", "seed");
  c.output_dir = r.str("run", "output_dir");
  return c;
}

} // namespace epskit
