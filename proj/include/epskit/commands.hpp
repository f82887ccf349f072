#pragma once

// Command layer behind the epskit executable. Each command writes a
// plain-text report plus CSV side files into the output directory and
// returns a short summary for stdout. Output depends only on the config,
// the materials database and the seed.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "epskit/config.hpp"
#include "epskit/count_csv.hpp"
#include "epskit/displacer.hpp"
#include "epskit/entanglement.hpp"
#include "epskit/materials.hpp"
#include "epskit/overlap.hpp"
#include "epskit/phasematch.hpp"
#include "epskit/stability.hpp"
#include "epskit/wedges.hpp"

namespace epskit {

enum class Command { Design, Sweep, Simulate, Stability, Analyze };

inline std::optional<Command> parse_command(std::string_view s) {
  if (s == "design") return Command::Design;
  if (s == "sweep") return Command::Sweep;
  if (s == "simulate") return Command::Simulate;
  if (s == "stability") return Command::Stability;
  if (s == "analyze") return Command::Analyze;
  return std::nullopt;
}

// Plain-text table with a machine-readable twin.
class Report {
public:
  explicit Report(std::string title) : title_(std::move(title)) {}

  void section(const std::string &name) { rows_.push_back({name, "", "", "", "", true}); current_ = name; }

  void add(const std::string &quantity, double value, const std::string &unit, const std::string &note = "") {
    rows_.push_back({current_, quantity, fmt::format("{:.6g}", value), unit, note, false});
    csv_.push_back({current_, quantity, fmt::format("{}", value), unit});
  }

  void add_text(const std::string &quantity, const std::string &value, const std::string &note = "") {
    rows_.push_back({current_, quantity, value, "", note, false});
    csv_.push_back({current_, quantity, value, "-"});
  }

  std::string text() const {
    std::string out = fmt::format("{}\n", title_);
    for (const auto &r : rows_) {
      if (r.header) {
        out += fmt::format("\n[{}]\n", r.section);
        continue;
      }
      auto line = fmt::format("  {:<36} {:>16} {:<8}", r.quantity, r.value, r.unit);
      if (!r.note.empty()) line += "  " + r.note;
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + "\n";
    }
    return out;
  }

  std::string csv() const {
    std::string out = "section,quantity,value,unit\n";
    auto esc = [](const std::string &f) {
      if (f.find_first_of(",\"\n") == std::string::npos) return f;
      std::string q = "\"";
      for (char ch : f) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    };
    for (const auto &c : csv_) out += fmt::format("{},{},{},{}\n", esc(c[0]), esc(c[1]), esc(c[2]), esc(c[3]));
    return out;
  }

  // Value lookup for tests and summaries.
  std::optional<double> value(const std::string &section, const std::string &quantity) const {
    for (const auto &c : csv_)
      if (c[0] == section && c[1] == quantity && c[3] != "-") return std::stod(c[2]);
    return std::nullopt;
  }

private:
  struct Row {
    std::string section, quantity, value, unit, note;
    bool header;
  };
  std::string title_;
  std::string current_;
  std::vector<Row> rows_;
  std::vector<std::array<std::string, 4>> csv_;
};

struct CommandOutput {
  std::string summary;
  std::vector<std::filesystem::path> files;
  Report report{""};
};

// Everything derived from the config before a command runs.
struct SourceModel {
  PumpSpec pump;
  CrystalSpec crystal;
  bool temperature_solved = false;
  PhaseMatchSolution solution;
  SpectralWidths widths;
  DisplacerSpec displacer;
  double walkoff_angle_pump_deg = 0.0;
  WalkoffEntry signal, idler;
  WedgeSpec wedge;
  double compensate_signal_mm = 0.0, compensate_idler_mm = 0.0;
  WedgePairDesign wedge_signal, wedge_idler;
  DetectionModel detection;
  bool detection_calibrated = false;
};

inline PhaseMatchSolution solve_phase_matching(const RunConfig &cfg, CrystalSpec &crystal, bool &solved_T) {
  PumpSpec pump = cfg.pump;
  if (cfg.crystal_temperature_C) {
    crystal.temperature_C = *cfg.crystal_temperature_C;
    solved_T = false;
  } else {
    crystal.temperature_C = phase_matching_temperature(pump, crystal, cfg.target_signal_nm, cfg.knobs,
                                                       cfg.temperature_min_C, cfg.temperature_max_C);
    solved_T = true;
  }
  return solve_signal_idler(pump, crystal, cfg.knobs);
}

inline DetectionModel detection_model(const RunConfig &cfg, bool &calibrated) {
  DetectionModel d;
  d.dark_s_hz = cfg.dark_signal_hz;
  d.dark_i_hz = cfg.dark_idler_hz;
  d.window_ns = cfg.window_ns;
  if (cfg.calibration_counts_hz) {
    const auto &c = *cfg.calibration_counts_hz;
    calibrated = true;
    return calibrate_from_counts(c[0], c[1], c[2], cfg.calibration_power_mW, cfg.state.mean_visibility(), d);
  }
  calibrated = false;
  d.eta_s = cfg.efficiency_signal * cfg.coupling_signal;
  d.eta_i = cfg.efficiency_idler * cfg.coupling_idler;
  d.pair_rate_per_mW = cfg.pair_rate_per_mW;
  d.validate();
  return d;
}

inline SourceModel build_source(const RunConfig &cfg, const MaterialDatabase &db) {
  SourceModel m;
  m.pump = cfg.pump;
  m.crystal = {db.get(cfg.crystal_material), cfg.crystal_length_mm, cfg.poling_period_um, cfg.poling_reference_C, 0.0};
  m.solution = solve_phase_matching(cfg, m.crystal, m.temperature_solved);
  m.widths = spectral_temporal_widths(m.solution, m.pump, m.crystal);

  m.displacer = {db.get(cfg.displacer_material), cfg.displacer_length_mm, cfg.optic_angle_deg};
  const double Td = cfg.displacer_temperature_C;
  const double lp = m.pump.wavelength_nm;
  m.walkoff_angle_pump_deg =
      rad_to_deg(walkoff_angle(m.displacer.material, lp, deg_to_rad(cfg.optic_angle_deg), Td));
  auto entry = [&](double l) {
    return WalkoffEntry{l, spatial_walkoff(m.displacer, lp, l, Td), temporal_walkoff(m.displacer, lp, l, Td)};
  };
  m.signal = entry(m.solution.signal_nm);
  m.idler = entry(m.solution.idler_nm);

  m.wedge = {db.get(cfg.wedge_material), cfg.wedge_angle_deg, 0.0, cfg.wedge_aperture_mm};
  const double Tw = cfg.wedge_temperature_C;
  m.compensate_signal_mm = cfg.walkoff_signal_mm.value_or(std::abs(m.signal.spatial_mm));
  m.compensate_idler_mm = cfg.walkoff_idler_mm.value_or(std::abs(m.idler.spatial_mm));
  m.wedge_signal =
      compensate(m.compensate_signal_mm, m.signal.temporal_ps, m.wedge, m.solution.signal_nm, Tw, cfg.thickness_max_mm);
  m.wedge_idler =
      compensate(m.compensate_idler_mm, m.idler.temporal_ps, m.wedge, m.solution.idler_nm, Tw, cfg.thickness_max_mm);

  m.detection = detection_model(cfg, m.detection_calibrated);
  return m;
}

inline SagnacStacks resolve_stacks(const RunConfig &cfg, const MaterialDatabase &db) {
  SagnacStacks st = displacer_stacks(db.get(cfg.displacer_material), cfg.displacer_length_mm);
  std::array<ComponentStack *, 6> slots{&st.cw_pump, &st.cw_signal, &st.cw_idler,
                                        &st.ccw_pump, &st.ccw_signal, &st.ccw_idler};
  for (std::size_t k = 0; k < 6; ++k) {
    if (cfg.stacks[k].empty()) continue;
    slots[k]->clear();
    for (const auto &e : cfg.stacks[k]) slots[k]->push_back({db.get(e.material), e.length_mm, e.axis});
  }
  return st;
}

namespace detail {

inline void write_file(const std::filesystem::path &p, const std::string &content, std::vector<std::filesystem::path> &files) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cli", fmt::format("cannot open '{}' for writing", p.string()));
  os << content;
  if (!os) throw IoError("cli", fmt::format("write to '{}' failed", p.string()));
  files.push_back(p);
}

inline std::string csv_string(const std::vector<CountRecord> &r) {
  std::ostringstream os;
  write_count_csv(os, r);
  return os.str();
}

inline void echo_config(Report &rep, const RunConfig &cfg, const MaterialDatabase &db,
                        const std::vector<std::string> &materials) {
  rep.section("inputs");
  for (const auto &e : cfg.entries)
    rep.add_text(e.section + "." + e.key, e.value, e.origin == "default" ? "(default)" : "(" + e.origin + ")");
  rep.section("materials");
  for (const auto &name : materials) rep.add_text(name, db.get(name).provenance());
}

inline double pi_units(double rad) { return rad / kPi; }

} // namespace detail

struct LinearFit {
  double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

inline LinearFit fit_line(const std::vector<double> &x, const std::vector<double> &y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size())
    throw DomainError("entanglement", DomainReason::UndefinedEstimate, "linear fit needs at least two points");
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) sx += x[k], sy += y[k];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0)) throw DomainError("entanglement", DomainReason::UndefinedEstimate, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

// ---------------------------------------------------------------------------

inline CommandOutput run_design(const RunConfig &cfg, const MaterialDatabase &db) {
  const auto m = build_source(cfg, db);
  Report rep("epskit design report");
  detail::echo_config(rep, cfg, db, {cfg.crystal_material, cfg.displacer_material, cfg.wedge_material});

  const auto &s = m.solution;
  rep.section("phasematch");
  rep.add("crystal_temperature", s.temperature_C, "C", m.temperature_solved ? "solved for target signal" : "configured");
  rep.add("poling_period_at_T", poling_period_um(m.crystal), "um");
  rep.add("signal_wavelength", s.signal_nm, "nm");
  rep.add("idler_wavelength", s.idler_nm, "nm");
  rep.add("mismatch_residual", s.residual_per_m, "1/m");
  rep.add("energy_conservation_rel_error",
          std::abs((1.0 / s.signal_nm + 1.0 / s.idler_nm) - 1.0 / m.pump.wavelength_nm) * m.pump.wavelength_nm, "1");
  rep.add("pump_bandwidth", m.widths.pump_rad_per_s, "rad/s");
  rep.add("signal_bandwidth", m.widths.signal_rad_per_s, "rad/s");
  rep.add("idler_bandwidth", m.widths.idler_rad_per_s, "rad/s");
  rep.add("signal_temporal_width", m.widths.signal_ps, "ps");
  rep.add("idler_temporal_width", m.widths.idler_ps, "ps");

  rep.section("displacer");
  rep.add("walkoff_angle_at_pump", m.walkoff_angle_pump_deg, "deg");
  rep.add("spatial_walkoff_signal", m.signal.spatial_mm, "mm");
  rep.add("spatial_walkoff_idler", m.idler.spatial_mm, "mm");
  rep.add("temporal_walkoff_signal", m.signal.temporal_ps, "ps");
  rep.add("temporal_walkoff_idler", m.idler.temporal_ps, "ps");

  auto wedge_section = [&](const char *name, const WedgePairDesign &w, bool measured) {
    rep.section(name);
    rep.add("walkoff_compensated", w.walkoff_mm, "mm", measured ? "configured" : "predicted");
    rep.add("delay_compensated", w.initial_delay_ps, "ps", "predicted");
    rep.add("exit_angle_o", w.theta_o_deg, "deg");
    rep.add("exit_angle_e", w.theta_e_deg, "deg");
    rep.add("offset_a", w.a_mm, "mm");
    rep.add("offset_b", w.b_mm, "mm");
    rep.add("lateral_separation_d", w.d_mm, "mm");
    rep.add("total_thickness", w.wedge.thickness_mm, "mm");
    rep.add("closed_form_thickness", solve_thickness(w.initial_delay_ps, w, cfg.thickness_max_mm).closed_form_mm, "mm",
            "|v_ge - v_go| dT, for comparison");
    rep.add_text("orientation", w.orientation == WedgeOrientation::Normal ? "normal" : "swapped");
    rep.add("residual_separation", w.residual_separation_um, "um", "forward trace");
    rep.add("residual_delay", w.residual_delay_fs, "fs", "forward trace");
    rep.add_text("geometry", w.physical ? "physical" : "thickness below ray crossing");
  };
  wedge_section("wedge_signal", m.wedge_signal, cfg.walkoff_signal_mm.has_value());
  wedge_section("wedge_idler", m.wedge_idler, cfg.walkoff_idler_mm.has_value());

  const auto bs = GaussianBeam::from_fwhm(cfg.fwhm_signal_mm), bi = GaussianBeam::from_fwhm(cfg.fwhm_idler_mm);
  const double os_unc = gaussian_overlap(bs, bs, m.compensate_signal_mm);
  const double oi_unc = gaussian_overlap(bi, bi, m.compensate_idler_mm);
  const double os_c = gaussian_overlap(bs, bs, m.wedge_signal.residual_separation_um * 1e-3);
  const double oi_c = gaussian_overlap(bi, bi, m.wedge_idler.residual_separation_um * 1e-3);
  rep.section("overlap");
  rep.add("sigma_signal", bs.sigma_mm, "mm", "FWHM / 2 sqrt(2 ln 2)");
  rep.add("sigma_idler", bi.sigma_mm, "mm");
  rep.add("overlap_signal_uncompensated", os_unc, "1");
  rep.add("overlap_idler_uncompensated", oi_unc, "1");
  rep.add("overlap_signal_compensated", os_c, "1");
  rep.add("overlap_idler_compensated", oi_c, "1");
  rep.add("rate_enhancement", predicted_rate(1.0, os_c, oi_c) / predicted_rate(1.0, os_unc, oi_unc), "1");

  const auto &d = m.detection;
  const double p_max = correlation_probability(0.0, 0.0, cfg.state);
  const double gen = d.pair_rate_per_mW * cfg.pump.power_mW;
  rep.section("rates");
  rep.add_text("detection_model", m.detection_calibrated ? "calibrated from counts" : "efficiency x coupling");
  rep.add("pair_rate_per_mW", d.pair_rate_per_mW, "Hz/mW");
  rep.add("eta_signal", d.eta_s, "1");
  rep.add("eta_idler", d.eta_i, "1");
  rep.add("singles_signal", 0.5 * gen * d.eta_s + d.dark_s_hz, "Hz", "at pump power, one analyzer");
  rep.add("singles_idler", 0.5 * gen * d.eta_i + d.dark_i_hz, "Hz");
  rep.add("coincidences_max_basis", predicted_rate(gen * p_max * d.eta_s * d.eta_i, os_c, oi_c), "Hz");
  rep.add("coincidences_uncompensated", predicted_rate(gen * p_max * d.eta_s * d.eta_i, os_unc, oi_unc), "Hz");
  rep.add("unaccounted_loss_signal", d.eta_s / cfg.efficiency_signal, "1", "eta / efficiency budget");
  rep.add("unaccounted_loss_idler", d.eta_i / cfg.efficiency_idler, "1");

  const auto st = relative_phase_variation(resolve_stacks(cfg, db), m.pump.wavelength_nm, s.signal_nm, s.idler_nm,
                                           {cfg.excursion_K, cfg.stability_baseline_C});
  rep.section("stability");
  rep.add("temperature_excursion", cfg.excursion_K, "K");
  rep.add("relative_phase_variation", detail::pi_units(st.relative_rad), "pi rad");
  rep.add("no_selfcompensation_variation", detail::pi_units(st.no_selfcompensation_rad), "pi rad");

  CommandOutput out;
  out.summary = fmt::format("signal {:.3f} nm, idler {:.3f} nm at {:.3f} C; d_s = {:.4f} mm, d_i = {:.4f} mm\n",
                            s.signal_nm, s.idler_nm, s.temperature_C, m.wedge_signal.d_mm, m.wedge_idler.d_mm);
  out.report = rep;
  return out;
}

inline CommandOutput run_sweep(const RunConfig &cfg, const MaterialDatabase &db) {
  const auto m = build_source(cfg, db);
  const bool idler = cfg.sweep_arm == "idler";
  const auto &design = idler ? m.wedge_idler : m.wedge_signal;
  const auto beam = GaussianBeam::from_fwhm(idler ? cfg.fwhm_idler_mm : cfg.fwhm_signal_mm);
  const auto curve = sweep_lateral_separation(design, beam, beam, cfg.sweep_separations_mm);

  Report rep("epskit sweep report");
  detail::echo_config(rep, cfg, db, {cfg.wedge_material});
  rep.section("sweep");
  rep.add_text("arm", cfg.sweep_arm);
  rep.add("designed_separation", design.d_mm, "mm");
  std::size_t best = 0;
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k].overlap > curve[best].overlap) best = k;
  if (!curve.empty()) {
    rep.add("peak_separation", curve[best].d_mm, "mm");
    rep.add("peak_overlap", curve[best].overlap, "1");
    rep.add("peak_to_uncompensated", curve[best].relative_rate / curve.front().relative_rate, "1",
            "relative to the first separation");
  }
  CommandOutput out;
  std::ostringstream csv;
  write_sweep_csv(csv, curve);
  out.summary = csv.str();
  out.report = rep;
  return out;
}

struct SimulationProducts {
  std::vector<CountRecord> correlation, chsh;
  std::vector<std::pair<double, std::vector<CountRecord>>> power_scan;
};

inline SimulationProducts simulate_all(const RunConfig &cfg, const DetectionModel &det) {
  SimulationProducts p;
  const std::array<double, 4> bases{0.0, 45.0, 90.0, 135.0};
  std::vector<Setting> corr;
  const int steps = static_cast<int>(std::floor(180.0 / cfg.scan_step_deg + 1e-9));
  for (double b : bases)
    for (int k = 0; k < steps; ++k) corr.push_back({k * cfg.scan_step_deg, b});
  p.correlation = simulate_experiment(cfg.state, det, cfg.pump.power_mW, corr, cfg.duration_s, derive_seed(cfg.seed, 0),
                                      cfg.background_subtracted);
  const auto &a = cfg.chsh_angles_deg;
  std::vector<Setting> ch;
  for (const auto &s : chsh_settings({a[0], a[1], a[2], a[3]})) ch.push_back({s[0], s[1]});
  p.chsh = simulate_experiment(cfg.state, det, cfg.pump.power_mW, ch, cfg.duration_s, derive_seed(cfg.seed, 1),
                               cfg.background_subtracted);
  std::vector<Setting> diag;
  for (double b : bases) diag.push_back({b, b});
  for (std::size_t k = 0; k < cfg.power_scan_mW.size(); ++k) {
    p.power_scan.emplace_back(cfg.power_scan_mW[k],
                              simulate_experiment(cfg.state, det, cfg.power_scan_mW[k], diag, cfg.power_scan_duration_s,
                                                  derive_seed(cfg.seed, 2 + k), cfg.background_subtracted));
  }
  return p;
}

struct PowerPoint {
  double power_mW = 0.0;
  double pair_rate_hz = 0.0, pair_rate_sigma_hz = 0.0;
  double heralding_s = 0.0, heralding_i = 0.0;
};

inline PowerPoint power_point(double power_mW, const std::vector<CountRecord> &records) {
  PowerPoint pt{power_mW};
  double w = 0.0;
  for (const auto &r : records) {
    const auto k = pair_rate_and_heralding(r);
    pt.pair_rate_hz += k.pair_rate_hz.value;
    pt.pair_rate_sigma_hz += k.pair_rate_hz.sigma * k.pair_rate_hz.sigma;
    pt.heralding_s += k.heralding_s.value;
    pt.heralding_i += k.heralding_i.value;
    w += 1.0;
  }
  pt.pair_rate_hz /= w;
  pt.pair_rate_sigma_hz = std::sqrt(pt.pair_rate_sigma_hz) / w;
  pt.heralding_s /= w;
  pt.heralding_i /= w;
  return pt;
}

// Visibility, CHSH and pair-rate analysis shared by simulate and analyze.
inline void analyze_records(Report &rep, const std::vector<CountRecord> &records, const RunConfig &cfg) {
  if (records.empty()) throw DomainError("cli", DomainReason::NoRecords, "no records to analyze");
  bool any = false;

  // fringes: records grouped by idler angle (mod 180), sorted by first appearance
  std::vector<std::pair<double, std::vector<CountRecord>>> groups;
  for (const auto &r : records) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto &g) { return detail::same_angle(g.first, r.theta_i_deg); });
    if (it == groups.end()) groups.push_back({r.theta_i_deg, {r}});
    else it->second.push_back(r);
  }
  rep.section("visibility");
  for (const auto &[b, g] : groups) {
    std::vector<double> distinct;
    for (const auto &r : g)
      if (std::none_of(distinct.begin(), distinct.end(), [&](double x) { return detail::same_angle(x, r.theta_s_deg); }))
        distinct.push_back(r.theta_s_deg);
    if (distinct.size() < 5) continue;
    const auto fit = visibility(g, VisibilityMethod::Fit);
    const auto mm = visibility(g, VisibilityMethod::MinMax);
    const auto label = fmt::format("idler_{}deg", b);
    rep.add(label + "_fit", fit.value, "1", fmt::format("+/- {:.2g}", fit.sigma));
    rep.add(label + "_fit_sigma", fit.sigma, "1");
    rep.add(label + "_minmax", mm.value, "1", fmt::format("+/- {:.2g}", mm.sigma));
    if (fit.warning) rep.add_text(label + "_warning", *fit.warning);
    any = true;
  }

  const auto &a = cfg.chsh_angles_deg;
  try {
    const auto c = chsh_from_records(records, {a[0], a[1], a[2], a[3]});
    rep.section("chsh");
    rep.add("E_ab", c.E[0].value, "1");
    rep.add("E_ad", c.E[1].value, "1");
    rep.add("E_gd", c.E[2].value, "1");
    rep.add("E_gb", c.E[3].value, "1");
    rep.add("S", c.S, "1", fmt::format("+/- {:.2g}", c.sigma));
    rep.add("S_sigma", c.sigma, "1");
    rep.add("sigmas_above_2", c.sigmas_above_classical, "1");
    any = true;
  } catch (const DomainError &e) {
    if (e.reason() != DomainReason::NoRecords) throw;
  }

  std::vector<CountRecord> diag;
  for (const auto &r : records)
    if (detail::same_angle(r.theta_s_deg, r.theta_i_deg) && r.N_hz > 0) diag.push_back(r);
  if (!diag.empty()) {
    const auto pt = power_point(0.0, diag);
    rep.section("pair_rate");
    rep.add("records_used", static_cast<double>(diag.size()), "1", "equal analyzer angles");
    rep.add("klyshko_pair_rate", pt.pair_rate_hz, "Hz", fmt::format("+/- {:.3g}", pt.pair_rate_sigma_hz));
    rep.add("heralding_signal", pt.heralding_s, "1", "N / N_i");
    rep.add("heralding_idler", pt.heralding_i, "1", "N / N_s");
    rep.add("unaccounted_loss_signal", pt.heralding_s / cfg.efficiency_signal, "1", "heralding / efficiency budget");
    rep.add("unaccounted_loss_idler", pt.heralding_i / cfg.efficiency_idler, "1");
    any = true;
  }
  if (!any) throw DomainError("cli", DomainReason::NoRecords, "records contain no fringe, CHSH set or equal-angle record");
}

inline CommandOutput run_simulate(const RunConfig &cfg, const MaterialDatabase &db, SimulationProducts *keep = nullptr) {
  bool calibrated = false;
  const auto det = detection_model(cfg, calibrated);
  auto p = simulate_all(cfg, det);

  Report rep("epskit simulate report");
  detail::echo_config(rep, cfg, db, {});
  rep.section("model");
  rep.add("pair_rate_per_mW", det.pair_rate_per_mW, "Hz/mW");
  rep.add("eta_signal", det.eta_s, "1");
  rep.add("eta_idler", det.eta_i, "1");
  rep.add("configured_mean_visibility", cfg.state.mean_visibility(), "1");
  rep.add("expected_S", 2.0 * std::sqrt(2.0) * cfg.state.mean_visibility(), "1", "2 sqrt(2) V at phase 0");

  auto all = p.correlation;
  all.insert(all.end(), p.chsh.begin(), p.chsh.end());
  analyze_records(rep, all, cfg);

  rep.section("power_scan");
  std::vector<double> xs, ys, hs, hi;
  std::string summary = "power_mW,pair_rate_hz,pair_rate_sigma_hz,heralding_signal,heralding_idler\n";
  for (const auto &[pw, recs] : p.power_scan) {
    const auto pt = power_point(pw, recs);
    xs.push_back(pw);
    ys.push_back(pt.pair_rate_hz);
    hs.push_back(pt.heralding_s);
    hi.push_back(pt.heralding_i);
    summary += fmt::format("{},{},{},{},{}\n", pw, pt.pair_rate_hz, pt.pair_rate_sigma_hz, pt.heralding_s, pt.heralding_i);
  }
  if (xs.size() >= 2) {
    const auto f = fit_line(xs, ys);
    auto spread = [](const std::vector<double> &v) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double dev = 0;
      for (double x : v) dev = std::max(dev, std::abs(x - mean) / mean);
      return dev;
    };
    rep.add("pair_rate_slope", f.slope, "Hz/mW");
    rep.add("pair_rate_intercept", f.intercept, "Hz");
    rep.add("pair_rate_r_squared", f.r_squared, "1");
    rep.add("heralding_signal_max_rel_dev", spread(hs), "1");
    rep.add("heralding_idler_max_rel_dev", spread(hi), "1");
  }

  CommandOutput out;
  out.summary = summary;
  out.report = rep;
  if (keep) *keep = std::move(p);
  return out;
}

inline CommandOutput run_stability(const RunConfig &cfg, const MaterialDatabase &db) {
  CrystalSpec crystal{db.get(cfg.crystal_material), cfg.crystal_length_mm, cfg.poling_period_um, cfg.poling_reference_C, 0};
  bool solved = false;
  const auto s = solve_phase_matching(cfg, crystal, solved);
  const auto stacks = resolve_stacks(cfg, db);
  const ThermalScenario sc{cfg.excursion_K, cfg.stability_baseline_C};
  const auto b = relative_phase_variation(stacks, cfg.pump.wavelength_nm, s.signal_nm, s.idler_nm, sc);

  Report rep("epskit stability report");
  std::vector<std::string> mats{cfg.displacer_material};
  for (const auto &st : cfg.stacks)
    for (const auto &e : st)
      if (std::find(mats.begin(), mats.end(), e.material) == mats.end()) mats.push_back(e.material);
  detail::echo_config(rep, cfg, db, mats);
  rep.section("wavelengths");
  rep.add("pump", cfg.pump.wavelength_nm, "nm");
  rep.add("signal", s.signal_nm, "nm");
  rep.add("idler", s.idler_nm, "nm");
  rep.section("phase_budget");
  rep.add("temperature_excursion", cfg.excursion_K, "K");
  rep.add("dphi_r_pump", detail::pi_units(b.pump_rad), "pi rad", "e minus o");
  rep.add("dphi_r_signal", detail::pi_units(b.signal_rad), "pi rad");
  rep.add("dphi_r_idler", detail::pi_units(b.idler_rad), "pi rad");
  rep.add("dphi_cw", detail::pi_units(b.cw_rad), "pi rad");
  rep.add("dphi_ccw", detail::pi_units(b.ccw_rad), "pi rad");
  rep.add("relative_phase_variation", detail::pi_units(b.relative_rad), "pi rad");
  rep.add("no_selfcompensation_variation", detail::pi_units(b.no_selfcompensation_rad), "pi rad");
  if (cfg.excursion_K != 0.0) {
    rep.add("relative_per_K", detail::pi_units(b.relative_rad) / cfg.excursion_K, "pi rad/K");
    rep.add("no_selfcompensation_per_K", detail::pi_units(b.no_selfcompensation_rad) / cfg.excursion_K, "pi rad/K");
  }
  CommandOutput out;
  out.summary = fmt::format("relative phase variation {:.4f} pi rad (no self-compensation {:.4f} pi rad) for {} K\n",
                            detail::pi_units(b.relative_rad), detail::pi_units(b.no_selfcompensation_rad), cfg.excursion_K);
  out.report = rep;
  return out;
}

inline CommandOutput run_analyze(const RunConfig &cfg, const MaterialDatabase &db, const std::filesystem::path &input) {
  std::ifstream is(input, std::ios::binary);
  if (!is) throw IoError("cli", fmt::format("cannot open '{}'", input.string()));
  const auto records = read_count_csv(is, input.filename().string());
  if (records.empty()) throw DomainError("cli", DomainReason::NoRecords, fmt::format("no records in '{}'", input.filename().string()));
  Report rep("epskit analyze report");
  detail::echo_config(rep, cfg, db, {});
  rep.section("input");
  rep.add_text("file", input.filename().string());
  rep.add("records", static_cast<double>(records.size()), "1");
  analyze_records(rep, records, cfg);
  CommandOutput out;
  out.report = rep;
  out.summary = rep.text();
  return out;
}

/// Runs `cmd` and writes its files into `out_dir` (created if missing).
inline CommandOutput run_command(Command cmd, const RunConfig &cfg, const MaterialDatabase &db,
                                 const std::filesystem::path &out_dir,
                                 const std::optional<std::filesystem::path> &input = std::nullopt) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cli", fmt::format("cannot create output directory '{}': {}", out_dir.string(), ec.message()));
  CommandOutput out;
  std::vector<std::filesystem::path> files;
  switch (cmd) {
  case Command::Design:
    out = run_design(cfg, db);
    detail::write_file(out_dir / "design_report.txt", out.report.text(), files);
    detail::write_file(out_dir / "design.csv", out.report.csv(), files);
    break;
  case Command::Sweep:
    out = run_sweep(cfg, db);
    detail::write_file(out_dir / "sweep_report.txt", out.report.text(), files);
    detail::write_file(out_dir / "sweep.csv", out.summary, files);
    break;
  case Command::Simulate: {
    SimulationProducts p;
    out = run_simulate(cfg, db, &p);
    detail::write_file(out_dir / "simulate_report.txt", out.report.text(), files);
    detail::write_file(out_dir / "simulate.csv", out.report.csv(), files);
    detail::write_file(out_dir / "correlation_counts.csv", detail::csv_string(p.correlation), files);
    detail::write_file(out_dir / "chsh_counts.csv", detail::csv_string(p.chsh), files);
    for (const auto &[pw, recs] : p.power_scan)
      detail::write_file(out_dir / fmt::format("power_scan_{}mW_counts.csv", pw), detail::csv_string(recs), files);
    detail::write_file(out_dir / "power_scan_summary.csv", out.summary, files);
    break;
  }
  case Command::Stability:
    out = run_stability(cfg, db);
    detail::write_file(out_dir / "stability_report.txt", out.report.text(), files);
    detail::write_file(out_dir / "stability.csv", out.report.csv(), files);
    break;
  case Command::Analyze:
    if (!input) throw ConfigError("cli", "analyze needs --input <count csv>");
    out = run_analyze(cfg, db, *input);
    detail::write_file(out_dir / "analysis_report.txt", out.report.text(), files);
    detail::write_file(out_dir / "analysis.csv", out.report.csv(), files);
    break;
  }
  out.files = files;
  return out;
}

} // namespace epskit
