#pragma once

// Refractive-index models for the uniaxial crystals used in the source:
// periodically poled LiNbO3 (pair generation), alpha-BBO (beam displacers)
// and calcite (compensation wedges).
//
// Public functions take wavelengths in nm and temperatures in degC; the
// Sellmeier coefficients themselves are in micrometres.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"

namespace epskit {

enum class Axis { Ordinary, Extraordinary };

inline std::string_view axis_name(Axis a) { return a == Axis::Ordinary ? "o" : "e"; }

enum class SellmeierForm {
  Constant,    // n = c0
  Sellmeier,   // n^2 = A + sum_i B_i l^2 / (l^2 - C_i)
  SellmeierIR, // n^2 = A + B / (l^2 - C) - D l^2
  LnThermal,   // LiNbO3 temperature-dependent form, f = (T - 24.5)(T + 570.82)
};

inline std::string_view form_name(SellmeierForm f) {
  switch (f) {
  case SellmeierForm::Constant: return "constant";
  case SellmeierForm::Sellmeier: return "sellmeier";
  case SellmeierForm::SellmeierIR: return "sellmeier_ir";
  case SellmeierForm::LnThermal: return "ln_thermal";
  }
  return "?";
}

struct SellmeierModel {
  SellmeierForm form = SellmeierForm::Constant;
  std::vector<double> coefficients;
  double validity_min_um = 0.0;
  double validity_max_um = 0.0;

  bool temperature_dependent() const { return form == SellmeierForm::LnThermal; }

  static std::size_t expected_coefficients(SellmeierForm f, std::size_t given) {
    switch (f) {
    case SellmeierForm::Constant: return 1;
    case SellmeierForm::Sellmeier: return given >= 3 && given % 2 == 1 ? given : 0;
    case SellmeierForm::SellmeierIR: return 4;
    case SellmeierForm::LnThermal: return 10;
    }
    return 0;
  }

  double n_squared(double lambda_um, double temperature_C) const {
    const auto &c = coefficients;
    const double l2 = lambda_um * lambda_um;
    switch (form) {
    case SellmeierForm::Constant: return c[0] * c[0];
    case SellmeierForm::Sellmeier: {
      double n2 = c[0];
      for (std::size_t i = 1; i + 1 < c.size(); i += 2) n2 += c[i] * l2 / (l2 - c[i + 1]);
      return n2;
    }
    case SellmeierForm::SellmeierIR: return c[0] + c[1] / (l2 - c[2]) - c[3] * l2;
    case SellmeierForm::LnThermal: {
      const double f = ln_f(temperature_C);
      const double pole = c[2] + c[8] * f;
      return c[0] + c[6] * f + (c[1] + c[7] * f) / (l2 - pole * pole) +
             (c[3] + c[9] * f) / (l2 - c[4] * c[4]) - c[5] * l2;
    }
    }
    return 0.0;
  }

  // d(n^2)/d(lambda_um), analytic.
  double dn_squared_dlambda(double lambda_um, double temperature_C) const {
    const auto &c = coefficients;
    const double l = lambda_um;
    const double l2 = l * l;
    switch (form) {
    case SellmeierForm::Constant: return 0.0;
    case SellmeierForm::Sellmeier: {
      double d = 0.0;
      for (std::size_t i = 1; i + 1 < c.size(); i += 2) {
        const double q = l2 - c[i + 1];
        d += -2.0 * c[i] * c[i + 1] * l / (q * q);
      }
      return d;
    }
    case SellmeierForm::SellmeierIR: {
      const double q = l2 - c[2];
      return -2.0 * c[1] * l / (q * q) - 2.0 * c[3] * l;
    }
    case SellmeierForm::LnThermal: {
      const double f = ln_f(temperature_C);
      const double pole = c[2] + c[8] * f;
      const double q1 = l2 - pole * pole;
      const double q2 = l2 - c[4] * c[4];
      return -2.0 * l * (c[1] + c[7] * f) / (q1 * q1) - 2.0 * l * (c[3] + c[9] * f) / (q2 * q2) -
             2.0 * c[5] * l;
    }
    }
    return 0.0;
  }

  // d(n^2)/dT for the temperature-dependent form; zero otherwise.
  double dn_squared_dT(double lambda_um, double temperature_C) const {
    if (form != SellmeierForm::LnThermal) return 0.0;
    const auto &c = coefficients;
    const double l2 = lambda_um * lambda_um;
    const double f = ln_f(temperature_C);
    const double df_dT = 2.0 * temperature_C + 570.82 - 24.5;
    const double pole = c[2] + c[8] * f;
    const double q1 = l2 - pole * pole;
    const double q2 = l2 - c[4] * c[4];
    const double dn2_df = c[6] + (c[7] * q1 + (c[1] + c[7] * f) * 2.0 * pole * c[8]) / (q1 * q1) +
                          c[9] / q2;
    return dn2_df * df_dT;
  }

  static double ln_f(double temperature_C) { return (temperature_C - 24.5) * (temperature_C + 570.82); }
};

// dn/dT = sum coefficient * lambda_um^lambda_power * T_C^temperature_power
struct ThermoOpticTerm {
  double coefficient = 0.0;
  int lambda_power = 0;
  int temperature_power = 0;
};

struct AxisModel {
  SellmeierModel sellmeier;
  std::vector<ThermoOpticTerm> dndT;
  double alpha_per_K = 0.0;  // thermal expansion paired with this axis in phase budgets
  double reference_C = 20.0; // temperature at which a non-thermal Sellmeier applies
  std::string source;

  bool has_thermal_model() const { return sellmeier.temperature_dependent() || !dndT.empty(); }
};

struct MaterialRecord {
  std::string name;
  AxisModel ordinary;
  AxisModel extraordinary;

  const AxisModel &axis(Axis a) const { return a == Axis::Ordinary ? ordinary : extraordinary; }

  std::string provenance() const {
    if (ordinary.source == extraordinary.source) return ordinary.source;
    return "o: " + ordinary.source + "; e: " + extraordinary.source;
  }

  /// Synthetic material with wavelength-independent indices. `dndT` of zero
  /// means "no thermal model".
  static MaterialRecord dispersionless(std::string name, double n_o, double n_e, double dndT = 0.0,
                                       double alpha_per_K = 0.0, double min_um = 0.2,
                                       double max_um = 5.0) {
    MaterialRecord m;
    m.name = std::move(name);
    auto make = [&](double n) {
      AxisModel ax;
      ax.sellmeier = {SellmeierForm::Constant, {n}, min_um, max_um};
      if (dndT != 0.0) ax.dndT = {{dndT, 0, 0}};
      ax.alpha_per_K = alpha_per_K;
      ax.source = "synthetic";
      return ax;
    };
    m.ordinary = make(n_o);
    m.extraordinary = make(n_e);
    return m;
  }
};

namespace detail {

inline constexpr double kGroupIndexMarginNm = 0.5;

inline const AxisModel &checked_axis(const MaterialRecord &m, Axis axis, double wavelength_nm,
                                     double margin_nm = 0.0) {
  const AxisModel &ax = m.axis(axis);
  const double lo = ax.sellmeier.validity_min_um * kNmPerUm;
  const double hi = ax.sellmeier.validity_max_um * kNmPerUm;
  if (!(wavelength_nm >= lo + margin_nm && wavelength_nm <= hi - margin_nm)) {
    if (margin_nm > 0.0 && wavelength_nm >= lo && wavelength_nm <= hi) {
      throw DomainError("materials", DomainReason::OutOfValidity,
                        fmt::format("{:.4f} nm is within {:.1f} nm of the validity boundary "
                                    "[{:.1f}, {:.1f}] nm of {} ({}-axis); no derivative stencil fits",
                                    wavelength_nm, margin_nm, lo, hi, m.name, axis_name(axis)));
    }
    throw DomainError("materials", DomainReason::OutOfValidity,
                      fmt::format("wavelength {:.4f} nm outside validity interval [{:.1f}, {:.1f}] nm "
                                  "of {} ({}-axis)",
                                  wavelength_nm, lo, hi, m.name, axis_name(axis)));
  }
  return ax;
}

inline double poly_dndT(const AxisModel &ax, double l_um, double T) {
  double s = 0.0;
  for (const auto &t : ax.dndT)
    s += t.coefficient * std::pow(l_um, t.lambda_power) * std::pow(T, t.temperature_power);
  return s;
}

// Integral of dn/dT from the reference temperature to T.
inline double poly_index_shift(const AxisModel &ax, double l_um, double T) {
  double s = 0.0;
  const double T0 = ax.reference_C;
  for (const auto &t : ax.dndT) {
    const int q = t.temperature_power + 1;
    s += t.coefficient * std::pow(l_um, t.lambda_power) * (std::pow(T, q) - std::pow(T0, q)) / q;
  }
  return s;
}

inline double poly_index_shift_dlambda(const AxisModel &ax, double l_um, double T) {
  double s = 0.0;
  const double T0 = ax.reference_C;
  for (const auto &t : ax.dndT) {
    if (t.lambda_power == 0) continue;
    const int q = t.temperature_power + 1;
    s += t.coefficient * t.lambda_power * std::pow(l_um, t.lambda_power - 1) *
         (std::pow(T, q) - std::pow(T0, q)) / q;
  }
  return s;
}

inline double index_unchecked(const AxisModel &ax, double l_um, double T) {
  const double n0 = std::sqrt(ax.sellmeier.n_squared(l_um, T));
  if (ax.sellmeier.temperature_dependent()) return n0;
  return n0 + poly_index_shift(ax, l_um, T);
}

// dn/dlambda in 1/um.
inline double dn_dlambda_unchecked(const AxisModel &ax, double l_um, double T) {
  const double n0 = std::sqrt(ax.sellmeier.n_squared(l_um, T));
  const double d = ax.sellmeier.dn_squared_dlambda(l_um, T) / (2.0 * n0);
  if (ax.sellmeier.temperature_dependent()) return d;
  return d + poly_index_shift_dlambda(ax, l_um, T);
}

} // namespace detail

/// Phase index n(lambda, T). Throws DomainError(OutOfValidity) outside the
/// model's wavelength interval.
inline double refractive_index(const MaterialRecord &m, Axis axis, double wavelength_nm,
                               double temperature_C) {
  const auto &ax = detail::checked_axis(m, axis, wavelength_nm);
  return detail::index_unchecked(ax, wavelength_nm / kNmPerUm, temperature_C);
}

/// dn/dlambda in 1/nm.
inline double index_dispersion(const MaterialRecord &m, Axis axis, double wavelength_nm,
                               double temperature_C) {
  const auto &ax = detail::checked_axis(m, axis, wavelength_nm, detail::kGroupIndexMarginNm);
  return detail::dn_dlambda_unchecked(ax, wavelength_nm / kNmPerUm, temperature_C) / kNmPerUm;
}

/// Group index n_g = n - lambda dn/dlambda; the group velocity is c / n_g.
/// Requires lambda at least 0.5 nm inside the validity interval.
inline double group_index(const MaterialRecord &m, Axis axis, double wavelength_nm,
                          double temperature_C) {
  const auto &ax = detail::checked_axis(m, axis, wavelength_nm, detail::kGroupIndexMarginNm);
  const double l = wavelength_nm / kNmPerUm;
  return detail::index_unchecked(ax, l, temperature_C) -
         l * detail::dn_dlambda_unchecked(ax, l, temperature_C);
}

/// dn/dT in 1/K. Materials without thermal data raise NoThermalModel rather
/// than reporting zero.
inline double thermo_optic_coefficient(const MaterialRecord &m, Axis axis, double wavelength_nm,
                                       double temperature_C) {
  const auto &ax = detail::checked_axis(m, axis, wavelength_nm);
  if (!ax.has_thermal_model()) {
    throw DomainError("materials", DomainReason::NoThermalModel,
                      fmt::format("no thermal model for {} ({}-axis)", m.name, axis_name(axis)));
  }
  const double l = wavelength_nm / kNmPerUm;
  if (ax.sellmeier.temperature_dependent()) {
    const double n = std::sqrt(ax.sellmeier.n_squared(l, temperature_C));
    return ax.sellmeier.dn_squared_dT(l, temperature_C) / (2.0 * n);
  }
  return detail::poly_dndT(ax, l, temperature_C);
}

inline double expansion_coefficient(const MaterialRecord &m, Axis axis) {
  return m.axis(axis).alpha_per_K;
}

// ---------------------------------------------------------------------------
// Materials database: JSON array, one record per material axis.
//
//   { "name": "calcite", "axis": "o", "form": "sellmeier",
//     "coefficients": [...], "validity_min_um": 0.2, "validity_max_um": 2.2,
//     "dndT_poly": [[2.1e-6, 0, 0]], "alpha_per_K": -5.8e-6,
//     "source": "...", "reference_C": 20 }
// ---------------------------------------------------------------------------

class MaterialDatabase {
public:
  MaterialDatabase() = default;

  static MaterialDatabase parse(std::string_view text, const std::string &origin = "<memory>") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
      throw ConfigError("materials", fmt::format("{}: {}", origin, e.what()));
    }
    if (!doc.is_array()) throw ConfigError("materials", origin + ": top level must be an array of records");

    struct Partial {
      bool has_o = false, has_e = false;
      MaterialRecord rec;
    };
    std::map<std::string, Partial> parts;
    std::size_t idx = 0;
    for (const auto &r : doc) {
      const std::string where = fmt::format("{}: record {}", origin, idx++);
      if (!r.is_object()) throw ConfigError("materials", where + " is not an object");
      static const std::vector<std::string> allowed{"name",      "axis",           "form",
                                                    "coefficients", "validity_min_um", "validity_max_um",
                                                    "dndT_poly", "alpha_per_K",    "source",
                                                    "reference_C"};
      for (const auto &[key, _] : r.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
          throw ConfigError("materials", fmt::format("{}: unknown key '{}'", where, key));
      }
      for (const char *req : {"name", "axis", "form", "coefficients", "validity_min_um",
                              "validity_max_um", "alpha_per_K", "source"}) {
        if (!r.contains(req)) throw ConfigError("materials", fmt::format("{}: missing key '{}'", where, req));
      }
      try {
        AxisModel ax;
        const auto name = r.at("name").get<std::string>();
        const auto axis_s = r.at("axis").get<std::string>();
        const auto form_s = r.at("form").get<std::string>();
        if (form_s == "constant") ax.sellmeier.form = SellmeierForm::Constant;
        else if (form_s == "sellmeier") ax.sellmeier.form = SellmeierForm::Sellmeier;
        else if (form_s == "sellmeier_ir") ax.sellmeier.form = SellmeierForm::SellmeierIR;
        else if (form_s == "ln_thermal") ax.sellmeier.form = SellmeierForm::LnThermal;
        else throw ConfigError("materials", fmt::format("{}: unknown form '{}'", where, form_s));
        ax.sellmeier.coefficients = r.at("coefficients").get<std::vector<double>>();
        const auto ncoef = ax.sellmeier.coefficients.size();
        if (SellmeierModel::expected_coefficients(ax.sellmeier.form, ncoef) != ncoef)
          throw ConfigError("materials", fmt::format("{}: wrong coefficient count {} for form '{}'",
                                                     where, ncoef, form_s));
        ax.sellmeier.validity_min_um = r.at("validity_min_um").get<double>();
        ax.sellmeier.validity_max_um = r.at("validity_max_um").get<double>();
        if (!(ax.sellmeier.validity_min_um > 0.0 &&
              ax.sellmeier.validity_max_um > ax.sellmeier.validity_min_um))
          throw ConfigError("materials", where + ": validity interval must satisfy 0 < min < max");
        if (r.contains("dndT_poly")) {
          for (const auto &term : r.at("dndT_poly")) {
            if (!term.is_array() || term.size() != 3)
              throw ConfigError("materials", where + ": dndT_poly terms are [coefficient, lambda_power, T_power]");
            ax.dndT.push_back({term[0].get<double>(), term[1].get<int>(), term[2].get<int>()});
          }
          if (ax.sellmeier.temperature_dependent() && !ax.dndT.empty())
            throw ConfigError("materials",
                              where + ": dndT_poly not allowed with a temperature-dependent form");
        }
        ax.alpha_per_K = r.at("alpha_per_K").get<double>();
        if (r.contains("reference_C")) ax.reference_C = r.at("reference_C").get<double>();
        ax.source = r.at("source").get<std::string>();
        if (ax.source.empty()) throw ConfigError("materials", where + ": empty source");

        auto &p = parts[name];
        p.rec.name = name;
        if (axis_s == "o") {
          if (p.has_o) throw ConfigError("materials", fmt::format("{}: duplicate o-axis for {}", where, name));
          p.rec.ordinary = std::move(ax);
          p.has_o = true;
        } else if (axis_s == "e") {
          if (p.has_e) throw ConfigError("materials", fmt::format("{}: duplicate e-axis for {}", where, name));
          p.rec.extraordinary = std::move(ax);
          p.has_e = true;
        } else {
          throw ConfigError("materials", fmt::format("{}: axis must be 'o' or 'e', got '{}'", where, axis_s));
        }
      } catch (const nlohmann::json::exception &e) {
        throw ConfigError("materials", fmt::format("{}: {}", where, e.what()));
      }
    }

    MaterialDatabase db;
    for (auto &[name, p] : parts) {
      if (!p.has_o || !p.has_e)
        throw ConfigError("materials", fmt::format("{}: {} lacks its {}-axis record", origin, name,
                                                   p.has_o ? "e" : "o"));
      db.records_.emplace(name, std::move(p.rec));
    }
    return db;
  }

  static MaterialDatabase load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("materials", "cannot open materials database " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  void add(MaterialRecord rec) { records_.insert_or_assign(rec.name, std::move(rec)); }

  const MaterialRecord &get(const std::string &name) const {
    auto it = records_.find(name);
    if (it == records_.end()) {
      std::string known;
      for (const auto &[k, _] : records_) known += (known.empty() ? "" : ", ") + k;
      throw DomainError("materials", DomainReason::UnknownMaterial,
                        fmt::format("unknown material '{}' (known: {})", name, known));
    }
    return it->second;
  }

  bool contains(const std::string &name) const { return records_.count(name) != 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto &[k, _] : records_) out.push_back(k);
    return out;
  }

private:
  std::map<std::string, MaterialRecord> records_;
};

} // namespace epskit
