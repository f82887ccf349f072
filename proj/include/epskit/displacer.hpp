#pragma once

// Birefringent beam displacer at normal incidence. The second displacer of
// the interferometer restores the pump-wavelength displacement exactly, so
// down-converted fields at other wavelengths leave with a residual lateral
// offset and a residual delay.

#include <cmath>
#include <vector>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"

namespace epskit {

struct DisplacerSpec {
  MaterialRecord material;
  double length_mm = 39.4;
  double optic_angle_deg = 45.0; // optic axis vs. surface normal
};

struct WalkoffEntry {
  double wavelength_nm = 0.0;
  double spatial_mm = 0.0;
  double temporal_ps = 0.0;
};

struct WalkoffReport {
  double pump_nm = 0.0;
  std::vector<WalkoffEntry> fields;
};

// Which displacer leg the field of interest traverses as an e-ray. The pump
// takes the other role.
enum class DisplacementOrder {
  OrdinaryFirst,   // pump straight in the first displacer, field displaced in the second
  ExtraordinaryFirst,
};

/// Signed e-ray refraction angle for normal incidence (radians):
///   tan(theta_e) = (1 - r) tan(theta) / (1 + r tan^2(theta)),  r = n_o^2 / n_e^2.
/// Negative for negative-uniaxial crystals with 0 < theta < 90 deg.
inline double walkoff_angle(double n_o, double n_e, double optic_angle_rad) {
  const double r = (n_o * n_o) / (n_e * n_e);
  const double t = std::tan(optic_angle_rad);
  if (!std::isfinite(t)) return 0.0; // theta = 90 deg
  return std::atan((1.0 - r) * t / (1.0 + r * t * t));
}

inline double walkoff_angle(const MaterialRecord &m, double wavelength_nm, double optic_angle_rad,
                            double temperature_C) {
  return walkoff_angle(refractive_index(m, Axis::Ordinary, wavelength_nm, temperature_C),
                       refractive_index(m, Axis::Extraordinary, wavelength_nm, temperature_C),
                       optic_angle_rad);
}

namespace detail {
inline void check_displacer(const DisplacerSpec &d) {
  if (!(d.length_mm > 0.0))
    throw DomainError("displacer", DomainReason::Generic, "displacer length must be positive");
  if (!(d.optic_angle_deg >= 0.0 && d.optic_angle_deg <= 90.0))
    throw DomainError("displacer", DomainReason::Generic, "optic angle must lie in [0, 90] deg");
}
} // namespace detail

/// Index-ellipse index for a wave normal at `angle_rad` from the optic axis.
inline double ellipse_index(double n_o, double n_e, double angle_rad) {
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  return 1.0 / std::sqrt(c * c / (n_o * n_o) + s * s / (n_e * n_e));
}

/// Group index of the displaced ray. The index ellipse is evaluated along the
/// walk-off direction theta + theta_e (theta_e signed as in walkoff_angle) and
/// differentiated at fixed direction.
inline double displaced_ray_group_index(const MaterialRecord &m, double wavelength_nm, double optic_angle_rad,
                                        double temperature_C) {
  const double no = refractive_index(m, Axis::Ordinary, wavelength_nm, temperature_C);
  const double ne = refractive_index(m, Axis::Extraordinary, wavelength_nm, temperature_C);
  const double dno = index_dispersion(m, Axis::Ordinary, wavelength_nm, temperature_C);
  const double dne = index_dispersion(m, Axis::Extraordinary, wavelength_nm, temperature_C);
  const double psi = optic_angle_rad + walkoff_angle(no, ne, optic_angle_rad);
  const double c2 = std::cos(psi) * std::cos(psi), s2 = std::sin(psi) * std::sin(psi);
  const double n = ellipse_index(no, ne, psi);
  const double dn = n * n * n * (c2 * dno / (no * no * no) + s2 * dne / (ne * ne * ne));
  return n - wavelength_nm * dn;
}

/// Residual lateral offset (mm) after the second displacer,
/// L tan(theta_e(lambda_p)) - L tan(theta_e(lambda)), projected on the pump
/// e-ray deflection direction so that positive means under-restored.
inline double spatial_walkoff(const DisplacerSpec &d, double pump_nm, double wavelength_nm, double temperature_C) {
  detail::check_displacer(d);
  const double th = deg_to_rad(d.optic_angle_deg);
  const double tp = std::tan(walkoff_angle(d.material, pump_nm, th, temperature_C));
  const double tl = std::tan(walkoff_angle(d.material, wavelength_nm, th, temperature_C));
  const double dir = tp < 0.0 ? -1.0 : 1.0;
  return dir * d.length_mm * (tp - tl);
}

/// Transit time (ps) of one displacer leg.
inline double displacer_leg_ps(const DisplacerSpec &d, double wavelength_nm, Axis polarization,
                               double temperature_C) {
  const double L = d.length_mm / kMmPerM;
  const double th = deg_to_rad(d.optic_angle_deg);
  if (polarization == Axis::Ordinary)
    return L * group_index(d.material, Axis::Ordinary, wavelength_nm, temperature_C) / kSpeedOfLight * kPsPerS;
  const double te = walkoff_angle(d.material, wavelength_nm, th, temperature_C);
  const double ng = displaced_ray_group_index(d.material, wavelength_nm, th, temperature_C);
  return L * ng / (kSpeedOfLight * std::cos(te)) * kPsPerS;
}

/// Temporal walk-off T(o->e) - T(e->o) in ps. With OrdinaryFirst the pump is
/// straight in the first displacer and the field is displaced in the second.
inline double temporal_walkoff(const DisplacerSpec &d, double pump_nm, double wavelength_nm, double temperature_C,
                               DisplacementOrder order = DisplacementOrder::OrdinaryFirst) {
  detail::check_displacer(d);
  const double o_then_e = displacer_leg_ps(d, pump_nm, Axis::Ordinary, temperature_C) +
                          displacer_leg_ps(d, wavelength_nm, Axis::Extraordinary, temperature_C);
  const double e_then_o = displacer_leg_ps(d, pump_nm, Axis::Extraordinary, temperature_C) +
                          displacer_leg_ps(d, wavelength_nm, Axis::Ordinary, temperature_C);
  const double dt = o_then_e - e_then_o;
  return order == DisplacementOrder::OrdinaryFirst ? dt : -dt;
}

inline WalkoffReport walkoff_report(const DisplacerSpec &d, double pump_nm, const std::vector<double> &fields_nm,
                                    double temperature_C) {
  WalkoffReport r;
  r.pump_nm = pump_nm;
  for (double l : fields_nm) {
    r.fields.push_back({l, spatial_walkoff(d, pump_nm, l, temperature_C),
                        temporal_walkoff(d, pump_nm, l, temperature_C)});
  }
  return r;
}

} // namespace epskit
