#pragma once

// Pair of identical birefringent wedges (optic axis perpendicular to the
// plane of incidence) that merges two parallel, laterally offset rays of
// orthogonal polarization and trims their relative delay.
//
// Geometry (2-D, x transverse, z along the beam). The o-ray enters wedge 1 at
// x = 0, the e-ray at x = dD. Wedge 1: entry face z = 0, exit face
// z = L/2 + x tan(phi). Wedge 2 (rotated by 180 deg): entry face
// z = L/2 + d + x tan(phi), exit face z = L + d. L is the combined wedge
// thickness along z at the o-ray entry height and d the gap at that height.

#include <array>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"
#include "epskit/roots.hpp"

namespace epskit {

struct WedgeSpec {
  MaterialRecord material;
  double wedge_angle_deg = 15.0;
  double thickness_mm = 0.0;
  double aperture_mm = 0.0; // transverse extent of wedge 2 centred on x = 0; 0 = unlimited
};

enum class WedgeOrientation {
  Normal,  // the early ray of the incoming pair is routed as the wedge o-ray
  Swapped, // polarizations interchanged relative to the wedge axes
};

struct ExitAngles {
  double theta_o_rad = 0.0; // from the exit-face normal
  double theta_e_rad = 0.0;
};

struct WedgePairDesign {
  WedgeSpec wedge;
  double wavelength_nm = 0.0;
  double temperature_C = 0.0;
  double walkoff_mm = 0.0; // incoming separation dD
  double a_mm = 0.0;
  double b_mm = 0.0;
  double d_mm = 0.0;
  double theta_o_deg = 0.0;
  double theta_e_deg = 0.0;
  double initial_delay_ps = 0.0;
  WedgeOrientation orientation = WedgeOrientation::Normal;
  double residual_separation_um = 0.0; // from trace_wedge_pair
  double residual_delay_fs = 0.0;      // from trace_wedge_pair
  bool physical = true;                // see WedgeTrace::physical
};

struct ThicknessSolution {
  double thickness_mm = 0.0;
  double closed_form_mm = 0.0; // |v_g,e - v_g,o| * |dT|
  WedgeOrientation orientation = WedgeOrientation::Normal;
  double residual_fs = 0.0;
};

struct WedgeTrace {
  double exit_separation_mm = 0.0; // x_o - x_e at the exit face
  double exit_delay_ps = 0.0;      // t_o - t_e at the exit face
  double exit_direction_rad = 0.0; // largest |angle| of an exit ray vs. +z
  std::array<double, 2> exit_x_mm{}; // o, e
  bool physical = true; // false when the thickness is too small for the rays to cross both wedges in order
};

/// Snell refraction at the tilted exit face: sin(theta_x) = n_x sin(phi).
inline ExitAngles wedge_exit_angles(const MaterialRecord &m, double wavelength_nm, double wedge_angle_rad,
                                    double temperature_C) {
  ExitAngles out;
  const double s = std::sin(wedge_angle_rad);
  for (Axis ax : {Axis::Ordinary, Axis::Extraordinary}) {
    const double n = refractive_index(m, ax, wavelength_nm, temperature_C);
    const double arg = n * s;
    if (arg >= 1.0) {
      throw DomainError("wedges", DomainReason::TotalInternalReflection,
                        fmt::format("total internal reflection for the {}-ray: wedge angle {:.3f} deg "
                                    "exceeds the critical angle {:.3f} deg (n = {:.5f})",
                                    axis_name(ax), rad_to_deg(wedge_angle_rad), rad_to_deg(std::asin(1.0 / n)), n));
    }
    (ax == Axis::Ordinary ? out.theta_o_rad : out.theta_e_rad) = std::asin(arg);
  }
  return out;
}

namespace detail {

struct WedgeGeometry {
  double phi, tphi, beta_o, beta_e, tbo, tbe;
};

inline WedgeGeometry wedge_geometry(const WedgeSpec &w, double wavelength_nm, double temperature_C) {
  if (!(w.wedge_angle_deg > 0.0 && w.wedge_angle_deg < 90.0))
    throw DomainError("wedges", DomainReason::Generic, "wedge angle must lie in (0, 90) deg");
  if (w.thickness_mm < 0.0) throw DomainError("wedges", DomainReason::Generic, "wedge thickness must be >= 0");
  const double phi = deg_to_rad(w.wedge_angle_deg);
  const auto ex = wedge_exit_angles(w.material, wavelength_nm, phi, temperature_C);
  WedgeGeometry g{phi, std::tan(phi), ex.theta_o_rad - phi, ex.theta_e_rad - phi, 0.0, 0.0};
  g.tbo = std::tan(g.beta_o);
  g.tbe = std::tan(g.beta_e);
  if (!(std::abs(g.tbo - g.tbe) > 1e-15)) {
    throw DomainError("wedges", DomainReason::CannotCompensate,
                      fmt::format("o- and e-rays leave {} at the same angle; the wedge pair cannot steer them together",
                                  w.material.name));
  }
  return g;
}

struct Vec2 {
  double x, z;
};
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.z}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }

struct Ray {
  Vec2 pos, dir;
  double time_ps = 0.0;
};

// Advance to the plane through `p` with normal `n`, accruing group delay.
// Negative legs (faces crossed in the wrong order) are kept as the signed
// continuation of the path-length model; returns false for them.
inline bool advance_to_plane(Ray &r, Vec2 p, Vec2 n, double group_index) {
  const double denom = dot(r.dir, n);
  const double s = dot(Vec2{p.x - r.pos.x, p.z - r.pos.z}, n) / denom;
  r.pos = r.pos + s * r.dir;
  r.time_ps += s * 1e-3 * group_index / kSpeedOfLight * kPsPerS;
  return s >= -1e-12;
}

// Vector Snell's law; `n` is a unit normal oriented along the propagation.
inline void refract(Ray &r, Vec2 n, double n1, double n2) {
  const double eta = n1 / n2;
  const double ci = dot(n, r.dir);
  const double s2t = eta * eta * (1.0 - ci * ci);
  if (s2t > 1.0) throw DomainError("wedges", DomainReason::TotalInternalReflection, "total internal reflection in trace");
  r.dir = eta * r.dir + (std::sqrt(1.0 - s2t) - eta * ci) * n;
}

} // namespace detail

/// Closed-form delay o-ray minus e-ray (ps) accumulated in the wedge pair,
/// from the total path lengths of both rays (crystal legs at group velocity,
/// gap legs at c). Valid for a design whose d merges the rays.
inline double wedge_pair_delay_ps(const WedgePairDesign &design) {
  const auto &w = design.wedge;
  const auto g = detail::wedge_geometry(w, design.wavelength_nm, design.temperature_C);
  const double ngo = group_index(w.material, Axis::Ordinary, design.wavelength_nm, design.temperature_C);
  const double nge = group_index(w.material, Axis::Extraordinary, design.wavelength_nm, design.temperature_C);
  const double dD = design.walkoff_mm;
  const double a = design.d_mm / (1.0 - g.tbo * g.tphi);
  const double b = a * g.tbo;
  const double crystal = w.thickness_mm - b * g.tphi; // P1 + P3
  const double p2o = a / std::cos(g.beta_o);
  const double p2e = (a - dD * g.tphi) / std::cos(g.beta_e);
  const double mm = ngo * crystal + p2o - (nge * (crystal + dD * g.tphi) + p2e);
  return mm * 1e-3 / kSpeedOfLight * kPsPerS;
}

/// Initial delay minus the wedge-pair correction (ps), signed. The initial
/// delay is negated for the swapped orientation.
inline double residual_delay(const WedgePairDesign &design, double initial_delay_ps) {
  const double s = design.orientation == WedgeOrientation::Normal ? 1.0 : -1.0;
  return s * initial_delay_ps - wedge_pair_delay_ps(design);
}

/// Independent 2-D ray trace of both rays through the pair.
inline WedgeTrace trace_wedge_pair(const WedgePairDesign &design) {
  using detail::Vec2;
  const auto &w = design.wedge;
  const double lam = design.wavelength_nm, T = design.temperature_C;
  const double phi = deg_to_rad(w.wedge_angle_deg);
  if (!(phi > 0.0 && phi < kPi / 2)) throw DomainError("wedges", DomainReason::Generic, "wedge angle must lie in (0, 90) deg");
  const double L = w.thickness_mm, d = design.d_mm;
  const Vec2 face_normal{-std::sin(phi), std::cos(phi)};
  const Vec2 exit1{0.0, 0.5 * L}, entry2{0.0, 0.5 * L + d}, exit2{0.0, L + d};
  const Vec2 flat_normal{0.0, 1.0};

  WedgeTrace out;
  std::array<double, 2> t{};
  const std::array<Axis, 2> axes{Axis::Ordinary, Axis::Extraordinary};
  for (int k = 0; k < 2; ++k) {
    const double n = refractive_index(w.material, axes[k], lam, T);
    const double ng = group_index(w.material, axes[k], lam, T);
    detail::Ray r{{k == 0 ? 0.0 : design.walkoff_mm, 0.0}, {0.0, 1.0}, 0.0};
    bool ok = detail::advance_to_plane(r, exit1, face_normal, ng);
    detail::refract(r, face_normal, n, 1.0);
    ok &= detail::advance_to_plane(r, entry2, face_normal, 1.0);
    if (w.aperture_mm > 0.0 && std::abs(r.pos.x) > 0.5 * w.aperture_mm) {
      throw DomainError("wedges", DomainReason::Geometry,
                        fmt::format("{}-ray hits the second wedge at x = {:.4f} mm, outside its {:.3f} mm aperture",
                                    axis_name(axes[k]), r.pos.x, w.aperture_mm));
    }
    detail::refract(r, face_normal, 1.0, n);
    ok &= detail::advance_to_plane(r, exit2, flat_normal, ng);
    out.physical = out.physical && ok;
    detail::refract(r, flat_normal, n, 1.0);
    out.exit_x_mm[k] = r.pos.x;
    t[k] = r.time_ps;
    out.exit_direction_rad = std::max(out.exit_direction_rad, std::abs(std::atan2(r.dir.x, r.dir.z)));
  }
  out.exit_separation_mm = out.exit_x_mm[0] - out.exit_x_mm[1];
  out.exit_delay_ps = t[0] - t[1];
  return out;
}

namespace detail {
inline void fill_trace_residuals(WedgePairDesign &d) {
  const auto tr = trace_wedge_pair(d);
  const double s = d.orientation == WedgeOrientation::Normal ? 1.0 : -1.0;
  d.residual_separation_um = tr.exit_separation_mm * 1e3;
  d.residual_delay_fs = (s * d.initial_delay_ps - tr.exit_delay_ps) * kFsPerPs;
  d.physical = tr.physical;
}
} // namespace detail

/// Offsets a, b and gap d that merge rays separated by `walkoff_mm`:
///   a = (1 - tan(phi) tan(theta_e - phi)) / (tan(theta_o - phi) - tan(theta_e - phi)) dD
///   b = a tan(theta_o - phi),  d = a - b tan(phi).
/// Residuals come from the forward trace at the wedge thickness in `wedge`.
inline WedgePairDesign design_wedge_pair(double walkoff_mm, const WedgeSpec &wedge, double wavelength_nm,
                                         double temperature_C, double initial_delay_ps = 0.0,
                                         WedgeOrientation orientation = WedgeOrientation::Normal) {
  if (walkoff_mm < 0.0) throw DomainError("wedges", DomainReason::Generic, "walk-off to compensate must be >= 0");
  const auto g = detail::wedge_geometry(wedge, wavelength_nm, temperature_C);
  WedgePairDesign d;
  d.wedge = wedge;
  d.wavelength_nm = wavelength_nm;
  d.temperature_C = temperature_C;
  d.walkoff_mm = walkoff_mm;
  d.a_mm = (1.0 - g.tphi * g.tbe) / (g.tbo - g.tbe) * walkoff_mm;
  d.b_mm = d.a_mm * g.tbo;
  d.d_mm = d.a_mm - d.b_mm * g.tphi;
  d.theta_o_deg = rad_to_deg(g.beta_o + g.phi);
  d.theta_e_deg = rad_to_deg(g.beta_e + g.phi);
  d.initial_delay_ps = initial_delay_ps;
  d.orientation = orientation;
  detail::fill_trace_residuals(d);
  return d;
}

/// Same design with the gap moved to `d_mm` (a and b follow the o-ray).
inline WedgePairDesign with_separation(WedgePairDesign design, double d_mm) {
  const auto g = detail::wedge_geometry(design.wedge, design.wavelength_nm, design.temperature_C);
  design.d_mm = d_mm;
  design.a_mm = d_mm / (1.0 - g.tbo * g.tphi);
  design.b_mm = design.a_mm * g.tbo;
  return design;
}

/// Total wedge thickness cancelling `initial_delay_ps` for the pair with gap
/// `d_mm`. Root of residual_delay on [0, max_thickness_mm]; the swapped
/// orientation is tried when the normal one has no root.
inline ThicknessSolution solve_thickness(double initial_delay_ps, const WedgeSpec &wedge, double d_mm,
                                         double wavelength_nm, double temperature_C,
                                         double max_thickness_mm = 100.0) {
  const auto g = detail::wedge_geometry(wedge, wavelength_nm, temperature_C);
  // invert d = a (1 - tan(beta_o) tan(phi)) and the a(dD) relation
  const double a = d_mm / (1.0 - g.tbo * g.tphi);
  const double walkoff = a * (g.tbo - g.tbe) / (1.0 - g.tphi * g.tbe);

  WedgePairDesign base;
  base.wedge = wedge;
  base.wavelength_nm = wavelength_nm;
  base.temperature_C = temperature_C;
  base.walkoff_mm = walkoff;
  base.d_mm = d_mm;
  base.a_mm = a;
  base.b_mm = a * g.tbo;
  base.initial_delay_ps = initial_delay_ps;

  auto f_for = [&](WedgeOrientation o) {
    return [&, o](double L) {
      WedgePairDesign t = base;
      t.wedge.thickness_mm = L;
      t.orientation = o;
      return residual_delay(t, initial_delay_ps);
    };
  };

  ThicknessSolution sol;
  const double ngo = group_index(wedge.material, Axis::Ordinary, wavelength_nm, temperature_C);
  const double nge = group_index(wedge.material, Axis::Extraordinary, wavelength_nm, temperature_C);
  sol.closed_form_mm = std::abs(kSpeedOfLight / nge - kSpeedOfLight / ngo) * std::abs(initial_delay_ps) / kPsPerS *
                       kMmPerM;

  std::array<double, 4> ends{};
  int k = 0;
  for (auto o : {WedgeOrientation::Normal, WedgeOrientation::Swapped}) {
    auto f = f_for(o);
    const double f0 = f(0.0), f1 = f(max_thickness_mm);
    ends[k++] = f0;
    ends[k++] = f1;
    if (f0 == 0.0 || std::signbit(f0) != std::signbit(f1)) {
      sol.thickness_mm = roots::refine(f, {0.0, max_thickness_mm, f0, f1});
      sol.orientation = o;
      sol.residual_fs = f(sol.thickness_mm) * kFsPerPs;
      return sol;
    }
  }
  throw DomainError("wedges", DomainReason::Uncompensatable,
                    fmt::format("no wedge thickness in [0, {:.1f}] mm cancels {:.4f} ps: residual {:.4f}/{:.4f} ps "
                                "(normal) and {:.4f}/{:.4f} ps (swapped) at the bracket ends",
                                max_thickness_mm, initial_delay_ps, ends[0], ends[1], ends[2], ends[3]));
}

inline ThicknessSolution solve_thickness(double initial_delay_ps, const WedgePairDesign &design,
                                         double max_thickness_mm = 100.0) {
  return solve_thickness(initial_delay_ps, design.wedge, design.d_mm, design.wavelength_nm, design.temperature_C,
                         max_thickness_mm);
}

/// Full design: gap from the walk-off, thickness from the delay, residuals
/// from the trace of the final geometry.
inline WedgePairDesign compensate(double walkoff_mm, double initial_delay_ps, WedgeSpec wedge, double wavelength_nm,
                                  double temperature_C, double max_thickness_mm = 100.0) {
  const auto spatial = design_wedge_pair(walkoff_mm, wedge, wavelength_nm, temperature_C, initial_delay_ps);
  const auto th = solve_thickness(initial_delay_ps, spatial, max_thickness_mm);
  wedge.thickness_mm = th.thickness_mm;
  return design_wedge_pair(walkoff_mm, wedge, wavelength_nm, temperature_C, initial_delay_ps, th.orientation);
}

} // namespace epskit
