#pragma once

// Thermal phase budget of the Sagnac loop. Each wavelength crosses the
// birefringent elements on one axis in the clockwise path and on the other
// axis in the counter-clockwise path; only the difference reaches the state.

#include <string>
#include <vector>

#include <fmt/format.h>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"

namespace epskit {

struct StackElement {
  MaterialRecord material;
  double length_mm = 0.0;
  Axis axis = Axis::Ordinary;
};

using ComponentStack = std::vector<StackElement>;

struct ThermalScenario {
  double excursion_K = 1.0;
  double baseline_C = 20.0;
};

/// Phase drift of one traversal (rad):
///   sum_j (2 pi L_j / lambda) (dn_j/dT + n_j alpha_j) dT.
inline double path_phase_variation(const ComponentStack &stack, double wavelength_nm, const ThermalScenario &s) {
  if (stack.empty()) throw DomainError("stability", DomainReason::Generic, "component stack is empty");
  double phi = 0.0;
  for (std::size_t j = 0; j < stack.size(); ++j) {
    const auto &c = stack[j];
    if (!(c.length_mm > 0.0))
      throw DomainError("stability", DomainReason::Generic,
                        fmt::format("component {} ({}) has non-positive length", j, c.material.name));
    double dndT = 0.0;
    try {
      dndT = thermo_optic_coefficient(c.material, c.axis, wavelength_nm, s.baseline_C);
    } catch (const DomainError &e) {
      if (e.reason() != DomainReason::NoThermalModel) throw;
      throw DomainError("stability", DomainReason::NoThermalModel,
                        fmt::format("component {} ({}, {} axis) has no thermal model", j, c.material.name,
                                    axis_name(c.axis)));
    }
    const double n = refractive_index(c.material, c.axis, wavelength_nm, s.baseline_C);
    const double alpha = expansion_coefficient(c.material, c.axis);
    phi += kTwoPi * (c.length_mm * 1e-3) / (wavelength_nm * 1e-9) * (dndT + n * alpha) * s.excursion_K;
  }
  return phi;
}

struct SagnacStacks {
  ComponentStack cw_pump, cw_signal, cw_idler;
  ComponentStack ccw_pump, ccw_signal, ccw_idler;
};

struct PhaseBudget {
  // dphi_r(lambda) = dphi_e - dphi_o for each wavelength (rad)
  double pump_rad = 0.0;
  double signal_rad = 0.0;
  double idler_rad = 0.0;
  double cw_rad = 0.0;
  double ccw_rad = 0.0;
  double relative_rad = 0.0;          // dphi_r(p) - dphi_r(s) - dphi_r(i)
  double no_selfcompensation_rad = 0.0; // dphi_r(p) + dphi_r(s) + dphi_r(i)
};

/// Budget from per-wavelength e-minus-o drifts.
inline PhaseBudget phase_budget(double pump_rad, double signal_rad, double idler_rad) {
  PhaseBudget b;
  b.pump_rad = pump_rad;
  b.signal_rad = signal_rad;
  b.idler_rad = idler_rad;
  b.relative_rad = pump_rad - signal_rad - idler_rad;
  b.no_selfcompensation_rad = pump_rad + signal_rad + idler_rad;
  return b;
}

/// The pump is e-polarized in the clockwise stacks and the down-converted
/// fields are e-polarized in the counter-clockwise stacks; element axes are
/// taken from the stacks themselves.
inline PhaseBudget relative_phase_variation(const SagnacStacks &st, double pump_nm, double signal_nm,
                                            double idler_nm, const ThermalScenario &s) {
  auto ph = [&](const ComponentStack &c, double l) { return path_phase_variation(c, l, s); };
  const double cwp = ph(st.cw_pump, pump_nm), ccwp = ph(st.ccw_pump, pump_nm);
  const double cws = ph(st.cw_signal, signal_nm), ccws = ph(st.ccw_signal, signal_nm);
  const double cwi = ph(st.cw_idler, idler_nm), ccwi = ph(st.ccw_idler, idler_nm);
  auto b = phase_budget(cwp - ccwp, ccws - cws, ccwi - cwi);
  b.cw_rad = cwp + cws + cwi;
  b.ccw_rad = ccwp + ccws + ccwi;
  return b;
}

/// One displacer per traversal: pump on e / pairs on o clockwise, reversed
/// counter-clockwise.
inline SagnacStacks displacer_stacks(const MaterialRecord &m, double length_mm) {
  auto one = [&](Axis a) { return ComponentStack{{m, length_mm, a}}; };
  return {one(Axis::Extraordinary), one(Axis::Ordinary),      one(Axis::Ordinary),
          one(Axis::Ordinary),      one(Axis::Extraordinary), one(Axis::Extraordinary)};
}

} // namespace epskit
