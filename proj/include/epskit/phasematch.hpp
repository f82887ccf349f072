#pragma once

// Type-0 (e -> e + e) quasi-phase matching in a periodically poled crystal.

#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"
#include "epskit/roots.hpp"

namespace epskit {

struct PumpSpec {
  double wavelength_nm = 523.6;
  double bandwidth_nm = 0.0;
  double power_mW = 0.0;
};

struct CrystalSpec {
  MaterialRecord material;
  double length_mm = 10.0;
  double poling_period_um = 7.1; // at poling_reference_C
  double poling_reference_C = 25.0;
  double temperature_C = 25.0;
};

struct PhaseMatchKnobs {
  double scan_step_nm = 0.1;
  double tolerance = 1e-6; // fraction of the grating vector 2 pi / Lambda
  double guard = 1e-3;     // signal scan starts at lambda_p * (1 + guard) at the earliest
  std::uintmax_t max_iterations = 200;
};

struct PhaseMatchSolution {
  double signal_nm = 0.0;
  double idler_nm = 0.0;
  double residual_per_m = 0.0;
  double temperature_C = 0.0;
};

// Spectral half-widths to the first zero of the sinc^2 phase-matching
// function (|dk L| = 2 pi) and the matching temporal widths.
//
// Convention: tau = 2 pi / d_omega. For the signal at fixed pump frequency
// this equals L |n_g,s - n_g,i| / c, the signal-idler group delay accumulated
// over the crystal. The idler width adds the pump spread in quadrature
// (omega_i = omega_p - omega_s with an independent pump spread).
struct SpectralWidths {
  double signal_rad_per_s = 0.0;
  double idler_rad_per_s = 0.0;
  double pump_rad_per_s = 0.0;
  double signal_ps = 0.0;
  double idler_ps = 0.0;
};

inline double idler_wavelength_nm(double pump_nm, double signal_nm) {
  return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm);
}

/// Poling period at the crystal temperature, scaled by the thermal expansion
/// of the extraordinary-axis record.
inline double poling_period_um(const CrystalSpec &c) {
  return c.poling_period_um *
         (1.0 + expansion_coefficient(c.material, Axis::Extraordinary) *
                    (c.temperature_C - c.poling_reference_C));
}

/// k_p - k_s - k_i - 2 pi / Lambda(T) in 1/m, all waves extraordinary.
inline double qpm_mismatch(double signal_nm, const PumpSpec &pump, const CrystalSpec &crystal) {
  const double lp = pump.wavelength_nm;
  if (!(signal_nm > lp)) {
    throw DomainError("phasematch", DomainReason::OutOfValidity,
                      fmt::format("signal {:.4f} nm must be longer than the pump {:.4f} nm", signal_nm, lp));
  }
  const double li = idler_wavelength_nm(lp, signal_nm);
  const auto &m = crystal.material;
  const double T = crystal.temperature_C;
  auto k = [&](double l_nm) {
    return kTwoPi * refractive_index(m, Axis::Extraordinary, l_nm, T) / (l_nm * 1e-9);
  };
  const double grating = kTwoPi / (poling_period_um(crystal) * 1e-6);
  return k(lp) - k(signal_nm) - k(li) - grating;
}

/// Bracketed root of qpm_mismatch for the signal (the shorter of the pair).
/// Scans from degeneracy (2 lambda_p) down towards the pump at the knob step,
/// then polishes with TOMS 748.
inline PhaseMatchSolution solve_signal_idler(const PumpSpec &pump, const CrystalSpec &crystal,
                                             const PhaseMatchKnobs &knobs = {}) {
  const double lp = pump.wavelength_nm;
  if (!(lp > 0.0)) throw DomainError("phasematch", DomainReason::Generic, "pump wavelength must be positive");
  if (!(crystal.length_mm > 0.0 && crystal.poling_period_um > 0.0))
    throw DomainError("phasematch", DomainReason::Generic, "crystal length and poling period must be positive");

  const auto &sm = crystal.material.extraordinary.sellmeier;
  const double vmin = sm.validity_min_um * kNmPerUm;
  const double vmax = sm.validity_max_um * kNmPerUm;
  if (lp < vmin || 2.0 * lp > vmax) {
    throw DomainError("phasematch", DomainReason::OutOfValidity,
                      fmt::format("pump {:.2f} nm or degeneracy {:.2f} nm outside validity [{:.1f}, {:.1f}] nm",
                                  lp, 2.0 * lp, vmin, vmax));
  }
  // Lowest signal whose idler still lies inside the model.
  const double s_idler_limit = 1.0 / (1.0 / lp - 1.0 / vmax) * (1.0 + 1e-12);
  const double s_lo = std::max({lp * (1.0 + knobs.guard), vmin, s_idler_limit});
  const double s_hi = 2.0 * lp;

  auto f = [&](double s) { return qpm_mismatch(s, pump, crystal); };
  const auto scan = roots::scan_for_sign_change(f, s_hi, s_lo, knobs.scan_step_nm);
  if (!scan.bracket) {
    throw DomainError("phasematch", DomainReason::NotPhaseMatched,
                      fmt::format("not phase-matched at {:.2f} C: mismatch over signal [{:.2f}, {:.2f}] nm "
                                  "ranges from {:.6g} to {:.6g} 1/m without a sign change",
                                  crystal.temperature_C, s_lo, s_hi, scan.f_min, scan.f_max));
  }
  PhaseMatchSolution sol;
  sol.signal_nm = roots::refine(f, *scan.bracket, knobs.max_iterations);
  sol.idler_nm = idler_wavelength_nm(lp, sol.signal_nm);
  sol.residual_per_m = f(sol.signal_nm);
  sol.temperature_C = crystal.temperature_C;
  const double tol = knobs.tolerance * kTwoPi / (poling_period_um(crystal) * 1e-6);
  if (std::abs(sol.residual_per_m) > tol) {
    throw DomainError("phasematch", DomainReason::NotPhaseMatched,
                      fmt::format("root polish left residual {:.3g} 1/m above tolerance {:.3g} 1/m",
                                  sol.residual_per_m, tol));
  }
  return sol;
}

inline double pump_bandwidth_rad_per_s(const PumpSpec &pump) {
  const double l = pump.wavelength_nm * 1e-9;
  return kTwoPi * kSpeedOfLight * pump.bandwidth_nm * 1e-9 / (l * l);
}

inline SpectralWidths spectral_temporal_widths(const PhaseMatchSolution &sol, const PumpSpec &pump,
                                               const CrystalSpec &crystal) {
  const auto &m = crystal.material;
  const double T = sol.temperature_C;
  const double ngs = group_index(m, Axis::Extraordinary, sol.signal_nm, T);
  const double ngi = group_index(m, Axis::Extraordinary, sol.idler_nm, T);
  const double dng = std::abs(ngs - ngi);
  if (dng < 1e-9) {
    throw DomainError("phasematch", DomainReason::GroupVelocityMatched,
                      fmt::format("signal and idler are group-velocity-matched (|n_g,s - n_g,i| = {:.3g}); "
                                  "first-order width estimate is invalid",
                                  dng));
  }
  const double L = crystal.length_mm / kMmPerM;
  SpectralWidths w;
  w.pump_rad_per_s = pump_bandwidth_rad_per_s(pump);
  w.signal_rad_per_s = kTwoPi * kSpeedOfLight / (L * dng);
  w.idler_rad_per_s = std::hypot(w.signal_rad_per_s, w.pump_rad_per_s);
  w.signal_ps = kTwoPi / w.signal_rad_per_s * kPsPerS;
  w.idler_ps = kTwoPi / w.idler_rad_per_s * kPsPerS;
  return w;
}

/// Temperature at which the crystal phase-matches `target_signal_nm`, found
/// by a 1 C scan over [t_lo, t_hi] and polished. Temperatures where no
/// solution exists are skipped during the scan.
inline double phase_matching_temperature(const PumpSpec &pump, CrystalSpec crystal, double target_signal_nm,
                                         const PhaseMatchKnobs &knobs = {}, double t_lo = -50.0,
                                         double t_hi = 250.0) {
  auto g = [&](double T) -> std::optional<double> {
    crystal.temperature_C = T;
    try {
      return solve_signal_idler(pump, crystal, knobs).signal_nm - target_signal_nm;
    } catch (const DomainError &) {
      return std::nullopt;
    }
  };
  std::optional<double> prev_val;
  double prev_T = t_lo;
  for (double T = t_lo; T <= t_hi + 1e-9; T += 1.0) {
    const auto v = g(T);
    if (v && *v == 0.0) return T;
    if (v && prev_val && std::signbit(*v) != std::signbit(*prev_val)) {
      auto h = [&](double t) { return g(t).value_or(std::nan("")); };
      return roots::refine(h, {prev_T, T, *prev_val, *v}, knobs.max_iterations);
    }
    if (v) {
      prev_val = v;
      prev_T = T;
    }
  }
  throw DomainError("phasematch", DomainReason::NotPhaseMatched,
                    fmt::format("no temperature in [{:.0f}, {:.0f}] C phase-matches signal {:.2f} nm", t_lo,
                                t_hi, target_signal_nm));
}

} // namespace epskit
