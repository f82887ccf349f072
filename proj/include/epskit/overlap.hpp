#pragma once

// Spatial overlap of two displaced Gaussian spots and the coincidence rate
// as a function of the wedge-pair lateral separation.
//
// Each spot is the normalized intensity profile
//   g(x, y) = exp(-(x^2 + y^2) / 2 sigma^2) / (2 pi sigma^2),
// FWHM = 2 sqrt(2 ln 2) sigma. The overlap is the transverse integral of
// g_o(x, y) g_e(x - dx, y - dy) divided by its value at zero offset, so it is
// a unitless factor in [0, 1].

#include <cmath>
#include <ostream>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "epskit/error.hpp"
#include "epskit/wedges.hpp"

namespace epskit {

inline const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::log(2.0));

struct GaussianBeam {
  double sigma_mm = 0.0;

  static GaussianBeam from_fwhm(double fwhm_mm) { return {fwhm_mm / kFwhmPerSigma}; }
  double fwhm_mm() const { return sigma_mm * kFwhmPerSigma; }
};

/// exp(-(dx^2 + dy^2) / (2 (sigma_o^2 + sigma_e^2))); equal widths give
/// exp(-dD^2 / 4 sigma^2).
inline double gaussian_overlap(const GaussianBeam &o, const GaussianBeam &e, double dx_mm, double dy_mm = 0.0) {
  if (!(o.sigma_mm > 0.0 && e.sigma_mm > 0.0))
    throw DomainError("overlap", DomainReason::Generic, "beam widths must be positive");
  const double s2 = o.sigma_mm * o.sigma_mm + e.sigma_mm * e.sigma_mm;
  return std::exp(-(dx_mm * dx_mm + dy_mm * dy_mm) / (2.0 * s2));
}

/// Coincidence rate after per-arm overlap losses.
inline double predicted_rate(double ideal_rate_hz, double overlap_s, double overlap_i) {
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!ok(overlap_s) || !ok(overlap_i))
    throw DomainError("overlap", DomainReason::Generic, "overlap factors must lie in [0, 1]");
  return ideal_rate_hz * overlap_s * overlap_i;
}

/// Equal-width sigma that turns offset `dD_mm` into overlap `eta`:
/// sigma = dD / (2 sqrt(-ln eta)).
inline double implied_sigma_mm(double dD_mm, double eta) {
  if (!(eta > 0.0 && eta < 1.0))
    throw DomainError("overlap", DomainReason::Generic, "overlap must lie strictly between 0 and 1");
  return std::abs(dD_mm) / (2.0 * std::sqrt(-std::log(eta)));
}

struct SweepPoint {
  double d_mm = 0.0;
  double residual_dD_um = 0.0;
  double overlap = 0.0;
  double relative_rate = 0.0;
};

/// For every separation, traces the pair at that gap, turns the exit
/// separation into an overlap and scales by the other arm's overlap.
/// Points come back in input order.
inline std::vector<SweepPoint> sweep_lateral_separation(const WedgePairDesign &design, const GaussianBeam &beam_o,
                                                        const GaussianBeam &beam_e,
                                                        const std::vector<double> &separations_mm,
                                                        double other_arm_overlap = 1.0) {
  for (std::size_t k = 1; k < separations_mm.size(); ++k) {
    if (!(separations_mm[k] > separations_mm[k - 1]))
      throw DomainError("overlap", DomainReason::Generic, "sweep separations must be strictly increasing");
  }
  std::vector<SweepPoint> out;
  out.reserve(separations_mm.size());
  for (double d : separations_mm) {
    const auto tr = trace_wedge_pair(with_separation(design, d));
    SweepPoint p;
    p.d_mm = d;
    p.residual_dD_um = tr.exit_separation_mm * 1e3;
    p.overlap = gaussian_overlap(beam_o, beam_e, tr.exit_separation_mm);
    p.relative_rate = predicted_rate(1.0, p.overlap, other_arm_overlap);
    out.push_back(p);
  }
  return out;
}

inline void write_sweep_csv(std::ostream &os, const std::vector<SweepPoint> &curve) {
  os << "d_mm,residual_dD_um,overlap,relative_rate\n";
  for (const auto &p : curve) fmt::print(os, "{},{},{},{}\n", p.d_mm, p.residual_dD_um, p.overlap, p.relative_rate);
}

} // namespace epskit
