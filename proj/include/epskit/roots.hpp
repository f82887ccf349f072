#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

namespace epskit::roots {

struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;
};

// Extremes of the sampled function, kept so callers can report why a scan
// found no root.
struct ScanResult {
  std::optional<Bracket> bracket;
  double f_min = std::numeric_limits<double>::infinity();
  double f_max = -std::numeric_limits<double>::infinity();
};

/// Walks from `from` towards `to` in steps of `step` (sign of step is taken
/// from the direction) and stops at the first sign change. An exact zero on a
/// sample is returned as a degenerate bracket.
template <class F>
ScanResult scan_for_sign_change(F &&f, double from, double to, double step) {
  ScanResult out;
  step = std::abs(step);
  const double dir = to >= from ? 1.0 : -1.0;
  const auto n = static_cast<std::int64_t>(std::ceil(std::abs(to - from) / step));
  double x_prev = from;
  double f_prev = f(x_prev);
  out.f_min = out.f_max = f_prev;
  if (f_prev == 0.0) {
    out.bracket = Bracket{from, from, 0.0, 0.0};
    return out;
  }
  for (std::int64_t k = 1; k <= n; ++k) {
    const double x = k == n ? to : from + dir * step * static_cast<double>(k);
    const double fx = f(x);
    out.f_min = std::min(out.f_min, fx);
    out.f_max = std::max(out.f_max, fx);
    if (fx == 0.0 || std::signbit(fx) != std::signbit(f_prev)) {
      const bool fwd = x_prev < x;
      out.bracket = fwd ? Bracket{x_prev, x, f_prev, fx} : Bracket{x, x_prev, fx, f_prev};
      return out;
    }
    x_prev = x;
    f_prev = fx;
  }
  return out;
}

/// Polishes a sign-change bracket to (near) machine precision.
template <class F>
double refine(F &&f, const Bracket &b, std::uintmax_t max_iter = 200) {
  if (b.f_lo == 0.0) return b.lo;
  if (b.f_hi == 0.0) return b.hi;
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
  auto [lo, hi] = boost::math::tools::toms748_solve(f, b.lo, b.hi, b.f_lo, b.f_hi, tol, max_iter);
  return 0.5 * (lo + hi);
}

} // namespace epskit::roots
