#pragma once

#include <numbers>

namespace epskit {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0; // m/s

// Unit helpers. Internally lengths are carried in the unit named by the
// variable suffix (_nm, _um, _mm, _m); these make conversions explicit.
inline constexpr double kNmPerUm = 1e3;
inline constexpr double kMmPerM = 1e3;
inline constexpr double kPsPerS = 1e12;
inline constexpr double kFsPerPs = 1e3;

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

} // namespace epskit
