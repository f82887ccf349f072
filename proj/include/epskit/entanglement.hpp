#pragma once

// Polarization correlations of (|VV> + e^{i phi}|HH>)/sqrt(2), estimators for
// visibility, CHSH and Klyshko pair rate, and a seeded Monte Carlo of the
// counting experiment.
//
// Angles are analyzer polarization angles in degrees, 0 = V, 90 = H
// (45 = A, 135 = D). A half-wave plate at angle t in front of a fixed
// polarizer analyzes 2t; see hwp_to_analyzer_deg.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "epskit/constants.hpp"
#include "epskit/error.hpp"

namespace epskit {

inline double hwp_to_analyzer_deg(double hwp_deg) { return 2.0 * hwp_deg; }

struct BellStateModel {
  double phase_rad = 0.0;
  // Fringe visibility for idler analyzer bases 0, 45, 90, 135 deg.
  std::array<double, 4> visibility{1.0, 1.0, 1.0, 1.0};

  /// V(b) = m + p cos 4b + q cos 2b + r sin 2b, through the four basis
  /// values and clamped to [0, 1].
  double visibility_at(double theta_i_deg) const {
    const auto &v = visibility;
    const double m = 0.25 * (v[0] + v[1] + v[2] + v[3]);
    const double p = 0.25 * (v[0] + v[2] - v[1] - v[3]);
    const double q = 0.5 * (v[0] - v[2]);
    const double r = 0.5 * (v[1] - v[3]);
    const double b = deg_to_rad(theta_i_deg);
    return std::clamp(m + p * std::cos(4 * b) + q * std::cos(2 * b) + r * std::sin(2 * b), 0.0, 1.0);
  }

  double mean_visibility() const { return 0.25 * (visibility[0] + visibility[1] + visibility[2] + visibility[3]); }

  void validate() const {
    for (double v : visibility)
      if (!(v >= 0.0 && v <= 1.0))
        throw DomainError("entanglement", DomainReason::Generic, "visibilities must lie in [0, 1]");
  }
};

struct DetectionModel {
  double eta_s = 1.0;
  double eta_i = 1.0;
  double dark_s_hz = 0.0;
  double dark_i_hz = 0.0;
  double window_ns = 1.5;
  double pair_rate_per_mW = 0.0; // generated pairs, Hz/mW

  void validate() const {
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(eta_s) || !in01(eta_i))
      throw DomainError("entanglement", DomainReason::Generic, "detection efficiencies must lie in [0, 1]");
    if (!(window_ns > 0.0)) throw DomainError("entanglement", DomainReason::Generic, "coincidence window must be > 0");
    if (dark_s_hz < 0.0 || dark_i_hz < 0.0 || pair_rate_per_mW < 0.0)
      throw DomainError("entanglement", DomainReason::Generic, "rates must be non-negative");
  }
};

struct CountRecord {
  double theta_s_deg = 0.0;
  double theta_i_deg = 0.0;
  double duration_s = 0.0;
  double Ns_hz = 0.0;
  double Ni_hz = 0.0;
  double N_hz = 0.0;
  bool bg_subtracted = false;
  std::uint64_t seed = 0; // 0 for measured records
};

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

/// Joint probability that both photons pass their analyzers:
///   1/4 [1 + V(b) (cos 2a cos 2b + cos(phi) sin 2a sin 2b)].
inline double correlation_probability(double theta_s_deg, double theta_i_deg, const BellStateModel &state) {
  const double a = 2.0 * deg_to_rad(theta_s_deg);
  const double b = 2.0 * deg_to_rad(theta_i_deg);
  const double v = state.visibility_at(theta_i_deg);
  return 0.25 * (1.0 + v * (std::cos(a) * std::cos(b) + std::cos(state.phase_rad) * std::sin(a) * std::sin(b)));
}

// ---------------------------------------------------------------------------
// Visibility

enum class VisibilityMethod { MinMax, Fit };

struct VisibilityResult {
  double value = 0.0;
  double sigma = 0.0;
  std::optional<std::string> warning;
};

namespace detail {
inline double counts(double rate_hz, double duration_s) { return rate_hz * duration_s; }
} // namespace detail

/// (N_max - N_min) / (N_max + N_min) over the curve, or the modulation depth
/// of a least-squares fit A + B cos 2a + C sin 2a in the signal angle.
/// Uncertainties assume Poisson coincidence counts.
inline VisibilityResult visibility(const std::vector<CountRecord> &curve,
                                   VisibilityMethod method = VisibilityMethod::MinMax) {
  if (curve.size() < 2) throw DomainError("entanglement", DomainReason::NoRecords, "visibility needs at least 2 records");
  VisibilityResult r;
  double lo = curve[0].N_hz, hi = lo;
  std::size_t ilo = 0, ihi = 0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k].N_hz < lo) lo = curve[k].N_hz, ilo = k;
    if (curve[k].N_hz > hi) hi = curve[k].N_hz, ihi = k;
  }
  if (hi == lo) {
    r.warning = "zero spread in coincidence counts: visibility 0, fringe phase undefined";
    return r;
  }
  if (method == VisibilityMethod::MinMax) {
    const double s = hi + lo;
    r.value = (hi - lo) / s;
    const double var_hi = curve[ihi].duration_s > 0 ? hi / curve[ihi].duration_s : 0.0;
    const double var_lo = curve[ilo].duration_s > 0 ? lo / curve[ilo].duration_s : 0.0;
    r.sigma = 2.0 / (s * s) * std::sqrt(lo * lo * var_hi + hi * hi * var_lo);
    return r;
  }
  if (curve.size() < 3) throw DomainError("entanglement", DomainReason::NoRecords, "fit needs at least 3 records");
  const auto n = static_cast<Eigen::Index>(curve.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n), var(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto &c = curve[static_cast<std::size_t>(k)];
    const double a = 2.0 * deg_to_rad(c.theta_s_deg);
    X(k, 0) = 1.0;
    X(k, 1) = std::cos(a);
    X(k, 2) = std::sin(a);
    y(k) = c.N_hz;
    var(k) = c.duration_s > 0 ? c.N_hz / c.duration_s : 0.0;
  }
  const Eigen::Matrix3d XtX = X.transpose() * X;
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(XtX);
  if (!lu.isInvertible())
    throw DomainError("entanglement", DomainReason::UndefinedEstimate, "signal angles do not determine a sinusoid");
  const Eigen::Vector3d beta = lu.solve(X.transpose() * y);
  const Eigen::Matrix3d inv = lu.inverse();
  const Eigen::Matrix3d cov = inv * (X.transpose() * var.asDiagonal() * X) * inv;
  const double A = beta(0), B = beta(1), C = beta(2);
  if (!(A > 0.0)) throw DomainError("entanglement", DomainReason::UndefinedEstimate, "fitted mean count is not positive");
  const double amp = std::hypot(B, C);
  r.value = std::min(1.0, amp / A);
  Eigen::Vector3d g(-amp / (A * A), amp > 0 ? B / (amp * A) : 0.0, amp > 0 ? C / (amp * A) : 0.0);
  r.sigma = std::sqrt(std::max(0.0, g.dot(cov * g)));
  return r;
}

// ---------------------------------------------------------------------------
// CHSH

/// E = [N(a,b) + N(a+,b+) - N(a,b+) - N(a+,b)] / sum, sigma = sqrt((1 - E^2)/n)
/// with n the total coincidence count. Records in the order
/// (a,b), (a,b+90), (a+90,b), (a+90,b+90). Records without a duration are
/// combined as rates and get no uncertainty.
inline Estimate chsh_E(const std::array<CountRecord, 4> &r) {
  const bool timed = std::all_of(r.begin(), r.end(), [](const CountRecord &c) { return c.duration_s > 0.0; });
  auto n_of = [&](const CountRecord &c) { return timed ? detail::counts(c.N_hz, c.duration_s) : c.N_hz; };
  const double pp = n_of(r[0]), pm = n_of(r[1]), mp = n_of(r[2]), mm = n_of(r[3]);
  const double n = pp + pm + mp + mm;
  if (!(n > 0.0)) throw DomainError("entanglement", DomainReason::UndefinedEstimate, "correlation estimate from zero counts");
  const double e = (pp + mm - pm - mp) / n;
  return {e, timed ? std::sqrt(std::max(0.0, 1.0 - e * e) / n) : std::nan("")};
}

struct ChshResult {
  double S = 0.0;
  double sigma = 0.0;
  double sigmas_above_classical = 0.0;
  std::array<Estimate, 4> E{}; // (a,b), (a,d), (g,d), (g,b)
};

/// S = |E(a,b) - E(a,d) + E(g,d) + E(g,b)|.
inline ChshResult chsh_S(const Estimate &ab, const Estimate &ad, const Estimate &gd, const Estimate &gb) {
  ChshResult r;
  r.E = {ab, ad, gd, gb};
  r.S = std::abs(ab.value - ad.value + gd.value + gb.value);
  r.sigma = std::sqrt(ab.sigma * ab.sigma + ad.sigma * ad.sigma + gd.sigma * gd.sigma + gb.sigma * gb.sigma);
  r.sigmas_above_classical = r.sigma > 0 ? (r.S - 2.0) / r.sigma : 0.0;
  return r;
}

struct ChshAngles {
  double alpha = 0.0, beta = 22.5, gamma = 45.0, delta = 67.5;
};

/// The 16 (signal, idler) settings chsh_from_records expects.
inline std::vector<std::array<double, 2>> chsh_settings(const ChshAngles &a = {}) {
  std::vector<std::array<double, 2>> out;
  for (auto [s, i] : {std::pair{a.alpha, a.beta}, {a.alpha, a.delta}, {a.gamma, a.delta}, {a.gamma, a.beta}}) {
    out.push_back({s, i});
    out.push_back({s, i + 90.0});
    out.push_back({s + 90.0, i});
    out.push_back({s + 90.0, i + 90.0});
  }
  return out;
}

namespace detail {
inline bool same_angle(double x, double y) {
  const double d = std::remainder(x - y, 180.0);
  return std::abs(d) < 1e-6;
}
} // namespace detail

/// Finds the 16 settings among `records` (angles compared modulo 180 deg).
inline ChshResult chsh_from_records(const std::vector<CountRecord> &records, const ChshAngles &a = {}) {
  const auto settings = chsh_settings(a);
  std::array<CountRecord, 16> found{};
  for (std::size_t k = 0; k < settings.size(); ++k) {
    bool ok = false;
    for (const auto &r : records) {
      if (detail::same_angle(r.theta_s_deg, settings[k][0]) && detail::same_angle(r.theta_i_deg, settings[k][1])) {
        found[k] = r;
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw DomainError("entanglement", DomainReason::NoRecords,
                        fmt::format("no record for CHSH setting ({}, {}) deg", settings[k][0], settings[k][1]));
    }
  }
  std::array<Estimate, 4> e;
  for (std::size_t j = 0; j < 4; ++j) e[j] = chsh_E({found[4 * j], found[4 * j + 1], found[4 * j + 2], found[4 * j + 3]});
  return chsh_S(e[0], e[1], e[2], e[3]);
}

// ---------------------------------------------------------------------------
// Pair rate and heralding

struct PairRateResult {
  Estimate pair_rate_hz;
  Estimate heralding_s; // N / N_i
  Estimate heralding_i; // N / N_s
};

/// Klyshko estimator R = N_s N_i / N, eta_s = N / N_i, eta_i = N / N_s.
inline PairRateResult pair_rate_and_heralding(const CountRecord &r) {
  if (!(r.N_hz > 0.0)) throw DomainError("entanglement", DomainReason::UndefinedEstimate, "pair rate undefined for zero coincidences");
  PairRateResult out;
  const double t = r.duration_s;
  out.pair_rate_hz.value = r.Ns_hz * r.Ni_hz / r.N_hz;
  out.heralding_s.value = r.N_hz / r.Ni_hz;
  out.heralding_i.value = r.N_hz / r.Ns_hz;
  if (t > 0.0) {
    const double ns = r.Ns_hz * t, ni = r.Ni_hz * t, n = r.N_hz * t;
    out.pair_rate_hz.sigma = out.pair_rate_hz.value * std::sqrt(1.0 / ns + 1.0 / ni + 1.0 / n);
    auto binom = [](double eta, double trials) { return std::sqrt(std::max(0.0, eta * (1.0 - eta)) / trials); };
    out.heralding_s.sigma = binom(out.heralding_s.value, ni);
    out.heralding_i.sigma = binom(out.heralding_i.value, ns);
  } else {
    out.pair_rate_hz.sigma = out.heralding_s.sigma = out.heralding_i.sigma = std::nan("");
  }
  return out;
}

/// Generated pair rate behind a Klyshko estimate taken at joint analyzer
/// probability `p_joint` (each analyzer alone passes half the photons).
inline double generated_pair_rate(double klyshko_rate_hz, double p_joint) { return 4.0 * p_joint * klyshko_rate_hz; }

/// Detection model reproducing the singles/coincidence triple measured at
/// `power_mW` in a maximally correlated basis with visibility `v`.
inline DetectionModel calibrate_from_counts(double Ns_hz, double Ni_hz, double N_hz, double power_mW, double v,
                                            DetectionModel base = {}) {
  const double s = Ns_hz - base.dark_s_hz, i = Ni_hz - base.dark_i_hz;
  if (!(s > 0.0 && i > 0.0 && N_hz > 0.0 && power_mW > 0.0))
    throw DomainError("entanglement", DomainReason::UndefinedEstimate, "calibration needs positive dark-corrected counts and power");
  const double p_max = 0.25 * (1.0 + v);
  base.pair_rate_per_mW = 4.0 * p_max * s * i / N_hz / power_mW;
  base.eta_s = N_hz / (2.0 * i * p_max);
  base.eta_i = N_hz / (2.0 * s * p_max);
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Sub-seed for stream `index` of master seed `seed`: the first two words of
/// std::seed_seq{seed_lo, seed_hi, index_lo, index_hi}.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(index), hi(index)};
  std::array<std::uint32_t, 2> w{};
  seq.generate(w.begin(), w.end());
  return (static_cast<std::uint64_t>(w[1]) << 32) | w[0];
}

struct Setting {
  double theta_s_deg = 0.0;
  double theta_i_deg = 0.0;
};

/// One record per setting. Pairs are Poisson at power * pair_rate_per_mW;
/// each photon passes its analyzer with probability 1/2 and both with
/// correlation_probability, then is detected with eta. Singles carry dark
/// counts; accidentals are Poisson with mean N_s N_i window. Subtracted
/// records remove the expected accidentals and dark rates. Record k draws
/// from mt19937_64(derive_seed(seed, k)).
inline std::vector<CountRecord> simulate_experiment(const BellStateModel &state, const DetectionModel &det,
                                                    double power_mW, const std::vector<Setting> &settings,
                                                    double duration_s, std::uint64_t seed,
                                                    bool background_subtracted = true) {
  state.validate();
  det.validate();
  if (duration_s < 0.0) throw DomainError("entanglement", DomainReason::Generic, "duration must be >= 0");
  if (power_mW < 0.0) throw DomainError("entanglement", DomainReason::Generic, "power must be >= 0");
  std::vector<CountRecord> out;
  out.reserve(settings.size());
  const double tau = det.window_ns * 1e-9;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    CountRecord rec;
    rec.theta_s_deg = settings[k].theta_s_deg;
    rec.theta_i_deg = settings[k].theta_i_deg;
    rec.duration_s = duration_s;
    rec.bg_subtracted = background_subtracted;
    rec.seed = derive_seed(seed, k);
    if (duration_s == 0.0) {
      out.push_back(rec);
      continue;
    }
    std::mt19937_64 rng(rec.seed);
    auto poisson = [&](double mean) -> double {
      if (!(mean > 0.0)) return 0.0;
      return static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(rng));
    };
    auto binomial = [&](double n, double p) -> double {
      if (!(n > 0.0) || !(p > 0.0)) return 0.0;
      return static_cast<double>(
          std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(n), std::min(1.0, p))(rng));
    };
    const double pairs = poisson(power_mW * det.pair_rate_per_mW * duration_s);
    const double pj = correlation_probability(rec.theta_s_deg, rec.theta_i_deg, state);
    const double p_both = pj * det.eta_s * det.eta_i;
    const double p_s = std::max(0.0, 0.5 * det.eta_s - p_both);
    const double p_i = std::max(0.0, 0.5 * det.eta_i - p_both);
    const double both = binomial(pairs, p_both);
    const double s_only = binomial(pairs - both, p_s / (1.0 - p_both));
    const double i_only = binomial(pairs - both - s_only, p_i / (1.0 - p_both - p_s));
    const double S = both + s_only + poisson(det.dark_s_hz * duration_s);
    const double I = both + i_only + poisson(det.dark_i_hz * duration_s);
    const double acc_mean = S * I * tau / duration_s;
    const double C = std::min({both + poisson(acc_mean), S, I});
    rec.Ns_hz = S / duration_s;
    rec.Ni_hz = I / duration_s;
    rec.N_hz = C / duration_s;
    if (background_subtracted) {
      rec.Ns_hz = std::max(0.0, rec.Ns_hz - det.dark_s_hz);
      rec.Ni_hz = std::max(0.0, rec.Ni_hz - det.dark_i_hz);
      rec.N_hz = std::max(0.0, (C - acc_mean) / duration_s);
    }
    rec.N_hz = std::min({rec.N_hz, rec.Ns_hz, rec.Ni_hz});
    out.push_back(rec);
  }
  return out;
}

} // namespace epskit
