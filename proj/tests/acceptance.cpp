// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "epskit/commands.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#ifndef EPSKIT_CLI
#error "EPSKIT_CLI must name the epskit executable"
#endif
#ifndef EPSKIT_CONFIG_DIR
#error "EPSKIT_CONFIG_DIR must point at the configs directory"
#endif

using namespace epskit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void check(bool cond, const std::string &what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const fs::path shipped_cfg = fs::path(EPSKIT_CONFIG_DIR) / "paper.cfg";

RunConfig shipped_config() { return parse_config(slurp(shipped_cfg), shipped_cfg.string()); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel(double x, double ref) { return std::abs(x / ref - 1.0); }

Outcome phase_matching() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto rep = run_design(shipped_config(), shipped_db()).report;
  const double dt = seconds_since(t0);
  const double ls = *rep.value("phasematch", "signal_wavelength"), li = *rep.value("phasematch", "idler_wavelength");
  const double e = *rep.value("phasematch", "energy_conservation_rel_error");
  o.check(std::abs(ls - 790.8) <= 10, fmt::format("signal {} nm", ls));
  o.check(std::abs(li - 1550) <= 40, fmt::format("idler {} nm", li));
  o.check(e <= 1e-12, fmt::format("energy error {}", e));
  o.check(dt < 1.0, fmt::format("design took {} s", dt));
  o.detail += fmt::format("{}λs={:.2f} nm, λi={:.2f} nm at {:.3f} C, energy err {:.1e}, {:.3f} s",
                          o.detail.empty() ? "" : " | ", ls, li, *rep.value("phasematch", "crystal_temperature"), e, dt);
  return o;
}

Outcome temporal_widths() {
  Outcome o;
  const auto rep = run_design(shipped_config(), shipped_db()).report;
  const double ts = *rep.value("phasematch", "signal_temporal_width"), ti = *rep.value("phasematch", "idler_temporal_width");
  o.check(rel(ts, 2.68) <= 0.15, fmt::format("tau_s {}", ts));
  o.check(rel(ti, 2.61) <= 0.15, fmt::format("tau_i {}", ti));
  o.detail += fmt::format("{}τs={:.3f} ps, τi={:.3f} ps", o.detail.empty() ? "" : " | ", ts, ti);
  return o;
}

Outcome displacer_walkoffs() {
  Outcome o;
  const auto rep = run_design(shipped_config(), shipped_db()).report;
  const double Ds = *rep.value("displacer", "spatial_walkoff_signal"), Di = *rep.value("displacer", "spatial_walkoff_idler");
  const double Ts = *rep.value("displacer", "temporal_walkoff_signal"), Ti = *rep.value("displacer", "temporal_walkoff_idler");
  o.check(rel(Ds, 0.10) <= 0.25, fmt::format("dD_s {}", Ds));
  o.check(rel(Di, 0.17) <= 0.25, fmt::format("dD_i {}", Di));
  o.check(rel(Ts, 0.65) <= 0.25, fmt::format("dT_s {}", Ts));
  o.check(rel(Ti, 1.06) <= 0.25, fmt::format("dT_i {}", Ti));
  const auto &m = shipped_db().get("alpha-BBO");
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> up(450, 600), ul(600, 1600), uth(10, 80), uL(5, 50);
  double worst_D = 0, worst_T = 0;
  for (int k = 0; k < 200; ++k) {
    const double lp = up(rng), l = ul(rng), th = uth(rng), L = uL(rng);
    const DisplacerSpec d{m, L, th};
    const auto ref = oracle::trace_displacers(m, L, deg_to_rad(th), lp, l, 20);
    worst_D = std::max(worst_D, std::abs(spatial_walkoff(d, lp, l, 20) - ref.dD_mm));
    worst_T = std::max(worst_T, std::abs(temporal_walkoff(d, lp, l, 20) - ref.dT_ps));
  }
  o.check(worst_D < 1e-3, fmt::format("oracle dD gap {} mm", worst_D));
  o.check(worst_T < 1e-3, fmt::format("oracle dT gap {} ps", worst_T));
  o.detail += fmt::format("{}ΔD={:.4f}/{:.4f} mm, ΔT={:.4f}/{:.4f} ps, oracle max gap {:.1e} mm / {:.1e} ps",
                          o.detail.empty() ? "" : " | ", Ds, Di, Ts, Ti, worst_D, worst_T);
  return o;
}

Outcome wedge_design() {
  Outcome o;
  const WedgeSpec w{shipped_db().get("calcite"), 15.0, 0.0, 0.0};
  const auto s = compensate(0.145, 0.7175, w, 790.8, 20);
  const auto i = compensate(0.325, 1.1537, w, 1549.6, 20);
  o.check(rel(s.d_mm, 2.75) <= 0.05, fmt::format("d_s {}", s.d_mm));
  o.check(rel(i.d_mm, 6.6) <= 0.05, fmt::format("d_i {}", i.d_mm));
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> uD(0.0, 0.5), uphi(5, 25), udt(-2.0, 2.0);
  double worst_x = 0, worst_t = 0;
  std::vector<WedgePairDesign> designs{s, i};
  for (int k = 0; k < 100; ++k)
    designs.push_back(compensate(uD(rng), udt(rng), {w.material, uphi(rng), 0.0, 0.0}, k % 2 ? 1550.0 : 790.8, 20));
  for (const auto &d : designs) {
    const auto tr = trace_wedge_pair(d);
    const double sgn = d.orientation == WedgeOrientation::Normal ? 1.0 : -1.0;
    worst_x = std::max(worst_x, std::abs(tr.exit_separation_mm) * 1e3);
    worst_t = std::max(worst_t, std::abs(sgn * d.initial_delay_ps - tr.exit_delay_ps) * 1e3);
  }
  o.check(worst_x < 1.0, fmt::format("residual separation {} um", worst_x));
  o.check(worst_t < 1.0, fmt::format("residual delay {} fs", worst_t));
  o.detail += fmt::format("{}d_s={:.4f} mm, d_i={:.4f} mm, {} designs traced: max residual {:.1e} um / {:.1e} fs",
                          o.detail.empty() ? "" : " | ", s.d_mm, i.d_mm, designs.size(), worst_x, worst_t);
  return o;
}

Outcome phase_budget_identity() {
  Outcome o;
  const double pi = kPi;
  const auto b = phase_budget(6.22 * pi, 4.09 * pi, 2.08 * pi);
  o.check(std::abs(b.relative_rad / pi - 0.05) < 1e-12, fmt::format("relative {}", b.relative_rad / pi));
  o.check(std::abs(b.no_selfcompensation_rad / pi - 12.39) < 1e-12, fmt::format("no-self {}", b.no_selfcompensation_rad / pi));
  o.detail += fmt::format("{}Δφ_r={:.12f}π, no self-compensation {:.12f}π", o.detail.empty() ? "" : " | ",
                          b.relative_rad / pi, b.no_selfcompensation_rad / pi);
  return o;
}

Outcome overlap_math() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> us(0.05, 0.6), ud(-0.8, 0.8);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const GaussianBeam a{us(rng)}, b{us(rng)};
    const double dx = ud(rng), dy = ud(rng);
    const double q = oracle::overlap_integral(a.sigma_mm, b.sigma_mm, dx, dy) /
                     oracle::overlap_integral(a.sigma_mm, b.sigma_mm, 0, 0);
    worst = std::max(worst, std::abs(gaussian_overlap(a, b, dx, dy) - q));
  }
  o.check(worst < 1e-6, fmt::format("quadrature gap {}", worst));
  const auto cfg = shipped_config();
  const auto curve = sweep_lateral_separation(build_source(cfg, shipped_db()).wedge_idler,
                                              GaussianBeam::from_fwhm(0.8), GaussianBeam::from_fwhm(0.8),
                                              {0, 1.6, 3.6, 6.6, 9.6, 11.6});
  std::size_t best = 0;
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k].overlap > curve[best].overlap) best = k;
  o.check(curve[best].d_mm == 6.6, fmt::format("sweep peak at {} mm", curve[best].d_mm));
  const double ss = implied_sigma_mm(0.145, 0.524), si = implied_sigma_mm(0.325, 0.171);
  o.check(std::abs(ss - 0.090) < 0.0015 && std::abs(si - 0.122) < 0.0015, fmt::format("implied σ {}/{}", ss, si));
  o.detail += fmt::format("{}quadrature max gap {:.1e}, sweep peak {} mm, implied σ {:.4f}/{:.4f} mm",
                          o.detail.empty() ? "" : " | ", worst, curve[best].d_mm, ss, si);
  return o;
}

Outcome entanglement_analytics() {
  Outcome o;
  const BellStateModel v971{0.0, {0.971, 0.971, 0.971, 0.971}};
  std::vector<CountRecord> analytic;
  for (const auto &s : chsh_settings())
    analytic.push_back({s[0], s[1], 0.0, 0.5, 0.5, correlation_probability(s[0], s[1], v971), false, 0});
  const double S_id = chsh_from_records(analytic).S;
  o.check(std::abs(S_id - 2.747) <= 1e-3, fmt::format("identity S {}", S_id));

  const auto cfg = shipped_config();
  bool cal = false;
  const auto det = detection_model(cfg, cal);
  std::vector<Setting> settings;
  for (const auto &s : chsh_settings()) settings.push_back({s[0], s[1]});
  const auto t0 = Clock::now();
  double lo = 1e9, hi = -1e9, sum = 0, sig = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto c = chsh_from_records(simulate_experiment(cfg.state, det, 1.0, settings, cfg.duration_s, derive_seed(cfg.seed, 100 + k)));
    lo = std::min(lo, c.S), hi = std::max(hi, c.S), sum += c.S, sig += c.sigma;
  }
  const double batch = seconds_since(t0);
  o.check(lo >= 2.72 && hi <= 2.78, fmt::format("simulated S range [{}, {}]", lo, hi));
  o.check(batch < 30.0, fmt::format("50-seed batch {} s", batch));

  const auto k = pair_rate_and_heralding({0, 0, 1.0, 460.7e3, 210.7e3, 33.33e3, true, 0});
  o.check(std::abs(k.pair_rate_hz.value - 2.92e6) <= 0.12e6, fmt::format("R {}", k.pair_rate_hz.value));
  o.check(std::abs(k.heralding_s.value - 0.158) <= 0.001, fmt::format("eta_s {}", k.heralding_s.value));
  o.check(std::abs(k.heralding_i.value - 0.072) <= 0.001, fmt::format("eta_i {}", k.heralding_i.value));
  o.detail += fmt::format("{}S(identity)={:.4f}, simulated S mean {:.4f} (range {:.4f}-{:.4f}, mean σ {:.4f}) in {:.2f} s, "
                          "R={:.3f} MHz, η={:.2f}%/{:.2f}%",
                          o.detail.empty() ? "" : " | ", S_id, sum / 50, lo, hi, sig / 50, batch,
                          k.pair_rate_hz.value / 1e6, 100 * k.heralding_s.value, 100 * k.heralding_i.value);
  return o;
}

Outcome power_scan() {
  Outcome o;
  const auto rep = run_simulate(shipped_config(), shipped_db()).report;
  const double r2 = *rep.value("power_scan", "pair_rate_r_squared");
  const double hs = *rep.value("power_scan", "heralding_signal_max_rel_dev");
  const double hi = *rep.value("power_scan", "heralding_idler_max_rel_dev");
  o.check(r2 > 0.99, fmt::format("R² {}", r2));
  o.check(hs < 0.02 && hi < 0.02, fmt::format("heralding spread {}/{}", hs, hi));
  o.detail += fmt::format("{}R²={:.6f}, heralding max deviation {:.2f}%/{:.2f}%", o.detail.empty() ? "" : " | ", r2,
                          100 * hs, 100 * hi);
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto dir = fs::temp_directory_path() / "epskit_acceptance_determinism";
  fs::remove_all(dir);
  std::size_t files = 0;
  auto run = [&](const std::string &args) {
    const std::string cmd = std::string("\"") + EPSKIT_CLI + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string cfg = "--config \"" + shipped_cfg.string() + "\"";
  for (const char *c : {"design", "sweep", "simulate", "stability", "analyze"}) {
    for (const char *tag : {"a", "b"}) {
      std::string args = std::string(c) + " " + cfg + " --out \"" + (dir / tag / c).string() + "\"";
      if (std::string(c) == "analyze") args += " --input \"" + (dir / "a" / "simulate" / "correlation_counts.csv").string() + "\"";
      o.check(run(args) == 0, fmt::format("{} run {} failed", c, tag));
    }
    if (!fs::exists(dir / "a" / c)) continue;
    for (const auto &f : fs::directory_iterator(dir / "a" / c)) {
      const auto other = dir / "b" / c / f.path().filename();
      o.check(fs::exists(other) && slurp(f.path()) == slurp(other), fmt::format("{} differs", f.path().filename().string()));
      ++files;
    }
  }
  o.detail += fmt::format("{}{} files compared across two runs of 5 commands", o.detail.empty() ? "" : " | ", files);
  return o;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"phase matching", phase_matching},
      {"temporal widths", temporal_widths},
      {"displacer walk-offs", displacer_walkoffs},
      {"wedge design", wedge_design},
      {"phase-budget identity", phase_budget_identity},
      {"overlap math", overlap_math},
      {"entanglement analytics", entanglement_analytics},
      {"power-scan property", power_scan},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception &e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.ok ? 0 : 1;
    std::cout << fmt::format("{} criterion {}: {} ({})\n", o.ok ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail);
  }
  return failures;
}
