#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "epskit/overlap.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace epskit;

namespace {
WedgePairDesign idler_design() {
  return compensate(0.325, 1.1537, {shipped_db().get("calcite"), 15.0, 0.0, 0.0}, 1550.0, 20.0);
}
} // namespace

TEST(Overlap, AnchorIsOne) {
  const auto b = GaussianBeam::from_fwhm(0.6);
  EXPECT_EQ(gaussian_overlap(b, b, 0.0), 1.0);
  EXPECT_NEAR(b.fwhm_mm(), 0.6, 1e-15);
}

TEST(Overlap, Symmetric) {
  const GaussianBeam o{0.2}, e{0.3};
  for (double d : {0.05, 0.2, 0.7}) EXPECT_EQ(gaussian_overlap(o, e, d), gaussian_overlap(o, e, -d));
}

TEST(Overlap, MatchesQuadratureAtReferenceCase) {
  const auto b = GaussianBeam::from_fwhm(0.6);
  const double q = oracle::overlap_integral(b.sigma_mm, b.sigma_mm, 0.145, 0.0) /
                   oracle::overlap_integral(b.sigma_mm, b.sigma_mm, 0.0, 0.0);
  EXPECT_NEAR(gaussian_overlap(b, b, 0.145), q, 1e-6);
  const GaussianBeam o{0.2548 / kFwhmPerSigma};
  const double q2 = oracle::overlap_integral(o.sigma_mm, o.sigma_mm, 0.145, 0.0) /
                    oracle::overlap_integral(o.sigma_mm, o.sigma_mm, 0.0, 0.0);
  EXPECT_NEAR(gaussian_overlap(o, o, 0.145), q2, 1e-6);
}

TEST(Overlap, MatchesQuadratureOnRandomCases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(0.05, 0.6), ud(-0.8, 0.8);
  for (int k = 0; k < 100; ++k) {
    const GaussianBeam o{us(rng)}, e{us(rng)};
    const double dx = ud(rng), dy = ud(rng);
    const double q = oracle::overlap_integral(o.sigma_mm, e.sigma_mm, dx, dy) /
                     oracle::overlap_integral(o.sigma_mm, e.sigma_mm, 0.0, 0.0);
    EXPECT_NEAR(gaussian_overlap(o, e, dx, dy), q, 1e-6) << k;
  }
}

TEST(Overlap, StrictlyDecreasingInOffset) {
  const GaussianBeam o{0.25}, e{0.34};
  double prev = 1.0 + 1e-12;
  for (int k = 0; k <= 100; ++k) {
    const double v = gaussian_overlap(o, e, 0.02 * k);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Overlap, PredictedRate) {
  EXPECT_EQ(predicted_rate(100e3, 1.0, 1.0), 100e3);
  EXPECT_EQ(predicted_rate(100e3, 0.5, 0.5), 25e3);
  EXPECT_THROW(predicted_rate(1.0, 1.2, 0.5), DomainError);
  EXPECT_THROW(predicted_rate(1.0, 0.5, -0.1), DomainError);
}

TEST(Overlap, ImpliedWidths) {
  EXPECT_NEAR(implied_sigma_mm(0.145, 0.524), 0.090, 0.001);
  EXPECT_NEAR(implied_sigma_mm(0.325, 0.171), 0.122, 0.001);
  const double s = implied_sigma_mm(0.145, 0.524);
  EXPECT_NEAR(gaussian_overlap({s}, {s}, 0.145), 0.524, 1e-12);
  EXPECT_THROW(implied_sigma_mm(0.1, 1.0), DomainError);
}

TEST(Overlap, SweepPeaksAtDesignedSeparation) {
  const auto d = idler_design();
  const auto b = GaussianBeam::from_fwhm(0.8);
  const auto curve = sweep_lateral_separation(d, b, b, {0, 1.6, 3.6, 6.6, 9.6, 11.6});
  std::size_t best = 0;
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k].overlap > curve[best].overlap) best = k;
  EXPECT_EQ(curve[best].d_mm, 6.6);
  // unimodal
  for (std::size_t k = 1; k <= best; ++k) EXPECT_GT(curve[k].overlap, curve[k - 1].overlap);
  for (std::size_t k = best + 1; k < curve.size(); ++k) EXPECT_LT(curve[k].overlap, curve[k - 1].overlap);
}

TEST(Overlap, SweepAtDesignedSeparationAttainsSupremum) {
  const auto d = idler_design();
  const auto b = GaussianBeam::from_fwhm(0.8);
  std::vector<double> seps;
  for (int k = 0; k <= 240; ++k) seps.push_back(0.05 * k);
  seps.insert(std::upper_bound(seps.begin(), seps.end(), d.d_mm), d.d_mm);
  const auto curve = sweep_lateral_separation(d, b, b, seps);
  double sup = 0, at = 0;
  for (const auto &p : curve) {
    sup = std::max(sup, p.overlap);
    if (p.d_mm == d.d_mm) at = p.overlap;
  }
  EXPECT_NEAR(at, sup, 1e-6);
  EXPECT_NEAR(at, 1.0, 1e-6);
}

TEST(Overlap, SweepMatchesPointwiseRecomputation) {
  const auto d = idler_design();
  const GaussianBeam o{0.3}, e{0.35};
  const std::vector<double> seps{0, 2, 4, 6, 8};
  const auto curve = sweep_lateral_separation(d, o, e, seps, 0.8);
  ASSERT_EQ(curve.size(), seps.size());
  for (std::size_t k = 0; k < seps.size(); ++k) {
    const auto t = trace_wedge_pair(with_separation(d, seps[k]));
    EXPECT_EQ(curve[k].d_mm, seps[k]);
    EXPECT_EQ(curve[k].residual_dD_um, t.exit_separation_mm * 1e3);
    EXPECT_EQ(curve[k].overlap, gaussian_overlap(o, e, t.exit_separation_mm));
    EXPECT_EQ(curve[k].relative_rate, curve[k].overlap * 0.8);
  }
}

TEST(Overlap, SweepRejectsUnsortedSeparations) {
  const auto b = GaussianBeam::from_fwhm(0.8);
  EXPECT_THROW(sweep_lateral_separation(idler_design(), b, b, {1.0, 0.5}), DomainError);
}

TEST(Overlap, SweepCsvHeader) {
  std::ostringstream os;
  write_sweep_csv(os, {{1.5, 2.0, 0.5, 0.25}});
  EXPECT_EQ(os.str(), "d_mm,residual_dD_um,overlap,relative_rate\n1.5,2,0.5,0.25\n");
}
