#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "epskit/displacer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace epskit;

namespace {
DisplacerSpec bbo(double L = 39.4, double theta = 45.0) { return {shipped_db().get("alpha-BBO"), L, theta}; }
} // namespace

TEST(Displacer, WalkoffAngleLimits) {
  EXPECT_EQ(walkoff_angle(1.6, 1.6, deg_to_rad(30)), 0.0);
  EXPECT_EQ(walkoff_angle(1.65, 1.5, 0.0), 0.0);
  EXPECT_NEAR(walkoff_angle(1.65, 1.5, deg_to_rad(90)), 0.0, 1e-15);
}

TEST(Displacer, WalkoffAngleMatchesHandEvaluationForAlphaBbo) {
  const auto &m = shipped_db().get("alpha-BBO");
  const double no = refractive_index(m, Axis::Ordinary, 523.6, 20);
  const double ne = refractive_index(m, Axis::Extraordinary, 523.6, 20);
  const double r = no * no / (ne * ne);
  const double hand = std::atan((1 - r) * 1.0 / (1 + r));
  EXPECT_NEAR(walkoff_angle(m, 523.6, deg_to_rad(45), 20), hand, 1e-15);
  EXPECT_LT(hand, 0.0);
}

TEST(Displacer, WalkoffMagnitudePeaksNear45Degrees) {
  const double no = 1.6776, ne = 1.5534;
  int best = 0;
  double best_v = 0;
  for (int k = 0; k <= 90; ++k) {
    const double v = std::abs(walkoff_angle(no, ne, deg_to_rad(k)));
    if (v > best_v) best_v = v, best = k;
  }
  EXPECT_NEAR(best, 45, 3);
  EXPECT_NEAR(walkoff_angle(no, ne, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(walkoff_angle(no, ne, deg_to_rad(90)), 0.0, 1e-15);
}

TEST(Displacer, ZeroAtPumpWavelength) {
  const auto d = bbo();
  EXPECT_EQ(spatial_walkoff(d, 523.6, 523.6, 20), 0.0);
  EXPECT_EQ(temporal_walkoff(d, 523.6, 523.6, 20), 0.0);
}

TEST(Displacer, ReferenceWalkoffs) {
  const auto d = bbo();
  EXPECT_NEAR(spatial_walkoff(d, 523.6, 790.8, 20) / 0.10, 1.0, 0.25);
  EXPECT_NEAR(spatial_walkoff(d, 523.6, 1550.0, 20) / 0.17, 1.0, 0.25);
  EXPECT_NEAR(temporal_walkoff(d, 523.6, 790.8, 20) / 0.65, 1.0, 0.25);
  EXPECT_NEAR(temporal_walkoff(d, 523.6, 1550.0, 20) / 1.06, 1.0, 0.25);
}

TEST(Displacer, IsotropicDispersionlessHasNoTemporalWalkoff) {
  const DisplacerSpec d{MaterialRecord::dispersionless("glass", 1.5, 1.5), 20.0, 45.0};
  EXPECT_NEAR(temporal_walkoff(d, 500, 900, 20), 0.0, 1e-15);
  EXPECT_NEAR(spatial_walkoff(d, 500, 900, 20), 0.0, 1e-15);
}

TEST(Displacer, SwappingRolesNegatesDelay) {
  const auto d = bbo();
  for (double l : {700.0, 1000.0, 1550.0})
    EXPECT_EQ(temporal_walkoff(d, 523.6, l, 20, DisplacementOrder::ExtraordinaryFirst),
              -temporal_walkoff(d, 523.6, l, 20, DisplacementOrder::OrdinaryFirst));
}

TEST(Displacer, MonotoneAwayFromPump) {
  const auto d = bbo();
  double pd = -1, pt = -1;
  for (int k = 0; k < 50; ++k) {
    const double l = 600.0 + 1000.0 * k / 49.0;
    const double D = spatial_walkoff(d, 523.6, l, 20), T = std::abs(temporal_walkoff(d, 523.6, l, 20));
    EXPECT_GT(D, pd);
    EXPECT_GT(T, pt);
    pd = D, pt = T;
  }
}

TEST(Displacer, InvalidSpecRejected) {
  EXPECT_THROW(spatial_walkoff(bbo(0.0), 523.6, 800, 20), DomainError);
  EXPECT_THROW(spatial_walkoff(bbo(10.0, 95.0), 523.6, 800, 20), DomainError);
}

TEST(Displacer, AgreesWithRayTraceOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> up(450, 600), ul(600, 1600), uth(10, 80), uL(5, 50);
  const auto &m = shipped_db().get("alpha-BBO");
  for (int k = 0; k < 200; ++k) {
    const double lp = up(rng), l = ul(rng), th = uth(rng), L = uL(rng);
    const DisplacerSpec d{m, L, th};
    const auto o = oracle::trace_displacers(m, L, deg_to_rad(th), lp, l, 20);
    EXPECT_NEAR(spatial_walkoff(d, lp, l, 20), o.dD_mm, 1e-3) << k;
    EXPECT_NEAR(temporal_walkoff(d, lp, l, 20), o.dT_ps, 1e-3) << k;
  }
}

TEST(Displacer, ReportCarriesBothFields) {
  const auto r = walkoff_report(bbo(), 523.6, {790.8, 1550.0}, 20);
  ASSERT_EQ(r.fields.size(), 2u);
  EXPECT_EQ(r.pump_nm, 523.6);
  EXPECT_LT(r.fields[0].spatial_mm, r.fields[1].spatial_mm);
}
