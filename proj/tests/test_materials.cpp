#include <cmath>

#include <gtest/gtest.h>

#include "epskit/materials.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace epskit;

namespace {

// Ghosh two-term form evaluated by hand.
double calcite_by_hand(const std::vector<double> &c, double l_um) {
  const double l2 = l_um * l_um;
  return std::sqrt(c[0] + c[1] * l2 / (l2 - c[2]) + c[3] * l2 / (l2 - c[4]));
}

} // namespace

TEST(Materials, CalciteIndicesAt589nm) {
  const auto &cal = shipped_db().get("calcite");
  const double no = refractive_index(cal, Axis::Ordinary, 589.0, 20.0);
  const double ne = refractive_index(cal, Axis::Extraordinary, 589.0, 20.0);
  EXPECT_NEAR(no, calcite_by_hand({1.73358749, 0.96464345, 1.94325203e-2, 1.82831454, 120}, 0.589), 1e-12);
  EXPECT_NEAR(ne, calcite_by_hand({1.35859695, 0.82427830, 1.06689543e-2, 0.14429128, 120}, 0.589), 1e-12);
  EXPECT_NEAR(no, 1.658, 2e-3);
  EXPECT_NEAR(ne, 1.486, 2e-3);
}

TEST(Materials, ConstantModel) {
  const auto m = MaterialRecord::dispersionless("flat", 1.7, 1.5, 1e-5);
  for (double l : {300.0, 800.0, 2000.0}) {
    EXPECT_DOUBLE_EQ(refractive_index(m, Axis::Ordinary, l, 20), 1.7);
    EXPECT_DOUBLE_EQ(group_index(m, Axis::Extraordinary, l, 20), 1.5);
    EXPECT_DOUBLE_EQ(thermo_optic_coefficient(m, Axis::Ordinary, l, 20), 1e-5);
  }
}

TEST(Materials, OutOfValidityNamesInterval) {
  const auto &cal = shipped_db().get("calcite");
  try {
    refractive_index(cal, Axis::Ordinary, 3000.0, 20.0);
    FAIL() << "expected a domain error";
  } catch (const DomainError &e) {
    EXPECT_EQ(e.reason(), DomainReason::OutOfValidity);
    EXPECT_NE(std::string(e.what()).find("2200.0]"), std::string::npos) << e.what();
  }
}

TEST(Materials, GroupIndexNearBoundaryRejected) {
  const auto &cal = shipped_db().get("calcite");
  EXPECT_THROW(group_index(cal, Axis::Ordinary, 2199.9, 20.0), DomainError);
  EXPECT_NO_THROW(group_index(cal, Axis::Ordinary, 2190.0, 20.0));
}

TEST(Materials, GroupIndexMatchesFiniteDifferenceForLithiumNiobate) {
  const auto &ln = shipped_db().get("MgO:LiNbO3");
  for (double T : {25.0, 106.7}) {
    const double ng = group_index(ln, Axis::Extraordinary, 1550.0, T);
    EXPECT_NEAR(ng, oracle::fd_group_index(ln, Axis::Extraordinary, 1550.0, T), 1e-6);
  }
}

TEST(Materials, CalciteNormalDispersionAt790nm) {
  const auto &cal = shipped_db().get("calcite");
  EXPECT_GT(group_index(cal, Axis::Ordinary, 790.8, 20), refractive_index(cal, Axis::Ordinary, 790.8, 20));
  EXPECT_NEAR(group_index(cal, Axis::Ordinary, 790.8, 20), oracle::fd_group_index(cal, Axis::Ordinary, 790.8, 20),
              1e-6);
}

TEST(Materials, AlphaBboThermoOpticEqualsStoredPolynomial) {
  const auto &bbo = shipped_db().get("alpha-BBO");
  EXPECT_DOUBLE_EQ(thermo_optic_coefficient(bbo, Axis::Ordinary, 523.6, 20), -9.3e-6);
  EXPECT_DOUBLE_EQ(thermo_optic_coefficient(bbo, Axis::Extraordinary, 523.6, 20), -16.6e-6);
}

TEST(Materials, MissingThermalModelIsAnError) {
  const auto &ln = shipped_db().get("LiNbO3");
  try {
    thermo_optic_coefficient(ln, Axis::Ordinary, 1000.0, 20);
    FAIL();
  } catch (const DomainError &e) {
    EXPECT_EQ(e.reason(), DomainReason::NoThermalModel);
  }
}

TEST(Materials, LithiumNiobateThermalFormMatchesFiniteDifferenceInT) {
  const auto &ln = shipped_db().get("MgO:LiNbO3");
  const double h = 1e-3;
  const double fd = (refractive_index(ln, Axis::Extraordinary, 1000, 50 + h) -
                     refractive_index(ln, Axis::Extraordinary, 1000, 50 - h)) / (2 * h);
  EXPECT_NEAR(thermo_optic_coefficient(ln, Axis::Extraordinary, 1000, 50), fd, 1e-9);
}

class ShippedAxes : public ::testing::TestWithParam<std::tuple<std::string, Axis>> {};

TEST_P(ShippedAxes, NormalDispersionAcrossVisibleNir) {
  const auto &[name, ax] = GetParam();
  const auto &m = shipped_db().get(name);
  const auto &s = m.axis(ax).sellmeier;
  const double lo = std::max(450.0, s.validity_min_um * 1e3 + 1), hi = std::min(1700.0, s.validity_max_um * 1e3 - 1);
  double prev = refractive_index(m, ax, lo, 25);
  EXPECT_GT(prev, 1.0);
  for (int k = 1; k <= 150; ++k) {
    const double l = lo + (hi - lo) * k / 150.0;
    const double n = refractive_index(m, ax, l, 25);
    EXPECT_LT(n, prev) << name << " at " << l;
    EXPECT_GT(n, 1.0);
    prev = n;
  }
}

TEST_P(ShippedAxes, GroupIndexAgreesWithFiniteDifference) {
  const auto &[name, ax] = GetParam();
  const auto &m = shipped_db().get(name);
  for (double l : {600.0, 800.0, 1100.0, 1550.0}) {
    const double ng = group_index(m, ax, l, 30);
    EXPECT_NEAR(ng / oracle::fd_group_index(m, ax, l, 30, 0.05) - 1.0, 0.0, 1e-5) << name << " " << l;
  }
}

INSTANTIATE_TEST_SUITE_P(All, ShippedAxes,
                         ::testing::Combine(::testing::Values("MgO:LiNbO3", "LiNbO3", "alpha-BBO", "calcite"),
                                            ::testing::Values(Axis::Ordinary, Axis::Extraordinary)));

TEST(Materials, NegativeUniaxialCrystals) {
  for (const char *name : {"calcite", "alpha-BBO"}) {
    const auto &m = shipped_db().get(name);
    for (int k = 0; k <= 120; ++k) {
      const double l = 400.0 + 10.0 * k;
      EXPECT_LT(refractive_index(m, Axis::Extraordinary, l, 20), refractive_index(m, Axis::Ordinary, l, 20)) << name;
    }
  }
}

TEST(Materials, EveryRecordHasProvenance) {
  for (const auto &n : shipped_db().names()) EXPECT_FALSE(shipped_db().get(n).provenance().empty()) << n;
}

TEST(MaterialDatabase, RejectsUnknownKeysAndMaterials) {
  const char *bad = R"([{"name":"x","axis":"o","form":"constant","coefficients":[1.5],"validity_min_um":0.2,
                        "validity_max_um":2,"alpha_per_K":0,"source":"s","colour":"red"}])";
  EXPECT_THROW(MaterialDatabase::parse(bad), Error);
  try {
    shipped_db().get("unobtainium");
    FAIL();
  } catch (const DomainError &e) {
    EXPECT_EQ(e.reason(), DomainReason::UnknownMaterial);
  }
}

TEST(MaterialDatabase, RequiresBothAxes) {
  const char *one = R"([{"name":"x","axis":"o","form":"constant","coefficients":[1.5],"validity_min_um":0.2,
                        "validity_max_um":2,"alpha_per_K":0,"source":"s"}])";
  EXPECT_THROW(MaterialDatabase::parse(one), Error);
}
