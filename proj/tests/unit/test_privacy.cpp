#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace acfl;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(EpsilonOf, UnitVarianceClosedForm) {
  // (d − ½)·ln 2 + (o/2)·ln 2 with d = o = 10.
  EXPECT_NEAR(epsilon_of(NoiseParams::equal(1.0), 10, 10).epsilon, 14.5 * std::log(2.0), 1e-12);
}

TEST(EpsilonOf, VanishesForHugeNoise) {
  EXPECT_LT(epsilon_of(NoiseParams::equal(1e9), 1, 1).epsilon, 1e-8);
  // ε·σ² → d − ½ + o/2 as σ² grows.
  EXPECT_NEAR(epsilon_of(NoiseParams::equal(1e9), 10, 10).epsilon * 1e9, 14.5, 1e-6);
}

TEST(EpsilonOf, IsolatesFeatureTermWhenLabelNoiseInfinite) {
  const double s1 = 0.7;
  EXPECT_NEAR(epsilon_of(NoiseParams{s1, kInf}, 1, 2).epsilon, 0.5 * std::log((1 + s1) / s1),
              1e-15);
}

TEST(EpsilonOf, MixedVariances) {
  const double s1 = 0.3;
  const double s2 = 5.0;
  const double expect = 3.5 * std::log((1 + s1) / s1) + 1.0 * std::log((1 + s2) / s2);
  EXPECT_NEAR(epsilon_of(NoiseParams{s1, s2}, 4, 2).epsilon, expect, 1e-12);
}

TEST(EpsilonOf, ZeroOrNegativeVarianceRejected) {
  EXPECT_THROW(epsilon_of(NoiseParams{0.0, 1.0}, 3, 3), ParameterError);
  EXPECT_THROW(epsilon_of(NoiseParams{1.0, 0.0}, 3, 3), ParameterError);
  EXPECT_THROW(epsilon_of(NoiseParams{-1.0, 1.0}, 3, 3), ParameterError);
  EXPECT_THROW(epsilon_of(NoiseParams::equal(1.0), 0, 3), ParameterError);
  EXPECT_THROW(epsilon_of(NoiseParams::equal(1.0), 3, 0), ParameterError);
}

TEST(EpsilonOf, StrictlyDecreasingInVariance) {
  const auto grid = log_grid(1e-3, 1e6, 50);
  double prev = kInf;
  for (double s : grid) {
    const double e = epsilon_of(NoiseParams::equal(s), 10, 10).epsilon;
    EXPECT_LT(e, prev) << "sigma_sq " << s;
    prev = e;
  }
}

TEST(SigmaForEpsilon, InvertsUnitVariance) {
  const NoiseParams n = sigma_for_epsilon({14.5 * std::log(2.0)}, 10, 10);
  EXPECT_NEAR(n.sigma1_sq, 1.0, 1e-12);
  EXPECT_EQ(n.sigma1_sq, n.sigma2_sq);
}

TEST(SigmaForEpsilon, RoundTrip) {
  for (double eps : log_grid(1e-3, 1e3, 40)) {
    const NoiseParams n = sigma_for_epsilon({eps}, 7, 3);
    EXPECT_NEAR(epsilon_of(n, 7, 3).epsilon / eps, 1.0, 1e-9) << "eps " << eps;
  }
}

TEST(SigmaForEpsilon, Limits) {
  EXPECT_LT(sigma_for_epsilon({1e3}, 10, 10).sigma1_sq, 1e-20);
  EXPECT_GT(sigma_for_epsilon({1e-6}, 10, 10).sigma1_sq, 1e6);
}

TEST(SigmaForEpsilon, NonPositiveTargetRejected) {
  EXPECT_THROW(sigma_for_epsilon({0.0}, 10, 10), ParameterError);
  EXPECT_THROW(sigma_for_epsilon({-1.0}, 10, 10), ParameterError);
}
