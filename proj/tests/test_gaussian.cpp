#include <gtest/gtest.h>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>

#include "rstein/gaussian.hpp"
#include "rstein/verify.hpp"

using namespace rstein;
using boost::multiprecision::cpp_bin_float_50;

namespace {

double tail50(double w) {
  const cpp_bin_float_50 x = w;
  return static_cast<double>(boost::math::erfc(x / boost::multiprecision::sqrt(cpp_bin_float_50(2))) / 2);
}

// Laplace continued fraction for the Mills ratio, 50 terms.
double mills_cf50(double w) {
  cpp_bin_float_50 x = w, tail = 0;
  for (int k = 50; k >= 1; --k) tail = k / (x + tail);
  return static_cast<double>(1 / (x + tail));
}

}  // namespace

TEST(Gaussian, TailMatchesHighPrecisionOracle) {
  double worst = 0.0;
  for (int i = 0; i <= 800; ++i) {
    const double w = 0.01 * i;
    const double ref = tail50(w);
    worst = std::max(worst, std::fabs(normal::upper_tail(w) - ref) / ref);
  }
  EXPECT_LE(worst, 1e-13);
}

TEST(Gaussian, CdfAndTailAreComplementary) {
  for (double w : {-3.0, -0.5, 0.0, 0.7, 2.5})
    EXPECT_NEAR(normal::cdf(w) + normal::upper_tail(w), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(normal::cdf(0.0), 0.5);
}

TEST(Gaussian, MillsRatioMatchesContinuedFraction) {
  for (double w = 4.0; w <= 40.0; w += 0.5)
    EXPECT_NEAR(normal::mills_ratio(w) / mills_cf50(w), 1.0, 1e-12) << w;
}

TEST(Gaussian, MillsRatioAsymptotics) {
  EXPECT_TRUE(normal::mills_bound_check(1.0));
  EXPECT_TRUE(normal::mills_bound_check(0.1));
  EXPECT_TRUE(normal::mills_bound_check(8.0));
  EXPECT_NEAR(normal::mills_ratio(8.0) * 8.0, 1.0, 0.02);
  EXPECT_THROW(normal::mills_bound_check(0.0), DomainError);
}

TEST(Gaussian, SteinSolutionExamples) {
  EXPECT_NEAR(normal::stein_solution(0.0, 0.0), 0.25 * normal::kSqrt2Pi, 1e-15);
  for (double z : {-2.0, 0.0, 1.3}) {
    const double left = normal::stein_solution(z, z);
    const double right = normal::stein_solution(z, std::nextafter(z, INFINITY));
    EXPECT_NEAR(left, right, 1e-12);
  }
}

TEST(Gaussian, SteinEquationHolds) {
  // f'(w) - w f(w) = 1{w <= z} - Phi(z), checked by central differences away from z.
  const double h = 1e-5;
  for (double z : {-1.0, 0.5, 2.0})
    for (double w : {-3.0, -0.4, 0.2, 1.1, 3.0}) {
      if (std::fabs(w - z) < 0.1) continue;
      const double d = (normal::stein_solution(z, w + h) - normal::stein_solution(z, w - h)) / (2 * h);
      const double lhs = d - w * normal::stein_solution(z, w);
      const double rhs = (w <= z ? 1.0 : 0.0) - normal::cdf(z);
      EXPECT_NEAR(lhs, rhs, 1e-7) << z << " " << w;
    }
}

TEST(Gaussian, TailExponentialBound) {
  EXPECT_TRUE(normal::tail_exponential_bound_check(0.5));
  EXPECT_TRUE(normal::tail_exponential_bound_check(3.0));
  EXPECT_TRUE(normal::tail_exponential_bound_check(1e-9));
  EXPECT_LE(1.0, normal::kSqrt2Pi / 2.0);
}

TEST(GaussianProperty, MonotoneTailAndMills) {
  double prev_tail = 1.0, prev_mills = INFINITY;
  for (int i = -800; i <= 800; ++i) {
    const double w = 0.01 * i;
    const double t = normal::upper_tail(w);
    // Below w = -5 the tail rounds to 1.
    if (w > -5.0) {
      EXPECT_LT(t, prev_tail);
    }
    EXPECT_LE(t, prev_tail);
    prev_tail = t;
    if (w > 0.0) {
      const double m = normal::mills_ratio(w);
      EXPECT_LT(m, prev_mills);
      prev_mills = m;
    }
  }
}

TEST(GaussianProperty, BoundsOnGrid) {
  const auto g = gaussian_grid(200, -8.0, 8.0);
  EXPECT_EQ(g.points, 40000U);
  EXPECT_EQ(g.abs_f_left, 0U);
  EXPECT_EQ(g.abs_wf_left, 0U);
  EXPECT_EQ(g.abs_wf_right, 0U);
  EXPECT_EQ(g.mills, 0U);
  // |f_z(w)| <= sqrt(2pi)/2 Phi(z) for w > z only fails when z < 0.
  EXPECT_EQ(g.abs_f_right, g.abs_f_right_negative_z);
  EXPECT_GT(g.abs_f_right_negative_z, 0U);
}

TEST(GaussianProperty, RightBoundCounterexample) {
  // z = -2, w = -1: f = Phi(-2)(1 - Phi(-1))/p(-1) exceeds sqrt(2pi)/2 Phi(-2).
  const auto s = normal::stein_bounds(-2.0, -1.0);
  EXPECT_FALSE(s.abs_f_right);
  EXPECT_TRUE(normal::stein_bounds(1.0, 2.0).all());
}
