#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rstein/verify.hpp"
#include "rstein/walsh.hpp"

using namespace rstein;

namespace {

RademacherSpace half(std::size_t n) { return RademacherSpace::symmetric(n); }

// F_k^{+/-} evaluated pointwise from the value table; independent of the
// subset-deletion shortcut used by gradient().
std::vector<double> gradient_by_substitution(const WalshFunctional& f, std::size_t k) {
  const auto v = values_table(f);
  const Subset b = bit(k);
  std::vector<double> out(v.size());
  for (std::size_t x = 0; x < v.size(); ++x)
    out[x] = f.space().sqrt_pq(k) * (v[x | b] - v[x & ~b]);
  return out;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::fabs(a[i] - b[i]));
  return g;
}

}  // namespace

TEST(Walsh, EvaluateExamples) {
  const auto s = half(2);
  const int pp[] = {1, 1}, pm[] = {1, -1};
  EXPECT_EQ(evaluate(WalshFunctional::constant(s, 3.0), pp), 3.0);
  EXPECT_DOUBLE_EQ(evaluate(WalshFunctional::coordinate(s, 0), pp), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(WalshFunctional::monomial(s, 0b11), pm), -1.0);
}

TEST(Walsh, StandardizedCoordinates) {
  const RademacherSpace s({0.3, 0.8});
  const auto y1 = WalshFunctional::coordinate(s, 0);
  EXPECT_NEAR(expectation(y1), 0.0, 1e-15);
  EXPECT_NEAR(expectation(y1, y1), 1.0, 1e-15);
  const auto y12 = WalshFunctional::monomial(s, 0b11);
  EXPECT_NEAR(expectation(y12, y12), 1.0, 1e-14);
}

TEST(Walsh, SquareReduction) {
  for (double p : {0.1, 0.5, 0.77}) {
    const RademacherSpace s({p});
    const auto y = WalshFunctional::coordinate(s, 0);
    const auto sq = multiply(y, y);
    EXPECT_NEAR(sq.coefficient(0), 1.0, 1e-15);
    EXPECT_NEAR(sq.coefficient(1), (1.0 - 2.0 * p) / std::sqrt(p * (1.0 - p)), 1e-14);
  }
}

TEST(Walsh, GradientExamples) {
  const RademacherSpace s({0.4, 0.6});
  EXPECT_TRUE(gradient(WalshFunctional::constant(s, 2.0), 0).coefficients().empty());
  const auto d = gradient(WalshFunctional::coordinate(s, 0), 0);
  EXPECT_EQ(d.coefficient(0), 1.0);
  const auto d12 = gradient(WalshFunctional::monomial(s, 0b11), 0);
  EXPECT_EQ(d12.coefficient(0b10), 1.0);
  EXPECT_EQ(d12.coefficients().size(), 1U);
}

TEST(Walsh, OrnsteinUhlenbeckExamples) {
  const auto s = half(2);
  const auto y1 = WalshFunctional::coordinate(s, 0);
  const auto y12 = WalshFunctional::monomial(s, 0b11);
  EXPECT_EQ(ou_inverse(y1).coefficient(1), -1.0);
  EXPECT_EQ(ou_inverse(y12).coefficient(0b11), -0.5);
  EXPECT_EQ((-gradient(ou_inverse(y12), 0)).coefficient(0b10), 0.5);
  EXPECT_TRUE(ou_operator(WalshFunctional::constant(s, 4.0)).coefficients().empty());
  EXPECT_EQ(ou_operator(y12).coefficient(0b11), -2.0);

  bool dropped = false;
  ou_inverse(WalshFunctional::constant(s, 1.0) + y1, &dropped);
  EXPECT_TRUE(dropped);
}

TEST(Walsh, DivergenceExamples) {
  const auto s = half(2);
  CoordinateField u(s, {WalshFunctional::constant(s, 1.0), WalshFunctional(s)});
  const auto d = divergence(u);
  EXPECT_EQ(d.coefficient(0b01), 1.0);
  EXPECT_EQ(d.coefficients().size(), 1U);

  const auto f = WalshFunctional::monomial(s, 0b11);
  const auto gap = divergence(gradient_field(f)) + ou_operator(f);
  EXPECT_TRUE(gap.coefficients().empty());

  CoordinateField bad(s, {WalshFunctional::coordinate(s, 0), WalshFunctional(s)});
  EXPECT_THROW(divergence(bad), DomainError);
  EXPECT_NO_THROW(divergence(bad, DivergenceForm::general));
}

TEST(Walsh, SteinInnerExamples) {
  const auto s = half(2);
  const auto y1 = stein_inner(WalshFunctional::coordinate(s, 0));
  EXPECT_EQ(y1.coefficient(0), 1.0);
  EXPECT_EQ(y1.coefficients().size(), 1U);
  const auto y12 = stein_inner(WalshFunctional::monomial(s, 0b11));
  EXPECT_DOUBLE_EQ(y12.coefficient(0), 1.0);
  EXPECT_EQ(y12.coefficients().size(), 1U);
}

TEST(Walsh, ValuesTableRoundTrip) {
  Draw d(11, 0);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_space(d, 1, 9);
    const auto f = random_functional(d, s, false);
    const auto back = from_values(s, values_table(f));
    EXPECT_LE(max_abs_coefficient(back - f), 1e-12);
  }
}

TEST(Walsh, ValuesTableMatchesPointwiseEvaluation) {
  Draw d(12, 0);
  const auto s = random_space(d, 5, 5);
  const auto f = random_functional(d, s, false, 20);
  const auto v = values_table(f);
  for (std::size_t x = 0; x < v.size(); ++x) {
    std::vector<int> signs(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) signs[k] = (x >> k) & 1U ? 1 : -1;
    EXPECT_NEAR(v[x], evaluate(f, signs), 1e-12);
  }
}

TEST(WalshProperty, GradientMatchesSubstitution) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Draw d(13, i);
    const auto s = random_space(d, 1, 8);
    const auto f = random_functional(d, s, false);
    for (std::size_t k = 0; k < s.size(); ++k)
      ASSERT_LE(max_gap(values_table(gradient(f, k)), gradient_by_substitution(f, k)), 1e-11);
  }
}

TEST(WalshProperty, MultiplyMatchesPointwiseProduct) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Draw d(14, i);
    const auto s = random_space(d, 1, 8);
    const auto f = random_functional(d, s, false), g = random_functional(d, s, false);
    auto vf = values_table(f);
    const auto vg = values_table(g);
    for (std::size_t x = 0; x < vf.size(); ++x) vf[x] *= vg[x];
    ASSERT_LE(max_gap(values_table(multiply(f, g)), vf), 1e-10);
  }
}

TEST(WalshProperty, DerivativeIndependentOfOwnCoordinate) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Draw d(15, i);
    const auto s = random_space(d, 1, 8);
    const auto f = random_functional(d, s, false);
    for (std::size_t k = 0; k < s.size(); ++k) ASSERT_FALSE(gradient(f, k).depends_on(k));
  }
}

TEST(WalshProperty, ChaosDecompositionSums) {
  Draw d(16, 0);
  const auto s = random_space(d, 6, 6);
  const auto f = random_functional(d, s, false, 30);
  WalshFunctional sum(s);
  for (int m = 0; m <= f.degree(); ++m) sum += f.chaos(m);
  EXPECT_EQ(max_abs_coefficient(sum - f), 0.0);
}

TEST(WalshProperty, CoreIdentitiesHold) {
  for (const auto& r : verify_core(300, 17)) EXPECT_TRUE(r.passed()) << r.name << " " << r.counterexample;
}

TEST(WalshProperty, NegatedInverseIsCaught) {
  const auto rs = verify_core(30, 18, OperatorSet::negated_inverse());
  EXPECT_FALSE(all_passed(rs));
}

TEST(Walsh, VarianceIsSumOfSquares) {
  const RademacherSpace s({0.2, 0.9, 0.5});
  WalshFunctional f(s);
  f.add_term(0, 5.0);
  f.add_term(0b101, 2.0);
  f.add_term(0b010, -1.0);
  const double ef = expectation(f);
  const double ef2 = expectation(f, f);
  EXPECT_NEAR(ef, 5.0, 1e-13);
  EXPECT_NEAR(ef2 - ef * ef, f.variance(), 1e-12);
  EXPECT_EQ(f.variance(), 5.0);
}

TEST(Walsh, JsonRoundTrip) {
  const RademacherSpace s({0.25, 0.5, 0.75});
  WalshFunctional f(s);
  f.add_term(0b011, 0.5);
  f.add_term(0b100, -1.25);
  const auto g = walsh_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_EQ(g.space(), f.space());
  EXPECT_EQ(g.coefficients(), f.coefficients());
}

TEST(Walsh, Errors) {
  EXPECT_THROW(RademacherSpace({1.0}), DomainError);
  EXPECT_THROW(RademacherSpace(std::vector<double>{}), DomainError);
  const auto s = half(2);
  EXPECT_THROW(WalshFunctional(s, {{0b100, 1.0}}), DomainError);
  EXPECT_THROW(gradient(WalshFunctional(s), 5), DomainError);
  EXPECT_THROW(expectation(WalshFunctional(s), WalshFunctional(half(3))), DomainError);
  EXPECT_THROW(values_table(WalshFunctional(half(21))), CapExceeded);
  const int bad[] = {1, 0};
  EXPECT_THROW(evaluate(WalshFunctional(s), bad), DomainError);
}
