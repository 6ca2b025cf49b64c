#include <gtest/gtest.h>

#include <boost/rational.hpp>

#include <cmath>

#include "rstein/mc.hpp"
#include "rstein/subgraph.hpp"
#include "rstein/verify.hpp"

using namespace rstein;

namespace {

std::size_t brute_d(const CopyCatalog& cat, std::size_t i) {
  std::size_t d = 0;
  for (std::size_t j = 0; j < cat.size(); ++j) d += shared_edges(cat.copy(i), cat.copy(j)) > 0;
  return d;
}

}  // namespace

TEST(Pattern, Automorphisms) {
  EXPECT_EQ(PatternGraph::complete(3).automorphisms(), 6U);
  EXPECT_EQ(PatternGraph::complete(2).automorphisms(), 2U);
  EXPECT_EQ(PatternGraph::path(2).automorphisms(), 2U);
  EXPECT_EQ(PatternGraph::cycle(4).automorphisms(), 8U);
  EXPECT_EQ(PatternGraph::complete(4).automorphisms(), 24U);
}

TEST(Pattern, ConstructionAndJson) {
  const PatternGraph g(6, {{5, 2}, {2, 4}}, "wedge");
  EXPECT_EQ(g.vertices(), 3);
  // 2 -> 0, 4 -> 1, 5 -> 2.
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(2, 0));
  EXPECT_FALSE(g.has_edge(1, 2));
  const auto back = pattern_from_json(to_json(g));
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.vertices(), 3);
  EXPECT_EQ(PatternGraph::named("P3").edge_count(), 2);
  EXPECT_THROW(PatternGraph::named("Q7"), DomainError);
  EXPECT_THROW(PatternGraph(3, {{0, 0}}), DomainError);
  EXPECT_THROW(PatternGraph(3, {{0, 1}, {1, 0}}), DomainError);
  EXPECT_THROW(PatternGraph(3, {}), DomainError);
}

TEST(PsiMin, Examples) {
  const auto k3 = PatternGraph::complete(3);
  EXPECT_NEAR(psi_min(k3, 5, 0.5), 12.5, 1e-12);
  EXPECT_NEAR(psi_min(PatternGraph::complete(2), 7, 0.3), 49 * 0.3, 1e-12);
  EXPECT_NEAR(psi_min(PatternGraph::cycle(4), 10, 0.75), 75.0, 1e-9);
}

TEST(PsiMinProperty, Sandwich) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Draw d(41, i);
    const auto g = PatternGraph::named(std::vector<std::string>{"K2", "P3", "K3", "C4", "K4", "P4"}[d.integer(0, 5)]);
    const int n = d.integer(g.vertices(), 60);
    const double p = d.uniform(0.01, 0.99);
    const double psi = psi_min(g, n, p);
    ASSERT_LE(n * double(n) * std::pow(p, g.edge_count()), psi * (1 + 1e-12));
    ASSERT_LE(psi, n * double(n) * p * (1 + 1e-12));
  }
}

TEST(Catalog, CountsAndNeighbourhoods) {
  const CopyCatalog k3(PatternGraph::complete(3), 5, 0.5);
  EXPECT_EQ(k3.size(), 10U);
  EXPECT_EQ(k3.d(), 7U);
  EXPECT_EQ(k3.d(), 3U * (5 - 2) - 3 + 1);
  const CopyCatalog k2(PatternGraph::complete(2), 4, 0.5);
  EXPECT_EQ(k2.size(), 6U);
  // Distinct edges never share an edge, so each copy neighbours only itself.
  EXPECT_EQ(k2.d(), 1U);
  const CopyCatalog c4(PatternGraph::cycle(4), 6, 0.5);
  EXPECT_EQ(c4.size(), 45U);  // 3 * C(6, 4)
}

TEST(CatalogProperty, NeighbourhoodMatchesPairScan) {
  for (const char* name : {"K2", "P3", "K3", "C4", "P4"})
    for (int n = 4; n <= 7; ++n) {
      const CopyCatalog cat(PatternGraph::named(name), n, 0.4);
      for (std::size_t i = 0; i < cat.size(); ++i) ASSERT_EQ(cat.neighbors(i).size(), brute_d(cat, i));
    }
  const CopyCatalog k3(PatternGraph::complete(3), 9, 0.4);
  EXPECT_EQ(k3.d(), 3U * 9 - 8);
}

TEST(Catalog, CapExceeded) {
  EXPECT_THROW(CopyCatalog(PatternGraph::complete(3), 200, 0.5, 1000), CapExceeded);
  EXPECT_THROW(CopyCatalog(PatternGraph::complete(3), 5, 1.0), DomainError);
}

TEST(Sigma2, Examples) {
  const CopyCatalog one(PatternGraph::complete(2), 2, 0.3);
  EXPECT_NEAR(sigma2_exact(one), 0.3 * 0.7, 1e-15);
  const CopyCatalog k3(PatternGraph::complete(3), 4, 0.5);
  EXPECT_NEAR(sigma2_exact(k3), sigma2_bruteforce(k3), 1e-12);
}

TEST(Sigma2Property, TriangleClosedForm) {
  for (int n : {4, 7, 12, 20})
    for (double p : {0.1, 0.5, 0.9}) {
      const CopyCatalog cat(PatternGraph::complete(3), n, p);
      const double big_n = binomial(n, 3);
      const double want = big_n * (std::pow(p, 3) - std::pow(p, 6)) +
                          3.0 * big_n * (n - 3) * (std::pow(p, 5) - std::pow(p, 6));
      ASSERT_NEAR(sigma2_exact(cat), want, 1e-10 * want);
    }
}

TEST(Sigma2Property, BruteForceAgreement) {
  EXPECT_TRUE(sigma2_suite().passed());
}

TEST(Sigma2Property, LowerBoundAtCertifiedSize) {
  for (double p : {0.1, 0.3, 0.5, 0.9}) {
    const auto in = make_bound_inputs(CopyCatalog(PatternGraph::complete(3), 36, p));
    EXPECT_TRUE(in.size_certified());
    EXPECT_GE(in.sigma2, in.sigma2_lower_bound()) << p;
  }
  const auto small = make_bound_inputs(CopyCatalog(PatternGraph::complete(3), 20, 0.3));
  EXPECT_FALSE(small.size_certified());
}

TEST(Constants, TriangleValues) {
  const auto k3 = PatternGraph::complete(3);
  const double want = std::pow(2.0, 27) * 1296.0 * 3.0 / std::pow(6.0, 1.5);
  EXPECT_NEAR(c_g0(k3) / want, 1.0, 1e-13);
  EXPECT_NEAR(c_g0(k3), 3.55e10, 0.01e10);
  EXPECT_NEAR(c_hat_g0(k3), std::sqrt(2.0) * std::sqrt(6.0) * 9.0 * 3.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(c_k(k3, 1), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(c_k(k3, 2), 6.0 * 8.0 / 36.0, 1e-13);
}

TEST(Constants, CorollaryConstantTwoWays) {
  const auto k2 = PatternGraph::complete(2);
  // Direct evaluation: c_G0 = 2^{12} (2!)^4 1 / 2^{1.5}, c_hat = sqrt2 sqrt2 4 / sqrt2.
  const double cg = std::pow(2.0, 12) * 16.0 / std::pow(2.0, 1.5);
  const double ch = 4.0 * std::sqrt(2.0);
  const double direct = std::log(100.0 * 2.0 * cg) + 5.0 * ch + cg;
  EXPECT_NEAR(log_corollary_constant(k2, 1.0, 1.0) / direct, 1.0, 1e-14);
}

TEST(TheoremBound, Examples) {
  const auto in = make_bound_inputs(CopyCatalog(PatternGraph::complete(3), 36, 0.3));
  const auto b0 = theorem_bound(in, 0.0);
  EXPECT_NEAR(b0.rhs, 50.0 * c_g0(in.pattern) / std::sqrt(in.q() * in.psi_min), 1e-10 * b0.rhs);
  EXPECT_FALSE(b0.informative);
  EXPECT_TRUE(b0.certified);
  double prev = -INFINITY;
  for (double t = 0.0; t <= 2.0; t += 0.1) {
    const auto b = theorem_bound(in, t);
    EXPECT_GE(b.log_rhs, prev);
    prev = b.log_rhs;
  }
}

TEST(CorollaryBound, Admissibility) {
  const auto in = make_bound_inputs(CopyCatalog(PatternGraph::complete(2), 40, 0.5));
  const auto b0 = corollary_bound(in, 0.0, 1.0, 1.0);
  EXPECT_NEAR(b0.log_rhs, log_corollary_constant(in.pattern, 1.0, 1.0) - 0.5 * std::log(in.q() * in.psi_min),
              1e-12);
  EXPECT_EQ(b0.size_ok, in.n >= 16);
  const double lim = corollary_t_limit(in, 1.0);
  EXPECT_TRUE(corollary_bound(in, lim, 1.0, 1e300).range_ok);
  EXPECT_FALSE(corollary_bound(in, std::nextafter(lim, INFINITY) * (1 + 1e-12), 1.0, 1e300).range_ok);
  EXPECT_THROW(corollary_bound(in, 0.0, 0.0, 1.0), DomainError);
}

TEST(Zhang, Branches) {
  const double psi = 100.0, t = 0.7;
  const auto lo = zhang_bound(psi, 10, 0.25, t);
  ASSERT_TRUE(lo.piecewise.has_value());
  EXPECT_NEAR(*lo.piecewise, (1 + t * t) * (1 + t) / std::sqrt(psi), 1e-15);
  const double r = lo.simplified / *lo.piecewise;
  EXPECT_GE(r, 1.0);
  EXPECT_LE(r, 2.0 * 2.0);
  EXPECT_FALSE(zhang_bound(psi, 10, 0.5, t).piecewise.has_value());
  // Psi_min = n^2 p for p > 1/2 on a single edge pattern.
  EXPECT_NEAR(psi_min(PatternGraph::complete(2), 10, 0.75), 75.0, 1e-12);
}

TEST(ZhangProperty, SimplifiedWithinFactorTwoBelowHalf) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Draw d(42, i);
    const double p = d.uniform(0.01, 0.49), t = d.uniform(0.0, 3.0), psi = d.uniform(1.0, 1e4);
    const auto z = zhang_bound(psi, 10, p, t);
    // piecewise <= simplified/2 <= 2 piecewise, i.e. (1+t)/sqrt(psi) <= (1+t/sqrt q)/sqrt(q psi) <= 2 (1+t)/sqrt(psi).
    const double half = z.simplified / 2.0;
    ASSERT_LE(*z.piecewise, half * (1 + 1e-12));
    ASSERT_LE(half, 2.0 * *z.piecewise * (1 + 1e-12)) << p << " " << t;
  }
}

TEST(Zhang, RateAdvantageAsQVanishes) {
  for (double p : {0.9, 0.99}) {
    const double q = 1.0 - p;
    const double ratio = zhang_rate(100.0, p, 1.0) / corollary_rate(100.0, p, 1.0);
    EXPECT_NEAR(ratio, (1 + 1 / std::sqrt(q)), 1e-12);
  }
  EXPECT_NEAR(zhang_rate(1.0, 0.9, 1.0) / corollary_rate(1.0, 0.9, 1.0), 4.16227766, 1e-8);
  EXPECT_NEAR(zhang_rate(1.0, 0.99, 1.0) / corollary_rate(1.0, 0.99, 1.0), 11.0, 1e-12);
}

TEST(Lemma51, SingletonAndOutside) {
  const double p = 0.3, spq = std::sqrt(p * 0.7);
  const auto v = lemma51_operators(bit(2), 2, 0, p);
  EXPECT_DOUBLE_EQ(v.grad, spq);
  EXPECT_DOUBLE_EQ(v.neg_grad_inv, spq);
  const auto z = lemma51_operators(bit(2), 1, ~Subset{0}, p);
  EXPECT_EQ(z.grad, 0.0);
  EXPECT_EQ(z.neg_grad_inv, 0.0);
}

TEST(Lemma51Property, ClosedFormMatchesGenericChain) {
  const auto r = lemma51_suite(60, 43, 10, 11);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(Lemma51, CenteredIndicatorExpansion) {
  // Values of the Walsh form equal 1{A in x} - p^{|A|}.
  const double p = 0.35;
  const Subset a = 0b1011;
  const auto v = values_table(centered_indicator_walsh(a, 5, p));
  for (Subset x = 0; x < 32; ++x) EXPECT_NEAR(v[x], b_of(a, x) - std::pow(p, 3), 1e-14);
}

TEST(Remark52, RationalWeightsSumToOne) {
  using R = boost::rational<long long>;
  for (long long a = 1; a <= 12; ++a) {
    R sum = 0;
    for (long long i = 0; i < a; ++i) {
      const auto c = static_cast<long long>(binomial(static_cast<unsigned>(a - 1), static_cast<unsigned>(i)));
      sum += R(c, a * c);
    }
    EXPECT_EQ(sum, R(1));
    EXPECT_NEAR(remark52_weight_sum(static_cast<int>(a)), 1.0, 1e-14);
  }
}

TEST(Lemma53, Examples) {
  const double p = 0.4;
  EXPECT_NEAR(centered_product_moments({0b0011, 0b1100}, p).signed_mean, 0.0, 1e-16);
  EXPECT_NEAR(centered_product_moments({0b1, 0b1}, p).signed_mean, p * (1 - p), 1e-15);
  EXPECT_TRUE(lemma53_check(0b0011, 0b1100, 0b0110, {0b1, 0b11}, p).all());
}

TEST(Lemma53, ThirdMomentNegativeAboveHalf) {
  // E[(B - p)^3] = pq(q - p) < 0 for p > 1/2.
  for (double p : {0.6, 0.9}) {
    const auto r = lemma53_check(0b1, 0b1, 0b1, {0b1}, p);
    EXPECT_NEAR(r.third_moment, p * (1 - p) * (1 - 2 * p), 1e-15);
    EXPECT_FALSE(r.part3_lower);
    EXPECT_TRUE(r.part3_upper);
    EXPECT_TRUE(r.part1 && r.part2 && r.part4);
  }
  EXPECT_TRUE(lemma53_check(0b1, 0b1, 0b1, {0b1}, 0.4).part3_lower);
}

TEST(Lemma53Property, UpperHalvesAndSmallP) {
  EXPECT_TRUE(lemma53_suite(500, 44, 14, Lemma53Scope::third_upper).passed());
  EXPECT_TRUE(lemma53_suite(500, 45, 14, Lemma53Scope::third_lower_small_p).passed());
}

TEST(Lemma53Property, PartsOneTwoFourAlwaysHold) {
  for (std::uint64_t i = 0; i < 500; ++i) {
    Draw d(46, i);
    const auto host = static_cast<std::size_t>(d.integer(1, 12));
    const Subset a1 = d.subset(host, 0.4), a2 = d.subset(host, 0.4), a3 = d.subset(host, 0.4);
    const double p = d.uniform(0.02, 0.98);
    const auto r = lemma53_check(a1, a2, a3, {a1, a3}, p);
    ASSERT_TRUE(r.part1 && r.part2 && r.part4);
  }
}

TEST(Lemma55, TriangleSingleCopy) {
  const auto r = lemma55_check(PatternGraph::complete(3), 5, 0.5, 1, 1);
  EXPECT_NEAR(r.lhs1, 10 * 0.125, 1e-15);
  EXPECT_NEAR(r.rhs1, 125.0 * 0.125 / 6.0, 1e-12);
  EXPECT_TRUE(r.holds());
}

TEST(Lemma55, PairsOfEdges) {
  // K2 copies are connected only to themselves: 6 ordered pairs (G, G).
  const CopyCatalog cat(PatternGraph::complete(2), 4, 0.5);
  EXPECT_EQ(connected_unions(cat, 2).size(), 6U);
  const CopyCatalog k3(PatternGraph::complete(3), 5, 0.5);
  EXPECT_EQ(connected_unions(k3, 2).size(), 10U * 7U);
}

TEST(Lemma55Property, Grid) { EXPECT_TRUE(lemma55_suite().passed()); }

TEST(Lemma56, EmptyConditioningIsEquality) {
  const CopyCatalog cat(PatternGraph::complete(3), 4, 0.4);
  NonnegPolynomial f;
  f.terms.push_back({1.0, {}});
  const auto r = lemma56_check(cat, {}, {}, f, 0.5);
  EXPECT_NEAR(r.lhs1, r.rhs1, 1e-12 * r.rhs1);
  EXPECT_TRUE(r.holds());
}

TEST(Lemma56Property, Randomized) {
  const auto r = lemma56_suite(60, 47);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(UkDecomposition, MeanIsOne) { EXPECT_TRUE(uk_suite().passed()); }

TEST(SubgraphSampler, StandardizedMoments) {
  const CopyCatalog cat(PatternGraph::complete(3), 36, 0.3);
  const double s2 = sigma2_exact(cat);
  const McConfig cfg{8, 100000, 4};
  const auto acc = run_chunks(SubgraphSampler(cat, s2), cfg, MomentAccumulator{});
  const double se = std::sqrt(acc.variance() / 1e5);
  EXPECT_NEAR(acc.mean, 0.0, 3 * se);
  // SE of the sample variance for a near-Gaussian variable is about sqrt(2/n).
  EXPECT_NEAR(acc.variance(), 1.0, 3 * std::sqrt(2.0 / 1e5) * 1.5);
}

TEST(SubgraphSampler, EdgeProbability) {
  const CopyCatalog cat(PatternGraph::complete(2), 2, 0.37);
  const McConfig cfg{9, 200000, 1};
  const auto acc = run_chunks(SubgraphSampler(cat, 0.37 * 0.63), cfg, MomentAccumulator{});
  EXPECT_NEAR(acc.mean, 0.0, 4.0 / std::sqrt(2e5));
}
