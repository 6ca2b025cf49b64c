#pragma once

// Randomized property suites over the exact operators and the subgraph
// lemmas. Each property reports how many instances it ran, how many failed and
// the first counterexample. The operator set is swappable so that a mutated
// operator can be shown to be caught.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rstein/gaussian.hpp"
#include "rstein/numeric.hpp"
#include "rstein/rng.hpp"
#include "rstein/subgraph.hpp"
#include "rstein/walsh.hpp"

namespace rstein {

struct PropertyResult {
  explicit PropertyResult(std::string property) : name(std::move(property)) {}

  std::string name;
  std::uint64_t instances = 0;
  std::uint64_t failures = 0;
  double worst = 0.0;  // largest observed error, where meaningful
  nlohmann::json counterexample;

  bool passed() const { return failures == 0; }
  void record(bool ok, double err, const std::function<nlohmann::json()>& describe) {
    ++instances;
    worst = std::max(worst, err);
    if (!ok) {
      if (failures == 0) counterexample = describe();
      ++failures;
    }
  }
};

inline bool all_passed(const std::vector<PropertyResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const auto& r) { return r.passed(); });
}

// Uniform helpers on a Philox stream.
class Draw {
 public:
  Draw(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  // Integer in [lo, hi].
  int integer(int lo, int hi) {
    return lo + static_cast<int>(rng_.uniform() * (hi - lo + 1));
  }
  bool coin(double p = 0.5) { return rng_.uniform() < p; }
  Subset subset(std::size_t n, double density) {
    Subset s = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (coin(density)) s |= bit(k);
    return s;
  }
  // Uniform subset of {0..n-1} with exactly m elements.
  Subset subset_of_size(std::size_t n, int m) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Subset s = 0;
    for (int i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(integer(i, static_cast<int>(n) - 1));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      s |= bit(idx[static_cast<std::size_t>(i)]);
    }
    return s;
  }
  Philox& rng() { return rng_; }

 private:
  Philox rng_;
};

inline RademacherSpace random_space(Draw& d, int n_lo, int n_hi, double p_lo = 0.1, double p_hi = 0.9) {
  const int n = d.integer(n_lo, n_hi);
  std::vector<double> probs(static_cast<std::size_t>(n));
  for (double& p : probs) p = d.uniform(p_lo, p_hi);
  return RademacherSpace(std::move(probs));
}

// Sparse functional with up to `terms` random monomials.
inline WalshFunctional random_functional(Draw& d, const RademacherSpace& space, bool centered,
                                         int terms = 10) {
  WalshFunctional f(space);
  const int count = d.integer(1, terms);
  for (int i = 0; i < count; ++i) {
    Subset s = d.subset(space.size(), d.uniform(0.1, 0.6));
    if (centered && s == 0) s = bit(static_cast<std::size_t>(d.integer(0, static_cast<int>(space.size()) - 1)));
    f.add_term(s, d.uniform(-2.0, 2.0));
  }
  if (!centered) f.add_term(0, d.uniform(-1.0, 1.0));
  return f;
}

inline CoordinateField random_field(Draw& d, const RademacherSpace& space, bool admissible) {
  std::vector<WalshFunctional> entries;
  for (std::size_t k = 0; k < space.size(); ++k) {
    WalshFunctional u(space);
    const int count = d.integer(0, 4);
    for (int i = 0; i < count; ++i) {
      Subset s = d.subset(space.size(), 0.3);
      if (admissible) s &= ~bit(k);
      u.add_term(s, d.uniform(-1.0, 1.0));
    }
    entries.push_back(std::move(u));
  }
  return CoordinateField(space, std::move(entries));
}

// ---------------------------------------------------------------------------
// Core operator identities.

struct OperatorSet {
  std::function<WalshFunctional(const WalshFunctional&)> ou_inverse;
  std::function<WalshFunctional(const WalshFunctional&)> ou_operator;

  static OperatorSet standard() {
    return {[](const WalshFunctional& f) { return rstein::ou_inverse(f); },
            [](const WalshFunctional& f) { return rstein::ou_operator(f); }};
  }
  // L^{-1} with its sign flipped.
  static OperatorSet negated_inverse() {
    return {[](const WalshFunctional& f) { return -rstein::ou_inverse(f); },
            [](const WalshFunctional& f) { return rstein::ou_operator(f); }};
  }
};

inline double max_abs_coefficient(const WalshFunctional& f) {
  double m = 0.0;
  for (const auto& [s, c] : f.coefficients()) m = std::max(m, std::fabs(c));
  return m;
}

inline constexpr double kIdentityTolerance = 1e-9;

// Runs `cases` random instances per property; spaces have 2..max_n coordinates.
inline std::vector<PropertyResult> verify_core(std::uint64_t cases, std::uint64_t seed,
                                               const OperatorSet& ops = OperatorSet::standard(),
                                               int max_n = 10) {
  PropertyResult adj{"adjointness E<DF,u> = E[F delta(u)]"};
  PropertyResult adj_general{"adjointness, general divergence"};
  PropertyResult ldelta{"L = -delta D"};
  PropertyResult inverse{"L L^{-1} F = F for centered F"};
  PropertyResult inner{"E<DF,-DL^{-1}F> = Var F"};
  PropertyResult ortho{"chaos orthogonality E[Y_S Y_T]"};
  PropertyResult dd{"D_k D_k F = 0"};

  for (std::uint64_t i = 0; i < cases; ++i) {
    Draw d(seed, i);
    const auto space = random_space(d, 2, max_n);
    const auto f = random_functional(d, space, false);
    const auto fc = random_functional(d, space, true);

    const auto u = random_field(d, space, true);
    double err = std::fabs(expected_pairing(f, u) - expectation(f, divergence(u)));
    adj.record(err <= kIdentityTolerance, err, [&] {
      return nlohmann::json{{"F", to_json(f)}, {"gap", err}};
    });

    const auto ug = random_field(d, space, false);
    err = std::fabs(expected_pairing(f, ug) - expectation(f, divergence(ug, DivergenceForm::general)));
    adj_general.record(err <= kIdentityTolerance, err, [&] {
      return nlohmann::json{{"F", to_json(f)}, {"gap", err}};
    });

    err = max_abs_coefficient(ops.ou_operator(fc) + divergence(gradient_field(fc)));
    ldelta.record(err <= kIdentityTolerance, err, [&] {
      return nlohmann::json{{"F", to_json(fc)}, {"gap", err}};
    });

    err = max_abs_coefficient(ops.ou_operator(ops.ou_inverse(fc)) - fc);
    inverse.record(err <= kIdentityTolerance, err, [&] {
      return nlohmann::json{{"F", to_json(fc)}, {"gap", err}};
    });

    {
      const WalshFunctional neg_inv = -ops.ou_inverse(fc);
      WalshFunctional si(space);
      for (std::size_t k = 0; k < space.size(); ++k)
        si += multiply(gradient(fc, k), gradient(neg_inv, k));
      err = std::fabs(expectation(si) - fc.variance());
      inner.record(err <= kIdentityTolerance * std::max(1.0, fc.variance()), err, [&] {
        return nlohmann::json{{"F", to_json(fc)}, {"gap", err}};
      });
    }

    {
      const Subset s = d.subset(space.size(), 0.5), t = d.coin() ? s : d.subset(space.size(), 0.5);
      const double e = expectation(WalshFunctional::monomial(space, s),
                                   WalshFunctional::monomial(space, t));
      const double want = s == t ? 1.0 : 0.0;
      err = std::fabs(e - want);
      ortho.record(err <= kIdentityTolerance, err, [&] {
        return nlohmann::json{{"S", s}, {"T", t}, {"value", e}};
      });
    }

    const auto k = static_cast<std::size_t>(d.integer(0, static_cast<int>(space.size()) - 1));
    err = max_abs_coefficient(gradient(gradient(f, k), k));
    dd.record(err == 0.0, err, [&] { return nlohmann::json{{"F", to_json(f)}, {"k", k}}; });
  }
  return {adj, adj_general, ldelta, inverse, inner, ortho, dd};
}

// ---------------------------------------------------------------------------
// Gaussian inequalities.

struct GaussianGridResult {
  std::uint64_t points = 0;
  std::uint64_t abs_f_left = 0, abs_wf_left = 0, abs_f_right = 0, abs_wf_right = 0, mills = 0;
  std::uint64_t abs_f_right_negative_z = 0;  // violations with z < 0
};

// size x size grid over [lo, hi]^2 of (z, w).
inline GaussianGridResult gaussian_grid(int size, double lo, double hi) {
  GaussianGridResult r;
  const double step = (hi - lo) / (size - 1);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double z = lo + i * step, w = lo + j * step;
      const auto s = normal::stein_bounds(z, w);
      ++r.points;
      r.abs_f_left += !s.abs_f_left;
      r.abs_wf_left += !s.abs_wf_left;
      r.abs_f_right += !s.abs_f_right;
      r.abs_wf_right += !s.abs_wf_right;
      r.abs_f_right_negative_z += !s.abs_f_right && z < 0.0;
      if (w > 0.0) r.mills += !normal::mills_bound_check(w);
    }
  return r;
}

// ---------------------------------------------------------------------------
// Subgraph lemma suites.

// Var of the copy count by enumerating every host graph.
inline double sigma2_bruteforce(const CopyCatalog& cat) {
  require(cat.host_edges() <= kLemma56MaxEdges, "sigma2_bruteforce: host too large");
  const std::size_t m = cat.host_edges();
  std::vector<Subset> masks(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) masks[i] = cat.mask(i);
  CompensatedSum m1, m2;
  for (Subset x = 0; x < (Subset{1} << m); ++x) {
    const int present = std::popcount(x);
    const double prob = std::pow(cat.p(), present) * std::pow(cat.q(), static_cast<int>(m) - present);
    double count = 0.0;
    for (Subset c : masks) count += b_of(c, x);
    m1 += prob * count;
    m2 += prob * count * count;
  }
  return m2.value() - m1.value() * m1.value();
}

inline PropertyResult lemma51_suite(std::uint64_t cases, std::uint64_t seed, int max_set = 12,
                                    int max_host = 14) {
  PropertyResult r{"Lemma (ii) operator formula vs generic chain"};
  for (std::uint64_t i = 0; i < cases; ++i) {
    Draw d(seed, i);
    const int size = d.integer(1, max_set);
    const auto host = static_cast<std::size_t>(d.integer(size, std::max(size, max_host)));
    const Subset a = d.subset_of_size(host, size);
    const auto k = static_cast<std::size_t>(d.integer(0, static_cast<int>(host) - 1));
    const double p = d.uniform(0.05, 0.95);
    const double gap = lemma51_generic_gap(a, k, host, p);
    r.record(gap <= 1e-12, gap, [&] {
      return nlohmann::json{{"A", a}, {"k", k}, {"host_edges", host}, {"p", p}, {"gap", gap}};
    });
  }
  return r;
}

inline PropertyResult remark52_suite(int max_size = 12) {
  PropertyResult r{"weight sum equals one"};
  for (int a = 1; a <= max_size; ++a) {
    const double err = std::fabs(remark52_weight_sum(a) - 1.0);
    r.record(err <= 1e-14, err, [&] { return nlohmann::json{{"size", a}, {"error", err}}; });
  }
  return r;
}

enum class Lemma53Scope { all_parts, third_upper, third_lower_small_p };

// `scope` selects what is asserted: every part, only the upper half of part 3,
// or only the lower half of part 3 with p restricted to (0, 1/2].
inline PropertyResult lemma53_suite(std::uint64_t cases, std::uint64_t seed, int max_host = 14,
                                    Lemma53Scope scope = Lemma53Scope::all_parts) {
  const char* names[] = {"correlation inequalities (i)-(iv)", "third centered moment upper bound",
                         "third centered moment nonnegative, p <= 1/2"};
  PropertyResult r{names[static_cast<int>(scope)]};
  for (std::uint64_t i = 0; i < cases; ++i) {
    Draw d(seed, i);
    const auto host = static_cast<std::size_t>(d.integer(1, max_host));
    const double density = d.uniform(0.05, 0.6);
    const Subset a1 = d.subset(host, density), a2 = d.subset(host, density), a3 = d.subset(host, density);
    std::vector<Subset> family(static_cast<std::size_t>(d.integer(1, 5)));
    for (auto& s : family) s = d.subset(host, density);
    double p = d.uniform(0.02, 0.98);
    if (scope == Lemma53Scope::third_lower_small_p) p = 0.5 * p / 0.98;
    const auto res = lemma53_check(a1, a2, a3, family, p);
    const bool ok = scope == Lemma53Scope::all_parts     ? res.all()
                    : scope == Lemma53Scope::third_upper ? res.part3_upper
                                                          : res.part3_lower;
    r.record(ok, ok ? 0.0 : std::fabs(res.third_moment), [&] {
      return nlohmann::json{{"A1", a1}, {"A2", a2}, {"A3", a3}, {"family", family}, {"p", p},
                            {"parts", {res.part1, res.part2, res.part3, res.part4}},
                            {"third_moment", res.third_moment}};
    });
  }
  return r;
}

struct Lemma55Case {
  std::string pattern;
  int n = 0;
  int m = 0;
  int m_hat = 0;
};

// {K2, K3} x {4..6} x m in {1,2,3} for part (i), with m_hat = 1 and the
// pairs (1,1), (2,1) for part (ii).
inline std::vector<Lemma55Case> lemma55_grid() {
  std::vector<Lemma55Case> out;
  for (const char* g : {"K2", "K3"})
    for (int n = 4; n <= 6; ++n)
      for (int m = 1; m <= 3; ++m) out.push_back({g, n, m, 1});
  return out;
}

inline PropertyResult lemma55_suite(const std::vector<double>& ps = {0.1, 0.5, 0.9}) {
  PropertyResult r{"connected-copy sums (i) and (ii)"};
  for (const auto& c : lemma55_grid())
    for (double p : ps) {
      const auto g = PatternGraph::named(c.pattern);
      const auto res = lemma55_check(g, c.n, p, c.m, c.m_hat);
      // Part (ii) is claimed for (m, m_hat) in {(1,1), (2,1)} by the grid; for
      // m = 3 only part (i) is required.
      const bool ok = res.part1() && (c.m > 2 || res.part2());
      r.record(ok, res.lhs1 / res.rhs1, [&] {
        return nlohmann::json{{"pattern", c.pattern}, {"n", c.n}, {"m", c.m}, {"m_hat", c.m_hat},
                              {"p", p}, {"lhs1", res.lhs1}, {"rhs1", res.rhs1},
                              {"lhs2", res.lhs2}, {"rhs2", res.rhs2}};
      });
    }
  return r;
}

inline PropertyResult lemma56_suite(std::uint64_t cases, std::uint64_t seed) {
  PropertyResult r{"moment generating function conditioning"};
  const char* patterns[] = {"K2", "P3", "K3"};
  const double ts[] = {0.1, 0.5, 1.0};
  for (std::uint64_t i = 0; i < cases; ++i) {
    Draw d(seed, i);
    const auto g = PatternGraph::named(patterns[d.integer(0, 2)]);
    const int n = d.integer(std::max(3, g.vertices()), 6);  // at most 15 host edges
    const double p = d.uniform(0.1, 0.9);
    const CopyCatalog cat(g, n, p);
    std::vector<std::uint32_t> a1, a2;
    for (std::uint32_t c = 0; c < cat.size(); ++c) {
      if (d.coin(0.2)) a1.push_back(c);
      if (d.coin(0.15)) a2.push_back(c);
    }
    NonnegPolynomial f;
    if (!a2.empty()) {
      const int terms = d.integer(1, 3);
      for (int j = 0; j < terms; ++j) {
        std::vector<std::uint32_t> mono;
        for (auto c : a2)
          if (d.coin(0.5)) mono.push_back(c);
        f.terms.emplace_back(d.uniform(0.0, 2.0), mono);
      }
    } else {
      f.terms.push_back({1.0, {}});
    }
    const double t = ts[d.integer(0, 2)];
    const auto res = lemma56_check(cat, a1, a2, f, t);
    r.record(res.holds(), std::max(res.lhs1 / res.rhs1, res.lhs2 / res.rhs2), [&] {
      return nlohmann::json{{"pattern", g.name()}, {"n", n}, {"p", p}, {"t", t}, {"A1", a1},
                            {"A2", a2}, {"lhs1", res.lhs1}, {"rhs1", res.rhs1},
                            {"lhs2", res.lhs2}, {"rhs2", res.rhs2}};
    });
  }
  return r;
}

inline PropertyResult sigma2_suite() {
  PropertyResult r{"sigma^2 pair sum vs brute force"};
  for (const char* name : {"K2", "P3", "K3"})
    for (double p : {0.2, 0.5, 0.8}) {
      const CopyCatalog cat(PatternGraph::named(name), 4, p);
      const double a = sigma2_exact(cat), b = sigma2_bruteforce(cat);
      const double err = std::fabs(a - b);
      r.record(err <= 1e-12, err, [&] {
        return nlohmann::json{{"pattern", name}, {"p", p}, {"pair_sum", a}, {"brute", b}};
      });
    }
  return r;
}

inline PropertyResult uk_suite() {
  PropertyResult r{"E[sqrt(pq) sum U_k] = 1"};
  for (const char* name : {"K2", "P3", "K3", "C4"})
    for (int n = 4; n <= 6; ++n)
      for (double p : {0.2, 0.7}) {
        const CopyCatalog cat(PatternGraph::named(name), n, p);
        const double v = uk_decomposition_mean(cat);
        const double err = std::fabs(v - 1.0);
        r.record(err <= 1e-12, err, [&] {
          return nlohmann::json{{"pattern", name}, {"n", n}, {"p", p}, {"value", v}};
        });
      }
  return r;
}

inline std::vector<PropertyResult> lemmas_check(std::uint64_t cases, std::uint64_t seed) {
  return {lemma51_suite(std::min<std::uint64_t>(cases, 500), seed),
          remark52_suite(),
          lemma53_suite(cases, seed + 1),
          lemma53_suite(cases, seed + 1, 14, Lemma53Scope::third_upper),
          lemma53_suite(cases, seed + 3, 14, Lemma53Scope::third_lower_small_p),
          lemma55_suite(),
          lemma56_suite(std::min<std::uint64_t>(cases, 200), seed + 2),
          sigma2_suite(),
          uk_suite()};
}

inline nlohmann::json to_json(const PropertyResult& r) {
  nlohmann::json j{{"property", r.name},
                   {"instances", r.instances},
                   {"failures", r.failures},
                   {"worst", r.worst},
                   {"passed", r.passed()}};
  if (!r.passed()) j["counterexample"] = r.counterexample;
  return j;
}

}  // namespace rstein
