#pragma once

// Cramer-type moderate deviation bounds for Rademacher functionals, assembled
// from caller-supplied envelopes gamma_1, gamma_2 of the two Malliavin-Stein
// conditions
//   E[|1 - <DF,-DL^{-1}F>| e^{tF}]           <= gamma_1(t) E[e^{tF}],
//   E[|delta(DF |DL^{-1}F| / sqrt(pq))| e^{tF}] <= gamma_2(t) E[e^{tF}],
// for 0 <= t <= A.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rstein/numeric.hpp"
#include "rstein/walsh.hpp"

namespace rstein {

struct GammaValues {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double sum() const { return gamma1 + gamma2; }
};

inline constexpr std::size_t kEnvelopeCheckPoints = 1024;
inline constexpr double kAZeroTolerance = 1e-12;
inline constexpr double kBoundPrefactor = 25.0;

class GammaEnvelope {
 public:
  using Fn = std::function<GammaValues(double)>;

  // Rejects envelopes that are negative or decreasing on a uniform grid of
  // `check_points` points over [0, A].
  GammaEnvelope(Fn fn, double domain_cap, std::map<std::string, std::string> provenance = {},
                std::size_t check_points = kEnvelopeCheckPoints)
      : fn_(std::move(fn)), cap_(domain_cap), provenance_(std::move(provenance)) {
    require(cap_ >= 0.0 && std::isfinite(cap_), "GammaEnvelope: domain cap A must be finite and >= 0");
    validate(check_points);
  }

  static GammaEnvelope constant(double g1, double g2, double domain_cap) {
    return GammaEnvelope([=](double) { return GammaValues{g1, g2}; }, domain_cap,
                         {{"gamma", "constant"}});
  }

  // Right-continuous step envelope through sampled values: at t it takes the
  // running maximum up to the first grid point >= t, so it dominates the
  // samples and is nondecreasing. The grid must be increasing, start at 0 and
  // end at A.
  static GammaEnvelope running_max(std::vector<double> grid, std::vector<GammaValues> values,
                                   std::map<std::string, std::string> provenance = {}) {
    require(!grid.empty() && grid.size() == values.size(), "running_max: grid/value size mismatch");
    require(grid.front() == 0.0, "running_max: grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
      require(grid[i] > grid[i - 1], "running_max: grid must be strictly increasing");
    for (std::size_t i = 1; i < values.size(); ++i) {
      values[i].gamma1 = std::max(values[i].gamma1, values[i - 1].gamma1);
      values[i].gamma2 = std::max(values[i].gamma2, values[i - 1].gamma2);
    }
    const double cap = grid.back();
    provenance.emplace("gamma", "running maximum of sampled values");
    auto fn = [grid = std::move(grid), values = std::move(values)](double t) {
      auto it = std::lower_bound(grid.begin(), grid.end(), t);
      if (it == grid.end()) return values.back();
      return values[static_cast<std::size_t>(it - grid.begin())];
    };
    return GammaEnvelope(std::move(fn), cap, std::move(provenance));
  }

  GammaValues operator()(double t) const { return fn_(t); }
  double domain_cap() const { return cap_; }
  const std::map<std::string, std::string>& provenance() const { return provenance_; }

  // (t^2/2)(gamma_1(t) + gamma_2(t)).
  double exponent(double t) const { return 0.5 * t * t * fn_(t).sum(); }

 private:
  void validate(std::size_t points) const {
    require(points >= 2, "GammaEnvelope: need at least two check points");
    GammaValues prev{};
    for (std::size_t i = 0; i < points; ++i) {
      const double t = cap_ * static_cast<double>(i) / static_cast<double>(points - 1);
      const GammaValues g = fn_(t);
      require(std::isfinite(g.gamma1) && std::isfinite(g.gamma2) && g.gamma1 >= 0.0 &&
                  g.gamma2 >= 0.0,
              "GammaEnvelope: gamma values must be finite and nonnegative (t=" +
                  std::to_string(t) + ")");
      if (i > 0) {
        const auto tol = [](double v) { return 1e-12 * std::max(1.0, std::fabs(v)); };
        require(g.gamma1 >= prev.gamma1 - tol(prev.gamma1) &&
                    g.gamma2 >= prev.gamma2 - tol(prev.gamma2),
                "GammaEnvelope: gamma must be nondecreasing (violated at t=" +
                    std::to_string(t) + ")");
      }
      prev = g;
    }
  }

  Fn fn_;
  double cap_;
  std::map<std::string, std::string> provenance_;
};

// A_0(d_0) = max{0 <= t <= A : (t^2/2)(gamma_1(t) + gamma_2(t)) <= d_0}, by
// bisection on the nondecreasing exponent; the returned t satisfies the
// constraint and lies within 1e-12 of the supremum.
inline double a_zero(const GammaEnvelope& env, double d0) {
  require(d0 >= 0.0, "a_zero: d0 must be nonnegative");
  const double cap = env.domain_cap();
  if (env.exponent(cap) <= d0) return cap;
  double lo = 0.0, hi = cap;
  while (hi - lo > kAZeroTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (env.exponent(mid) <= d0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

enum class TheoremForm { full, short_form };

inline std::string to_string(TheoremForm f) { return f == TheoremForm::full ? "full" : "short"; }

struct BoundPoint {
  double z = 0.0;
  double rhs = 0.0;
  bool admissible = false;
  bool informative = false;  // rhs <= 1; above 1 the statement is vacuous
  double d0 = 0.0;
  TheoremForm theorem = TheoremForm::full;
};

// 25 e^{d_0} (1+z^2)(gamma_1(z)+gamma_2(z)); admissible iff 0 <= z <= A_0(d_0).
inline BoundPoint md_bound(const GammaEnvelope& env, double d0, double z) {
  require(d0 >= 0.0, "md_bound: d0 must be nonnegative");
  BoundPoint b;
  b.z = z;
  b.d0 = d0;
  b.theorem = TheoremForm::full;
  b.rhs = kBoundPrefactor * std::exp(d0) * (1.0 + z * z) * env(z).sum();
  // The exponent is nondecreasing, so z <= A_0(d_0) iff z <= A and the exponent at z is <= d_0.
  b.admissible = z >= 0.0 && z <= env.domain_cap() && env.exponent(z) <= d0;
  b.informative = b.rhs <= 1.0;
  return b;
}

// 25 exp((z^2/2)(gamma_1+gamma_2)) (1+z^2)(gamma_1+gamma_2) for 0 <= z <= A.
inline BoundPoint md_bound_short(const GammaEnvelope& env, double z) {
  require(z >= 0.0 && z <= env.domain_cap(), "md_bound_short: z must lie in [0, A]");
  const double g = env(z).sum();
  BoundPoint b;
  b.z = z;
  b.d0 = 0.5 * z * z * g;
  b.theorem = TheoremForm::short_form;
  b.rhs = kBoundPrefactor * std::exp(b.d0) * (1.0 + z * z) * g;
  b.admissible = true;
  b.informative = b.rhs <= 1.0;
  return b;
}

// exp((t^2/2)(1 + gamma_1(t) + gamma_2(t))) for 0 <= t <= A.
inline double mgf_bound(const GammaEnvelope& env, double t) {
  require(t >= 0.0 && t <= env.domain_cap(), "mgf_bound: t must lie in [0, A]");
  return std::exp(0.5 * t * t * (1.0 + env(t).sum()));
}

struct BoundReport {
  std::vector<BoundPoint> grid;
  std::map<std::string, double> constants;
  std::map<std::string, std::string> provenance;
  double range_limit = 0.0;
  TheoremForm theorem = TheoremForm::full;
};

inline BoundReport make_bound_report(const GammaEnvelope& env, const std::vector<double>& zs,
                                     TheoremForm theorem, double d0 = 0.0) {
  BoundReport r;
  r.theorem = theorem;
  r.provenance = env.provenance();
  r.constants["A"] = env.domain_cap();
  if (theorem == TheoremForm::full) {
    r.range_limit = a_zero(env, d0);
    r.constants["d0"] = d0;
    r.constants["A0"] = r.range_limit;
    for (double z : zs) r.grid.push_back(md_bound(env, d0, z));
  } else {
    r.range_limit = env.domain_cap();
    for (double z : zs) {
      if (z >= 0.0 && z <= env.domain_cap()) {
        r.grid.push_back(md_bound_short(env, z));
      } else {
        BoundPoint b;
        b.z = z;
        b.theorem = TheoremForm::short_form;
        const double g = env(z).sum();
        b.d0 = 0.5 * z * z * g;
        b.rhs = kBoundPrefactor * std::exp(b.d0) * (1.0 + z * z) * g;
        b.admissible = false;
        b.informative = b.rhs <= 1.0;
        r.grid.push_back(b);
      }
    }
  }
  return r;
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& b : r.grid)
    rows.push_back({{"z", b.z},
                    {"rhs", b.rhs},
                    {"admissible", b.admissible},
                    {"informative", b.informative},
                    {"d0", b.d0},
                    {"theorem", to_string(b.theorem)}});
  return {{"theorem", to_string(r.theorem)},
          {"range_limit", r.range_limit},
          {"constants", r.constants},
          {"provenance", r.provenance},
          {"grid", rows}};
}

// ---------------------------------------------------------------------------
// Exact gamma values of a small functional.

// Tables over all 2^n sign vectors needed to evaluate the two conditions for
// a centered, unit-variance F. They do not depend on t, so the probe can be
// queried on a whole t-grid.
class GammaProbe {
 public:
  explicit GammaProbe(const WalshFunctional& f, std::size_t cap = kDefaultEnumerationCap)
      : space_(f.space()) {
    require(std::fabs(f.mean()) <= 1e-12, "empirical_gamma: F must be centered");
    require(std::fabs(f.variance() - 1.0) <= 1e-9, "empirical_gamma: F must have unit variance");
    prob_ = probability_table(space_, cap);
    values_ = values_table(f, cap);

    const auto inner = values_table(stein_inner(f), cap);
    a1_.resize(inner.size());
    for (std::size_t x = 0; x < inner.size(); ++x) a1_[x] = std::fabs(1.0 - inner[x]);

    // u_k = D_k F |D_k L^{-1} F| / sqrt(p_k q_k).
    const WalshFunctional neg_inverse = -ou_inverse(f);
    std::vector<WalshFunctional> entries;
    for (std::size_t k = 0; k < space_.size(); ++k) {
      auto dk = values_table(gradient(f, k), cap);
      const auto gk = values_table(gradient(neg_inverse, k), cap);
      const double scale = 1.0 / space_.sqrt_pq(k);
      for (std::size_t x = 0; x < dk.size(); ++x) dk[x] *= std::fabs(gk[x]) * scale;
      entries.push_back(from_values(space_, std::move(dk), cap));
    }
    CoordinateField u(space_, std::move(entries));
    privault_ = u.privault_admissible();
    const auto delta = values_table(
        divergence(u, privault_ ? DivergenceForm::privault : DivergenceForm::general), cap);
    a2_.resize(delta.size());
    for (std::size_t x = 0; x < delta.size(); ++x) a2_[x] = std::fabs(delta[x]);
  }

  // (E[|1-<DF,-DL^{-1}F>| e^{tF}], E[|delta(u)| e^{tF}]) / E[e^{tF}].
  GammaValues at(double t) const {
    CompensatedSum mgf, s1, s2;
    for (std::size_t x = 0; x < prob_.size(); ++x) {
      const double w = prob_[x] * std::exp(t * values_[x]);
      mgf += w;
      s1 += w * a1_[x];
      s2 += w * a2_[x];
    }
    return {s1.value() / mgf.value(), s2.value() / mgf.value()};
  }

  double mgf(double t) const {
    CompensatedSum s;
    for (std::size_t x = 0; x < prob_.size(); ++x) s += prob_[x] * std::exp(t * values_[x]);
    return s.value();
  }

  // P(F > z), exact.
  double upper_tail(double z) const {
    CompensatedSum s;
    for (std::size_t x = 0; x < prob_.size(); ++x)
      if (values_[x] > z) s += prob_[x];
    return s.value();
  }

  bool privault_form_used() const { return privault_; }

  // Running-max envelope of the exact gamma values on a uniform grid of
  // `points` points over [0, A].
  GammaEnvelope envelope(double domain_cap, std::size_t points) const {
    require(points >= 2, "envelope: need at least two grid points");
    std::vector<double> grid(points);
    std::vector<GammaValues> values(points);
    for (std::size_t i = 0; i < points; ++i) {
      grid[i] = domain_cap * static_cast<double>(i) / static_cast<double>(points - 1);
      values[i] = at(grid[i]);
    }
    return GammaEnvelope::running_max(std::move(grid), std::move(values),
                                      {{"source", "exact enumeration"}});
  }

 private:
  RademacherSpace space_;
  std::vector<double> prob_, values_, a1_, a2_;
  bool privault_ = true;
};

inline GammaValues empirical_gamma(const WalshFunctional& f, double t) {
  return GammaProbe(f).at(t);
}

}  // namespace rstein
