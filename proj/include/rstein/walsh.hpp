#pragma once

// Discrete Malliavin calculus on a finite Rademacher space.
//
// A square-integrable functional F of X = (X_0, ..., X_{n-1}) is stored by its
// Walsh (chaos) expansion F = sum_S f(S) Y_S, where Y_S is the product of the
// standardized coordinates Y_k = (X_k - p_k + q_k) / (2 sqrt(p_k q_k)) over
// k in S. Subsets are 64-bit masks. Every operator acts coefficient-wise; the
// enumeration routines are the exact reference for the rest of the library.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rstein/numeric.hpp"

namespace rstein {

using Subset = std::uint64_t;

inline constexpr std::size_t kDefaultEnumerationCap = 20;
inline constexpr std::size_t kMaxCoordinates = 64;

inline Subset bit(std::size_t k) { return Subset{1} << k; }
inline bool contains(Subset s, std::size_t k) { return (s >> k) & 1U; }
inline int cardinality(Subset s) { return std::popcount(s); }

class RademacherSpace {
 public:
  RademacherSpace() = default;

  explicit RademacherSpace(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "RademacherSpace: need at least one coordinate");
    require(probs_.size() <= kMaxCoordinates,
            "RademacherSpace: at most 64 coordinates fit a subset mask");
    for (double p : probs_)
      require(p > 0.0 && p < 1.0, "RademacherSpace: p_k must lie in (0,1)");
  }

  static RademacherSpace symmetric(std::size_t n) {
    return RademacherSpace(std::vector<double>(n, 0.5));
  }

  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double p(std::size_t k) const { return probs_.at(k); }
  double q(std::size_t k) const { return 1.0 - probs_.at(k); }

  // Y_k at X_k = +1 and X_k = -1.
  double y_plus(std::size_t k) const { return std::sqrt(q(k) / p(k)); }
  double y_minus(std::size_t k) const { return -std::sqrt(p(k) / q(k)); }
  double sqrt_pq(std::size_t k) const { return std::sqrt(p(k) * q(k)); }
  // Y_k^2 = 1 + slope_k * Y_k.
  double square_slope(std::size_t k) const { return (q(k) - p(k)) / sqrt_pq(k); }

  Subset full_mask() const {
    return size() == 64 ? ~Subset{0} : (bit(size()) - 1);
  }

  bool operator==(const RademacherSpace&) const = default;

 private:
  std::vector<double> probs_;
};

class WalshFunctional {
 public:
  using Coefficients = std::map<Subset, double>;

  WalshFunctional() = default;
  explicit WalshFunctional(RademacherSpace space) : space_(std::move(space)) {}
  WalshFunctional(RademacherSpace space, Coefficients coeffs)
      : space_(std::move(space)), coeffs_(std::move(coeffs)) {
    const Subset outside = ~space_.full_mask();
    for (const auto& [s, c] : coeffs_)
      require((s & outside) == 0, "WalshFunctional: subset references a coordinate outside the space");
    prune();
  }

  static WalshFunctional constant(const RademacherSpace& space, double c) {
    return WalshFunctional(space, {{0, c}});
  }
  static WalshFunctional coordinate(const RademacherSpace& space, std::size_t k) {
    require(k < space.size(), "coordinate index out of range");
    return WalshFunctional(space, {{bit(k), 1.0}});
  }
  static WalshFunctional monomial(const RademacherSpace& space, Subset s, double c = 1.0) {
    return WalshFunctional(space, {{s, c}});
  }

  const RademacherSpace& space() const { return space_; }
  const Coefficients& coefficients() const { return coeffs_; }
  std::size_t dimension() const { return space_.size(); }

  double coefficient(Subset s) const {
    auto it = coeffs_.find(s);
    return it == coeffs_.end() ? 0.0 : it->second;
  }
  double mean() const { return coefficient(0); }
  double variance() const {
    CompensatedSum v;
    for (const auto& [s, c] : coeffs_)
      if (s != 0) v += c * c;
    return v.value();
  }
  int degree() const {
    int d = 0;
    for (const auto& [s, c] : coeffs_) d = std::max(d, cardinality(s));
    return d;
  }
  bool depends_on(std::size_t k) const {
    for (const auto& [s, c] : coeffs_)
      if (contains(s, k)) return true;
    return false;
  }

  // Degree-m part, i.e. the m-th discrete multiple integral.
  WalshFunctional chaos(int m) const {
    Coefficients out;
    for (const auto& [s, c] : coeffs_)
      if (cardinality(s) == m) out.emplace(s, c);
    return WalshFunctional(space_, std::move(out));
  }

  void add_term(Subset s, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = coeffs_.emplace(s, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) coeffs_.erase(it);
    }
  }

  WalshFunctional& operator+=(const WalshFunctional& other) {
    check_same_space(other);
    for (const auto& [s, c] : other.coeffs_) add_term(s, c);
    return *this;
  }
  WalshFunctional& operator-=(const WalshFunctional& other) {
    check_same_space(other);
    for (const auto& [s, c] : other.coeffs_) add_term(s, -c);
    return *this;
  }
  WalshFunctional& operator*=(double a) {
    if (a == 0.0) {
      coeffs_.clear();
      return *this;
    }
    for (auto& [s, c] : coeffs_) c *= a;
    return *this;
  }

  friend WalshFunctional operator+(WalshFunctional a, const WalshFunctional& b) { return a += b; }
  friend WalshFunctional operator-(WalshFunctional a, const WalshFunctional& b) { return a -= b; }
  friend WalshFunctional operator*(WalshFunctional a, double s) { return a *= s; }
  friend WalshFunctional operator*(double s, WalshFunctional a) { return a *= s; }
  friend WalshFunctional operator-(WalshFunctional a) { return a *= -1.0; }

  void check_same_space(const WalshFunctional& other) const {
    require(space_ == other.space_, "functionals live on different Rademacher spaces");
  }

 private:
  void prune() {
    std::erase_if(coeffs_, [](const auto& kv) { return kv.second == 0.0; });
  }

  RademacherSpace space_;
  Coefficients coeffs_;
};

// One functional per coordinate: an element u of the domain of the divergence.
struct CoordinateField {
  RademacherSpace space;
  std::vector<WalshFunctional> entries;

  CoordinateField(RademacherSpace s, std::vector<WalshFunctional> e)
      : space(std::move(s)), entries(std::move(e)) {
    require(entries.size() == space.size(), "CoordinateField: need one entry per coordinate");
    for (const auto& u : entries)
      require(u.space() == space, "CoordinateField: entry on a different space");
  }

  // True when entry k never involves coordinate k.
  bool privault_admissible() const {
    for (std::size_t k = 0; k < entries.size(); ++k)
      if (entries[k].depends_on(k)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Pointwise evaluation and exact enumeration.

inline double evaluate(const WalshFunctional& f, std::span<const int> signs) {
  const auto& space = f.space();
  require(signs.size() == space.size(), "evaluate: sign vector has the wrong dimension");
  std::vector<double> y(signs.size());
  for (std::size_t k = 0; k < signs.size(); ++k) {
    require(signs[k] == 1 || signs[k] == -1, "evaluate: signs must be +1 or -1");
    y[k] = signs[k] == 1 ? space.y_plus(k) : space.y_minus(k);
  }
  CompensatedSum sum;
  for (const auto& [s, c] : f.coefficients()) {
    double term = c;
    for (Subset rest = s; rest != 0; rest &= rest - 1) term *= y[std::countr_zero(rest)];
    sum += term;
  }
  return sum.value();
}

inline void check_enumerable(const RademacherSpace& space, std::size_t cap) {
  if (space.size() > cap)
    throw CapExceeded("exact enumeration over " + std::to_string(space.size()) +
                      " coordinates exceeds the cap of " + std::to_string(cap));
}

// Index x of the returned tables encodes a sign vector: bit k set <=> X_k = +1.
inline std::vector<double> probability_table(const RademacherSpace& space,
                                             std::size_t cap = kDefaultEnumerationCap) {
  check_enumerable(space, cap);
  std::vector<double> prob{1.0};
  prob.reserve(std::size_t{1} << space.size());
  for (std::size_t k = 0; k < space.size(); ++k) {
    const std::size_t half = prob.size();
    prob.resize(2 * half);
    for (std::size_t x = 0; x < half; ++x) {
      prob[x + half] = prob[x] * space.p(k);
      prob[x] *= space.q(k);
    }
  }
  return prob;
}

// All 2^n values of F via a per-coordinate butterfly, O(n 2^n).
inline std::vector<double> values_table(const WalshFunctional& f,
                                        std::size_t cap = kDefaultEnumerationCap) {
  const auto& space = f.space();
  check_enumerable(space, cap);
  std::vector<double> v(std::size_t{1} << space.size(), 0.0);
  for (const auto& [s, c] : f.coefficients()) v[s] = c;
  for (std::size_t k = 0; k < space.size(); ++k) {
    const double yp = space.y_plus(k), ym = space.y_minus(k);
    const std::size_t b = std::size_t{1} << k;
    for (std::size_t x = 0; x < v.size(); ++x) {
      if (x & b) continue;
      const double a = v[x], c = v[x | b];
      v[x] = a + c * ym;
      v[x | b] = a + c * yp;
    }
  }
  return v;
}

// Inverse of values_table: Walsh coefficients of an arbitrary function of X.
inline WalshFunctional from_values(const RademacherSpace& space, std::vector<double> v,
                                   std::size_t cap = kDefaultEnumerationCap) {
  check_enumerable(space, cap);
  require(v.size() == (std::size_t{1} << space.size()), "from_values: table size must be 2^n");
  for (std::size_t k = 0; k < space.size(); ++k) {
    const double yp = space.y_plus(k), ym = space.y_minus(k);
    const double det = yp - ym;
    const std::size_t b = std::size_t{1} << k;
    for (std::size_t x = 0; x < v.size(); ++x) {
      if (x & b) continue;
      const double vm = v[x], vp = v[x | b];
      v[x] = (yp * vm - ym * vp) / det;
      v[x | b] = (vp - vm) / det;
    }
  }
  WalshFunctional::Coefficients coeffs;
  for (std::size_t s = 0; s < v.size(); ++s)
    if (v[s] != 0.0) coeffs.emplace(s, v[s]);
  return WalshFunctional(space, std::move(coeffs));
}

// E[F * G] by summing over all 2^n sign vectors with product Bernoulli weights.
inline double expectation(const WalshFunctional& f,
                          const std::optional<WalshFunctional>& weight = std::nullopt,
                          std::size_t cap = kDefaultEnumerationCap) {
  if (weight) f.check_same_space(*weight);
  const auto prob = probability_table(f.space(), cap);
  const auto fv = values_table(f, cap);
  std::vector<double> gv;
  if (weight) gv = values_table(*weight, cap);
  CompensatedSum sum;
  for (std::size_t x = 0; x < prob.size(); ++x)
    sum += prob[x] * fv[x] * (weight ? gv[x] : 1.0);
  return sum.value();
}

// ---------------------------------------------------------------------------
// Malliavin operators.

// D_k F = sqrt(p_k q_k) (F_k^+ - F_k^-). Since sqrt(p q)(y^+ - y^-) = 1, this
// removes k from every subset that contains it and drops the others.
inline WalshFunctional gradient(const WalshFunctional& f, std::size_t k) {
  require(k < f.dimension(), "gradient: coordinate index out of range");
  WalshFunctional out(f.space());
  for (const auto& [s, c] : f.coefficients())
    if (contains(s, k)) out.add_term(s & ~bit(k), c);
  return out;
}

// L^{-1}: degree-m chaos scaled by -1/m. A nonzero mean is discarded and
// reported through mean_dropped.
inline WalshFunctional ou_inverse(const WalshFunctional& f, bool* mean_dropped = nullptr) {
  if (mean_dropped) *mean_dropped = f.mean() != 0.0;
  WalshFunctional out(f.space());
  for (const auto& [s, c] : f.coefficients())
    if (s != 0) out.add_term(s, -c / cardinality(s));
  return out;
}

// L: degree-m chaos scaled by -m.
inline WalshFunctional ou_operator(const WalshFunctional& f) {
  WalshFunctional out(f.space());
  for (const auto& [s, c] : f.coefficients())
    if (s != 0) out.add_term(s, -c * cardinality(s));
  return out;
}

// Exact product, reducing Y_k^2 = 1 + slope_k Y_k on shared coordinates.
inline WalshFunctional multiply(const WalshFunctional& f, const WalshFunctional& g) {
  f.check_same_space(g);
  const auto& space = f.space();
  std::vector<double> slope(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) slope[k] = space.square_slope(k);
  WalshFunctional out(space);
  for (const auto& [s, a] : f.coefficients()) {
    for (const auto& [t, b] : g.coefficients()) {
      const Subset shared = s & t;
      const Subset base = s ^ t;
      // Every J subset of shared contributes prod_{k in J} slope_k * Y_{base | J}.
      Subset j = shared;
      while (true) {
        double w = a * b;
        for (Subset rest = j; rest != 0; rest &= rest - 1) w *= slope[std::countr_zero(rest)];
        out.add_term(base | j, w);
        if (j == 0) break;
        j = (j - 1) & shared;
      }
    }
  }
  return out;
}

enum class DivergenceForm {
  privault,  // delta(u) = sum_k Y_k u_k, requires u_k independent of X_k
  general,   // adjoint of D for arbitrary u
};

// For a general u the adjointness relation E<DF,u> = E[F delta(u)] only sees
// the part of u_k that is independent of X_k (D_k F never depends on X_k and
// E[Y_k] = 0), so delta(u) = sum_k Y_k E_k[u_k], where E_k[u_k] drops every
// subset containing k. On admissible fields both forms coincide.
inline WalshFunctional divergence(const CoordinateField& u,
                                  DivergenceForm form = DivergenceForm::privault) {
  if (form == DivergenceForm::privault)
    require(u.privault_admissible(),
            "divergence: entry k depends on coordinate k; use the general form");
  WalshFunctional out(u.space);
  for (std::size_t k = 0; k < u.entries.size(); ++k)
    for (const auto& [s, c] : u.entries[k].coefficients())
      if (!contains(s, k)) out.add_term(s | bit(k), c);
  return out;
}

// The field (D_0 F, ..., D_{n-1} F).
inline CoordinateField gradient_field(const WalshFunctional& f) {
  std::vector<WalshFunctional> entries;
  entries.reserve(f.dimension());
  for (std::size_t k = 0; k < f.dimension(); ++k) entries.push_back(gradient(f, k));
  return CoordinateField(f.space(), std::move(entries));
}

// E[<DF, u>] by enumeration.
inline double expected_pairing(const WalshFunctional& f, const CoordinateField& u,
                               std::size_t cap = kDefaultEnumerationCap) {
  require(f.space() == u.space, "expected_pairing: space mismatch");
  CompensatedSum sum;
  for (std::size_t k = 0; k < u.entries.size(); ++k)
    sum += expectation(gradient(f, k), u.entries[k], cap);
  return sum.value();
}

// <DF, -DL^{-1}F> = sum_k (D_k F)(-D_k L^{-1} F).
inline WalshFunctional stein_inner(const WalshFunctional& f) {
  const WalshFunctional neg_inverse = -ou_inverse(f);
  WalshFunctional out(f.space());
  for (std::size_t k = 0; k < f.dimension(); ++k) {
    WalshFunctional dk = gradient(f, k);
    if (dk.coefficients().empty()) continue;
    out += multiply(dk, gradient(neg_inverse, k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON: { "n": int, "probs": [...], "coeffs": { "<mask as decimal>": float } }

inline nlohmann::json to_json(const WalshFunctional& f) {
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [s, c] : f.coefficients()) coeffs[std::to_string(s)] = c;
  const auto probs = f.space().probs();
  return {{"n", f.dimension()},
          {"probs", std::vector<double>(probs.begin(), probs.end())},
          {"coeffs", coeffs}};
}

inline WalshFunctional walsh_from_json(const nlohmann::json& j) {
  const auto n = j.at("n").get<std::size_t>();
  auto probs = j.at("probs").get<std::vector<double>>();
  require(probs.size() == n, "functional JSON: probs length differs from n");
  WalshFunctional::Coefficients coeffs;
  for (const auto& [key, value] : j.at("coeffs").items()) {
    std::size_t used = 0;
    const Subset s = std::stoull(key, &used);
    require(used == key.size(), "functional JSON: subset keys must be decimal integers");
    coeffs[s] += value.get<double>();
  }
  return WalshFunctional(RademacherSpace(std::move(probs)), std::move(coeffs));
}

}  // namespace rstein
