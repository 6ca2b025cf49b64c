#pragma once

// Copies of a fixed pattern graph G0 in the Erdos-Renyi graph G(n, p): pattern
// invariants, the copy catalog with its edge-sharing neighborhoods, the exact
// variance of the copy count, the moderate deviation bounds for the
// standardized count W, and exact checkers for the supporting lemmas.
//
// Host edges {u, v} of K_n (u < v) are numbered row by row. Copies are stored
// as sorted edge-id lists; on hosts with at most 64 edges they also fit a mask.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rstein/numeric.hpp"
#include "rstein/rng.hpp"
#include "rstein/walsh.hpp"

namespace rstein {

using Edge = std::pair<int, int>;

inline constexpr int kMaxPatternVertices = 10;
inline constexpr std::size_t kDefaultCatalogCap = 1000000;

class PatternGraph {
 public:
  // Isolated vertices are dropped and the rest relabelled 0..v-1 in order.
  PatternGraph(int vertices, std::vector<Edge> edges, std::string name = {})
      : name_(std::move(name)) {
    require(vertices >= 1, "PatternGraph: vertex count must be positive");
    require(!edges.empty(), "PatternGraph: pattern needs at least one edge");
    std::vector<int> relabel(static_cast<std::size_t>(vertices), -1);
    std::set<Edge> seen;
    for (auto [u, v] : edges) {
      require(u >= 0 && v >= 0 && u < vertices && v < vertices, "PatternGraph: edge endpoint out of range");
      require(u != v, "PatternGraph: self-loops are not allowed");
      if (u > v) std::swap(u, v);
      require(seen.insert({u, v}).second, "PatternGraph: duplicate edge");
      relabel[static_cast<std::size_t>(u)] = 0;
      relabel[static_cast<std::size_t>(v)] = 0;
    }
    int next = 0;
    for (int& r : relabel)
      if (r == 0) r = next++;
    v_ = next;
    for (auto [u, v] : seen)
      edges_.emplace_back(relabel[static_cast<std::size_t>(u)], relabel[static_cast<std::size_t>(v)]);
    std::sort(edges_.begin(), edges_.end());
  }

  static PatternGraph complete(int k) {
    std::vector<Edge> e;
    for (int u = 0; u < k; ++u)
      for (int v = u + 1; v < k; ++v) e.emplace_back(u, v);
    return PatternGraph(k, e, "K" + std::to_string(k));
  }
  // Path with k edges.
  static PatternGraph path(int k) {
    std::vector<Edge> e;
    for (int i = 0; i < k; ++i) e.emplace_back(i, i + 1);
    return PatternGraph(k + 1, e, "P" + std::to_string(k + 1));
  }
  static PatternGraph cycle(int k) {
    std::vector<Edge> e;
    for (int i = 0; i < k; ++i) e.emplace_back(i, (i + 1) % k);
    return PatternGraph(k, e, "C" + std::to_string(k));
  }
  static PatternGraph named(const std::string& name) {
    if (name.size() >= 2 && (name[0] == 'K' || name[0] == 'P' || name[0] == 'C')) {
      const int k = std::stoi(name.substr(1));
      if (name[0] == 'K' && k >= 2) return complete(k);
      if (name[0] == 'P' && k >= 2) return path(k - 1);
      if (name[0] == 'C' && k >= 3) return cycle(k);
    }
    throw DomainError("unknown pattern name '" + name + "' (use K<k>, P<k> or C<k>)");
  }

  int vertices() const { return v_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& name() const { return name_; }

  bool has_edge(int u, int v) const {
    if (u > v) std::swap(u, v);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
  }

  // Number of edge-preserving vertex permutations.
  std::uint64_t automorphisms() const {
    require(v_ <= kMaxPatternVertices, "automorphisms: at most 10 vertices");
    std::vector<int> perm(static_cast<std::size_t>(v_));
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t count = 0;
    do {
      bool ok = true;
      for (auto [u, v] : edges_)
        if (!has_edge(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)])) {
          ok = false;
          break;
        }
      count += ok;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return count;
  }

 private:
  int v_ = 0;
  std::vector<Edge> edges_;
  std::string name_;
};

inline PatternGraph pattern_from_json(const nlohmann::json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    require(e.is_array() && e.size() == 2, "pattern JSON: each edge must be a pair");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return PatternGraph(j.at("vertices").get<int>(), std::move(edges),
                      j.value("name", std::string{}));
}

inline nlohmann::json to_json(const PatternGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  return {{"vertices", g.vertices()}, {"edges", edges}, {"name", g.name()}};
}

// min over nonempty edge subsets H of n^{v_H} p^{e_H}, v_H counting the
// vertices touched by H.
inline double psi_min(const PatternGraph& g, double n, double p) {
  require(n >= 1.0, "psi_min: n must be at least 1");
  require(p > 0.0 && p < 1.0, "psi_min: p must lie in (0,1)");
  const int e = g.edge_count();
  require(e <= 24, "psi_min: pattern has too many edges for subset enumeration");
  double best_log = INFINITY;
  for (std::uint32_t h = 1; h < (1U << e); ++h) {
    std::uint32_t touched = 0;
    for (int i = 0; i < e; ++i)
      if ((h >> i) & 1U) touched |= (1U << g.edges()[i].first) | (1U << g.edges()[i].second);
    const double lg = std::popcount(touched) * std::log(n) + std::popcount(h) * std::log(p);
    best_log = std::min(best_log, lg);
  }
  return std::exp(best_log);
}

// ---------------------------------------------------------------------------
// Host edges and the copy catalog.

inline std::size_t host_edge_count(int n) { return static_cast<std::size_t>(n) * (n - 1) / 2; }

inline int host_edge_id(int n, int u, int v) {
  if (u > v) std::swap(u, v);
  return u * n - u * (u + 1) / 2 + (v - u - 1);
}

class CopyCatalog {
 public:
  CopyCatalog(const PatternGraph& g, int n, double p, std::size_t cap = kDefaultCatalogCap)
      : pattern_(g), n_(n), p_(p) {
    require(p > 0.0 && p < 1.0, "CopyCatalog: p must lie in (0,1)");
    require(n >= 1, "CopyCatalog: n must be positive");
    aut_ = g.automorphisms();
    const int v = g.vertices();
    const double expected = n >= v ? factorial(static_cast<unsigned>(v)) / static_cast<double>(aut_) *
                                         binomial(static_cast<unsigned>(n), static_cast<unsigned>(v))
                                   : 0.0;
    if (expected > static_cast<double>(cap))
      throw CapExceeded("copy catalog of " + std::to_string(static_cast<std::uint64_t>(expected)) +
                        " copies exceeds the cap of " + std::to_string(cap));
    enumerate();
    require(static_cast<double>(copies_.size()) == expected,
            "CopyCatalog: copy count disagrees with v!/aut * C(n, v)");
    build_neighbors();
  }

  const PatternGraph& pattern() const { return pattern_; }
  int n() const { return n_; }
  double p() const { return p_; }
  double q() const { return 1.0 - p_; }
  std::uint64_t aut() const { return aut_; }
  std::size_t host_edges() const { return host_edge_count(n_); }
  std::size_t size() const { return copies_.size(); }
  const std::vector<std::vector<int>>& copies() const { return copies_; }
  const std::vector<int>& copy(std::size_t i) const { return copies_[i]; }
  // Copies containing host edge k.
  const std::vector<std::uint32_t>& copies_with_edge(std::size_t k) const { return by_edge_[k]; }
  // Copies sharing at least one edge with copy i, itself included, ascending.
  const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  // Common neighborhood size; the constructor checks every copy agrees.
  std::size_t d() const { return d_; }

  bool fits_mask() const { return host_edges() <= 64; }
  Subset mask(std::size_t i) const {
    require(fits_mask(), "CopyCatalog::mask: host has more than 64 edges");
    Subset m = 0;
    for (int e : copies_[i]) m |= bit(static_cast<std::size_t>(e));
    return m;
  }

 private:
  void enumerate() {
    const int v = pattern_.vertices();
    if (n_ < v) return;
    std::vector<int> chosen(static_cast<std::size_t>(v));
    std::iota(chosen.begin(), chosen.end(), 0);
    std::vector<int> perm(static_cast<std::size_t>(v));
    while (true) {
      std::set<std::vector<int>> local;
      std::iota(perm.begin(), perm.end(), 0);
      do {
        std::vector<int> ids;
        ids.reserve(pattern_.edges().size());
        for (auto [a, b] : pattern_.edges())
          ids.push_back(host_edge_id(n_, chosen[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])],
                                     chosen[static_cast<std::size_t>(perm[static_cast<std::size_t>(b)])]));
        std::sort(ids.begin(), ids.end());
        local.insert(std::move(ids));
      } while (std::next_permutation(perm.begin(), perm.end()));
      for (const auto& c : local) copies_.push_back(c);
      // Next v-combination of 0..n-1.
      int i = v - 1;
      while (i >= 0 && chosen[static_cast<std::size_t>(i)] == n_ - v + i) --i;
      if (i < 0) break;
      ++chosen[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < v; ++j)
        chosen[static_cast<std::size_t>(j)] = chosen[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

  void build_neighbors() {
    by_edge_.assign(host_edges(), {});
    for (std::size_t i = 0; i < copies_.size(); ++i)
      for (int e : copies_[i]) by_edge_[static_cast<std::size_t>(e)].push_back(static_cast<std::uint32_t>(i));
    neighbors_.resize(copies_.size());
    std::vector<std::uint32_t> stamp(copies_.size(), 0);
    for (std::size_t i = 0; i < copies_.size(); ++i) {
      auto& nb = neighbors_[i];
      for (int e : copies_[i])
        for (std::uint32_t j : by_edge_[static_cast<std::size_t>(e)])
          if (stamp[j] != i + 1) {
            stamp[j] = static_cast<std::uint32_t>(i + 1);
            nb.push_back(j);
          }
      std::sort(nb.begin(), nb.end());
    }
    d_ = copies_.empty() ? 0 : neighbors_.front().size();
    for (const auto& nb : neighbors_)
      require(nb.size() == d_, "CopyCatalog: neighborhood sizes differ between copies");
  }

  PatternGraph pattern_;
  int n_;
  double p_;
  std::uint64_t aut_ = 0;
  std::vector<std::vector<int>> copies_;
  std::vector<std::vector<std::uint32_t>> by_edge_;
  std::vector<std::vector<std::uint32_t>> neighbors_;
  std::size_t d_ = 0;
};

inline std::size_t shared_edges(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t i = 0, j = 0, k = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++k;
      ++i;
      ++j;
    }
  }
  return k;
}

// Var(sum_Gamma B_Gamma): ordered pairs of copies sharing an edge contribute
// p^{|G1 u G2|} - p^{2e}; disjoint pairs are independent.
inline double sigma2_exact(const CopyCatalog& cat) {
  const int e = cat.pattern().edge_count();
  const double p2e = std::pow(cat.p(), 2 * e);
  CompensatedSum s;
  for (std::size_t i = 0; i < cat.size(); ++i)
    for (std::uint32_t j : cat.neighbors(i)) {
      const auto uni = static_cast<int>(2 * e - static_cast<int>(shared_edges(cat.copy(i), cat.copy(j))));
      s += std::pow(cat.p(), uni) - p2e;
    }
  return s.value();
}

// ---------------------------------------------------------------------------
// Constants. c_G0 and the corollary constant overflow a double for most
// patterns, so they are carried as natural logarithms.

inline double log_c_g0(const PatternGraph& g) {
  const double v_fact = factorial(static_cast<unsigned>(g.vertices()));
  return (4.5 + 7.5 * g.edge_count()) * std::log(2.0) + 4.0 * std::log(v_fact) +
         std::log(static_cast<double>(g.edge_count())) -
         1.5 * std::log(static_cast<double>(g.automorphisms()));
}

inline double c_g0(const PatternGraph& g) { return std::exp(log_c_g0(g)); }

// sqrt(2) sqrt(v!) v^2 e / sqrt(aut).
inline double c_hat_g0(const PatternGraph& g) {
  const double v = g.vertices();
  return std::sqrt(2.0) * std::sqrt(factorial(static_cast<unsigned>(g.vertices()))) * v * v *
         g.edge_count() / std::sqrt(static_cast<double>(g.automorphisms()));
}

// (v!)^{k-1} 2^{k(k-1)e/2} aut^{-k}.
inline double c_k(const PatternGraph& g, int k) {
  require(k >= 1, "c_k: k must be positive");
  const double lg = (k - 1) * std::log(factorial(static_cast<unsigned>(g.vertices()))) +
                    0.5 * k * (k - 1) * g.edge_count() * std::log(2.0) -
                    k * std::log(static_cast<double>(g.automorphisms()));
  return std::exp(lg);
}

// log of 100 (1 + c1) c_G0 e^{5 c1 c_hat + c2 c_G0}.
inline double log_corollary_constant(const PatternGraph& g, double c1, double c2) {
  require(c1 > 0.0 && c2 > 0.0, "corollary constant: c1 and c2 must be positive");
  return std::log(100.0) + std::log1p(c1) + log_c_g0(g) + 5.0 * c1 * c_hat_g0(g) + c2 * c_g0(g);
}

struct SubgraphBoundInputs {
  PatternGraph pattern;
  int n = 0;
  double p = 0.0;
  double psi_min = 0.0;
  double sigma2 = 0.0;
  std::size_t d_neighbors = 0;

  double q() const { return 1.0 - p; }
  double sigma() const { return std::sqrt(sigma2); }
  bool size_certified() const {
    return n >= 4 * pattern.vertices() * pattern.vertices();
  }
  // q/(2 v! aut) n^{2v} p^{2e} / Psi_min, valid for n >= 4 v^2.
  double sigma2_lower_bound() const {
    const int v = pattern.vertices(), e = pattern.edge_count();
    const double lg = std::log(q()) - std::log(2.0 * factorial(static_cast<unsigned>(v)) *
                                               static_cast<double>(pattern.automorphisms())) +
                      2.0 * v * std::log(static_cast<double>(n)) + 2.0 * e * std::log(p) -
                      std::log(psi_min);
    return std::exp(lg);
  }
};

inline SubgraphBoundInputs make_bound_inputs(const CopyCatalog& cat) {
  return {cat.pattern(), cat.n(), cat.p(), psi_min(cat.pattern(), cat.n(), cat.p()),
          sigma2_exact(cat), cat.d()};
}

// (1 + t/min{sqrt Psi, 1}) (1/sqrt(q Psi)) exp(5 D t / sigma).
inline double s_of_t(const SubgraphBoundInputs& in, double t) {
  require(t >= 0.0, "s(t): t must be nonnegative");
  return (1.0 + t / std::min(std::sqrt(in.psi_min), 1.0)) / std::sqrt(in.q() * in.psi_min) *
         std::exp(5.0 * static_cast<double>(in.d_neighbors) * t / in.sigma());
}

struct TheoremBound {
  double t = 0.0;
  double s = 0.0;
  double log_rhs = 0.0;
  double rhs = 0.0;  // may be +inf
  bool informative = false;
  bool certified = false;  // n >= 4 v^2
};

// 50 c_G0 exp(c_G0 t^2 s(t)) (1 + t^2) s(t).
inline TheoremBound theorem_bound(const SubgraphBoundInputs& in, double t) {
  require(t >= 0.0, "theorem_bound: t must be nonnegative");
  TheoremBound b;
  b.t = t;
  b.s = s_of_t(in, t);
  const double cg = c_g0(in.pattern);
  b.log_rhs = std::log(50.0) + log_c_g0(in.pattern) + cg * t * t * b.s + std::log1p(t * t) + std::log(b.s);
  b.rhs = std::exp(b.log_rhs);
  b.informative = b.log_rhs <= 0.0;
  b.certified = in.size_certified();
  return b;
}

struct CorollaryBound {
  double t = 0.0;
  double log_rhs = 0.0;
  double rhs = 0.0;  // may be +inf
  bool size_ok = false;   // n >= 4 v^2
  bool range_ok = false;  // t <= c1 n^2 p^e sqrt(q) / sqrt(Psi)
  bool s_ok = false;      // t^2 s(t) <= c2
  bool admissible() const { return size_ok && range_ok && s_ok; }
  bool informative = false;
};

// c1 n^2 p^e sqrt(q) / sqrt(Psi).
inline double corollary_t_limit(const SubgraphBoundInputs& in, double c1) {
  return c1 * static_cast<double>(in.n) * in.n * std::pow(in.p, in.pattern.edge_count()) *
         std::sqrt(in.q()) / std::sqrt(in.psi_min);
}

// C_{c1,c2} (1 + t^3) / sqrt(q Psi).
inline CorollaryBound corollary_bound(const SubgraphBoundInputs& in, double t, double c1, double c2) {
  require(t >= 0.0, "corollary_bound: t must be nonnegative");
  CorollaryBound b;
  b.t = t;
  b.log_rhs = log_corollary_constant(in.pattern, c1, c2) + std::log1p(t * t * t) -
              0.5 * std::log(in.q() * in.psi_min);
  b.rhs = std::exp(b.log_rhs);
  b.size_ok = in.size_certified();
  b.range_ok = t <= corollary_t_limit(in, c1);
  b.s_ok = t * t * s_of_t(in, t) <= c2;
  b.informative = b.log_rhs <= 0.0;
  return b;
}

struct ZhangBound {
  std::optional<double> piecewise;  // absent at p = 1/2
  double simplified = 0.0;
};

// C (1+t^2) b_n(p,t) and 2 C (1+t^2)(1 + t/sqrt q)/sqrt(q Psi).
inline ZhangBound zhang_bound(double psi, int n, double p, double t, double zhang_c = 1.0) {
  require(t >= 0.0, "zhang_bound: t must be nonnegative");
  require(p > 0.0 && p < 1.0, "zhang_bound: p must lie in (0,1)");
  const double q = 1.0 - p;
  ZhangBound z;
  z.simplified = 2.0 * zhang_c * (1.0 + t * t) * (1.0 + t / std::sqrt(q)) / std::sqrt(q * psi);
  if (p < 0.5)
    z.piecewise = zhang_c * (1.0 + t * t) * (1.0 + t) / std::sqrt(psi);
  else if (p > 0.5)
    z.piecewise = zhang_c * (1.0 + t * t) * (1.0 + t / std::sqrt(q)) / (n * std::sqrt(p));
  return z;
}

// Rates without constants: (1 + t^3)/sqrt(q Psi) and (1 + t^2)(1 + t/sqrt q)/sqrt(q Psi).
inline double corollary_rate(double psi, double p, double t) {
  return (1.0 + t * t * t) / std::sqrt((1.0 - p) * psi);
}
inline double zhang_rate(double psi, double p, double t) {
  const double q = 1.0 - p;
  return (1.0 + t * t) * (1.0 + t / std::sqrt(q)) / std::sqrt(q * psi);
}

// ---------------------------------------------------------------------------
// Operators on products of edge indicators. Edge sets are masks over a host
// of at most 64 edges; an outcome x is the mask of present edges, and
// B_S(x) = 1 iff S is contained in x.

inline double b_of(Subset s, Subset x) { return (s & ~x) == 0 ? 1.0 : 0.0; }

struct Lemma51Values {
  double grad = 0.0;          // D_k B_A^c
  double neg_grad_inv = 0.0;  // -D_k L^{-1} B_A^c
};

inline constexpr int kLemma51MaxSet = 20;

// Weight of alpha (k in alpha, alpha in A): 1/(|A| C(|A|-1, |alpha|-1)).
inline double lemma51_weight(int a_size, int alpha_size) {
  return 1.0 / (a_size * binomial(static_cast<unsigned>(a_size - 1), static_cast<unsigned>(alpha_size - 1)));
}

inline Lemma51Values lemma51_operators(Subset a, std::size_t k, Subset x, double p) {
  require(cardinality(a) <= kLemma51MaxSet, "lemma51_operators: |A| must be at most 20");
  require(p > 0.0 && p < 1.0, "lemma51_operators: p must lie in (0,1)");
  Lemma51Values out;
  if (!contains(a, k)) return out;
  const double spq = std::sqrt(p * (1.0 - p));
  const Subset rest = a & ~bit(k);
  out.grad = spq * b_of(rest, x);
  const int na = cardinality(a);
  std::vector<double> w(static_cast<std::size_t>(na) + 1);
  for (int m = 1; m <= na; ++m) w[static_cast<std::size_t>(m)] = std::pow(p, na - m) * lemma51_weight(na, m);
  CompensatedSum s;
  // alpha = {k} u beta over beta in A \ {k}; B_beta(x) vanishes unless beta is in x.
  const Subset live = rest & x;
  Subset beta = live;
  while (true) {
    s += w[static_cast<std::size_t>(cardinality(beta) + 1)];
    if (beta == 0) break;
    beta = (beta - 1) & live;
  }
  out.neg_grad_inv = spq * s.value();
  return out;
}

// sum over {k} in alpha in A of 1/(|A| C(|A|-1, |alpha|-1)), grouped by |alpha|.
inline double remark52_weight_sum(int a_size) {
  require(a_size >= 1, "remark52_weight_sum: |A| must be positive");
  CompensatedSum s;
  for (int i = 0; i < a_size; ++i)
    s += binomial(static_cast<unsigned>(a_size - 1), static_cast<unsigned>(i)) * lemma51_weight(a_size, i + 1);
  return s.value();
}

// B_A^c = sum_{nonempty alpha in A} p^{|A| - |alpha|/2} q^{|alpha|/2} Y_alpha on
// a symmetric-p space over `edges` coordinates.
inline WalshFunctional centered_indicator_walsh(Subset a, std::size_t edges, double p) {
  const RademacherSpace space(std::vector<double>(edges, p));
  require((a & ~space.full_mask()) == 0, "centered_indicator_walsh: A outside the host");
  WalshFunctional f(space);
  const int na = cardinality(a);
  Subset alpha = a;
  while (alpha != 0) {
    const int m = cardinality(alpha);
    f.add_term(alpha, std::pow(p, na - 0.5 * m) * std::pow(1.0 - p, 0.5 * m));
    alpha = (alpha - 1) & a;
  }
  return f;
}

// Maximum coefficient gap between the closed forms (as functions of the
// outcome) and the generic gradient / L^{-1} chain.
inline double lemma51_generic_gap(Subset a, std::size_t k, std::size_t edges, double p) {
  const WalshFunctional f = centered_indicator_walsh(a, edges, p);
  const WalshFunctional grad = gradient(f, k);
  const WalshFunctional inv = -gradient(ou_inverse(f), k);
  const std::size_t states = std::size_t{1} << edges;
  std::vector<double> g1(states), g2(states);
  // Table index bit j set <=> X_j = +1 <=> edge j present.
  for (std::size_t x = 0; x < states; ++x) {
    const auto v = lemma51_operators(a, k, x, p);
    g1[x] = v.grad;
    g2[x] = v.neg_grad_inv;
  }
  const WalshFunctional c1 = from_values(f.space(), std::move(g1), edges);
  const WalshFunctional c2 = from_values(f.space(), std::move(g2), edges);
  const WalshFunctional d1 = c1 - grad, d2 = c2 - inv;
  double gap = 0.0;
  for (const auto& [s, c] : d1.coefficients()) gap = std::max(gap, std::fabs(c));
  for (const auto& [s, c] : d2.coefficients()) gap = std::max(gap, std::fabs(c));
  return gap;
}

// E[prod_i B^c_{A_i}] and E[|prod_i B^c_{A_i}|] by enumerating the union.
struct CenteredMoments {
  double signed_mean = 0.0;
  double abs_mean = 0.0;
};

inline CenteredMoments centered_product_moments(const std::vector<Subset>& sets, double p) {
  Subset uni = 0;
  for (Subset s : sets) uni |= s;
  const int m = cardinality(uni);
  require(m <= 24, "centered_product_moments: union too large to enumerate");
  std::vector<int> pos;
  for (Subset r = uni; r != 0; r &= r - 1) pos.push_back(std::countr_zero(r));
  std::vector<double> mean(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) mean[i] = std::pow(p, cardinality(sets[i]));
  CompensatedSum sg, ab;
  for (std::uint64_t y = 0; y < (std::uint64_t{1} << m); ++y) {
    Subset x = 0;
    for (int j = 0; j < m; ++j)
      if ((y >> j) & 1U) x |= bit(static_cast<std::size_t>(pos[static_cast<std::size_t>(j)]));
    const int present = std::popcount(y);
    const double prob = std::pow(p, present) * std::pow(1.0 - p, m - present);
    double prod = 1.0;
    for (std::size_t i = 0; i < sets.size(); ++i) prod *= b_of(sets[i], x) - mean[i];
    sg += prob * prod;
    ab += prob * std::fabs(prod);
  }
  return {sg.value(), ab.value()};
}

struct Lemma53Result {
  bool part1 = true, part2 = true, part3 = true, part4 = true;
  // Halves of part 3: 0 <= E[B^c B^c B^c] and E[B^c B^c B^c] <= E[B_{A1 u A2 u A3}].
  bool part3_lower = true, part3_upper = true;
  double third_moment = 0.0;
  bool all() const { return part1 && part2 && part3 && part4; }
};

inline constexpr double kLemmaTolerance = 1e-12;

inline Lemma53Result lemma53_check(Subset a1, Subset a2, Subset a3, const std::vector<Subset>& family,
                                   double p) {
  require(p > 0.0 && p < 1.0, "lemma53_check: p must lie in (0,1)");
  const auto eb = [p](Subset s) { return std::pow(p, cardinality(s)); };
  const auto le = [](double lhs, double rhs) { return lhs <= rhs + kLemmaTolerance * std::max(1.0, std::fabs(rhs)); };
  const auto ge0 = [](double v) { return v >= -kLemmaTolerance; };
  Lemma53Result r;
  const double prod = eb(a1) * eb(a2);
  r.part1 = ge0(prod) && le(prod, eb(a1 | a2));
  const double m2 = centered_product_moments({a1, a2}, p).signed_mean;
  r.part2 = ge0(m2) && le(m2, eb(a1 | a2));
  const double m3 = centered_product_moments({a1, a2, a3}, p).signed_mean;
  r.third_moment = m3;
  r.part3_lower = ge0(m3);
  r.part3_upper = le(m3, eb(a1 | a2 | a3));
  r.part3 = r.part3_lower && r.part3_upper;
  Subset uni = 0;
  for (Subset s : family) uni |= s;
  const double m4 = centered_product_moments(family, p).abs_mean;
  r.part4 = ge0(m4) && le(m4, std::ldexp(eb(uni), static_cast<int>(family.size())));
  return r;
}

// ---------------------------------------------------------------------------
// Sums over sets of connected copies: ordered tuples (G_1, ..., G_m) with each
// G_i sharing an edge with some earlier G_j. Earlier copies may repeat, which
// only adds terms to the left-hand side.

struct Lemma55Result {
  double lhs1 = 0.0, rhs1 = 0.0;
  double lhs2 = 0.0, rhs2 = 0.0;
  std::uint64_t tuples = 0;
  bool part1() const { return lhs1 <= rhs1 * (1.0 + kLemmaTolerance); }
  bool part2() const { return lhs2 <= rhs2 * (1.0 + kLemmaTolerance); }
  bool holds() const { return part1() && part2(); }
};

inline constexpr std::uint64_t kConnectedTupleCap = 50000000;

// Union masks of every connected tuple of size m.
inline std::vector<Subset> connected_unions(const CopyCatalog& cat, int m,
                                            std::uint64_t cap = kConnectedTupleCap) {
  require(cat.fits_mask(), "connected copies: host must have at most 64 edges");
  require(m >= 1, "connected copies: size must be positive");
  std::vector<Subset> masks(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) masks[i] = cat.mask(i);
  std::vector<Subset> out;
  std::vector<std::uint32_t> tuple;
  // reach[c] is set when c neighbors some copy already in the tuple.
  auto rec = [&](auto&& self, Subset uni, const std::vector<char>& reach) -> void {
    if (static_cast<int>(tuple.size()) == m) {
      if (out.size() >= cap) throw CapExceeded("connected copy enumeration exceeds its cap");
      out.push_back(uni);
      return;
    }
    for (std::uint32_t c = 0; c < cat.size(); ++c) {
      if (!tuple.empty() && !reach[c]) continue;
      std::vector<char> next = reach;
      for (std::uint32_t nb : cat.neighbors(c)) next[nb] = 1;
      tuple.push_back(c);
      self(self, uni | masks[c], next);
      tuple.pop_back();
    }
  };
  rec(rec, 0, std::vector<char>(cat.size(), 0));
  return out;
}

inline Lemma55Result lemma55_check(const PatternGraph& g, int n, double p, int m, int m_hat) {
  const CopyCatalog cat(g, n, p);
  const double psi = psi_min(g, n, p);
  const int v = g.vertices(), e = g.edge_count();
  Lemma55Result r;
  const auto first = connected_unions(cat, m);
  CompensatedSum s1;
  for (Subset u : first) s1 += std::pow(p, cardinality(u));
  r.lhs1 = s1.value();
  r.rhs1 = c_k(g, m) * std::pow(n, m * v) * std::pow(p, m * e) / std::pow(psi, m - 1);
  r.tuples = first.size();

  const auto second = connected_unions(cat, m_hat);
  CompensatedSum s2;
  for (Subset u : first)
    for (Subset w : second) s2 += std::pow(p, cardinality(u | w));
  const int mb = m + m_hat;
  r.lhs2 = s2.value();
  r.rhs2 = c_k(g, mb) * std::pow(n, mb * v) * std::pow(p, mb * e) /
           (std::pow(psi, mb - 2) * std::min(psi, 1.0));
  return r;
}

// ---------------------------------------------------------------------------
// Conditioning inequalities for the moment generating function, checked by
// enumerating every host graph.

// F = sum_j coef_j prod_{Gamma in S_j} B_Gamma with coef_j >= 0 and each S_j a
// set of copy indices drawn from A_2.
struct NonnegPolynomial {
  std::vector<std::pair<double, std::vector<std::uint32_t>>> terms;
};

struct Lemma56Result {
  double lhs1 = 0.0, rhs1 = 0.0;
  double lhs2 = 0.0, rhs2 = 0.0;
  bool first() const { return lhs1 <= rhs1 * (1.0 + kLemmaTolerance); }
  bool second() const { return lhs2 <= rhs2 * (1.0 + kLemmaTolerance); }
  bool holds() const { return first() && second(); }
};

inline constexpr std::size_t kLemma56MaxEdges = 20;

inline Lemma56Result lemma56_check(const CopyCatalog& cat, const std::vector<std::uint32_t>& a1,
                                   const std::vector<std::uint32_t>& a2, const NonnegPolynomial& f,
                                   double t) {
  require(t >= 0.0, "lemma56_check: t must be nonnegative");
  if (cat.host_edges() > kLemma56MaxEdges)
    throw CapExceeded("lemma56_check: host has more than 20 edges");
  std::vector<char> in_a2(cat.size(), 0), in_a1(cat.size(), 0), in_hat(cat.size(), 0);
  for (auto c : a1) in_a1.at(c) = 1;
  for (auto c : a2) {
    in_a2.at(c) = 1;
    for (auto nb : cat.neighbors(c)) in_hat[nb] = 1;
  }
  for (const auto& [coef, mono] : f.terms) {
    require(coef >= 0.0, "lemma56_check: F must have nonnegative coefficients");
    for (auto c : mono) require(in_a2.at(c), "lemma56_check: F may only involve copies in A2");
  }
  std::size_t a1_hat = 0, a1_size = 0;
  for (std::size_t c = 0; c < cat.size(); ++c) {
    a1_hat += in_a1[c] || in_hat[c];
    a1_size += in_a1[c];
  }

  const std::size_t m = cat.host_edges();
  const double p = cat.p();
  const double pe = std::pow(p, cat.pattern().edge_count());
  const double sigma = std::sqrt(sigma2_exact(cat));
  std::vector<Subset> masks(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) masks[i] = cat.mask(i);

  CompensatedSum e_f, e_w, lhs1, lhs2;
  std::vector<double> b(cat.size());
  for (Subset x = 0; x < (Subset{1} << m); ++x) {
    const int present = std::popcount(x);
    const double prob = std::pow(p, present) * std::pow(1.0 - p, static_cast<int>(m) - present);
    double all = 0.0, outside = 0.0;
    for (std::size_t c = 0; c < cat.size(); ++c) {
      b[c] = b_of(masks[c], x);
      all += b[c] - pe;
      if (!in_a1[c]) outside += b[c] - pe;
    }
    double fx = 0.0;
    for (const auto& [coef, mono] : f.terms) {
      double term = coef;
      for (auto c : mono) term *= b[c];
      fx += term;
    }
    const double eo = std::exp(t / sigma * outside);
    e_f += prob * fx;
    e_w += prob * std::exp(t / sigma * all);
    lhs1 += prob * fx * eo;
    lhs2 += prob * eo;
  }
  Lemma56Result r;
  r.lhs1 = lhs1.value();
  r.rhs1 = e_f.value() * std::exp(t / sigma * static_cast<double>(a1_hat)) * e_w.value();
  r.lhs2 = lhs2.value();
  r.rhs2 = std::exp(t / sigma * static_cast<double>(a1_size)) * e_w.value();
  return r;
}

// E[sqrt(pq) sum_k U_k] from the decomposition
//   U_k = (sqrt(pq)/sigma^2) sum_{G1, G2 containing k} V_k^{G1,G2},
//   V_k^{G1,G2} = sum_{k in alpha in G2} p^{|G2|-|alpha|} w(|G2|, |alpha|) B_{(G1 u alpha) \ k},
// using E[B_S] = p^{|S|}.
inline double uk_decomposition_mean(const CopyCatalog& cat) {
  require(cat.fits_mask(), "uk_decomposition_mean: host must have at most 64 edges");
  const double p = cat.p(), pq = p * cat.q();
  const double s2 = sigma2_exact(cat);
  const int e = cat.pattern().edge_count();
  CompensatedSum total;
  for (std::size_t k = 0; k < cat.host_edges(); ++k) {
    const auto& with_k = cat.copies_with_edge(k);
    for (auto g1 : with_k) {
      const Subset m1 = cat.mask(g1);
      for (auto g2 : with_k) {
        const Subset rest = cat.mask(g2) & ~bit(k);
        Subset beta = rest;
        while (true) {
          const int alpha_size = cardinality(beta) + 1;
          const Subset s = (m1 | beta) & ~bit(k);
          total += std::pow(p, e - alpha_size) * lemma51_weight(e, alpha_size) *
                   std::pow(p, cardinality(s));
          if (beta == 0) break;
          beta = (beta - 1) & rest;
        }
      }
    }
  }
  return pq / s2 * total.value();
}

// ---------------------------------------------------------------------------
// Sampling W = (sum_Gamma B_Gamma - |M| p^e) / sigma.

class SubgraphSampler {
 public:
  SubgraphSampler(const CopyCatalog& cat, double sigma2)
      : edges_(cat.host_edges()), e_(static_cast<std::size_t>(cat.pattern().edge_count())) {
    require(sigma2 > 0.0, "SubgraphSampler: sigma^2 must be positive");
    flat_.reserve(cat.size() * e_);
    for (const auto& c : cat.copies())
      for (int id : c) flat_.push_back(static_cast<std::uint32_t>(id));
    mean_ = static_cast<double>(cat.size()) * std::pow(cat.p(), cat.pattern().edge_count());
    inv_sigma_ = 1.0 / std::sqrt(sigma2);
    // Edge present iff a uniform 32-bit word falls below p 2^32.
    threshold_ = static_cast<std::uint64_t>(std::ldexp(cat.p(), 32));
    present_.resize(edges_);
  }

  double operator()(Philox& rng) {
    for (std::size_t k = 0; k < edges_; k += 2) {
      const std::uint64_t w = rng();
      present_[k] = (w >> 32) < threshold_;
      if (k + 1 < edges_) present_[k + 1] = (w & 0xffffffffULL) < threshold_;
    }
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < flat_.size(); i += e_) {
      bool all = true;
      for (std::size_t j = 0; j < e_; ++j)
        if (!present_[flat_[i + j]]) {
          all = false;
          break;
        }
      count += all;
    }
    return (static_cast<double>(count) - mean_) * inv_sigma_;
  }

 private:
  std::size_t edges_;
  std::size_t e_;
  std::vector<std::uint32_t> flat_;
  double mean_ = 0.0;
  double inv_sigma_ = 1.0;
  std::uint64_t threshold_ = 0;
  std::vector<char> present_;
};

}  // namespace rstein
