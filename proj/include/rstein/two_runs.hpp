#pragma once

// Weighted 2-runs statistic G = sum_i a_i xi_i xi_{i+1} over i.i.d. fair
// Bernoulli xi_i = (X_i + 1)/2, and its standardization F = (G - E G)/sqrt(Var G).
// Coefficients live on a finite window of Z and vanish outside it.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rstein/mdp.hpp"
#include "rstein/numeric.hpp"
#include "rstein/rng.hpp"
#include "rstein/walsh.hpp"

namespace rstein {

class CoefficientSequence {
 public:
  CoefficientSequence(long offset, std::vector<double> values)
      : offset_(offset), values_(std::move(values)) {
    require(!values_.empty(), "CoefficientSequence: empty value list");
    bool nonzero = false;
    for (double a : values_) {
      require(std::isfinite(a), "CoefficientSequence: coefficients must be finite");
      nonzero = nonzero || a != 0.0;
    }
    require(nonzero, "CoefficientSequence: at least one coefficient must be nonzero");
  }

  // a_i = 1 for i = 1..n.
  static CoefficientSequence indicator(std::size_t n) {
    require(n >= 1, "indicator: n must be at least 1");
    return CoefficientSequence(1, std::vector<double>(n, 1.0));
  }

  long offset() const { return offset_; }
  std::size_t length() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  double operator[](long i) const {
    const long j = i - offset_;
    if (j < 0 || j >= static_cast<long>(values_.size())) return 0.0;
    return values_[static_cast<std::size_t>(j)];
  }

 private:
  long offset_;
  std::vector<double> values_;
};

inline nlohmann::json to_json(const CoefficientSequence& a) {
  return {{"offset", a.offset()}, {"values", a.values()}};
}

inline CoefficientSequence coefficients_from_json(const nlohmann::json& j) {
  return CoefficientSequence(j.at("offset").get<long>(), j.at("values").get<std::vector<double>>());
}

// (3/16) sum a_i^2 + (1/8) sum a_i a_{i+1}.
inline double variance(const CoefficientSequence& a) {
  CompensatedSum sq, adj;
  const auto& v = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    sq += v[i] * v[i];
    if (i + 1 < v.size()) adj += v[i] * v[i + 1];
  }
  return 3.0 / 16.0 * sq.value() + 1.0 / 8.0 * adj.value();
}

inline constexpr double kNormHierarchyConstant = 4.0;

class TwoRunsModel {
 public:
  explicit TwoRunsModel(CoefficientSequence a) : a_(std::move(a)) {
    var_ = variance(a_);
    require(var_ > 0.0, "TwoRunsModel: Var(G) must be positive");
    for (int p = 1; p <= 6; ++p) {
      CompensatedSum s;
      for (double x : a_.values()) s += std::pow(std::fabs(x), p);
      power_sums_[p - 1] = s.value();
    }
    CompensatedSum m;
    for (double x : a_.values()) m += x;
    mean_ = m.value() / 4.0;
  }

  const CoefficientSequence& coefficients() const { return a_; }
  double var_g() const { return var_; }
  double sd_g() const { return std::sqrt(var_); }
  double mean_g() const { return mean_; }

  // sum |a_i|^p, p in 1..6.
  double power_sum(int p) const {
    require(p >= 1 && p <= 6, "power_sum: p must be in 1..6");
    return power_sums_[p - 1];
  }
  double lp_norm(int p) const { return std::pow(power_sum(p), 1.0 / p); }

  // ||a||_4^2 / Var(G).
  double c_n() const { return std::sqrt(power_sum(4)) / var_; }

  // The four constants from the gamma_1 estimate; c_n_i(2) == c_n().
  double c_n_i(int i) const {
    switch (i) {
      case 1: return power_sum(3) / std::pow(var_, 1.5);
      case 2: return c_n();
      case 3: return std::sqrt(power_sum(5)) / std::pow(var_, 1.25);
      case 4: return std::sqrt(power_sum(6)) / std::pow(var_, 1.5);
      default: throw DomainError("c_n_i: index must be in 1..4");
    }
  }

  // Number of xi coordinates touched: indices offset .. offset + length.
  std::size_t coordinates() const { return a_.length() + 1; }

 private:
  CoefficientSequence a_;
  double var_ = 0.0;
  double mean_ = 0.0;
  double power_sums_[6] = {};
};

// Constants standing in for the unspecified O(1) prefactor and exponent rate.
struct GammaConstants {
  double big_o = 1.0;
  double c_exp = 1.0;
};

// big_o * e^{c_exp z / sqrt(Var G)} (sqrt(z) sqrt(C_n) + (1 + sqrt(z) + z) C_n).
inline double gamma_n(const TwoRunsModel& m, double z, GammaConstants k = {}) {
  require(z >= 0.0, "gamma_n: z must be nonnegative");
  const double c = m.c_n();
  const double rz = std::sqrt(z);
  return k.big_o * std::exp(k.c_exp * z / m.sd_g()) * (rz * std::sqrt(c) + (1.0 + rz + z) * c);
}

// min{C_n^{-1/5}, C_n^{-1/3}, C_n^{-2/5}, sqrt(Var G)}.
inline double admissible_range(const TwoRunsModel& m) {
  const double c = m.c_n();
  return std::min({std::pow(c, -0.2), std::pow(c, -1.0 / 3.0), std::pow(c, -0.4), m.sd_g()});
}

// gamma_1 = K e^{ct}(1 + sqrt t + t) C_n and gamma_2 = K e^{ct}(sqrt t sqrt C_n + (1+t) C_n),
// with c = c_exp / sqrt(Var G); gamma_n <= gamma_1 + gamma_2 <= 2 gamma_n. Domain [0, admissible_range].
inline GammaEnvelope two_runs_envelope(const TwoRunsModel& m, GammaConstants k = {}) {
  const double c = m.c_n();
  const double rate = k.c_exp / m.sd_g();
  auto fn = [=](double t) {
    const double e = k.big_o * std::exp(rate * t);
    const double rt = std::sqrt(t);
    return GammaValues{e * (1.0 + rt + t) * c, e * (rt * std::sqrt(c) + (1.0 + t) * c)};
  };
  return GammaEnvelope(fn, admissible_range(m),
                       {{"big_o", std::to_string(k.big_o) + " (caller constant, unspecified in source)"},
                        {"c_exp", std::to_string(k.c_exp) + " (caller constant, unspecified in source)"},
                        {"C_n", "exact ||a||_4^2 / Var(G)"}});
}

// Signs X_i for i = offset .. offset + size - 1.
struct SignWindow {
  long offset = 0;
  std::vector<int> signs;

  bool covers(long i) const {
    return i >= offset && i < offset + static_cast<long>(signs.size());
  }
  int at(long i) const {
    require(covers(i), "SignWindow: index " + std::to_string(i) + " outside the window");
    return signs[static_cast<std::size_t>(i - offset)];
  }
};

struct OperatorPair {
  double grad = 0.0;         // D_k F
  double neg_grad_inv = 0.0; // -D_k L^{-1} F
};

// Closed forms of D_k F and -D_k L^{-1} F at the signs in the window.
inline OperatorPair exact_operators(const TwoRunsModel& m, long k, const SignWindow& x) {
  const auto& a = m.coefficients();
  const double left = a[k - 1], right = a[k];
  OperatorPair out;
  if (left == 0.0 && right == 0.0) return out;
  require(x.covers(k - 1) && x.covers(k + 1), "exact_operators: window must cover k-1..k+1");
  const double xl = x.at(k - 1), xr = x.at(k + 1);
  out.grad = (left * (xl + 1.0) + right * (xr + 1.0)) / (4.0 * m.sd_g());
  out.neg_grad_inv = (left * (xl + 2.0) + right * (xr + 2.0)) / (8.0 * m.sd_g());
  return out;
}

// <DF, -DL^{-1}F> from the expanded quadratic form, summed over every k with
// a_{k-1} or a_k nonzero.
inline double stein_inner_display(const TwoRunsModel& m, const SignWindow& x) {
  const auto& a = m.coefficients();
  CompensatedSum s;
  const long first = a.offset();
  const long last = a.offset() + static_cast<long>(a.length());
  for (long k = first; k <= last; ++k) {
    const double l = a[k - 1], r = a[k];
    if (l == 0.0 && r == 0.0) continue;
    double term = 0.0;
    if (l != 0.0) {
      const double u = x.at(k - 1);
      term += l * l * (u * u + 3.0 * u + 2.0);
    }
    if (r != 0.0) {
      const double v = x.at(k + 1);
      term += r * r * (v * v + 3.0 * v + 2.0);
    }
    if (l != 0.0 && r != 0.0) {
      const double u = x.at(k - 1), v = x.at(k + 1);
      term += l * r * (3.0 * u + 2.0 * u * v + 3.0 * v + 4.0);
    }
    s += term;
  }
  return s.value() / (32.0 * m.var_g());
}

// Walsh form of F on the symmetric space with coordinate j <-> X_{offset + j},
// j = 0 .. length. At p = 1/2, Y = X and
//   F = (1/(4 sqrt Var)) sum_i a_i (X_i + X_{i+1} + X_i X_{i+1}).
inline WalshFunctional walsh_expansion(const TwoRunsModel& m) {
  const auto& v = m.coefficients().values();
  require(m.coordinates() <= kMaxCoordinates, "walsh_expansion: support too long for a mask");
  const auto space = RademacherSpace::symmetric(m.coordinates());
  WalshFunctional f(space);
  const double scale = 1.0 / (4.0 * m.sd_g());
  for (std::size_t j = 0; j < v.size(); ++j) {
    f.add_term(bit(j), scale * v[j]);
    f.add_term(bit(j + 1), scale * v[j]);
    f.add_term(bit(j) | bit(j + 1), scale * v[j]);
  }
  return f;
}

// Draws F by filling the xi window with random bits, 64 per word, and summing
// weights over adjacent pairs of ones.
class TwoRunsSampler {
 public:
  explicit TwoRunsSampler(const TwoRunsModel& m)
      : weights_(m.coefficients().values()), mean_(m.mean_g()), inv_sd_(1.0 / m.sd_g()) {
    bits_ = weights_.size() + 1;
    words_ = (bits_ + 63) / 64;
    uniform_ = std::all_of(weights_.begin(), weights_.end(),
                           [&](double w) { return w == weights_.front(); });
    buf_.resize(words_);
  }

  double operator()(Philox& rng) {
    for (std::size_t w = 0; w < words_; ++w) buf_[w] = rng();
    const std::size_t tail = bits_ % 64;
    if (tail != 0) buf_[words_ - 1] &= (std::uint64_t{1} << tail) - 1;
    double g = 0.0;
    std::uint64_t count = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      // Bit j of pairs: xi_{64w+j} = xi_{64w+j+1} = 1.
      const std::uint64_t next_low = w + 1 < words_ ? (buf_[w + 1] & 1U) : 0U;
      const std::uint64_t pairs = buf_[w] & ((buf_[w] >> 1) | (next_low << 63));
      if (uniform_) {
        count += static_cast<std::uint64_t>(std::popcount(pairs));
      } else {
        for (std::uint64_t rest = pairs; rest != 0; rest &= rest - 1)
          g += weights_[64 * w + static_cast<std::size_t>(std::countr_zero(rest))];
      }
    }
    if (uniform_) g = weights_.front() * static_cast<double>(count);
    return (g - mean_) * inv_sd_;
  }

 private:
  std::vector<double> weights_;
  double mean_;
  double inv_sd_;
  std::size_t bits_ = 0;
  std::size_t words_ = 0;
  bool uniform_ = false;
  std::vector<std::uint64_t> buf_;
};

}  // namespace rstein
