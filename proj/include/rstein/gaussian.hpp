#pragma once

// Standard normal primitives and the bounded solution of the Stein equation
//   f'(w) - w f(w) = 1{w <= z} - Phi(z).
//
// The upper tail is evaluated through erfc so that it keeps full relative
// accuracy deep in the tail; it is never formed as 1 - Phi(w).

#include <cmath>
#include <numbers>

#include "rstein/numeric.hpp"

namespace rstein::normal {

inline constexpr double kSqrt2Pi = 2.506628274631000502415765284811;
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

inline double pdf(double w) { return kInvSqrt2Pi * std::exp(-0.5 * w * w); }

inline double cdf(double w) { return 0.5 * std::erfc(-w * std::numbers::sqrt2 / 2.0); }

// 1 - Phi(w).
inline double upper_tail(double w) { return 0.5 * std::erfc(w * std::numbers::sqrt2 / 2.0); }

namespace detail {
// (1 - Phi(w)) / p(w) by the Laplace continued fraction, w > 0.
inline double mills_continued_fraction(double w, int terms = 80) {
  double tail = 0.0;
  for (int k = terms; k >= 1; --k) tail = k / (w + tail);
  return 1.0 / (w + tail);
}
}  // namespace detail

// Mills ratio (1 - Phi(w)) / p(w).
inline double mills_ratio(double w) {
  // Beyond w = 30 the density underflows the ratio of two doubles.
  if (w > 30.0) return detail::mills_continued_fraction(w);
  return upper_tail(w) / pdf(w);
}

// f_z(w): Phi(w)(1 - Phi(z))/p(w) for w <= z, Phi(z)(1 - Phi(w))/p(w) for w > z.
inline double stein_solution(double z, double w) {
  if (w <= z) return mills_ratio(-w) * upper_tail(z);
  return cdf(z) * mills_ratio(w);
}

// (1 - Phi(w))/p(w) <= max{1/w, sqrt(2 pi)/2}, w > 0.
inline bool mills_bound_check(double w) {
  require(w > 0.0, "mills_bound_check: w must be positive");
  return mills_ratio(w) <= std::max(1.0 / w, kSqrt2Pi / 2.0);
}

// exp(-z^2/2) <= sqrt(2 pi) (1 + z) (1 - Phi(z)), z > 0.
inline bool tail_exponential_bound_check(double z) {
  require(z > 0.0, "tail_exponential_bound_check: z must be positive");
  return std::exp(-0.5 * z * z) <= kSqrt2Pi * (1.0 + z) * upper_tail(z);
}

// The four sup-norm bounds on f_z, each paired with the region where it is
// claimed. A bound outside its region is reported as holding.
struct SteinBoundStatus {
  bool abs_f_left = true;      // |f_z(w)|   <= sqrt(2pi)/2 (1 - Phi(z)),  w < 0
  bool abs_wf_left = true;     // |w f_z(w)| <= 1 - Phi(z),                w < 0
  bool abs_f_right = true;     // |f_z(w)|   <= sqrt(2pi)/2 Phi(z),        w > z
  bool abs_wf_right = true;    // |w f_z(w)| <= 1,                         w > z

  bool all() const { return abs_f_left && abs_wf_left && abs_f_right && abs_wf_right; }
};

inline SteinBoundStatus stein_bounds(double z, double w, double rel_tol = 1e-12) {
  const double f = std::fabs(stein_solution(z, w));
  const double wf = std::fabs(w) * f;
  const auto le = [rel_tol](double lhs, double rhs) { return lhs <= rhs * (1.0 + rel_tol); };
  SteinBoundStatus s;
  if (w < 0.0) {
    s.abs_f_left = le(f, kSqrt2Pi / 2.0 * upper_tail(z));
    s.abs_wf_left = le(wf, upper_tail(z));
  }
  if (w > z) {
    s.abs_f_right = le(f, kSqrt2Pi / 2.0 * cdf(z));
    s.abs_wf_right = le(wf, 1.0);
  }
  return s;
}

}  // namespace rstein::normal
