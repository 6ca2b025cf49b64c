#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rstein {

// Invalid argument or violated precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An enumeration or catalog would exceed its configured cap.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

// Neumaier variant of Kahan compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double binomial(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / i;
  return std::round(r);
}

inline double factorial(unsigned n) {
  double r = 1.0;
  for (unsigned i = 2; i <= n; ++i) r *= i;
  return r;
}

// 64-bit FNV-1a, used for config fingerprints.
inline std::uint64_t fnv1a(const std::string& bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rstein
