#pragma once

// Monte Carlo estimation of tail probabilities, tail ratios against the
// Gaussian tail, and moment generating functions.
//
// Work is cut into fixed-size chunks; chunk c always draws from Philox stream
// (seed, c) and chunk results are merged in chunk order. Estimates therefore
// depend only on (seed, samples, chunk size), never on the thread count or on
// scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "rstein/gaussian.hpp"
#include "rstein/numeric.hpp"
#include "rstein/rng.hpp"

namespace rstein {

inline constexpr std::uint64_t kDefaultChunk = 1 << 14;

struct McConfig {
  std::uint64_t seed = 1;
  std::uint64_t samples = 100000;
  unsigned threads = 1;
  std::uint64_t chunk = kDefaultChunk;
};

// Thread count from RSTEIN_THREADS, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("RSTEIN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

// Feeds every draw of `sampler` (callable double(Philox&), copied once per
// worker) into a per-chunk copy of `proto`; Acc needs add(double) and
// merge(const Acc&).
template <class Acc, class Sampler>
Acc run_chunks(const Sampler& sampler, const McConfig& cfg, const Acc& proto) {
  require(cfg.chunk > 0, "run_chunks: chunk size must be positive");
  const std::uint64_t n_chunks = (cfg.samples + cfg.chunk - 1) / cfg.chunk;
  std::vector<Acc> partial(n_chunks, proto);
  std::atomic<std::uint64_t> next{0};
  auto work = [&] {
    Sampler local = sampler;
    for (std::uint64_t c = next++; c < n_chunks; c = next++) {
      Philox rng(cfg.seed, c);
      const std::uint64_t count = std::min(cfg.chunk, cfg.samples - c * cfg.chunk);
      Acc& acc = partial[c];
      for (std::uint64_t i = 0; i < count; ++i) acc.add(local(rng));
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(cfg.threads, n_chunks));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
  }
  Acc total = proto;
  for (const auto& acc : partial) total.merge(acc);
  return total;
}

// All draws, in stream order.
struct DrawCollector {
  std::vector<double> draws;
  void add(double x) { draws.push_back(x); }
  void merge(const DrawCollector& o) { draws.insert(draws.end(), o.draws.begin(), o.draws.end()); }
};

template <class Sampler>
std::vector<double> sample_stream(const Sampler& sampler, const McConfig& cfg) {
  require(cfg.samples >= 1, "sample: count must be at least 1");
  return run_chunks(sampler, cfg, DrawCollector{}).draws;
}

// Streaming mean/variance (Welford, merged by Chan's formula).
struct MomentAccumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  void merge(const MomentAccumulator& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

// ---------------------------------------------------------------------------
// Tail ratios.

inline constexpr double kWilsonZ95 = 1.959963984540054;
inline constexpr std::uint64_t kMinTailSamples = 10000;
inline constexpr std::uint64_t kDegenerateHits = 30;

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

inline WilsonInterval wilson_interval(std::uint64_t hits, std::uint64_t n, double z = kWilsonZ95) {
  require(n > 0 && hits <= n, "wilson_interval: need 0 <= hits <= n, n > 0");
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn));
  WilsonInterval w{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (hits == 0) w.low = 0.0;
  if (hits == n) w.high = 1.0;
  return w;
}

struct TailEstimate {
  double z = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t hits = 0;
  double p_hat = 0.0;
  double gaussian_tail = 0.0;  // 1 - Phi(z), exact
  double ratio_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t seed = 0;
  bool degenerate = false;  // fewer than 30 hits
  bool zero_hits = false;   // ratio undefined; only ci_high is meaningful

  double abs_deviation() const { return std::fabs(ratio_hat - 1.0); }
  // Standard error of ratio_hat from the binomial variance.
  double ratio_std_error() const {
    return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(samples)) / gaussian_tail;
  }
};

inline TailEstimate make_tail_estimate(double z, std::uint64_t hits, std::uint64_t samples,
                                       std::uint64_t seed) {
  TailEstimate e;
  e.z = z;
  e.samples = samples;
  e.hits = hits;
  e.seed = seed;
  e.p_hat = static_cast<double>(hits) / static_cast<double>(samples);
  e.gaussian_tail = normal::upper_tail(z);
  const auto w = wilson_interval(hits, samples);
  e.ratio_hat = e.p_hat / e.gaussian_tail;
  e.ci_low = w.low / e.gaussian_tail;
  e.ci_high = w.high / e.gaussian_tail;
  e.degenerate = hits < kDegenerateHits;
  e.zero_hits = hits == 0;
  return e;
}

struct ThresholdCounter {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> hits;

  explicit ThresholdCounter(std::vector<double> zs)
      : thresholds(std::move(zs)), hits(thresholds.size(), 0) {}
  void add(double x) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) hits[i] += x > thresholds[i];
  }
  void merge(const ThresholdCounter& o) {
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
  }
};

// One pass over the sampler, one estimate per threshold.
template <class Sampler>
std::vector<TailEstimate> tail_ratios(const Sampler& sampler, const std::vector<double>& zs,
                                      const McConfig& cfg) {
  require(cfg.samples >= kMinTailSamples, "tail_ratio: at least 10^4 samples required");
  const auto counts = run_chunks(sampler, cfg, ThresholdCounter(zs));
  std::vector<TailEstimate> out;
  for (std::size_t i = 0; i < zs.size(); ++i)
    out.push_back(make_tail_estimate(zs[i], counts.hits[i], cfg.samples, cfg.seed));
  return out;
}

template <class Sampler>
TailEstimate tail_ratio(const Sampler& sampler, double z, const McConfig& cfg) {
  return tail_ratios(sampler, {z}, cfg).front();
}

// ---------------------------------------------------------------------------
// Moment generating function.

inline constexpr double kExpOverflowGuard = 700.0;

struct MgfEstimate {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;  // delete-one jackknife
  std::uint64_t samples = 0;
  std::uint64_t overflow = 0;  // draws with tF > 700, excluded from the mean
};

struct MgfAccumulator {
  std::vector<double> ts;
  std::vector<MomentAccumulator> moments;
  std::vector<std::uint64_t> overflow;

  explicit MgfAccumulator(std::vector<double> t)
      : ts(std::move(t)), moments(ts.size()), overflow(ts.size(), 0) {}
  void add(double x) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double e = ts[i] * x;
      if (e > kExpOverflowGuard)
        ++overflow[i];
      else
        moments[i].add(std::exp(e));
    }
  }
  void merge(const MgfAccumulator& o) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      moments[i].merge(o.moments[i]);
      overflow[i] += o.overflow[i];
    }
  }
};

// For the sample mean the delete-one jackknife variance
// (n-1)/n sum_i (mean_{(i)} - mean_{(.)})^2 equals sum_i (x_i - mean)^2 / (n(n-1)).
inline double jackknife_mean_se(const MomentAccumulator& m) {
  if (m.count < 2) return 0.0;
  const double n = static_cast<double>(m.count);
  return std::sqrt(m.m2 / (n * (n - 1.0)));
}

template <class Sampler>
std::vector<MgfEstimate> mgf_estimates(const Sampler& sampler, const std::vector<double>& ts,
                                       const McConfig& cfg) {
  require(cfg.samples >= 1, "mgf_estimate: need at least one sample");
  const auto acc = run_chunks(sampler, cfg, MgfAccumulator(ts));
  std::vector<MgfEstimate> out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    MgfEstimate e;
    e.t = ts[i];
    e.samples = cfg.samples;
    e.overflow = acc.overflow[i];
    e.mean = acc.moments[i].mean;
    e.std_error = jackknife_mean_se(acc.moments[i]);
    out.push_back(e);
  }
  return out;
}

template <class Sampler>
MgfEstimate mgf_estimate(const Sampler& sampler, double t, const McConfig& cfg) {
  return mgf_estimates(sampler, {t}, cfg).front();
}

// Reference samplers.
struct StandardNormalSampler {
  double operator()(Philox& rng) const {
    // Box-Muller, one variate per call.
    double u1 = rng.uniform();
    while (u1 == 0.0) u1 = rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

// Returns 1 with probability p, else 0.
struct BernoulliSampler {
  double p = 0.5;
  double operator()(Philox& rng) const { return rng.uniform() < p ? 1.0 : 0.0; }
};

}  // namespace rstein
