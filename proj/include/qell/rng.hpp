#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qell {

/// splitmix64 finalizer; statistically solid for hashing counters into words.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Counter-based stream RNG: the draw sequence is a pure function of
/// (seed, stream, counter), so independent records of a sweep can be
/// generated in any order (or in parallel) with identical results.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(splitmix64(seed ^ 0x8000000080003ull) ^
                        (stream * 0xD1B54A32D192ED03ull))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Poisson variate. Inversion by multiplication below mean 30, the PTRS
  /// transformed-rejection sampler above.
  long long poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    if (mean < 30.0) return poisson_small(mean);
    return poisson_ptrs(mean);
  }

 private:
  long long poisson_small(double mean) {
    const double limit = std::exp(-mean);
    long long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  long long poisson_ptrs(double mean) {
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const long long k = static_cast<long long>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
      if (us >= 0.07 && v <= v_r) return k;
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          static_cast<double>(k) * log_mean - mean - std::lgamma(static_cast<double>(k) + 1.0)) {
        return k;
      }
    }
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qell
