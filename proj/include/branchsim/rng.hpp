#ifndef BRANCHSIM_RNG_HPP
#define BRANCHSIM_RNG_HPP

#include <cstdint>
#include <random>

namespace branchsim {

// Deterministic randomness source. Every sampler in the project draws from an
// explicitly passed Rng; there is no global generator. All variates are built
// from mt19937_64 output with our own inversion/counting samplers, so a given
// seed produces bit-identical streams on every platform (the std::*_distribution
// classes are not portable across standard libraries and are never used).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for one replication of an ensemble. Streams for
  // distinct indices are decorrelated by a splitmix64 scramble of the pair.
  static Rng for_replication(std::uint64_t base_seed, std::uint64_t replication_index);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Exponential with the given rate (> 0).
  double exponential(double rate);

  // Poisson with the given mean (>= 0). Knuth product-of-uniforms method,
  // chunked so the e^-mean factor never underflows.
  std::int64_t poisson(double mean);

  // Geometric on {0, 1, 2, ...} parameterized by its mean m = p/(1-p).
  std::int64_t geometric_mean(double mean);

  // Bernoulli-counting binomial; n is always a small sampled count here.
  std::int64_t binomial(std::int64_t n, double p);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace branchsim

#endif
