#include "branchsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace branchsim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng Rng::for_replication(std::uint64_t base_seed, std::uint64_t replication_index) {
  return Rng(splitmix64(base_seed + 0x9E3779B97F4A7C15ULL * (replication_index + 1)));
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
  return -std::log1p(-uniform01()) / rate;
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
  std::int64_t total = 0;
  // Poisson(a+b) = Poisson(a) + Poisson(b); keep each chunk's exp() well away
  // from the underflow threshold.
  while (mean > 60.0) {
    total += poisson(60.0);
    mean -= 60.0;
  }
  if (mean == 0.0) return total;
  const double limit = std::exp(-mean);
  double prod = 1.0;
  std::int64_t k = -1;
  do {
    ++k;
    prod *= uniform01();
  } while (prod > limit);
  return total + k;
}

std::int64_t Rng::geometric_mean(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("geometric: mean must be >= 0");
  if (mean == 0.0) return 0;
  const double p = mean / (1.0 + mean);  // success prob of "one more"
  const double u = uniform01();
  return static_cast<std::int64_t>(std::floor(std::log1p(-u) / std::log(p)));
}

std::int64_t Rng::binomial(std::int64_t n, double p) {
  if (n < 0) throw std::invalid_argument("binomial: n must be >= 0");
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < n; ++i)
    if (uniform01() < p) ++k;
  return k;
}

}  // namespace branchsim
