#ifndef BRANCHSIM_DISTRIBUTIONS_HPP
#define BRANCHSIM_DISTRIBUTIONS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "branchsim/rng.hpp"

namespace branchsim {

enum class DistKind { Poisson, Geometric, FinitePmf };

std::string dist_kind_name(DistKind kind);

// One non-negative integer offspring/attack distribution. Poisson and
// Geometric are parameterized by their mean; Geometric lives on {0,1,2,...}
// with mean p/(1-p). FinitePmf is an explicit table.
class DistSpec {
 public:
  static DistSpec poisson(double mean);
  static DistSpec geometric(double mean);
  static DistSpec finite_pmf(std::vector<std::pair<std::int64_t, double>> pmf);

  DistKind kind() const { return kind_; }
  double mean() const { return mean_; }
  double second_moment() const;
  bool finite_support() const { return kind_ == DistKind::FinitePmf; }
  const std::vector<std::pair<std::int64_t, double>>& pmf() const { return pmf_; }

  std::int64_t sample(Rng& rng) const;

  // Drawn from this distribution but with the mean scaled down to
  // target_mean by binomial thinning; returns (kept, parent) with
  // kept <= parent pathwise. Both Poisson and Geometric are closed under
  // thinning, so `kept` is again the same family with mean target_mean.
  // Only meaningful for the mean-parametric kinds.
  std::pair<std::int64_t, std::int64_t> sample_thinned(double target_mean, Rng& rng) const;

  // E[min(X, cap)] for a real cap >= 0, exact for FinitePmf and via a
  // truncated survival-function series (tail below 1e-12) otherwise.
  double expected_min_with_cap(double cap) const;

  // Canonical text form, used for config hashing.
  std::string canonical() const;

 private:
  DistSpec() = default;
  DistKind kind_ = DistKind::Poisson;
  double mean_ = 0.0;
  std::vector<std::pair<std::int64_t, double>> pmf_;  // sorted by value
  std::vector<double> cdf_;
};

}  // namespace branchsim

#endif
