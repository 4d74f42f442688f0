#include "branchsim/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "branchsim/errors.hpp"

namespace branchsim {

std::string dist_kind_name(DistKind kind) {
  switch (kind) {
    case DistKind::Poisson: return "poisson";
    case DistKind::Geometric: return "geometric";
    case DistKind::FinitePmf: return "finite";
  }
  return "?";
}

DistSpec DistSpec::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw ConfigError("poisson: mean must be finite and >= 0");
  DistSpec d;
  d.kind_ = DistKind::Poisson;
  d.mean_ = mean;
  return d;
}

DistSpec DistSpec::geometric(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw ConfigError("geometric: mean must be finite and >= 0");
  DistSpec d;
  d.kind_ = DistKind::Geometric;
  d.mean_ = mean;
  return d;
}

DistSpec DistSpec::finite_pmf(std::vector<std::pair<std::int64_t, double>> pmf) {
  if (pmf.empty()) throw ConfigError("finite pmf: empty support");
  std::sort(pmf.begin(), pmf.end());
  double total = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    auto [v, p] = pmf[i];
    if (v < 0) throw ConfigError("finite pmf: support values must be non-negative integers");
    if (i > 0 && pmf[i - 1].first == v) throw ConfigError("finite pmf: duplicate support value");
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("finite pmf: bad probability");
    total += p;
    mean += static_cast<double>(v) * p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("finite pmf: probabilities must sum to 1 within 1e-12");
  DistSpec d;
  d.kind_ = DistKind::FinitePmf;
  d.mean_ = mean;
  d.pmf_ = std::move(pmf);
  d.cdf_.reserve(d.pmf_.size());
  double acc = 0.0;
  for (auto& [v, p] : d.pmf_) {
    acc += p;
    d.cdf_.push_back(acc);
  }
  d.cdf_.back() = 1.0;
  return d;
}

double DistSpec::second_moment() const {
  switch (kind_) {
    case DistKind::Poisson:
      return mean_ + mean_ * mean_;
    case DistKind::Geometric:
      // Var = m(1+m) for the {0,1,...} parameterization.
      return mean_ + 2.0 * mean_ * mean_;
    case DistKind::FinitePmf: {
      double m2 = 0.0;
      for (auto& [v, p] : pmf_) m2 += static_cast<double>(v) * static_cast<double>(v) * p;
      return m2;
    }
  }
  return 0.0;
}

std::int64_t DistSpec::sample(Rng& rng) const {
  switch (kind_) {
    case DistKind::Poisson:
      return rng.poisson(mean_);
    case DistKind::Geometric:
      return rng.geometric_mean(mean_);
    case DistKind::FinitePmf: {
      const double u = rng.uniform01();
      for (std::size_t i = 0; i < cdf_.size(); ++i)
        if (u < cdf_[i]) return pmf_[i].first;
      return pmf_.back().first;
    }
  }
  return 0;
}

std::pair<std::int64_t, std::int64_t> DistSpec::sample_thinned(double target_mean,
                                                               Rng& rng) const {
  if (kind_ == DistKind::FinitePmf)
    throw ContractViolation("sample_thinned: finite pmf is not mean-parametric");
  if (target_mean < 0.0 || target_mean > mean_ + 1e-12)
    throw ContractViolation("sample_thinned: target mean outside [0, mean]");
  const std::int64_t parent = sample(rng);
  if (mean_ <= 0.0) return {0, parent};
  const std::int64_t kept = rng.binomial(parent, std::min(1.0, target_mean / mean_));
  return {kept, parent};
}

double DistSpec::expected_min_with_cap(double cap) const {
  if (!(cap >= 0.0)) throw ContractViolation("expected_min_with_cap: cap must be >= 0");
  if (cap == 0.0) return 0.0;
  if (kind_ == DistKind::FinitePmf) {
    double e = 0.0;
    for (auto& [v, p] : pmf_) e += std::min(static_cast<double>(v), cap) * p;
    return e;
  }
  // E[min(X,c)] = sum_{j=1..floor(c)} P(X >= j) + (c - floor(c)) P(X > floor(c)).
  // Survival probabilities decay fast enough that the series is cut once the
  // remaining contribution is provably below 1e-12.
  const double kfloor = std::floor(cap);
  double e = 0.0;
  if (kind_ == DistKind::Geometric) {
    if (mean_ <= 0.0) return 0.0;
    const double p = mean_ / (1.0 + mean_);  // P(X >= j) = p^j
    double surv = 1.0;
    double j = 1.0;
    for (; j <= kfloor; ++j) {
      surv *= p;  // p^j
      e += surv;
      if (surv / (1.0 - p) < 1e-13) return e;  // geometric tail bound
    }
    e += (cap - kfloor) * surv * p;
    return e;
  }
  // Poisson
  if (mean_ <= 0.0) return 0.0;
  double pk = std::exp(-mean_);  // P(X = k), k = 0
  double cdf = pk;
  double j = 1.0;
  for (; j <= kfloor; ++j) {
    const double surv = 1.0 - cdf;  // P(X >= j)
    e += surv;
    if (surv * (kfloor - j + 2.0) < 1e-13) return e;
    pk *= mean_ / j;  // P(X = j)
    cdf += pk;
  }
  e += (cap - kfloor) * (1.0 - cdf);
  return e;
}

std::string DistSpec::canonical() const {
  char buf[64];
  switch (kind_) {
    case DistKind::Poisson:
      std::snprintf(buf, sizeof buf, "poisson(%.17g)", mean_);
      return buf;
    case DistKind::Geometric:
      std::snprintf(buf, sizeof buf, "geometric(%.17g)", mean_);
      return buf;
    case DistKind::FinitePmf: {
      std::string s = "finite{";
      for (std::size_t i = 0; i < pmf_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%lld:%.17g",
                      static_cast<long long>(pmf_[i].first), pmf_[i].second);
        if (i) s += ",";
        s += buf;
      }
      return s + "}";
    }
  }
  return "?";
}

}  // namespace branchsim
