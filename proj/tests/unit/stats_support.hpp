#ifndef BRANCHSIM_TESTS_STATS_SUPPORT_HPP
#define BRANCHSIM_TESTS_STATS_SUPPORT_HPP

// Test-only statistics helpers: chi-square goodness-of-fit / homogeneity
// machinery built on the regularized incomplete gamma, plus reference pmfs.
// Kept independent of the library's samplers so they can act as oracles.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace teststats {

// Regularized lower incomplete gamma P(a, x) (series + continued fraction).
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

inline double chi2_cdf(double x, double df) { return gamma_p(df / 2.0, x / 2.0); }

// Upper quantile: x with CDF(x) = p, by bisection.
inline double chi2_quantile(double p, double df) {
  double lo = 0.0, hi = df + 100.0 * std::sqrt(2.0 * df) + 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Goodness-of-fit: observed counts per integer value vs expected
// probabilities. Bins with expected count < 5 are merged into their
// neighbour. Returns true when the statistic is below the (1-alpha) quantile.
inline bool chi2_gof_passes(const std::map<std::int64_t, std::int64_t>& observed,
                            const std::map<std::int64_t, double>& expected_probs,
                            std::int64_t draws, double alpha) {
  std::vector<double> exp_counts;
  std::vector<double> obs_counts;
  for (const auto& [value, p] : expected_probs) {
    const double e = p * static_cast<double>(draws);
    auto it = observed.find(value);
    const double o = it == observed.end() ? 0.0 : static_cast<double>(it->second);
    if (!exp_counts.empty() && (e < 5.0 || exp_counts.back() < 5.0)) {
      exp_counts.back() += e;
      obs_counts.back() += o;
    } else {
      exp_counts.push_back(e);
      obs_counts.push_back(o);
    }
  }
  // Any observed values outside the expected support get pooled too.
  double stray = 0.0;
  for (const auto& [value, count] : observed)
    if (!expected_probs.count(value)) stray += static_cast<double>(count);
  if (stray > 0.0) return false;  // support mismatch is an outright failure
  if (exp_counts.size() < 2) return true;
  double stat = 0.0;
  for (std::size_t i = 0; i < exp_counts.size(); ++i) {
    const double d = obs_counts[i] - exp_counts[i];
    stat += d * d / exp_counts[i];
  }
  const double df = static_cast<double>(exp_counts.size() - 1);
  return stat <= chi2_quantile(1.0 - alpha, df);
}

// Two-sample homogeneity test on integer samples.
inline bool chi2_two_sample_passes(const std::map<std::int64_t, std::int64_t>& a,
                                   const std::map<std::int64_t, std::int64_t>& b,
                                   double alpha) {
  std::map<std::int64_t, std::pair<double, double>> merged;
  double na = 0.0, nb = 0.0;
  for (const auto& [v, c] : a) {
    merged[v].first += static_cast<double>(c);
    na += static_cast<double>(c);
  }
  for (const auto& [v, c] : b) {
    merged[v].second += static_cast<double>(c);
    nb += static_cast<double>(c);
  }
  // Merge sparse bins (pooled count < 10) left to right.
  std::vector<std::pair<double, double>> bins;
  for (const auto& [v, oc] : merged) {
    if (!bins.empty() && (bins.back().first + bins.back().second < 10.0 ||
                          oc.first + oc.second < 10.0)) {
      bins.back().first += oc.first;
      bins.back().second += oc.second;
    } else {
      bins.push_back(oc);
    }
  }
  if (bins.size() < 2) return true;
  const double n = na + nb;
  double stat = 0.0;
  for (const auto& [oa, ob] : bins) {
    const double pooled = (oa + ob) / n;
    const double ea = pooled * na, eb = pooled * nb;
    stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  const double df = static_cast<double>(bins.size() - 1);
  return stat <= chi2_quantile(1.0 - alpha, df);
}

// Reference pmfs, written directly from the definitions.
inline double poisson_pmf(std::int64_t k, double mean) {
  if (k < 0) return 0.0;
  return std::exp(-mean + static_cast<double>(k) * std::log(mean) -
                  std::lgamma(static_cast<double>(k) + 1.0));
}

inline double geometric_pmf(std::int64_t k, double mean) {
  if (k < 0) return 0.0;
  const double p = mean / (1.0 + mean);
  return (1.0 - p) * std::pow(p, static_cast<double>(k));
}

}  // namespace teststats

#endif
