#include "branchsim/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>

#include "branchsim/errors.hpp"

namespace branchsim {

namespace {

ProportionVector recursion_at(const Trajectory& traj, std::int64_t k) {
  if (k < 0) throw ContractViolation("interpolate_chain: negative epoch");
  if (k == 0) return sa_initial(traj.config.cx0, traj.config.cy0);
  if (k <= traj.last_epoch())
    return traj.records[static_cast<std::size_t>(k - 1)].tracker;
  // After extinction the aliveness indicator zeroes every increment.
  if (traj.extinct()) return traj.records.back().tracker;
  throw ContractViolation("interpolate_chain: needs horizon >= " + std::to_string(k) +
                          " but trajectory records stop at " +
                          std::to_string(traj.last_epoch()));
}

double max_norm_diff(const ProportionVector& a, const OdeState& b) {
  const double d0 = std::abs(a.psi_c - b.psi_c);
  const double d1 = std::abs(a.theta_c - b.theta_c);
  const double d2 = std::abs(a.psi_a - b.psi_a);
  const double d3 = std::abs(a.theta_a - b.theta_a);
  return std::max(std::max(d0, d1), std::max(d2, d3));
}

struct ChainView {
  std::function<ProportionVector(std::int64_t)> proportions;
  std::optional<std::int64_t> extinction_epoch;
  std::int64_t max_epoch = 0;
};

ComparisonReport compare_windows(const ChainView& chain, const LawPtr& law,
                                 const std::vector<std::int64_t>& schedule, double T,
                                 double h) {
  if (!law) throw ConfigError("window_compare: no offspring law");
  if (!(T >= 0.0)) throw ContractViolation("window_compare: T must be >= 0");
  ComparisonReport report;
  double running_min = std::numeric_limits<double>::infinity();
  for (std::int64_t n_m : schedule) {
    if (n_m < 1) throw ContractViolation("window_compare: anchors must be >= 1");
    ComparisonWindow win;
    win.n_m = n_m;
    win.T = T;
    win.t_anchor = harmonic_time(n_m);
    win.k_begin = n_m;
    win.k_end = harmonic_inverse(win.t_anchor + T);
    if (win.k_end > chain.max_epoch)
      throw ContractViolation("window_compare: window [" + std::to_string(n_m) +
                              "] needs epochs up to " + std::to_string(win.k_end) +
                              " but only " + std::to_string(chain.max_epoch) +
                              " are available");
    const ProportionVector anchor = chain.proportions(n_m);
    const OdeState init{anchor.psi_c, anchor.theta_c, anchor.psi_a, anchor.theta_a,
                        win.t_anchor};
    const OdeSolution sol = integrate_ode(init, win.t_anchor, T, h, *law);
    double sup = 0.0;
    for (std::int64_t k = win.k_begin; k <= win.k_end; ++k) {
      const double t_k = harmonic_time(k);
      sup = std::max(sup, max_norm_diff(chain.proportions(k), sol.at_time(t_k)));
    }
    win.sup_distance = sup;
    win.extinct = chain.extinction_epoch && *chain.extinction_epoch <= win.k_end;
    running_min = std::min(running_min, sup);
    win.running_min = running_min;
    report.windows.push_back(win);
  }
  return report;
}

}  // namespace

ProportionVector interpolate_chain(const Trajectory& traj, std::int64_t n, double t) {
  if (n < 1 || n > traj.last_epoch())
    throw ContractViolation("interpolate_chain: anchor epoch outside the trajectory");
  if (!(t >= 0.0)) throw ContractViolation("interpolate_chain: offset must be >= 0");
  const double target = harmonic_time(n) + t;
  if (target > 30.0)
    throw ContractViolation(
        "interpolate_chain: offset reaches past every representable horizon");
  return recursion_at(traj, harmonic_inverse(target));
}

std::vector<std::int64_t> geometric_schedule(std::int64_t base, int count) {
  std::vector<std::int64_t> schedule;
  double v = static_cast<double>(base);
  for (int m = 0; m < count; ++m) {
    schedule.push_back(static_cast<std::int64_t>(std::ceil(v)));
    v *= 2.0;
  }
  return schedule;
}

ComparisonReport window_compare(const Trajectory& traj, const LawPtr& law,
                                  const std::vector<std::int64_t>& schedule, double T,
                                  double h) {
  ChainView view;
  view.proportions = [&traj](std::int64_t k) { return traj.proportions_at(k); };
  view.extinction_epoch = traj.extinction_epoch;
  // A frozen (extinct) chain is defined at every later epoch by rescaling.
  view.max_epoch = traj.extinct() ? std::numeric_limits<std::int64_t>::max() / 2
                                  : traj.last_epoch();
  return compare_windows(view, law, schedule, T, h);
}

ComparisonReport window_selftest(const LawPtr& law, const OdeState& init,
                                   const std::vector<std::int64_t>& schedule, double T,
                                   double h) {
  if (schedule.empty()) return ComparisonReport{};
  const std::int64_t n0 = *std::min_element(schedule.begin(), schedule.end());
  const std::int64_t n_last = *std::max_element(schedule.begin(), schedule.end());
  const double t0 = harmonic_time(n0);
  const double t_end = harmonic_time(n_last) + T;
  OdeState start = init;
  start.t = t0;
  const auto reference =
      std::make_shared<OdeSolution>(integrate_ode(start, t0, t_end - t0, h, *law));

  ChainView view;
  view.proportions = [reference](std::int64_t k) {
    const OdeState s = reference->at_time(harmonic_time(k));
    return ProportionVector{s.psi_c, s.theta_c, s.psi_a, s.theta_a};
  };
  view.max_epoch = harmonic_inverse(t_end);
  return compare_windows(view, law, schedule, T, h);
}

// --- Exact one-step oracle -------------------------------------------------------

StateDistribution enumerate_one_step(const PopulationState& state, const OffspringLaw& law,
                                     double lambda) {
  if (!(lambda > 0.0)) throw ContractViolation("enumerate_one_step: lambda must be > 0");
  if (is_extinct(state))
    throw ContractViolation("enumerate_one_step: state is extinct");
  std::map<std::array<std::int64_t, 4>, double> acc;
  const double s_c = static_cast<double>(state.s_c());
  for (DyingType dying : {DyingType::X, DyingType::Y}) {
    const std::int64_t current = (dying == DyingType::X) ? state.cx : state.cy;
    if (current < 1) continue;
    const double p_die = static_cast<double>(current) / s_c;
    const auto dist = law.sample_distribution(dying, state);
    if (!dist)
      throw ContractViolation("enumerate_one_step: law '" + law.name() +
                              "' has no finite sample support at this state");
    for (const auto& [sample, p] : *dist) {
      const PopulationState next = apply_event(state, dying, sample);
      acc[{next.cx, next.cy, next.ax, next.ay}] += p_die * p;
    }
  }
  StateDistribution out;
  double total = 0.0;
  for (const auto& [key, p] : acc) {
    out.push_back({PopulationState{key[0], key[1], key[2], key[3]}, p});
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ContractViolation("enumerate_one_step: probabilities sum to " +
                            std::to_string(total));
  return out;
}

OracleReport oracle_check(const PopulationState& state, const LawPtr& law, double lambda,
                          std::int64_t draws, std::uint64_t seed) {
  if (draws < 100000)
    throw ContractViolation("oracle_check: insufficient draws (need >= 1e5)");
  if (!law) throw ConfigError("oracle_check: no offspring law");
  const StateDistribution exact = enumerate_one_step(state, *law, lambda);

  Rng rng(splitmix64(seed));
  const ProportionVector rec0 = sa_initial(state.cx, state.cy);
  std::map<std::array<std::int64_t, 4>, std::int64_t> counts;
  for (std::int64_t i = 0; i < draws; ++i) {
    const EpochRecord rec =
        step(state, 1, 0.0, rec0, 1.0, *law, lambda, RecordCoupling::No, rng);
    ++counts[{rec.state_after.cx, rec.state_after.cy, rec.state_after.ax,
              rec.state_after.ay}];
  }

  // Total variation over the union of supports.
  double tv = 0.0;
  const double dn = static_cast<double>(draws);
  std::map<std::array<std::int64_t, 4>, double> exact_map;
  for (const auto& [s, p] : exact) exact_map[{s.cx, s.cy, s.ax, s.ay}] = p;
  for (const auto& [key, c] : counts) {
    auto it = exact_map.find(key);
    const double p = (it == exact_map.end()) ? 0.0 : it->second;
    tv += std::abs(static_cast<double>(c) / dn - p);
    if (it != exact_map.end()) exact_map.erase(it);
  }
  for (const auto& [key, p] : exact_map) tv += p;
  tv *= 0.5;

  OracleReport report;
  report.tv = tv;
  report.support_size = static_cast<std::int64_t>(exact.size());
  report.draws = draws;
  report.bound = 3.0 * std::sqrt(static_cast<double>(report.support_size) / dn);
  report.pass = tv <= report.bound;
  return report;
}

// --- Offspring-mean tracks --------------------------------------------------------

MeanTracks offspring_mean_tracks(const Trajectory& traj, const OffspringLaw& law) {
  const auto declared = law.dominating_moments();
  if (!declared)
    throw ContractViolation("offspring_mean_tracks: law '" + law.name() +
                            "' declares no dominating moments");
  MeanTracks tracks;
  tracks.dominating_mean_sum = declared->mean_sum();
  tracks.pi.reserve(traj.records.size());
  tracks.pi_hat.reserve(traj.records.size());

  const std::int64_t s0a = traj.initial.s_a();
  std::int64_t sum_real = 0;
  std::int64_t sum_hat = 0;
  for (const EpochRecord& rec : traj.records) {
    if (!rec.dominating)
      throw ContractViolation(
          "offspring_mean_tracks: trajectory was not recorded with coupled dominating draws");
    sum_real += rec.sample.own + rec.sample.cross;
    sum_hat += rec.dominating->at(0) + rec.dominating->at(1) + rec.dominating->at(2) +
               rec.dominating->at(3);
    const std::int64_t n = rec.n;
    const PopulationState& s = rec.state_after;
    const std::int64_t n_pi = s0a + sum_real;      // = n * pi_n, exactly
    const std::int64_t n_pi_hat = s0a + sum_hat;   // = n * pi_hat_n, exactly
    const auto fail = [&](const char* what) {
      throw ContractViolation("offspring_mean_tracks: sandwich violated at epoch " +
                              std::to_string(n) + ": " + what);
    };
    if (s.cx > s.ax) fail("cx > ax");
    if (s.cy > s.ay) fail("cy > ay");
    if (s.ax > s.s_a()) fail("ax > s_a");
    if (s.s_a() != n_pi) fail("s_a != n*pi");
    if (n_pi > n_pi_hat) fail("n*pi > n*pi_hat");
    tracks.pi.push_back(static_cast<double>(n_pi) / static_cast<double>(n));
    tracks.pi_hat.push_back(static_cast<double>(n_pi_hat) / static_cast<double>(n));
  }
  if (!tracks.pi_hat.empty())
    tracks.final_gap = std::abs(tracks.pi_hat.back() - tracks.dominating_mean_sum);
  return tracks;
}

// --- Ensemble limit classification -------------------------------------------------

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

double fp_distance(const ProportionVector& u, const FixedPoint& fp) {
  const double d0 = std::abs(u.psi_c - fp.state.psi_c);
  const double d1 = std::abs(u.theta_c - fp.state.theta_c);
  const double d2 = std::abs(u.psi_a - fp.state.psi_a);
  const double d3 = std::abs(u.theta_a - fp.state.theta_a);
  return std::max(std::max(d0, d1), std::max(d2, d3));
}

}  // namespace

LimitReport limit_stats(const EnsembleSummary& ensemble,
                        const std::vector<FixedPoint>& fixed_points, double delta) {
  LimitReport report;
  report.replications = ensemble.replications;
  report.extinction_fraction = ensemble.extinction_fraction;
  report.survival_fraction = ensemble.survival_fraction;
  report.delta = delta;

  std::vector<double> betas, psis;
  std::int64_t near_attractor = 0;
  for (const RepFinal& fin : ensemble.finals) {
    if (!fixed_points.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (const FixedPoint& fp : fixed_points)
        best = std::min(best, fp_distance(fin.proportions_horizon, fp));
      if (best <= delta) ++near_attractor;
    }
    if (fin.extinct) continue;
    SurvivorFinal sv;
    sv.rep = fin.rep;
    sv.proportions = fin.proportions_horizon;
    sv.beta_c = fin.beta_c;
    sv.beta_a = fin.beta_a;
    if (!fixed_points.empty()) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (std::size_t i = 0; i < fixed_points.size(); ++i) {
        const double d = fp_distance(fin.proportions_horizon, fixed_points[i]);
        if (d < best) {
          best = d;
          best_idx = i;
        }
      }
      sv.nearest_fixed_point = best_idx;
      sv.nearest_distance = best;
    }
    if (sv.beta_c) {
      report.beta_c_hist.add(*sv.beta_c);
      betas.push_back(*sv.beta_c);
    }
    psis.push_back(fin.proportions_horizon.psi_c);
    report.survivors.push_back(std::move(sv));
  }
  std::sort(betas.begin(), betas.end());
  std::sort(psis.begin(), psis.end());
  if (!betas.empty()) {
    report.median_beta_c = quantile_sorted(betas, 0.5);
    report.iqr_beta_c = quantile_sorted(betas, 0.75) - quantile_sorted(betas, 0.25);
  }
  if (!psis.empty()) report.median_psi_c = quantile_sorted(psis, 0.5);
  if (!fixed_points.empty())
    report.p_hat_a = static_cast<double>(near_attractor) /
                     static_cast<double>(ensemble.replications);
  return report;
}

}  // namespace branchsim
