#ifndef BRANCHSIM_ANALYSIS_HPP
#define BRANCHSIM_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "branchsim/engine.hpp"
#include "branchsim/mean_field.hpp"

namespace branchsim {

// Piecewise-constant interpolation of the 1/n recursion anchored at epoch n:
// the value at offset t is the recursion at epoch harmonic_inverse(t_n + t).
// Equals the epoch-k recursion exactly when t = t_k - t_n. Asks beyond the
// recorded range of a surviving trajectory are errors naming the horizon
// needed.
ProportionVector interpolate_chain(const Trajectory& traj, std::int64_t n, double t);

// --- Chain vs ODE windows -----------------------------------------------------

struct ComparisonWindow {
  std::int64_t n_m = 0;        // anchor epoch
  double t_anchor = 0.0;       // harmonic time of the anchor
  double T = 0.0;              // window length in harmonic time
  std::int64_t k_begin = 0;    // epochs compared: k_begin..k_end
  std::int64_t k_end = 0;
  double sup_distance = 0.0;   // max-norm distance, sup over the window
  double running_min = 0.0;    // min sup_distance over windows so far
  bool extinct = false;        // the chain went extinct inside the window
};

struct ComparisonReport {
  std::vector<ComparisonWindow> windows;
};

// For each anchor in `schedule`: restart the ODE from the chain's exact
// proportions at that epoch, integrate over a harmonic-time window of length
// T with step h, and record the sup over the window's epochs of the max-norm
// distance between chain and ODE.
ComparisonReport window_compare(const Trajectory& traj, const LawPtr& law,
                                  const std::vector<std::int64_t>& schedule, double T,
                                  double h);

// Plumbing self-test: the "chain" is the ODE's own trajectory sampled at the
// harmonic times, so every window's sup must shrink to integrator error.
ComparisonReport window_selftest(const LawPtr& law, const OdeState& init,
                                   const std::vector<std::int64_t>& schedule, double T,
                                   double h);

// The default geometric anchor schedule ceil(base * 2^m), m = 0..count-1.
std::vector<std::int64_t> geometric_schedule(std::int64_t base, int count);

// --- Exact one-step oracle ------------------------------------------------------

using StateDistribution = std::vector<std::pair<PopulationState, double>>;

// Exact next-state distribution of the embedded chain from `state`: sum over
// the dying type (probability proportional to current counts) and every
// offspring outcome of a finite-support law. Refuses laws without finite
// sample support. Probabilities sum to 1 within 1e-12.
StateDistribution enumerate_one_step(const PopulationState& state, const OffspringLaw& law,
                                     double lambda);

struct OracleReport {
  double tv = 0.0;              // total-variation distance empirical vs exact
  double bound = 0.0;           // 3 * sqrt(support / draws)
  std::int64_t support_size = 0;
  std::int64_t draws = 0;
  bool pass = false;
};

// Simulates `draws` independent single steps from `state` and compares the
// empirical next-state distribution against enumerate_one_step.
OracleReport oracle_check(const PopulationState& state, const LawPtr& law, double lambda,
                          std::int64_t draws, std::uint64_t seed);

// --- Offspring-mean tracks -------------------------------------------------------

struct MeanTracks {
  std::vector<double> pi;       // running mean of realized offspring plus s0
  std::vector<double> pi_hat;   // same for the dominating draws
  double dominating_mean_sum = 0.0;           // sum of the four declared dominating means
  double final_gap = 0.0;       // |pi_hat_n - dominating_mean_sum| at the last epoch
};

// Builds both running means from a trajectory recorded with coupled
// dominating draws, asserting the sandwich
//   cx_n <= ax_n <= s_a_n == n*pi_n <= n*pi_hat_n   (and the y-type mirror)
// as exact integer identities at every recorded epoch.
MeanTracks offspring_mean_tracks(const Trajectory& traj, const OffspringLaw& law);

// --- Ensemble limit classification ------------------------------------------------

struct SurvivorFinal {
  std::int64_t rep = 0;
  ProportionVector proportions;      // exact ratios at the horizon
  std::optional<double> beta_c;
  std::optional<double> beta_a;
  std::optional<std::size_t> nearest_fixed_point;  // index into the supplied list
  double nearest_distance = 0.0;
};

struct LimitReport {
  std::int64_t replications = 0;
  double extinction_fraction = 0.0;
  double survival_fraction = 0.0;
  std::vector<SurvivorFinal> survivors;
  Histogram beta_c_hist{20};
  std::optional<double> median_beta_c;
  std::optional<double> median_psi_c;
  std::optional<double> iqr_beta_c;    // interquartile range of survivors' beta_c
  double delta = 0.05;
  std::optional<double> p_hat_a;       // fraction of all paths delta-close to an attractor
};

// Classifies every path of an ensemble and, when fixed points are supplied,
// assigns each survivor to its nearest one (max-norm on the proportion
// vector) and estimates the attractor-attainment fraction at the horizon.
LimitReport limit_stats(const EnsembleSummary& ensemble,
                        const std::vector<FixedPoint>& fixed_points = {},
                        double delta = 0.05);

}  // namespace branchsim

#endif
