#ifndef BRANCHSIM_ENGINE_HPP
#define BRANCHSIM_ENGINE_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "branchsim/mean_field.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/population.hpp"
#include "branchsim/rng.hpp"

namespace branchsim {

// Scalar scenario parameters; the offspring law travels alongside as a LawPtr
// (see config.hpp for the file-level representation that bundles both).
struct ScenarioConfig {
  double lambda = 1.0;               // death rate per individual
  std::int64_t cx0 = 1;
  std::int64_t cy0 = 1;
  std::int64_t horizon_epochs = 1000;
  std::int64_t replications = 1;
  std::uint64_t base_seed = 1;
  double max_wall_seconds = 0.0;     // per replication; 0 disables the guard

  void validate() const;
};

enum class RecordCoupling { No, Yes };

// Everything observed at one transition epoch.
struct EpochRecord {
  std::int64_t n = 0;
  double tau = 0.0;                 // continuous death time
  int h = 0;                        // 1 if an x-type individual died
  DyingType dying = DyingType::X;
  OffspringSample sample;
  PopulationState state_after;
  ProportionVector proportions;   // counts / n
  ProportionVector tracker;     // the 1/n stochastic-approximation recursion
  double t_n = 0.0;                 // harmonic time
  std::optional<std::array<std::int64_t, 4>> dominating;  // dominating draws (xx,xy,yx,yy)
};

// The epoch-0 value of the recursion: (s0, cx0, s0, cx0).
ProportionVector sa_initial(std::int64_t cx0, std::int64_t cy0);

// One step of the 4-dimensional 1/n scheme:
//   next = prev + (1/n) * L_n,
// where L_n is built from the realized offspring of the epoch's death and the
// whole increment carries the pre-death aliveness indicator. `alive` is that
// indicator (current population non-empty before the death); the convenience
// overload infers it from prev.psi_c > 0, which is only equivalent when the
// recursion is initialized at an uncentred value (see sa_initial) and the
// population never dips below its initial size.
ProportionVector sa_update(const ProportionVector& prev, DyingType dying,
                           const OffspringSample& sample, std::int64_t n, bool alive);
ProportionVector sa_update(const ProportionVector& prev, DyingType dying,
                           const OffspringSample& sample, std::int64_t n);

// One transition of the embedded chain from a non-extinct state: exponential
// inter-epoch time with rate lambda*(cx+cy), the dying type resolved by the
// exponential race (x with probability cx/(cx+cy)), then the law's sample
// applied at the pre-death state. Draw order is fixed: waiting time, dying
// type, offspring. `t_n` is the harmonic time of epoch n (precomputed by
// callers that track it incrementally).
EpochRecord step(const PopulationState& state, std::int64_t n, double prev_tau,
                 const ProportionVector& prev_rec, double t_n, const OffspringLaw& law,
                 double lambda, RecordCoupling coupling, Rng& rng);
EpochRecord step(const PopulationState& state, std::int64_t n, double prev_tau,
                 const ProportionVector& prev_rec, const OffspringLaw& law,
                 double lambda, Rng& rng);

struct Trajectory {
  ScenarioConfig config;
  std::int64_t replication_index = 0;
  PopulationState initial;
  std::vector<EpochRecord> records;                // epochs 1..min(horizon, extinction_epoch)
  std::optional<std::int64_t> extinction_epoch;    // extinction_epoch, when reached

  bool extinct() const { return extinction_epoch.has_value(); }
  const PopulationState& final_state() const;
  std::int64_t last_epoch() const { return static_cast<std::int64_t>(records.size()); }

  // Exact proportions at epoch k >= 1. Beyond the extinction epoch the counts
  // are frozen, so the ratios simply rescale; asking past the horizon of a
  // surviving trajectory is an error.
  ProportionVector proportions_at(std::int64_t k) const;
};

// Runs one replication to the horizon or extinction, deterministically in
// (base_seed, replication_index). Law contract violations surface as
// ContractViolation tagged with the offending epoch; the wall-time guard (if
// configured) throws ResourceLimitError.
Trajectory run_trajectory(const ScenarioConfig& config, const LawPtr& law,
                          std::int64_t replication_index,
                          RecordCoupling coupling = RecordCoupling::No);

// Same dynamics without storing records: the observer sees each EpochRecord
// in order. Used for long-horizon checks and ensembles.
void run_trajectory_streamed(const ScenarioConfig& config, const LawPtr& law,
                             std::int64_t replication_index, RecordCoupling coupling,
                             const std::function<void(const EpochRecord&)>& observer);

// --- Ensembles ----------------------------------------------------------------

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::int64_t> counts;

  explicit Histogram(int bins = 20) : counts(static_cast<std::size_t>(bins), 0) {}
  void add(double v);
  std::int64_t total() const;
};

struct RepFinal {
  std::int64_t rep = 0;
  bool extinct = false;
  std::int64_t extinction_epoch = -1;            // -1 when no extinction within the horizon
  std::int64_t last_epoch = 0;
  PopulationState final_state;
  ProportionVector proportions_horizon;  // exact ratios at the horizon (frozen-scaled)
  std::optional<double> beta_c;      // of the final state
  std::optional<double> beta_a;
};

struct EnsembleSummary {
  std::int64_t replications = 0;
  std::int64_t horizon = 0;
  std::int64_t extinct_count = 0;
  std::int64_t surviving_count = 0;
  double extinction_fraction = 0.0;
  double survival_fraction = 0.0;
  std::vector<RepFinal> finals;      // ordered by replication index
  Histogram beta_c_survivors{20};    // final beta_c over surviving paths
  // Mean and 95% half-width of the survivors' final psi_c / psi_a.
  double mean_psi_c = 0.0, ci_psi_c = 0.0;
  double mean_psi_a = 0.0, ci_psi_a = 0.0;
};

// Independent replications 0..replications-1, optionally fanned out over
// worker threads. The summary is bit-identical for any parallelism degree:
// every replication owns the stream derived from (base_seed, index) and
// results are reduced in index order.
EnsembleSummary run_ensemble(const ScenarioConfig& config, const LawPtr& law,
                             int parallelism = 1);

// Spec'd trajectory CSV: one row per epoch, floats at 12 significant digits.
std::string trajectory_to_csv(const Trajectory& traj);

}  // namespace branchsim

#endif
