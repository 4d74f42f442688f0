#ifndef BRANCHSIM_POPULATION_HPP
#define BRANCHSIM_POPULATION_HPP

#include <cstdint>
#include <optional>

namespace branchsim {

enum class DyingType { X, Y };

// Current and total population sizes of both types at one transition epoch.
// cx/cy count individuals alive right now; ax/ay count everyone ever produced
// (net of acquisitions, which remove from one column and add to the other).
struct PopulationState {
  std::int64_t cx = 0;
  std::int64_t cy = 0;
  std::int64_t ax = 0;
  std::int64_t ay = 0;

  std::int64_t s_c() const { return cx + cy; }
  std::int64_t s_a() const { return ax + ay; }

  bool operator==(const PopulationState&) const = default;
};

// Populations at time zero: nobody has died yet, totals equal current sizes.
PopulationState initial_state(std::int64_t cx0, std::int64_t cy0);

// One death's offspring outcome. `own` is credited to the dying individual's
// type; `cross` changes the other type and is negative when the event is an
// attack that removes (and acquires) individuals of the other type.
struct OffspringSample {
  std::int64_t own = 0;
  std::int64_t cross = 0;

  bool operator==(const OffspringSample&) const = default;
};

// Per-epoch population ratios: psi_c = (cx+cy)/n, theta_c = cx/n,
// psi_a = (ax+ay)/n, theta_a = ax/n.
struct ProportionVector {
  double psi_c = 0.0;
  double theta_c = 0.0;
  double psi_a = 0.0;
  double theta_a = 0.0;

  // Share of x in the current (resp. total) population. Undefined once the
  // corresponding population is empty.
  std::optional<double> beta_c() const {
    if (psi_c > 0.0) return theta_c / psi_c;
    return std::nullopt;
  }
  std::optional<double> beta_a() const {
    if (psi_a > 0.0) return theta_a / psi_a;
    return std::nullopt;
  }

  bool operator==(const ProportionVector&) const = default;
};

// Transition rule at a death epoch. When an x-type dies, cx gains own-1 (the
// parent leaves), ax gains own, and both cy and ay gain cross; symmetric for
// y. Pure function. Throws ContractViolation if the dying type has no current
// individuals, if any resulting count is negative (an invalid law: laws must
// clip their own attacks), or on 64-bit overflow.
PopulationState apply_event(const PopulationState& state, DyingType dying,
                            const OffspringSample& sample);

// True iff the current population is empty (cx + cy == 0).
bool is_extinct(const PopulationState& state);

// Ratios of the state's counts to the epoch index n >= 1.
ProportionVector exact_proportions(const PopulationState& state, std::int64_t n);

}  // namespace branchsim

#endif
