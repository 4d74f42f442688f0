#ifndef BRANCHSIM_OFFSPRING_HPP
#define BRANCHSIM_OFFSPRING_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "branchsim/distributions.hpp"
#include "branchsim/population.hpp"
#include "branchsim/rng.hpp"

namespace branchsim {

// Index order for the four offspring cells, everywhere in this project:
// 0 = xx, 1 = xy, 2 = yx, 3 = yy.
enum : int { CELL_XX = 0, CELL_XY = 1, CELL_YX = 2, CELL_YY = 3 };

// Conditional offspring means m_ij evaluated at a (possibly real-valued)
// population state.
struct MeanMatrix {
  double xx = 0.0;
  double xy = 0.0;
  double yx = 0.0;
  double yy = 0.0;

  double cell(int idx) const {
    switch (idx) {
      case CELL_XX: return xx;
      case CELL_XY: return xy;
      case CELL_YX: return yx;
      default: return yy;
    }
  }
};

// Real-valued population tuple used by the mean-field side, where the
// reconstructed counts are not integers.
struct RealState {
  double cx = 0.0;
  double cy = 0.0;
  double ax = 0.0;
  double ay = 0.0;

  static RealState from(const PopulationState& s) {
    return RealState{static_cast<double>(s.cx), static_cast<double>(s.cy),
                     static_cast<double>(s.ax), static_cast<double>(s.ay)};
  }
};

// Population-independent dominating variables: per cell, the mean and second
// moment of a variable that bounds every state's offspring sample from above.
struct DominatingMoments {
  std::array<double, 4> mean{};           // cell order xx, xy, yx, yy
  std::array<double, 4> second_moment{};

  double mean_sum() const { return mean[0] + mean[1] + mean[2] + mean[3]; }
  double max_mean() const;
};

// One epoch's realized sample together with dominating draws for all four
// cells. The dying row's dominating values bound its realized values on the
// same draw; the other row's are fresh draws from the dominating laws.
struct CoupledDraw {
  OffspringSample sample;
  std::array<std::int64_t, 4> dominating{};  // cell order xx, xy, yx, yy

  std::int64_t dominating_sum() const {
    return dominating[0] + dominating[1] + dominating[2] + dominating[3];
  }
};

// Exact finite distribution of (own, cross) for one dying type at one state.
using SampleDistribution = std::vector<std::pair<OffspringSample, double>>;

// An offspring law: how many individuals of each type appear (or vanish, for
// attacks) when one individual dies, as a function of the current state.
// Immutable after construction; safe to share across threads. All randomness
// comes through the explicitly passed Rng.
class OffspringLaw {
 public:
  virtual ~OffspringLaw() = default;

  virtual std::string name() const = 0;

  // Draw (own, cross) for a death of the given type at the given pre-death
  // state. Laws guarantee that applying the sample keeps all counts >= 0.
  virtual OffspringSample sample_for(DyingType dying, const PopulationState& state,
                                     Rng& rng) const = 0;

  // Conditional means of all four cells at a real-valued state.
  virtual MeanMatrix mean_matrix(const RealState& state) const = 0;

  // Declared population-independent bounds, when the law certifies them.
  virtual std::optional<DominatingMoments> dominating_moments() const {
    return std::nullopt;
  }

  virtual bool has_coupling() const { return false; }

  // Pathwise-coupled draw; only available when has_coupling().
  virtual CoupledDraw coupled_sample_for(DyingType dying, const PopulationState& state,
                                         Rng& rng) const;

  // Means as a function of the proportions alone, for laws whose offspring
  // distribution depends on the state only through (beta_c, beta_a) or not at
  // all. Empty for genuinely size-dependent laws; fixed-point finding
  // requires it.
  virtual std::optional<MeanMatrix> proportion_means(double /*beta_c*/,
                                                     double /*beta_a*/) const {
    return std::nullopt;
  }

  // Exact finite next-sample distribution, for laws built from finite pmfs.
  // Empty when the support is unbounded; the enumeration oracle requires it.
  virtual std::optional<SampleDistribution> sample_distribution(
      DyingType /*dying*/, const PopulationState& /*state*/) const {
    return std::nullopt;
  }
};

using LawPtr = std::shared_ptr<const OffspringLaw>;

// --- Built-in families ------------------------------------------------------

// Two independently propagating lines: each death spawns own-type offspring
// from a fixed distribution, never any cross-type.
LawPtr make_independent_law(const DistSpec& dist_x, const DistSpec& dist_y);

// Offspring counts drawn from `base` (Poisson or Geometric) whose mean is a
// function of the proportions (beta_c, beta_a). Each mean function must be
// bounded on [0,1]^2 by the declared bound of its cell; the declared bounds
// feed the dominating moments and the thinning coupling.
struct ProportionMeanFns {
  std::function<double(double, double)> xx;
  std::function<double(double, double)> xy;
  std::function<double(double, double)> yx;
  std::function<double(double, double)> yy;
};
LawPtr make_proportion_law(ProportionMeanFns mean_fns, DistKind base,
                           const std::array<double, 4>& declared_bounds);

// Attack variant: a dying individual draws its own-offspring count and an
// attack proposal against the other population, clipped at that population's
// current size; the attacked individuals switch columns (cross is negative,
// own absorbs them).
LawPtr make_bpa_law(const DistSpec& own_x, const DistSpec& own_y,
                    const DistSpec& attack_xy, const DistSpec& attack_yx);

// --- Moment-assumption validation -------------------------------------------

struct MomentCellStats {
  std::int64_t draws = 0;
  double empirical_mean = 0.0;
  double empirical_second_moment = 0.0;
  double zero_fraction = 0.0;
  std::optional<double> declared_mean_bound;
  std::optional<double> declared_second_moment;
  bool mean_within_bound = true;      // mean <= bound + 4*stderr (when declared)
  bool zero_possibility_ok = false;   // 0 < P(sample == 0) < 1 at this state
  std::int64_t domination_violations = 0;
};

struct MomentProbeReport {
  PopulationState state;
  // Cell order xx, xy, yx, yy; a row is absent when its type cannot die here.
  std::array<std::optional<MomentCellStats>, 4> cells;
};

struct MomentValidationReport {
  bool moments_declared = false;
  bool coupling_checked = false;
  std::vector<MomentProbeReport> probes;

  // The hard checks: every declared mean bound holds and no coupled draw ever
  // exceeded its dominating value. The zero-possibility flags are reported
  // per cell but do not veto (degenerate cells are expected for one-sided
  // families).
  bool passed() const;
};

// Samples the law at each probe state and checks it against its declarations:
// empirical means against declared bounds, pathwise domination when a
// coupling exists, and whether zero offspring is possible but not certain.
MomentValidationReport validate_law_moments(
    const OffspringLaw& law, const std::vector<PopulationState>& probe_states,
    std::int64_t draws, Rng& rng);

}  // namespace branchsim

#endif
