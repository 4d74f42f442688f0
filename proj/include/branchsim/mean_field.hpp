#ifndef BRANCHSIM_MEAN_FIELD_HPP
#define BRANCHSIM_MEAN_FIELD_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "branchsim/offspring.hpp"

namespace branchsim {

// --- Harmonic time -----------------------------------------------------------

// Compensated (Kahan) accumulation step shared by every harmonic-time
// computation in the project, so the incremental per-epoch sum in the engine
// and the checkpointed table here produce bit-identical values.
inline void kahan_add(double& sum, double& carry, double term) {
  const double y = term - carry;
  const double t = sum + y;
  carry = (t - sum) - y;
  sum = t;
}

// Running partial harmonic sum t_n = sum_{k<=n} 1/k, advanced one epoch at a
// time. Matches harmonic_time(n) exactly.
class HarmonicSum {
 public:
  void advance() {
    ++n_;
    kahan_add(sum_, carry_, 1.0 / static_cast<double>(n_));
  }
  std::int64_t index() const { return n_; }
  double value() const { return sum_; }

 private:
  std::int64_t n_ = 0;
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// t_n for n >= 1 (0 for n <= 0). Checkpointed compensated summation below
// 1e7, asymptotic expansion (accurate to ~1e-15 absolute there) above.
double harmonic_time(std::int64_t n);

// Largest n with t_n <= t; 0 for t < 1. Exact with respect to
// harmonic_time: harmonic_inverse(harmonic_time(n)) == n for every
// representable n. Beyond t = 30 consecutive harmonic times collide at double
// precision (1/n drops under the ulp of t), so the integer inverse stops
// being well-defined and the call is rejected.
std::int64_t harmonic_inverse(double t);

// Real-valued inverse for the ODE reconstruction: the exact value below
// t = 30, the asymptotic exp(t - gamma) above (sub-integer relative error,
// indistinguishable through the offspring means at that scale).
double harmonic_inverse_real(double t);

// --- ODE state ---------------------------------------------------------------

struct OdeState {
  double psi_c = 0.0;
  double theta_c = 0.0;
  double psi_a = 0.0;
  double theta_a = 0.0;
  double t = 0.0;

  std::array<double, 4> components() const { return {psi_c, theta_c, psi_a, theta_a}; }
};

// Right-hand side of the proportion ODE at the given state. The population
// is reconstructed as real counts (proportions times the epoch count at time
// t), the law's conditional means are evaluated there, and the whole field
// vanishes once psi_c <= 0 (absorbed / frozen regime).
// Order: (psi_c, theta_c, psi_a, theta_a).
std::array<double, 4> ode_rhs(const OdeState& state, const OffspringLaw& law);

struct OdeSolution {
  std::vector<OdeState> states;        // increasing t; first at t0, last at t0+T
  std::optional<double> frozen_at;     // time where psi_c hit zero, if it did

  const OdeState& front() const { return states.front(); }
  const OdeState& back() const { return states.back(); }

  // Linear interpolation between grid points; t must lie within the grid
  // range (up to a 1e-9 slack at the ends).
  OdeState at_time(double t) const;
};

// Classical fixed-step RK4 on [t0, t0+T]. If psi_c crosses zero inside a
// step, the crossing is bisected to 1e-12 in time, the state is clamped onto
// the boundary and the solution stays constant afterwards. theta/psi are
// nudged back into their invariant ranges each step; violations beyond 1e-9
// or non-finite components are errors.
OdeSolution integrate_ode(const OdeState& init, double t0, double T, double h,
                          const OffspringLaw& law);

// --- Fixed points ------------------------------------------------------------

enum class Stability { Stable, Unstable, Marginal };

struct FixedPoint {
  OdeState state;  // time-free (t = 0)
  double residual = 0.0;
  std::array<std::complex<double>, 4> eigenvalues{};
  Stability classification = Stability::Marginal;
  bool boundary = false;  // frozen boundary point psi_c = 0 (no linearization)

  // A practically-zero eigenvalue signals a non-isolated fixed point (a line
  // of equilibria), as for equal-mean independent laws.
  bool has_null_direction() const;
};

struct FixedPointSearch {
  std::vector<FixedPoint> points;
  std::vector<OdeState> skipped_guesses;  // no convergence within 200 iterations
};

// Damped Newton on the autonomous proportion reduction of the ODE field from
// each guess. Requires a law whose means depend on the state only through the
// proportions (proportion_means available); refuses otherwise. Interior roots
// are kept when the independently re-evaluated residual is <= 1e-10;
// duplicates within 1e-8 are merged. Guesses that slide to psi_c <= 0 are
// reported as the frozen boundary point.
FixedPointSearch find_fixed_points(const OffspringLaw& law,
                                   const std::vector<OdeState>& guesses);

// A ~20-point grid of (psi, beta) starting guesses that covers the interior
// and the single-type boundaries.
std::vector<OdeState> default_fixed_point_guesses();

}  // namespace branchsim

#endif
