#include "branchsim/population.hpp"

#include <string>

#include "branchsim/errors.hpp"

namespace branchsim {

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b, const char* what) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r))
    throw ContractViolation(std::string("population counter overflow in ") + what);
  return r;
}

}  // namespace

PopulationState initial_state(std::int64_t cx0, std::int64_t cy0) {
  if (cx0 < 0 || cy0 < 0)
    throw ContractViolation("initial sizes must be non-negative");
  return PopulationState{cx0, cy0, cx0, cy0};
}

PopulationState apply_event(const PopulationState& state, DyingType dying,
                            const OffspringSample& sample) {
  PopulationState next = state;
  if (dying == DyingType::X) {
    if (state.cx < 1)
      throw ContractViolation("apply_event: no x-type individual available to die");
    next.cx = checked_add(checked_add(state.cx, sample.own, "cx"), -1, "cx");
    next.ax = checked_add(state.ax, sample.own, "ax");
    next.cy = checked_add(state.cy, sample.cross, "cy");
    next.ay = checked_add(state.ay, sample.cross, "ay");
  } else {
    if (state.cy < 1)
      throw ContractViolation("apply_event: no y-type individual available to die");
    next.cy = checked_add(checked_add(state.cy, sample.own, "cy"), -1, "cy");
    next.ay = checked_add(state.ay, sample.own, "ay");
    next.cx = checked_add(state.cx, sample.cross, "cx");
    next.ax = checked_add(state.ax, sample.cross, "ax");
  }
  if (next.cx < 0 || next.cy < 0 || next.ax < 0 || next.ay < 0)
    throw ContractViolation(
        "apply_event: offspring sample drove a population count negative "
        "(own=" + std::to_string(sample.own) +
        ", cross=" + std::to_string(sample.cross) + ")");
  return next;
}

bool is_extinct(const PopulationState& state) { return state.s_c() == 0; }

ProportionVector exact_proportions(const PopulationState& state, std::int64_t n) {
  if (n < 1) throw ContractViolation("exact_proportions: epoch index must be >= 1");
  const double dn = static_cast<double>(n);
  return ProportionVector{static_cast<double>(state.s_c()) / dn,
                          static_cast<double>(state.cx) / dn,
                          static_cast<double>(state.s_a()) / dn,
                          static_cast<double>(state.ax) / dn};
}

}  // namespace branchsim
