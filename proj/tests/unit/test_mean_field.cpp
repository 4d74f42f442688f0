#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "branchsim/errors.hpp"
#include "branchsim/mean_field.hpp"
#include "branchsim/offspring.hpp"
#include "branchsim/rng.hpp"

using namespace branchsim;

namespace {

constexpr double kGamma = 0.57721566490153286060651209008240243;

LawPtr constant_law(double mean) {
  return make_independent_law(DistSpec::poisson(mean), DistSpec::poisson(mean));
}

LawPtr stabilizing_law() {
  ProportionMeanFns fns;
  fns.xx = [](double bc, double) { return 1.2 + 0.6 * (1.0 - bc); };
  fns.yy = [](double bc, double) { return 1.2 + 0.6 * bc; };
  fns.xy = [](double, double) { return 0.0; };
  fns.yx = [](double, double) { return 0.0; };
  return make_proportion_law(std::move(fns), DistKind::Poisson, {1.8, 0.0, 0.0, 1.8});
}

// Independent long-double evaluation of the harmonic asymptotics, used as the
// oracle for the large-n checks.
long double harmonic_oracle(long double n) {
  const long double g = 0.57721566490153286060651209008240243L;
  return std::log(n) + g + 1.0L / (2.0L * n) - 1.0L / (12.0L * n * n) +
         1.0L / (120.0L * n * n * n * n);
}

}  // namespace

TEST_CASE("harmonic_time partial sums") {
  CHECK(harmonic_time(0) == 0.0);
  CHECK(harmonic_time(1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(harmonic_time(3) == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
  // summed value vs asymptotic expansion at n = 1e6
  const double asym = std::log(1e6) + kGamma + 1.0 / (2e6) - 1.0 / (12e12);
  CHECK(std::abs(harmonic_time(1000000) - asym) < 1e-9);
  // the incremental per-epoch tracker reproduces the table bit for bit
  HarmonicSum inc;
  for (int n = 1; n <= 5000; ++n) {
    inc.advance();
    if (n % 997 == 0 || n < 5) REQUIRE(inc.value() == harmonic_time(n));
  }
}

TEST_CASE("harmonic_inverse inverts harmonic time") {
  CHECK(harmonic_inverse(0.5) == 0);
  CHECK(harmonic_inverse(1.0) == 1);  // t_1 = 1 is the smallest harmonic time
  CHECK(harmonic_inverse(1.6) == 2);  // t_2 = 1.5 <= 1.6 < t_3 = 1.8333...
  CHECK(harmonic_inverse(harmonic_time(7)) == 7);

  // large-argument value, frozen from the long-double oracle: the largest n
  // with ln n + gamma + 1/2n - ... <= 20
  CHECK(harmonic_inverse(20.0) == 272400599);
  {
    long double n = std::floor(std::exp(20.0L - 0.57721566490153286L));
    while (harmonic_oracle(n) <= 20.0L) n += 1.0L;
    while (harmonic_oracle(n) > 20.0L) n -= 1.0L;
    CHECK(static_cast<std::int64_t>(n) == 272400599);
  }

  CHECK_THROWS_AS(harmonic_inverse(31.0), std::invalid_argument);
  CHECK(harmonic_inverse_real(31.0) == doctest::Approx(std::exp(31.0 - kGamma)).epsilon(1e-12));
}

TEST_CASE("harmonic_inverse round-trips across the whole range") {
  Rng rng(1122);
  for (int i = 0; i < 300; ++i) {
    // log-uniform epochs from 1 to 1e9
    const double u = rng.uniform01();
    const std::int64_t n =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::exp(u * std::log(1e9))));
    const double t_n = harmonic_time(n);
    REQUIRE(harmonic_inverse(t_n) == n);
    // bracketing property at an arbitrary time
    const double t = t_n + rng.uniform01() / static_cast<double>(n + 1);
    const std::int64_t k = harmonic_inverse(t);
    REQUIRE(harmonic_time(k) <= t);
    REQUIRE(harmonic_time(k + 1) > t);
  }
}

TEST_CASE("ode_rhs evaluates the four field lines") {
  const LawPtr law = constant_law(1.5);
  // on the invariant line: growth 1.5 balances 1 + psi at psi = 0.5
  const auto g = ode_rhs(OdeState{0.5, 0.25, 1.5, 0.75, 2.0}, *law);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g[3] == doctest::Approx(0.0).epsilon(1e-14));

  // generic point, by hand: beta = 0.6, growth = 1.5
  const auto g2 = ode_rhs(OdeState{0.5, 0.3, 1.2, 0.9, 2.0}, *law);
  CHECK(g2[0] == doctest::Approx(1.5 - 1.0 - 0.5));
  CHECK(g2[1] == doctest::Approx(0.6 * 0.5 - 0.3));
  CHECK(g2[2] == doctest::Approx(1.5 - 1.2));
  CHECK(g2[3] == doctest::Approx(0.6 * 1.5 - 0.9));

  // absorbed regime
  const auto g0 = ode_rhs(OdeState{0.0, 0.0, 1.2, 0.9, 2.0}, *law);
  CHECK((g0[0] == 0.0 && g0[1] == 0.0 && g0[2] == 0.0 && g0[3] == 0.0));
}

TEST_CASE("ode_rhs stays inside the dominating bound") {
  const LawPtr law = stabilizing_law();
  const double bound = 4.0 * 1.8 + 1.0;
  Rng rng(3344);
  for (int i = 0; i < 500; ++i) {
    const double psi_c = 0.05 + 2.0 * rng.uniform01();
    const double theta_c = psi_c * rng.uniform01();
    const double psi_a = psi_c + 2.0 * rng.uniform01();
    const double theta_a = psi_a * rng.uniform01();
    const auto g = ode_rhs(OdeState{psi_c, theta_c, psi_a, theta_a,
                                    1.0 + 10.0 * rng.uniform01()},
                           *law);
    for (double v : g) REQUIRE(std::abs(v) <= bound);
  }
}

TEST_CASE("integrate_ode holds a fixed point and freezes absorbed states") {
  const LawPtr law = stabilizing_law();
  const OdeState fp{0.5, 0.25, 1.5, 0.75, 0.0};
  const OdeSolution sol = integrate_ode(fp, 1.0, 10.0, 1e-3, *law);
  for (const OdeState& s : sol.states) {
    REQUIRE(std::abs(s.psi_c - 0.5) < 1e-8);
    REQUIRE(std::abs(s.theta_c - 0.25) < 1e-8);
    REQUIRE(std::abs(s.psi_a - 1.5) < 1e-8);
    REQUIRE(std::abs(s.theta_a - 0.75) < 1e-8);
  }
  CHECK_FALSE(sol.frozen_at.has_value());

  const OdeSolution dead =
      integrate_ode(OdeState{0.0, 0.0, 1.0, 0.4, 0.0}, 1.0, 3.0, 1e-2, *law);
  REQUIRE(dead.frozen_at.has_value());
  for (const OdeState& s : dead.states) {
    REQUIRE(s.psi_c == 0.0);
    REQUIRE(s.psi_a == 1.0);
    REQUIRE(s.theta_a == 0.4);
  }
}

TEST_CASE("integrate_ode locates the absorption crossing of a dying field") {
  // subcritical constant mean: psi' = m - 1 - psi with m - 1 = -0.2, so psi
  // hits zero at t - t0 = ln((psi0+0.2)/0.2). Stages past the boundary see
  // the zeroed field, so the located crossing carries an O(h) bias.
  const LawPtr law = constant_law(0.8);
  const double expected = 1.0 + std::log(0.7 / 0.2);
  const OdeSolution sol =
      integrate_ode(OdeState{0.5, 0.25, 1.0, 0.5, 0.0}, 1.0, 6.0, 1e-3, *law);
  REQUIRE(sol.frozen_at.has_value());
  CHECK(std::abs(*sol.frozen_at - expected) < 2e-3);
  CHECK(sol.back().psi_c == 0.0);

  const OdeSolution finer =
      integrate_ode(OdeState{0.5, 0.25, 1.0, 0.5, 0.0}, 1.0, 6.0, 1e-4, *law);
  REQUIRE(finer.frozen_at.has_value());
  CHECK(std::abs(*finer.frozen_at - expected) < 2e-4);
}

TEST_CASE("integrate_ode converges at fourth order on a smooth field") {
  const LawPtr law = stabilizing_law();
  const OdeState init{0.9, 0.2, 2.0, 0.5, 0.0};
  const OdeSolution coarse = integrate_ode(init, 1.0, 5.0, 1e-2, *law);
  const OdeSolution mid = integrate_ode(init, 1.0, 5.0, 5e-3, *law);
  const OdeSolution fine = integrate_ode(init, 1.0, 5.0, 2.5e-3, *law);
  double d1 = 0.0, d2 = 0.0;
  for (const OdeState& s : coarse.states) {
    const OdeState m = mid.at_time(s.t);
    const OdeState f = fine.at_time(s.t);
    d1 = std::max(d1, std::abs(s.psi_c - m.psi_c));
    d1 = std::max(d1, std::abs(s.theta_c - m.theta_c));
    d2 = std::max(d2, std::abs(m.psi_c - f.psi_c));
    d2 = std::max(d2, std::abs(m.theta_c - f.theta_c));
  }
  REQUIRE(d2 > 0.0);
  CHECK(d1 / d2 >= 8.0);
}

TEST_CASE("find_fixed_points: stabilizing law") {
  const LawPtr law = stabilizing_law();
  const FixedPointSearch search = find_fixed_points(*law, default_fixed_point_guesses());

  // interior equilibrium, known in closed form
  bool found_interior = false, found_b0 = false, found_b1 = false;
  for (const FixedPoint& fp : search.points) {
    if (std::abs(fp.state.psi_c - 0.5) < 1e-8 && std::abs(fp.state.theta_c - 0.25) < 1e-8) {
      found_interior = true;
      CHECK(fp.state.psi_a == doctest::Approx(1.5).epsilon(1e-9));
      CHECK(fp.state.theta_a == doctest::Approx(0.75).epsilon(1e-9));
      CHECK(fp.residual <= 1e-10);
      CHECK(fp.classification == Stability::Stable);
      CHECK_FALSE(fp.has_null_direction());
    }
    if (std::abs(fp.state.psi_c - 0.2) < 1e-8 && std::abs(fp.state.theta_c) < 1e-8)
      found_b0 = true;  // beta = 0 boundary root: psi = m_yy(0) - 1 = 0.2
    if (std::abs(fp.state.psi_c - 0.2) < 1e-8 && std::abs(fp.state.theta_c - 0.2) < 1e-8)
      found_b1 = true;  // beta = 1 boundary root: psi = m_xx(1) - 1 = 0.2
  }
  CHECK(found_interior);
  CHECK(found_b0);
  CHECK(found_b1);
}

TEST_CASE("find_fixed_points: equal-mean independent law has a fixed line") {
  const LawPtr law = constant_law(1.5);
  const FixedPointSearch search = find_fixed_points(*law, default_fixed_point_guesses());
  REQUIRE_FALSE(search.points.empty());
  int interior = 0;
  for (const FixedPoint& fp : search.points) {
    if (fp.boundary) continue;
    ++interior;
    // every interior solution sits on {psi_c = m-1, psi_a = m, theta_a = m/(m-1)*theta_c}
    CHECK(fp.state.psi_c == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(fp.state.psi_a == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(fp.state.theta_a == doctest::Approx(3.0 * fp.state.theta_c).epsilon(1e-6));
    CHECK(fp.residual <= 1e-10);
    CHECK(fp.classification == Stability::Marginal);
    CHECK(fp.has_null_direction());
  }
  CHECK(interior >= 2);  // different guesses land on different line points
}

TEST_CASE("find_fixed_points: subcritical law only reaches the frozen boundary") {
  const LawPtr law = constant_law(0.8);
  const FixedPointSearch search = find_fixed_points(*law, default_fixed_point_guesses());
  REQUIRE_FALSE(search.points.empty());
  for (const FixedPoint& fp : search.points) {
    CHECK(fp.boundary);
    CHECK(fp.state.psi_c == 0.0);
    CHECK(fp.state.theta_c == 0.0);
  }
}

TEST_CASE("find_fixed_points refuses size-dependent laws") {
  const LawPtr bpa = make_bpa_law(DistSpec::poisson(1.0), DistSpec::poisson(1.0),
                                  DistSpec::poisson(0.5), DistSpec::poisson(0.5));
  CHECK_THROWS_AS(find_fixed_points(*bpa, default_fixed_point_guesses()),
                  ContractViolation);
}

TEST_CASE("perturbed stable fixed point flows back") {
  const LawPtr law = stabilizing_law();
  Rng rng(90210);
  const OdeState fp{0.5, 0.25, 1.5, 0.75, 0.0};
  for (int trial = 0; trial < 5; ++trial) {
    OdeState init = fp;
    init.psi_c += 1e-3 * (2.0 * rng.uniform01() - 1.0);
    init.theta_c += 1e-3 * (2.0 * rng.uniform01() - 1.0);
    init.psi_a += 1e-3 * (2.0 * rng.uniform01() - 1.0);
    init.theta_a += 1e-3 * (2.0 * rng.uniform01() - 1.0);
    init.theta_c = std::min(init.theta_c, init.psi_c);
    const OdeSolution sol = integrate_ode(init, 1.0, 50.0, 1e-2, *law);
    const OdeState& end = sol.back();
    CHECK(std::abs(end.psi_c - fp.psi_c) < 1e-4);
    CHECK(std::abs(end.theta_c - fp.theta_c) < 1e-4);
    CHECK(std::abs(end.psi_a - fp.psi_a) < 1e-4);
    CHECK(std::abs(end.theta_a - fp.theta_a) < 1e-4);
  }
}

TEST_CASE("integration clamps tiny invariant overshoot and rejects real ones") {
  const LawPtr law = stabilizing_law();
  // theta_c slightly above psi_c is clamped on entry
  const OdeSolution sol =
      integrate_ode(OdeState{0.5, 0.5 + 5e-10, 1.5, 0.75, 0.0}, 1.0, 0.1, 1e-3, *law);
  CHECK(sol.front().theta_c <= sol.front().psi_c);
  CHECK_THROWS_AS(
      integrate_ode(OdeState{0.5, 0.7, 1.5, 0.75, 0.0}, 1.0, 0.1, 1e-3, *law),
      ContractViolation);
}
