#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "branchsim/analysis.hpp"
#include "branchsim/engine.hpp"
#include "branchsim/errors.hpp"
#include "branchsim/mean_field.hpp"

using namespace branchsim;

namespace {

LawPtr one_child_law() {
  return make_independent_law(DistSpec::finite_pmf({{1, 1.0}}),
                              DistSpec::finite_pmf({{1, 1.0}}));
}

LawPtr stabilizing_law() {
  ProportionMeanFns fns;
  fns.xx = [](double bc, double) { return 1.2 + 0.6 * (1.0 - bc); };
  fns.yy = [](double bc, double) { return 1.2 + 0.6 * bc; };
  fns.xy = [](double, double) { return 0.0; };
  fns.yx = [](double, double) { return 0.0; };
  return make_proportion_law(std::move(fns), DistKind::Poisson, {1.8, 0.0, 0.0, 1.8});
}

Trajectory small_trajectory(const LawPtr& law, std::int64_t horizon, std::uint64_t seed,
                            std::int64_t cx0 = 2, std::int64_t cy0 = 3) {
  ScenarioConfig config;
  config.cx0 = cx0;
  config.cy0 = cy0;
  config.horizon_epochs = horizon;
  config.base_seed = seed;
  return run_trajectory(config, law, 0);
}

}  // namespace

TEST_CASE("interpolate_chain is the recursion read off at harmonic times") {
  const Trajectory traj = small_trajectory(one_child_law(), 50, 17);
  const std::int64_t n = 10;
  const ProportionVector at_n = traj.records[n - 1].tracker;
  const ProportionVector at_n1 = traj.records[n].tracker;

  CHECK(interpolate_chain(traj, n, 0.0) == at_n);
  const double dt = harmonic_time(n + 1) - harmonic_time(n);
  // just past the next harmonic time: exactly the next recursion value
  CHECK(interpolate_chain(traj, n, dt + 1e-12) == at_n1);
  // strictly inside the gap: still the anchor value (piecewise constant)
  CHECK(interpolate_chain(traj, n, dt - 1e-12) == at_n);
  // mid-gap between t_{n+1} and t_{n+2}: the n+1 value
  const double dt2 = harmonic_time(n + 2) - harmonic_time(n);
  CHECK(interpolate_chain(traj, n, 0.5 * (dt + dt2)) == at_n1);

  // needs epochs past the recorded horizon
  CHECK_THROWS_AS(interpolate_chain(traj, n, 5.0), ContractViolation);
  CHECK_THROWS_AS(interpolate_chain(traj, n, 100.0), ContractViolation);
  CHECK_THROWS_AS(interpolate_chain(traj, 0, 0.5), ContractViolation);
}

TEST_CASE("window_compare: zero-length windows have zero distance") {
  const Trajectory traj = small_trajectory(one_child_law(), 300, 23);
  const ComparisonReport report =
      window_compare(traj, one_child_law(), {10, 50, 200}, 0.0, 1e-3);
  REQUIRE(report.windows.size() == 3);
  for (const ComparisonWindow& w : report.windows) {
    CHECK(w.k_begin == w.n_m);
    CHECK(w.k_end == w.n_m);
    CHECK(w.sup_distance == 0.0);
  }
}

TEST_CASE("window_compare: critical one-child chain shadows its ODE closely") {
  // With one child per death every line is computable: psi decays like
  // s0/k on the chain and exponentially along the ODE, and the two agree to
  // O(1/n_m) on a window. Only theta_a carries dying-type randomness.
  const Trajectory traj = small_trajectory(one_child_law(), 2000, 29);
  const ComparisonReport report =
      window_compare(traj, one_child_law(), {100, 200}, 2.0, 1e-3);
  REQUIRE(report.windows.size() == 2);
  for (const ComparisonWindow& w : report.windows) {
    CHECK_FALSE(w.extinct);
    CHECK(w.sup_distance <= 0.05);
  }
}

TEST_CASE("window_compare validates the needed horizon") {
  const Trajectory traj = small_trajectory(one_child_law(), 100, 31);
  CHECK_THROWS_AS(window_compare(traj, one_child_law(), {90}, 2.0, 1e-3),
                  ContractViolation);
}

TEST_CASE("window_compare: extinct chains freeze on both sides") {
  // no offspring: extinction at epoch 5 from (2,3)
  const LawPtr law = make_independent_law(DistSpec::finite_pmf({{0, 1.0}}),
                                          DistSpec::finite_pmf({{0, 1.0}}));
  const Trajectory traj = small_trajectory(law, 100, 37);
  REQUIRE(traj.extinct());
  REQUIRE(*traj.extinction_epoch == 5);
  const ComparisonReport report = window_compare(traj, law, {4}, 1.0, 1e-3);
  REQUIRE(report.windows.size() == 1);
  CHECK(report.windows[0].extinct);
  // the chain's rescaled frozen ratios and the frozen ODE stay within the
  // anchor's own scale
  CHECK(report.windows[0].sup_distance < 2.0);
}

TEST_CASE("window_selftest: the comparison plumbing is tight") {
  const LawPtr law = stabilizing_law();
  const OdeState init{0.62, 0.27, 1.62, 0.73, 0.0};
  const ComparisonReport report =
      window_selftest(law, init, geometric_schedule(100, 5), 2.0, 1e-3);
  REQUIRE(report.windows.size() == 5);
  for (const ComparisonWindow& w : report.windows) CHECK(w.sup_distance <= 1e-6);
}

TEST_CASE("geometric_schedule doubles from its base") {
  const auto s = geometric_schedule(100, 7);
  REQUIRE(s.size() == 7);
  CHECK(s.front() == 100);
  CHECK(s.back() == 6400);
}

TEST_CASE("enumerate_one_step: restore, single-type and attack cases") {
  // one-child law at (1,1,1,1): both deaths restore the state's current
  // sizes, only the totals differ
  const auto d1 = enumerate_one_step(PopulationState{1, 1, 1, 1}, *one_child_law(), 1.0);
  REQUIRE(d1.size() == 2);
  CHECK(d1[0].first == PopulationState{1, 1, 1, 2});
  CHECK(d1[0].second == doctest::Approx(0.5));
  CHECK(d1[1].first == PopulationState{1, 1, 2, 1});
  CHECK(d1[1].second == doctest::Approx(0.5));

  // single-type with {0: 1/2, 2: 1/2}
  const LawPtr half = make_independent_law(DistSpec::finite_pmf({{0, 0.5}, {2, 0.5}}),
                                           DistSpec::finite_pmf({{0, 1.0}}));
  const auto d2 = enumerate_one_step(PopulationState{1, 0, 1, 0}, *half, 1.0);
  REQUIRE(d2.size() == 2);
  CHECK(d2[0].first == PopulationState{0, 0, 1, 0});
  CHECK(d2[0].second == doctest::Approx(0.5));
  CHECK(d2[1].first == PopulationState{2, 0, 3, 0});
  CHECK(d2[1].second == doctest::Approx(0.5));

  // attack law enumerated by hand from the min-clipping rule:
  // own_x = 1, attack_xy ~ {0: 1/2, 1: 1/2}, own_y = 1, attack_yx = 0 at (1,1,1,1):
  //   x dies, no attack   (p 1/4): (1,1,2,1)
  //   x dies, attack      (p 1/4): (2,0,3,0)
  //   y dies              (p 1/2): (1,1,1,2)
  const LawPtr bpa =
      make_bpa_law(DistSpec::finite_pmf({{1, 1.0}}), DistSpec::finite_pmf({{1, 1.0}}),
                   DistSpec::finite_pmf({{0, 0.5}, {1, 0.5}}),
                   DistSpec::finite_pmf({{0, 1.0}}));
  const auto d3 = enumerate_one_step(PopulationState{1, 1, 1, 1}, *bpa, 1.0);
  REQUIRE(d3.size() == 3);
  double total = 0.0;
  for (const auto& [state, p] : d3) {
    total += p;
    if (state == PopulationState{1, 1, 2, 1}) CHECK(p == doctest::Approx(0.25));
    if (state == PopulationState{2, 0, 3, 0}) CHECK(p == doctest::Approx(0.25));
    if (state == PopulationState{1, 1, 1, 2}) CHECK(p == doctest::Approx(0.5));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // unbounded support refuses
  const LawPtr pois = make_independent_law(DistSpec::poisson(1.0), DistSpec::poisson(1.0));
  CHECK_THROWS_AS(enumerate_one_step(PopulationState{1, 1, 1, 1}, *pois, 1.0),
                  ContractViolation);
}

TEST_CASE("oracle_check: simulated single steps match the enumeration") {
  const LawPtr bpa =
      make_bpa_law(DistSpec::finite_pmf({{1, 1.0}}), DistSpec::finite_pmf({{1, 1.0}}),
                   DistSpec::finite_pmf({{0, 0.5}, {1, 0.5}}),
                   DistSpec::finite_pmf({{0, 1.0}}));
  const OracleReport r1 = oracle_check(PopulationState{1, 1, 1, 1}, bpa, 1.0, 100000, 42);
  CHECK(r1.pass);
  CHECK(r1.tv <= 0.01);
  CHECK(r1.support_size == 3);

  // fully deterministic next state: TV is exactly zero
  const OracleReport r2 =
      oracle_check(PopulationState{1, 0, 1, 0}, one_child_law(), 1.0, 100000, 43);
  CHECK(r2.tv == 0.0);
  CHECK(r2.support_size == 1);

  CHECK_THROWS_AS(oracle_check(PopulationState{1, 1, 1, 1}, bpa, 1.0, 0, 44),
                  ContractViolation);
}

TEST_CASE("oracle_check passes at random small states for finite laws") {
  const LawPtr laws[2] = {
      make_independent_law(DistSpec::finite_pmf({{0, 0.3}, {1, 0.4}, {2, 0.3}}),
                           DistSpec::finite_pmf({{0, 0.25}, {2, 0.75}})),
      make_bpa_law(DistSpec::finite_pmf({{0, 0.4}, {2, 0.6}}),
                   DistSpec::finite_pmf({{0, 0.5}, {1, 0.5}}),
                   DistSpec::finite_pmf({{0, 0.7}, {2, 0.3}}),
                   DistSpec::finite_pmf({{1, 1.0}})),
  };
  Rng rng(777);
  for (int i = 0; i < 6; ++i) {
    const std::int64_t cx = static_cast<std::int64_t>(rng.next_u64() % 4);
    const std::int64_t cy = cx == 0 ? 1 + static_cast<std::int64_t>(rng.next_u64() % 3)
                                    : static_cast<std::int64_t>(rng.next_u64() % 4);
    const PopulationState state{cx, cy, cx + 1, cy + 2};
    const OracleReport report =
        oracle_check(state, laws[i % 2], 1.0, 100000, 1000 + static_cast<std::uint64_t>(i));
    REQUIRE(report.pass);
  }
}

TEST_CASE("offspring_mean_tracks: running means, sandwich and the dominating limit") {
  ScenarioConfig config;
  config.cx0 = 1;
  config.cy0 = 1;
  config.horizon_epochs = 100000;
  config.base_seed = 90001;
  const LawPtr law = make_independent_law(DistSpec::poisson(1.5), DistSpec::poisson(1.5));
  const Trajectory traj = run_trajectory(config, law, 0, RecordCoupling::Yes);
  REQUIRE_FALSE(traj.extinct());
  const MeanTracks tracks = offspring_mean_tracks(traj, *law);
  CHECK(tracks.dominating_mean_sum == doctest::Approx(3.0));
  CHECK(tracks.final_gap <= 0.05);
  // n*pi_n = s_a_n was asserted integer-exactly inside; spot-check the ratio
  const std::size_t last = tracks.pi.size() - 1;
  CHECK(tracks.pi[last] ==
        doctest::Approx(static_cast<double>(traj.final_state().s_a()) /
                        static_cast<double>(traj.records.back().n)));

  // extinct path: the identity holds through the extinction epoch
  ScenarioConfig dead;
  dead.cx0 = 1;
  dead.cy0 = 1;
  dead.horizon_epochs = 50;
  dead.base_seed = 4;
  const LawPtr none = make_independent_law(DistSpec::finite_pmf({{0, 1.0}}),
                                           DistSpec::finite_pmf({{0, 1.0}}));
  const Trajectory short_traj = run_trajectory(dead, none, 0, RecordCoupling::Yes);
  REQUIRE(short_traj.extinct());
  const MeanTracks dead_tracks = offspring_mean_tracks(short_traj, *none);
  CHECK(dead_tracks.pi.back() ==
        doctest::Approx(static_cast<double>(short_traj.final_state().s_a()) / 2.0));

  // a trajectory recorded without coupling is refused
  const Trajectory plain = run_trajectory(config, law, 0, RecordCoupling::No);
  CHECK_THROWS_AS(offspring_mean_tracks(plain, *law), ContractViolation);
}

TEST_CASE("offspring_mean_tracks: attack trajectories keep the sandwich exact") {
  ScenarioConfig config;
  config.cx0 = 3;
  config.cy0 = 3;
  config.horizon_epochs = 50000;
  config.base_seed = 90002;
  const LawPtr law = make_bpa_law(DistSpec::poisson(1.1), DistSpec::poisson(1.1),
                                  DistSpec::finite_pmf({{0, 0.5}, {2, 0.5}}),
                                  DistSpec::poisson(0.4));
  const Trajectory traj = run_trajectory(config, law, 0, RecordCoupling::Yes);
  const MeanTracks tracks = offspring_mean_tracks(traj, *law);  // throws on any violation
  CHECK(tracks.pi.size() == traj.records.size());
  for (std::size_t i = 0; i < tracks.pi.size(); ++i)
    REQUIRE(tracks.pi[i] <= tracks.pi_hat[i] + 1e-12);
}

TEST_CASE("limit_stats: stabilizing ensemble concentrates at the balanced point") {
  ScenarioConfig config;
  config.cx0 = 5;
  config.cy0 = 5;
  config.horizon_epochs = 20000;
  config.replications = 300;
  config.base_seed = 60606;
  const LawPtr law = stabilizing_law();
  const EnsembleSummary summary = run_ensemble(config, law, 2);
  REQUIRE(summary.surviving_count >= 250);

  const FixedPointSearch fps = find_fixed_points(*law, default_fixed_point_guesses());
  const LimitReport report = limit_stats(summary, fps.points, 0.05);
  CHECK(report.extinction_fraction + report.survival_fraction == doctest::Approx(1.0));
  REQUIRE(report.median_beta_c.has_value());
  CHECK(std::abs(*report.median_beta_c - 0.5) <= 0.05);
  REQUIRE(report.median_psi_c.has_value());
  CHECK(std::abs(*report.median_psi_c - 0.5) <= 0.05);
  REQUIRE(report.p_hat_a.has_value());
  CHECK(*report.p_hat_a > 0.5);
  CHECK(*report.p_hat_a <= 1.0);
  // every survivor got an attractor assignment
  for (const SurvivorFinal& sv : report.survivors)
    REQUIRE(sv.nearest_fixed_point.has_value());
}

TEST_CASE("limit_stats: one-sided attacks push the attacker to dominance") {
  // x attacks and acquires, y never does; identical own-offspring laws
  ScenarioConfig config;
  config.cx0 = 3;
  config.cy0 = 3;
  config.horizon_epochs = 5000;
  config.replications = 200;
  config.base_seed = 70707;
  const LawPtr law = make_bpa_law(DistSpec::poisson(1.2), DistSpec::poisson(1.2),
                                  DistSpec::poisson(0.3), DistSpec::finite_pmf({{0, 1.0}}));
  const EnsembleSummary summary = run_ensemble(config, law, 2);
  const LimitReport report = limit_stats(summary);
  REQUIRE(report.survivors.size() >= 50);
  std::int64_t dominant = 0;
  for (const SurvivorFinal& sv : report.survivors)
    if (sv.beta_c && *sv.beta_c >= 0.95) ++dominant;
  CHECK(static_cast<double>(dominant) >=
        0.9 * static_cast<double>(report.survivors.size()));
}

TEST_CASE("limit_stats: subcritical ensembles are all extinction-class") {
  ScenarioConfig config;
  config.cx0 = 1;
  config.cy0 = 1;
  config.horizon_epochs = 10000;
  config.replications = 200;
  config.base_seed = 80808;
  const LawPtr law = make_independent_law(DistSpec::poisson(0.8), DistSpec::poisson(0.8));
  const LimitReport report = limit_stats(run_ensemble(config, law, 2));
  CHECK(report.survival_fraction <= 0.01);
  CHECK(report.extinction_fraction >= 0.99);
}
