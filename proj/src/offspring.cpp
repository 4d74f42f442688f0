#include "branchsim/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "branchsim/errors.hpp"

namespace branchsim {

double DominatingMoments::max_mean() const {
  return std::max(std::max(mean[0], mean[1]), std::max(mean[2], mean[3]));
}

CoupledDraw OffspringLaw::coupled_sample_for(DyingType, const PopulationState&, Rng&) const {
  throw ContractViolation("law '" + name() + "' provides no dominating coupling");
}

namespace {

double beta_current(const RealState& s) {
  const double sc = s.cx + s.cy;
  if (!(sc > 0.0))
    throw ContractViolation("mean_matrix: current population proportion undefined at empty state");
  return s.cx / sc;
}

double beta_total(const RealState& s) {
  const double sa = s.ax + s.ay;
  if (!(sa > 0.0))
    throw ContractViolation("mean_matrix: total population proportion undefined at empty state");
  return s.ax / sa;
}

// --- Independent -------------------------------------------------------------

class IndependentLaw final : public OffspringLaw {
 public:
  IndependentLaw(DistSpec x, DistSpec y) : x_(std::move(x)), y_(std::move(y)) {}

  std::string name() const override { return "independent"; }

  OffspringSample sample_for(DyingType dying, const PopulationState&, Rng& rng) const override {
    const DistSpec& own = (dying == DyingType::X) ? x_ : y_;
    return OffspringSample{own.sample(rng), 0};
  }

  MeanMatrix mean_matrix(const RealState&) const override {
    return MeanMatrix{x_.mean(), 0.0, 0.0, y_.mean()};
  }

  std::optional<DominatingMoments> dominating_moments() const override {
    DominatingMoments d;
    d.mean = {x_.mean(), 0.0, 0.0, y_.mean()};
    d.second_moment = {x_.second_moment(), 0.0, 0.0, y_.second_moment()};
    return d;
  }

  bool has_coupling() const override { return true; }

  // State-independent offspring are their own dominating variables: the dying
  // row reuses the realized draw, the other row draws fresh.
  CoupledDraw coupled_sample_for(DyingType dying, const PopulationState& state,
                                 Rng& rng) const override {
    CoupledDraw d;
    d.sample = sample_for(dying, state, rng);
    if (dying == DyingType::X) {
      d.dominating[CELL_XX] = d.sample.own;
      d.dominating[CELL_YY] = y_.sample(rng);
    } else {
      d.dominating[CELL_YY] = d.sample.own;
      d.dominating[CELL_XX] = x_.sample(rng);
    }
    return d;
  }

  std::optional<MeanMatrix> proportion_means(double, double) const override {
    return MeanMatrix{x_.mean(), 0.0, 0.0, y_.mean()};
  }

  std::optional<SampleDistribution> sample_distribution(
      DyingType dying, const PopulationState&) const override {
    const DistSpec& own = (dying == DyingType::X) ? x_ : y_;
    if (!own.finite_support()) return std::nullopt;
    SampleDistribution dist;
    for (auto& [v, p] : own.pmf()) dist.push_back({OffspringSample{v, 0}, p});
    return dist;
  }

 private:
  DistSpec x_, y_;
};

// --- Proportion-dependent ----------------------------------------------------

class ProportionLaw final : public OffspringLaw {
 public:
  ProportionLaw(ProportionMeanFns fns, DistKind base, const std::array<double, 4>& bounds)
      : fns_(std::move(fns)), base_(base), bounds_(bounds) {
    if (base_ == DistKind::FinitePmf)
      throw ConfigError(
          "proportion law: base must be a mean-parametric family (poisson or geometric)");
    for (double b : bounds_)
      if (!(b >= 0.0) || !std::isfinite(b))
        throw ConfigError("proportion law: declared mean bounds must be finite and >= 0");
  }

  std::string name() const override { return "proportion"; }

  OffspringSample sample_for(DyingType dying, const PopulationState& state,
                             Rng& rng) const override {
    const auto [m_own, m_cross, b_own, b_cross] = row_means(dying, RealState::from(state));
    return OffspringSample{draw(m_own, rng), draw(m_cross, rng)};
  }

  MeanMatrix mean_matrix(const RealState& state) const override {
    const double bc = beta_current(state);
    const double ba = beta_total(state);
    return checked_means(bc, ba);
  }

  std::optional<DominatingMoments> dominating_moments() const override {
    DominatingMoments d;
    d.mean = bounds_;
    for (int i = 0; i < 4; ++i) d.second_moment[i] = base_second_moment(bounds_[i]);
    return d;
  }

  bool has_coupling() const override { return true; }

  // Thinning coupling: the dominating draw comes from the declared-bound
  // distribution, and the realized sample keeps each unit with probability
  // m/bound, which reproduces the target marginal for both base families.
  CoupledDraw coupled_sample_for(DyingType dying, const PopulationState& state,
                                 Rng& rng) const override {
    const auto [m_own, m_cross, b_own, b_cross] = row_means(dying, RealState::from(state));
    CoupledDraw d;
    const auto [own, own_hat] = draw_thinned(m_own, b_own, rng);
    const auto [cross, cross_hat] = draw_thinned(m_cross, b_cross, rng);
    d.sample = OffspringSample{own, cross};
    const int own_cell = (dying == DyingType::X) ? CELL_XX : CELL_YY;
    const int cross_cell = (dying == DyingType::X) ? CELL_XY : CELL_YX;
    const int other_own = (dying == DyingType::X) ? CELL_YY : CELL_XX;
    const int other_cross = (dying == DyingType::X) ? CELL_YX : CELL_XY;
    d.dominating[own_cell] = own_hat;
    d.dominating[cross_cell] = cross_hat;
    d.dominating[other_own] = draw(bounds_[other_own], rng);
    d.dominating[other_cross] = draw(bounds_[other_cross], rng);
    return d;
  }

  std::optional<MeanMatrix> proportion_means(double beta_c, double beta_a) const override {
    // Raw evaluation, no bound enforcement: the solver probes slightly outside
    // [0,1]^2 when differencing at boundary roots.
    return MeanMatrix{fns_.xx(beta_c, beta_a), fns_.xy(beta_c, beta_a),
                      fns_.yx(beta_c, beta_a), fns_.yy(beta_c, beta_a)};
  }

 private:
  // (mean_own, mean_cross, bound_own, bound_cross) for the dying row.
  std::array<double, 4> row_means(DyingType dying, const RealState& s) const {
    const double bc = beta_current(s);
    const double ba = beta_total(s);
    const MeanMatrix m = checked_means(bc, ba);
    if (dying == DyingType::X) return {m.xx, m.xy, bounds_[CELL_XX], bounds_[CELL_XY]};
    return {m.yy, m.yx, bounds_[CELL_YY], bounds_[CELL_YX]};
  }

  MeanMatrix checked_means(double bc, double ba) const {
    const MeanMatrix m = *proportion_means(bc, ba);
    const double vals[4] = {m.xx, m.xy, m.yx, m.yy};
    const int cells[4] = {CELL_XX, CELL_XY, CELL_YX, CELL_YY};
    for (int i = 0; i < 4; ++i) {
      if (!(vals[i] >= 0.0) || !std::isfinite(vals[i]))
        throw ContractViolation("proportion law: mean function returned a negative or "
                                "non-finite value");
      if (vals[i] > bounds_[cells[i]] + 1e-9)
        throw ContractViolation("proportion law: mean function exceeded its declared bound");
    }
    return m;
  }

  std::int64_t draw(double mean, Rng& rng) const {
    if (mean <= 0.0) return 0;
    return (base_ == DistKind::Poisson) ? rng.poisson(mean) : rng.geometric_mean(mean);
  }

  std::pair<std::int64_t, std::int64_t> draw_thinned(double mean, double bound,
                                                     Rng& rng) const {
    if (bound <= 0.0) return {0, 0};
    const DistSpec parent = (base_ == DistKind::Poisson) ? DistSpec::poisson(bound)
                                                         : DistSpec::geometric(bound);
    return parent.sample_thinned(mean, rng);
  }

  double base_second_moment(double mean) const {
    return (base_ == DistKind::Poisson) ? mean + mean * mean : mean + 2.0 * mean * mean;
  }

  ProportionMeanFns fns_;
  DistKind base_;
  std::array<double, 4> bounds_;  // cell order xx, xy, yx, yy
};

// --- Branching process with attack -------------------------------------------

class BpaLaw final : public OffspringLaw {
 public:
  BpaLaw(DistSpec own_x, DistSpec own_y, DistSpec attack_xy, DistSpec attack_yx)
      : own_x_(std::move(own_x)), own_y_(std::move(own_y)),
        attack_xy_(std::move(attack_xy)), attack_yx_(std::move(attack_yx)) {}

  std::string name() const override { return "bpa"; }

  OffspringSample sample_for(DyingType dying, const PopulationState& state,
                             Rng& rng) const override {
    const DistSpec& own = (dying == DyingType::X) ? own_x_ : own_y_;
    const DistSpec& attack = (dying == DyingType::X) ? attack_xy_ : attack_yx_;
    const std::int64_t victims = (dying == DyingType::X) ? state.cy : state.cx;
    const std::int64_t own_draw = own.sample(rng);
    const std::int64_t attack_draw = attack.sample(rng);
    const std::int64_t seized = std::min(attack_draw, victims);
    return OffspringSample{own_draw + seized, -seized};
  }

  MeanMatrix mean_matrix(const RealState& state) const override {
    // The attack is clipped at the victim population, so the cross mean is
    // -E[min(attack, victims)] and the own mean absorbs the acquired ones.
    const double ex = attack_xy_.expected_min_with_cap(std::max(0.0, state.cy));
    const double ey = attack_yx_.expected_min_with_cap(std::max(0.0, state.cx));
    return MeanMatrix{own_x_.mean() + ex, -ex, -ey, own_y_.mean() + ey};
  }

  std::optional<DominatingMoments> dominating_moments() const override {
    DominatingMoments d;
    // own + min(attack, .) <= own + attack with independent summands; the
    // cross cells are never positive.
    d.mean = {own_x_.mean() + attack_xy_.mean(), 0.0, 0.0,
              own_y_.mean() + attack_yx_.mean()};
    d.second_moment = {sum_second_moment(own_x_, attack_xy_), 0.0, 0.0,
                       sum_second_moment(own_y_, attack_yx_)};
    return d;
  }

  bool has_coupling() const override { return true; }

  CoupledDraw coupled_sample_for(DyingType dying, const PopulationState& state,
                                 Rng& rng) const override {
    const DistSpec& own = (dying == DyingType::X) ? own_x_ : own_y_;
    const DistSpec& attack = (dying == DyingType::X) ? attack_xy_ : attack_yx_;
    const DistSpec& other_own = (dying == DyingType::X) ? own_y_ : own_x_;
    const DistSpec& other_attack = (dying == DyingType::X) ? attack_yx_ : attack_xy_;
    const std::int64_t victims = (dying == DyingType::X) ? state.cy : state.cx;

    CoupledDraw d;
    const std::int64_t own_draw = own.sample(rng);
    const std::int64_t attack_draw = attack.sample(rng);
    const std::int64_t seized = std::min(attack_draw, victims);
    d.sample = OffspringSample{own_draw + seized, -seized};
    const int own_cell = (dying == DyingType::X) ? CELL_XX : CELL_YY;
    const int other_cell = (dying == DyingType::X) ? CELL_YY : CELL_XX;
    d.dominating[own_cell] = own_draw + attack_draw;
    d.dominating[other_cell] = other_own.sample(rng) + other_attack.sample(rng);
    return d;
  }

  std::optional<SampleDistribution> sample_distribution(
      DyingType dying, const PopulationState& state) const override {
    const DistSpec& own = (dying == DyingType::X) ? own_x_ : own_y_;
    const DistSpec& attack = (dying == DyingType::X) ? attack_xy_ : attack_yx_;
    if (!own.finite_support() || !attack.finite_support()) return std::nullopt;
    const std::int64_t victims = (dying == DyingType::X) ? state.cy : state.cx;
    std::map<std::pair<std::int64_t, std::int64_t>, double> acc;
    for (auto& [vo, po] : own.pmf())
      for (auto& [va, pa] : attack.pmf()) {
        const std::int64_t seized = std::min(va, victims);
        acc[{vo + seized, -seized}] += po * pa;
      }
    SampleDistribution dist;
    for (auto& [k, p] : acc) dist.push_back({OffspringSample{k.first, k.second}, p});
    return dist;
  }

 private:
  static double sum_second_moment(const DistSpec& a, const DistSpec& b) {
    return a.second_moment() + 2.0 * a.mean() * b.mean() + b.second_moment();
  }

  DistSpec own_x_, own_y_, attack_xy_, attack_yx_;
};

}  // namespace

LawPtr make_independent_law(const DistSpec& dist_x, const DistSpec& dist_y) {
  return std::make_shared<IndependentLaw>(dist_x, dist_y);
}

LawPtr make_proportion_law(ProportionMeanFns mean_fns, DistKind base,
                           const std::array<double, 4>& declared_bounds) {
  if (!mean_fns.xx || !mean_fns.xy || !mean_fns.yx || !mean_fns.yy)
    throw ConfigError("proportion law: all four mean functions are required");
  return std::make_shared<ProportionLaw>(std::move(mean_fns), base, declared_bounds);
}

LawPtr make_bpa_law(const DistSpec& own_x, const DistSpec& own_y,
                    const DistSpec& attack_xy, const DistSpec& attack_yx) {
  return std::make_shared<BpaLaw>(own_x, own_y, attack_xy, attack_yx);
}

// --- validate_law_moments --------------------------------------------------------------

bool MomentValidationReport::passed() const {
  for (const auto& probe : probes)
    for (const auto& cell : probe.cells)
      if (cell && (!cell->mean_within_bound || cell->domination_violations > 0))
        return false;
  return true;
}

MomentValidationReport validate_law_moments(
    const OffspringLaw& law, const std::vector<PopulationState>& probe_states,
    std::int64_t draws, Rng& rng) {
  if (draws < 10000)
    throw ContractViolation("validate_law_moments: need at least 1e4 draws per probe");
  const auto declared = law.dominating_moments();

  MomentValidationReport report;
  report.moments_declared = declared.has_value();
  report.coupling_checked = law.has_coupling();

  struct Acc {
    double sum = 0.0, sum_sq = 0.0;
    std::int64_t zeros = 0, n = 0, violations = 0;
  };

  for (const auto& state : probe_states) {
    MomentProbeReport probe;
    probe.state = state;
    for (DyingType dying : {DyingType::X, DyingType::Y}) {
      const bool can_die = (dying == DyingType::X) ? state.cx >= 1 : state.cy >= 1;
      if (!can_die) continue;
      Acc own_acc, cross_acc;
      for (std::int64_t i = 0; i < draws; ++i) {
        OffspringSample s;
        std::int64_t hat_own = 0, hat_cross = 0;
        if (law.has_coupling()) {
          const CoupledDraw d = law.coupled_sample_for(dying, state, rng);
          s = d.sample;
          hat_own = d.dominating[dying == DyingType::X ? CELL_XX : CELL_YY];
          hat_cross = d.dominating[dying == DyingType::X ? CELL_XY : CELL_YX];
        } else {
          s = law.sample_for(dying, state, rng);
        }
        auto feed = [](Acc& a, std::int64_t v, std::int64_t hat, bool coupled) {
          const double dv = static_cast<double>(v);
          a.sum += dv;
          a.sum_sq += dv * dv;
          if (v == 0) ++a.zeros;
          if (coupled && v > hat) ++a.violations;
          ++a.n;
        };
        feed(own_acc, s.own, hat_own, law.has_coupling());
        feed(cross_acc, s.cross, hat_cross, law.has_coupling());
      }
      auto finish = [&](const Acc& a, int cell) {
        MomentCellStats st;
        st.draws = a.n;
        st.empirical_mean = a.sum / static_cast<double>(a.n);
        st.empirical_second_moment = a.sum_sq / static_cast<double>(a.n);
        st.zero_fraction = static_cast<double>(a.zeros) / static_cast<double>(a.n);
        st.zero_possibility_ok = a.zeros > 0 && a.zeros < a.n;
        st.domination_violations = a.violations;
        if (declared) {
          st.declared_mean_bound = declared->mean[cell];
          st.declared_second_moment = declared->second_moment[cell];
          const double var = std::max(0.0, st.empirical_second_moment -
                                               st.empirical_mean * st.empirical_mean);
          const double stderr_mean = std::sqrt(var / static_cast<double>(a.n));
          st.mean_within_bound =
              st.empirical_mean <= *st.declared_mean_bound + 4.0 * stderr_mean;
        }
        return st;
      };
      if (dying == DyingType::X) {
        probe.cells[CELL_XX] = finish(own_acc, CELL_XX);
        probe.cells[CELL_XY] = finish(cross_acc, CELL_XY);
      } else {
        probe.cells[CELL_YY] = finish(own_acc, CELL_YY);
        probe.cells[CELL_YX] = finish(cross_acc, CELL_YX);
      }
    }
    report.probes.push_back(std::move(probe));
  }
  return report;
}

}  // namespace branchsim
