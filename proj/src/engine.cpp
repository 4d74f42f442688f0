#include "branchsim/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "branchsim/errors.hpp"

namespace branchsim {

void ScenarioConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ConfigError("lambda must be finite and > 0");
  if (cx0 < 0 || cy0 < 0) throw ConfigError("initial sizes must be >= 0");
  if (cx0 + cy0 < 1) throw ConfigError("initial population must contain someone");
  if (horizon_epochs < 1) throw ConfigError("horizon_epochs must be >= 1");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (max_wall_seconds < 0.0) throw ConfigError("max_wall_seconds must be >= 0");
}

ProportionVector sa_initial(std::int64_t cx0, std::int64_t cy0) {
  const double s0 = static_cast<double>(cx0 + cy0);
  const double x0 = static_cast<double>(cx0);
  return ProportionVector{s0, x0, s0, x0};
}

ProportionVector sa_update(const ProportionVector& prev, DyingType dying,
                           const OffspringSample& sample, std::int64_t n, bool alive) {
  if (n < 1) throw ContractViolation("sa_update: epoch index must be >= 1");
  if (!alive) return prev;
  const double eps = 1.0 / static_cast<double>(n);
  const double own = static_cast<double>(sample.own);
  const double cross = static_cast<double>(sample.cross);
  const double gamma_total = own + cross;
  // When x dies the x-row offspring feed all four components; when y dies the
  // own count feeds the population lines and the cross count feeds the x-type
  // lines.
  const double l_psi_c = (gamma_total - 1.0) - prev.psi_c;
  const double l_psi_a = gamma_total - prev.psi_a;
  double l_theta_c, l_theta_a;
  if (dying == DyingType::X) {
    l_theta_c = (own - 1.0) - prev.theta_c;
    l_theta_a = own - prev.theta_a;
  } else {
    l_theta_c = cross - prev.theta_c;
    l_theta_a = cross - prev.theta_a;
  }
  return ProportionVector{prev.psi_c + eps * l_psi_c, prev.theta_c + eps * l_theta_c,
                          prev.psi_a + eps * l_psi_a, prev.theta_a + eps * l_theta_a};
}

ProportionVector sa_update(const ProportionVector& prev, DyingType dying,
                           const OffspringSample& sample, std::int64_t n) {
  return sa_update(prev, dying, sample, n, prev.psi_c > 0.0);
}

EpochRecord step(const PopulationState& state, std::int64_t n, double prev_tau,
                 const ProportionVector& prev_rec, double t_n, const OffspringLaw& law,
                 double lambda, RecordCoupling coupling, Rng& rng) {
  if (is_extinct(state))
    throw ContractViolation("step: cannot step an extinct population (freeze instead)");
  const double total_rate = lambda * static_cast<double>(state.s_c());
  const double wait = rng.exponential(total_rate);
  const double p_x = static_cast<double>(state.cx) / static_cast<double>(state.s_c());
  const DyingType dying = rng.bernoulli(p_x) ? DyingType::X : DyingType::Y;

  EpochRecord rec;
  rec.n = n;
  rec.tau = prev_tau + wait;
  rec.dying = dying;
  rec.h = (dying == DyingType::X) ? 1 : 0;
  if (coupling == RecordCoupling::Yes) {
    const CoupledDraw draw = law.coupled_sample_for(dying, state, rng);
    rec.sample = draw.sample;
    rec.dominating = draw.dominating;
  } else {
    rec.sample = law.sample_for(dying, state, rng);
  }
  rec.state_after = apply_event(state, dying, rec.sample);
  rec.proportions = exact_proportions(rec.state_after, n);
  rec.tracker = sa_update(prev_rec, dying, rec.sample, n, /*alive=*/true);
  rec.t_n = t_n;
  return rec;
}

EpochRecord step(const PopulationState& state, std::int64_t n, double prev_tau,
                 const ProportionVector& prev_rec, const OffspringLaw& law,
                 double lambda, Rng& rng) {
  return step(state, n, prev_tau, prev_rec, harmonic_time(n), law, lambda,
              RecordCoupling::No, rng);
}

namespace {

class WallClockGuard {
 public:
  explicit WallClockGuard(double seconds) : limit_(seconds) {}

  void check(std::int64_t epoch) {
    if (limit_ <= 0.0 || (epoch & 0xFFF) != 0) return;
    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start_);
    if (elapsed.count() > limit_)
      throw ResourceLimitError("replication exceeded the wall-time guard (" +
                               std::to_string(limit_) + " s) at epoch " +
                               std::to_string(epoch));
  }

 private:
  double limit_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void run_trajectory_streamed(const ScenarioConfig& config, const LawPtr& law,
                             std::int64_t replication_index, RecordCoupling coupling,
                             const std::function<void(const EpochRecord&)>& observer) {
  config.validate();
  if (!law) throw ConfigError("run_trajectory: no offspring law");
  Rng rng = Rng::for_replication(config.base_seed,
                                 static_cast<std::uint64_t>(replication_index));
  WallClockGuard guard(config.max_wall_seconds);

  PopulationState state = initial_state(config.cx0, config.cy0);
  ProportionVector rec_vec = sa_initial(config.cx0, config.cy0);
  HarmonicSum harmonic;
  double tau = 0.0;

  for (std::int64_t n = 1; n <= config.horizon_epochs && !is_extinct(state); ++n) {
    guard.check(n);
    harmonic.advance();
    EpochRecord rec;
    try {
      rec = step(state, n, tau, rec_vec, harmonic.value(), *law, config.lambda,
                 coupling, rng);
    } catch (const ContractViolation& e) {
      throw ContractViolation("epoch " + std::to_string(n) + ": " + e.what());
    }
    state = rec.state_after;
    rec_vec = rec.tracker;
    tau = rec.tau;
    observer(rec);
  }
}

Trajectory run_trajectory(const ScenarioConfig& config, const LawPtr& law,
                          std::int64_t replication_index, RecordCoupling coupling) {
  Trajectory traj;
  traj.config = config;
  traj.replication_index = replication_index;
  traj.initial = initial_state(config.cx0, config.cy0);
  traj.records.reserve(static_cast<std::size_t>(
      std::min<std::int64_t>(config.horizon_epochs, 1 << 20)));
  run_trajectory_streamed(config, law, replication_index, coupling,
                          [&](const EpochRecord& rec) {
                            traj.records.push_back(rec);
                            if (is_extinct(rec.state_after))
                              traj.extinction_epoch = rec.n;
                          });
  return traj;
}

const PopulationState& Trajectory::final_state() const {
  if (records.empty()) return initial;
  return records.back().state_after;
}

ProportionVector Trajectory::proportions_at(std::int64_t k) const {
  if (k < 1) throw ContractViolation("proportions_at: epoch index must be >= 1");
  if (k <= last_epoch()) return records[static_cast<std::size_t>(k - 1)].proportions;
  if (!extinct())
    throw ContractViolation("proportions_at: epoch " + std::to_string(k) +
                            " beyond recorded horizon " + std::to_string(last_epoch()));
  return exact_proportions(final_state(), k);
}

// --- Ensembles ----------------------------------------------------------------

void Histogram::add(double v) {
  if (counts.empty()) return;
  const double w = (hi - lo) / static_cast<double>(counts.size());
  auto idx = static_cast<std::int64_t>(std::floor((v - lo) / w));
  idx = std::max<std::int64_t>(0, std::min<std::int64_t>(idx,
                               static_cast<std::int64_t>(counts.size()) - 1));
  ++counts[static_cast<std::size_t>(idx)];
}

std::int64_t Histogram::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

EnsembleSummary run_ensemble(const ScenarioConfig& config, const LawPtr& law,
                             int parallelism) {
  config.validate();
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");

  EnsembleSummary out;
  out.replications = config.replications;
  out.horizon = config.horizon_epochs;
  out.finals.resize(static_cast<std::size_t>(config.replications));

  auto run_one = [&](std::int64_t rep) {
    RepFinal fin;
    fin.rep = rep;
    PopulationState last = initial_state(config.cx0, config.cy0);
    std::int64_t epochs = 0;
    std::optional<std::int64_t> extinction_epoch;
    run_trajectory_streamed(config, law, rep, RecordCoupling::No,
                            [&](const EpochRecord& rec) {
                              last = rec.state_after;
                              epochs = rec.n;
                              if (is_extinct(rec.state_after)) extinction_epoch = rec.n;
                            });
    fin.extinct = extinction_epoch.has_value();
    fin.extinction_epoch = extinction_epoch.value_or(-1);
    fin.last_epoch = epochs == 0 ? 0 : epochs;
    fin.final_state = last;
    fin.proportions_horizon = exact_proportions(last, config.horizon_epochs);
    const ProportionVector at_end = exact_proportions(last, std::max<std::int64_t>(1, epochs));
    fin.beta_c = at_end.beta_c();
    fin.beta_a = at_end.beta_a();
    out.finals[static_cast<std::size_t>(rep)] = std::move(fin);
  };

  if (parallelism == 1 || config.replications == 1) {
    for (std::int64_t rep = 0; rep < config.replications; ++rep) run_one(rep);
  } else {
    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
      for (;;) {
        const std::int64_t rep = next.fetch_add(1);
        if (rep >= config.replications) return;
        try {
          run_one(rep);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int threads = static_cast<int>(std::min<std::int64_t>(parallelism,
                                                                config.replications));
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Index-ordered reduction keeps the summary independent of scheduling.
  double sum_psi_c = 0.0, sum_sq_psi_c = 0.0, sum_psi_a = 0.0, sum_sq_psi_a = 0.0;
  for (const RepFinal& fin : out.finals) {
    if (fin.extinct) {
      ++out.extinct_count;
      continue;
    }
    ++out.surviving_count;
    if (fin.beta_c) out.beta_c_survivors.add(*fin.beta_c);
    sum_psi_c += fin.proportions_horizon.psi_c;
    sum_sq_psi_c += fin.proportions_horizon.psi_c * fin.proportions_horizon.psi_c;
    sum_psi_a += fin.proportions_horizon.psi_a;
    sum_sq_psi_a += fin.proportions_horizon.psi_a * fin.proportions_horizon.psi_a;
  }
  const double reps = static_cast<double>(config.replications);
  out.extinction_fraction = static_cast<double>(out.extinct_count) / reps;
  out.survival_fraction = static_cast<double>(out.surviving_count) / reps;
  if (out.surviving_count > 0) {
    const double ns = static_cast<double>(out.surviving_count);
    out.mean_psi_c = sum_psi_c / ns;
    out.mean_psi_a = sum_psi_a / ns;
    const double var_c = std::max(0.0, sum_sq_psi_c / ns - out.mean_psi_c * out.mean_psi_c);
    const double var_a = std::max(0.0, sum_sq_psi_a / ns - out.mean_psi_a * out.mean_psi_a);
    out.ci_psi_c = 1.96 * std::sqrt(var_c / ns);
    out.ci_psi_a = 1.96 * std::sqrt(var_a / ns);
  }
  return out;
}

// --- CSV -----------------------------------------------------------------------

namespace {

void append_g12(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  out += buf;
}

void append_i64(std::string& out, std::int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  out += buf;
}

}  // namespace

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out =
      "n,tau,h,gamma_own,gamma_cross,cx,cy,ax,ay,"
      "psi_c,theta_c,psi_a,theta_a,beta_c,beta_a,t_n\n";
  for (const EpochRecord& r : traj.records) {
    append_i64(out, r.n);
    out += ',';
    append_g12(out, r.tau);
    out += ',';
    append_i64(out, r.h);
    out += ',';
    append_i64(out, r.sample.own);
    out += ',';
    append_i64(out, r.sample.cross);
    out += ',';
    append_i64(out, r.state_after.cx);
    out += ',';
    append_i64(out, r.state_after.cy);
    out += ',';
    append_i64(out, r.state_after.ax);
    out += ',';
    append_i64(out, r.state_after.ay);
    out += ',';
    append_g12(out, r.proportions.psi_c);
    out += ',';
    append_g12(out, r.proportions.theta_c);
    out += ',';
    append_g12(out, r.proportions.psi_a);
    out += ',';
    append_g12(out, r.proportions.theta_a);
    out += ',';
    append_g12(out, r.proportions.beta_c().value_or(
                        std::numeric_limits<double>::quiet_NaN()));
    out += ',';
    append_g12(out, r.proportions.beta_a().value_or(
                        std::numeric_limits<double>::quiet_NaN()));
    out += ',';
    append_g12(out, r.t_n);
    out += '\n';
  }
  return out;
}

}  // namespace branchsim
