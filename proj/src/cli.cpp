#include "branchsim/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "branchsim/analysis.hpp"
#include "branchsim/config.hpp"
#include "branchsim/engine.hpp"
#include "branchsim/errors.hpp"
#include "branchsim/report_io.hpp"
#include "branchsim/version.hpp"

namespace branchsim {

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;          // -1: keep the config's base_seed
  std::int64_t reps = -1;
  std::int64_t horizon = -1;
  std::string schedule = "100,200,400,800,1600,3200,6400";
  double window_T = 2.0;
  double step = 1e-3;
  std::int64_t draws = 100000;
  int parallelism = 1;
};

std::vector<std::int64_t> parse_schedule(const std::string& text) {
  std::vector<std::int64_t> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    try {
      out.push_back(std::stoll(token));
    } catch (const std::exception&) {
      throw ConfigError("--schedule: bad entry '" + token + "'");
    }
  }
  if (out.empty()) throw ConfigError("--schedule: empty");
  return out;
}

class Runner {
 public:
  Runner(const CommonOpts& opts, const std::string& subcommand)
      : opts_(opts), subcommand_(subcommand) {
    file_ = parse_scenario_file(opts.config_path);
    if (opts.seed >= 0) file_.run.base_seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.reps >= 1) file_.run.replications = opts.reps;
    if (opts.horizon >= 1) file_.run.horizon_epochs = opts.horizon;
    file_.run.validate();
    law_ = file_.law.build();
    std::filesystem::create_directories(opts.out_dir);
    start_ = std::chrono::steady_clock::now();
  }

  const ScenarioFile& file() const { return file_; }
  const LawPtr& law() const { return law_; }

  std::string stem() const {
    return subcommand_ + "-" + file_.hash8() + "-" + std::to_string(file_.run.base_seed);
  }

  void emit(const std::string& suffix, const std::string& contents) {
    const std::string name = stem() + suffix;
    write_file((std::filesystem::path(opts_.out_dir) / name).string(), contents);
    outputs_.push_back(name);
  }

  void finish() {
    RunManifest manifest;
    manifest.config_hash = file_.hash8();
    manifest.subcommand = subcommand_;
    manifest.seed = file_.run.base_seed;
    manifest.tool_version = kToolVersion;
    manifest.outputs = outputs_;
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string name = stem() + ".manifest.json";
    write_file((std::filesystem::path(opts_.out_dir) / name).string(),
               manifest_to_json(manifest));
  }

 private:
  CommonOpts opts_;
  std::string subcommand_;
  ScenarioFile file_;
  LawPtr law_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

int cmd_simulate(const CommonOpts& opts) {
  Runner runner(opts, "simulate");
  const Trajectory traj = run_trajectory(runner.file().run, runner.law(), 0);
  runner.emit(".csv", trajectory_to_csv(traj));
  runner.finish();
  return 0;
}

int cmd_ensemble(const CommonOpts& opts) {
  Runner runner(opts, "ensemble");
  const EnsembleSummary summary =
      run_ensemble(runner.file().run, runner.law(), opts.parallelism);
  runner.emit(".csv", ensemble_to_csv(summary));
  runner.emit(".json", ensemble_to_json(summary));
  const LimitReport limits = limit_stats(summary);
  runner.emit(".limits.json", limit_report_to_json(limits));
  runner.finish();
  return 0;
}

int cmd_ode(const CommonOpts& opts) {
  Runner runner(opts, "ode");
  const OdeRunSpec& spec = runner.file().ode;
  const OdeSolution sol =
      integrate_ode(spec.init, spec.t0, opts.window_T, opts.step, *runner.law());
  runner.emit(".csv", ode_solution_to_csv(sol));
  runner.finish();
  return 0;
}

int cmd_fixed_points(const CommonOpts& opts) {
  Runner runner(opts, "fixed-points");
  const FixedPointSearch search =
      find_fixed_points(*runner.law(), default_fixed_point_guesses());
  runner.emit(".csv", fixed_points_to_csv(search));
  runner.emit(".json", fixed_points_to_json(search));
  runner.finish();
  return 0;
}

int cmd_compare(const CommonOpts& opts) {
  Runner runner(opts, "compare");
  const auto schedule = parse_schedule(opts.schedule);
  const Trajectory traj = run_trajectory(runner.file().run, runner.law(), 0);
  const ComparisonReport report =
      window_compare(traj, runner.law(), schedule, opts.window_T, opts.step);
  runner.emit(".csv", comparison_to_csv(report));
  runner.emit(".json", comparison_to_json(report));
  runner.finish();
  return 0;
}

int cmd_oracle_check(const CommonOpts& opts) {
  Runner runner(opts, "oracle-check");
  const ScenarioConfig& run = runner.file().run;
  const PopulationState state = initial_state(run.cx0, run.cy0);
  const OracleReport report =
      oracle_check(state, runner.law(), run.lambda, opts.draws, run.base_seed);
  runner.emit(".json", oracle_report_to_json(report));
  runner.finish();
  if (!report.pass) {
    std::cerr << "oracle-check: TV " << fmt_g12(report.tv) << " exceeds bound "
              << fmt_g12(report.bound) << "\n";
    return 1;
  }
  return 0;
}

int cmd_validate_law(const CommonOpts& opts) {
  Runner runner(opts, "validate-law");
  const ScenarioConfig& run = runner.file().run;
  std::vector<PopulationState> probes = {
      initial_state(run.cx0, run.cy0),
      PopulationState{3, 2, 4, 3},
      PopulationState{1, 1, 1, 1},
      PopulationState{12, 5, 18, 9},
  };
  Rng rng(splitmix64(run.base_seed ^ 0xA11DA7EDULL));
  const MomentValidationReport report =
      validate_law_moments(*runner.law(), probes, std::max<std::int64_t>(opts.draws, 10000), rng);
  runner.emit(".json", moment_report_to_json(report));
  runner.finish();
  if (!report.passed()) {
    std::cerr << "validate-law: declared moment bounds or coupling violated\n";
    return 3;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Two-type population-size-dependent branching process toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CommonOpts opts;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    sub->add_option("--config", opts.config_path, "scenario config file")
        ->required(needs_config);
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "override [run] base_seed");
    return sub;
  };

  auto* simulate = add_common(app.add_subcommand("simulate", "one trajectory to CSV"));
  simulate->add_option("--horizon", opts.horizon, "override horizon_epochs");

  auto* ensemble = add_common(
      app.add_subcommand("ensemble", "independent replications + limit stats"));
  ensemble->add_option("--reps", opts.reps, "override replications");
  ensemble->add_option("--horizon", opts.horizon, "override horizon_epochs");
  ensemble->add_option("--parallelism", opts.parallelism, "worker threads");

  auto* ode = add_common(app.add_subcommand("ode", "integrate the mean-field ODE"));
  ode->add_option("--T", opts.window_T, "integration length (harmonic time)");
  ode->add_option("--step", opts.step, "integration step");

  add_common(app.add_subcommand("fixed-points",
                                "find and classify mean-field fixed points"));

  auto* compare = add_common(
      app.add_subcommand("compare", "trajectory vs restarted-ODE window distances"));
  compare->add_option("--schedule", opts.schedule, "comma-separated anchor epochs");
  compare->add_option("--T", opts.window_T, "window length (harmonic time)");
  compare->add_option("--step", opts.step, "ODE integration step");
  compare->add_option("--horizon", opts.horizon, "override horizon_epochs");

  auto* oracle = add_common(
      app.add_subcommand("oracle-check", "simulated vs enumerated one-step distribution"));
  oracle->add_option("--draws", opts.draws, "number of simulated steps");

  auto* validate = add_common(
      app.add_subcommand("validate-law", "sample the law against its declared moments"));
  validate->add_option("--draws", opts.draws, "draws per probe state");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(simulate)) return cmd_simulate(opts);
    if (app.got_subcommand(ensemble)) return cmd_ensemble(opts);
    if (app.got_subcommand(ode)) return cmd_ode(opts);
    if (app.got_subcommand("fixed-points")) return cmd_fixed_points(opts);
    if (app.got_subcommand(compare)) return cmd_compare(opts);
    if (app.got_subcommand(oracle)) return cmd_oracle_check(opts);
    if (app.got_subcommand(validate)) return cmd_validate_law(opts);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceLimitError& e) {
    std::cerr << "resource guard: " << e.what() << "\n";
    return 4;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace branchsim
