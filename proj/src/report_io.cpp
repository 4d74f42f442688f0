#include "branchsim/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "branchsim/errors.hpp"

namespace branchsim {

using nlohmann::json;

std::string fmt_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string ode_solution_to_csv(const OdeSolution& sol) {
  std::string out = "t,psi_c,theta_c,psi_a,theta_a,beta_c,frozen\n";
  for (const OdeState& s : sol.states) {
    const bool frozen = sol.frozen_at && s.t >= *sol.frozen_at - 1e-15;
    const double beta = s.psi_c > 0.0 ? s.theta_c / s.psi_c
                                      : std::numeric_limits<double>::quiet_NaN();
    out += fmt_g12(s.t) + "," + fmt_g12(s.psi_c) + "," + fmt_g12(s.theta_c) + "," +
           fmt_g12(s.psi_a) + "," + fmt_g12(s.theta_a) + "," + fmt_g12(beta) + "," +
           (frozen ? "1" : "0") + "\n";
  }
  return out;
}

namespace {

const char* stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "?";
}

}  // namespace

std::string fixed_points_to_csv(const FixedPointSearch& search) {
  std::string out =
      "psi_c,theta_c,psi_a,theta_a,residual,classification,boundary,"
      "max_re_eigenvalue,min_abs_eigenvalue\n";
  for (const FixedPoint& fp : search.points) {
    double max_re = -std::numeric_limits<double>::infinity();
    double min_abs = std::numeric_limits<double>::infinity();
    for (const auto& z : fp.eigenvalues) {
      max_re = std::max(max_re, z.real());
      min_abs = std::min(min_abs, std::abs(z));
    }
    if (fp.boundary) {
      max_re = 0.0;
      min_abs = 0.0;
    }
    out += fmt_g12(fp.state.psi_c) + "," + fmt_g12(fp.state.theta_c) + "," +
           fmt_g12(fp.state.psi_a) + "," + fmt_g12(fp.state.theta_a) + "," +
           fmt_g12(fp.residual) + "," + stability_name(fp.classification) + "," +
           (fp.boundary ? "1" : "0") + "," + fmt_g12(max_re) + "," + fmt_g12(min_abs) +
           "\n";
  }
  return out;
}

std::string ensemble_to_csv(const EnsembleSummary& summary) {
  std::string out =
      "rep,extinct,extinction_epoch,last_epoch,cx,cy,ax,ay,psi_c,theta_c,psi_a,theta_a,"
      "beta_c,beta_a\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const RepFinal& fin : summary.finals) {
    char head[96];
    std::snprintf(head, sizeof head, "%lld,%d,%lld,%lld,%lld,%lld,%lld,%lld,",
                  static_cast<long long>(fin.rep), fin.extinct ? 1 : 0,
                  static_cast<long long>(fin.extinction_epoch),
                  static_cast<long long>(fin.last_epoch),
                  static_cast<long long>(fin.final_state.cx),
                  static_cast<long long>(fin.final_state.cy),
                  static_cast<long long>(fin.final_state.ax),
                  static_cast<long long>(fin.final_state.ay));
    out += head;
    out += fmt_g12(fin.proportions_horizon.psi_c) + "," +
           fmt_g12(fin.proportions_horizon.theta_c) + "," +
           fmt_g12(fin.proportions_horizon.psi_a) + "," +
           fmt_g12(fin.proportions_horizon.theta_a) + "," +
           fmt_g12(fin.beta_c.value_or(nan)) + "," + fmt_g12(fin.beta_a.value_or(nan)) +
           "\n";
  }
  return out;
}

std::string comparison_to_csv(const ComparisonReport& report) {
  std::string out = "n_m,t_anchor,T,k_begin,k_end,sup_distance,running_min,extinct\n";
  for (const ComparisonWindow& w : report.windows) {
    out += std::to_string(w.n_m) + "," + fmt_g12(w.t_anchor) + "," + fmt_g12(w.T) + "," +
           std::to_string(w.k_begin) + "," + std::to_string(w.k_end) + "," +
           fmt_g12(w.sup_distance) + "," + fmt_g12(w.running_min) + "," +
           (w.extinct ? "1" : "0") + "\n";
  }
  return out;
}

std::string comparison_to_json(const ComparisonReport& report) {
  json windows = json::array();
  for (const ComparisonWindow& w : report.windows) {
    windows.push_back({{"n_m", w.n_m},
                       {"t_anchor", w.t_anchor},
                       {"T", w.T},
                       {"k_begin", w.k_begin},
                       {"k_end", w.k_end},
                       {"sup_distance", w.sup_distance},
                       {"running_min", w.running_min},
                       {"extinct", w.extinct}});
  }
  return json{{"windows", windows}}.dump(2) + "\n";
}

namespace {

json histogram_to_json(const Histogram& hist) {
  json edges = json::array();
  const double w = (hist.hi - hist.lo) / static_cast<double>(hist.counts.size());
  for (std::size_t i = 0; i <= hist.counts.size(); ++i)
    edges.push_back(hist.lo + w * static_cast<double>(i));
  return json{{"edges", edges}, {"counts", hist.counts}};
}

}  // namespace

std::string limit_report_to_json(const LimitReport& report) {
  json survivors = json::array();
  for (const SurvivorFinal& sv : report.survivors) {
    json entry = {{"rep", sv.rep},
                  {"psi_c", sv.proportions.psi_c},
                  {"theta_c", sv.proportions.theta_c},
                  {"psi_a", sv.proportions.psi_a},
                  {"theta_a", sv.proportions.theta_a}};
    if (sv.beta_c) entry["beta_c"] = *sv.beta_c;
    if (sv.beta_a) entry["beta_a"] = *sv.beta_a;
    if (sv.nearest_fixed_point) {
      entry["nearest_fixed_point"] = *sv.nearest_fixed_point;
      entry["nearest_distance"] = sv.nearest_distance;
    }
    survivors.push_back(std::move(entry));
  }
  json out = {{"replications", report.replications},
              {"extinction_fraction", report.extinction_fraction},
              {"survival_fraction", report.survival_fraction},
              {"delta", report.delta},
              {"histogram", histogram_to_json(report.beta_c_hist)},
              {"survivors", survivors}};
  if (report.p_hat_a) out["p_hat_A"] = *report.p_hat_a;
  if (report.median_beta_c) out["median_beta_c"] = *report.median_beta_c;
  if (report.median_psi_c) out["median_psi_c"] = *report.median_psi_c;
  if (report.iqr_beta_c) out["iqr_beta_c"] = *report.iqr_beta_c;
  return out.dump(2) + "\n";
}

std::string fixed_points_to_json(const FixedPointSearch& search) {
  json points = json::array();
  for (const FixedPoint& fp : search.points) {
    json eig = json::array();
    for (const auto& z : fp.eigenvalues)
      eig.push_back({{"re", z.real()}, {"im", z.imag()}});
    points.push_back({{"psi_c", fp.state.psi_c},
                      {"theta_c", fp.state.theta_c},
                      {"psi_a", fp.state.psi_a},
                      {"theta_a", fp.state.theta_a},
                      {"residual", fp.residual},
                      {"classification", stability_name(fp.classification)},
                      {"boundary", fp.boundary},
                      {"null_direction", fp.has_null_direction()},
                      {"eigenvalues", eig}});
  }
  json skipped = json::array();
  for (const OdeState& s : search.skipped_guesses)
    skipped.push_back({s.psi_c, s.theta_c, s.psi_a, s.theta_a});
  return json{{"fixed_points", points}, {"skipped_guesses", skipped}}.dump(2) + "\n";
}

std::string moment_report_to_json(const MomentValidationReport& report) {
  static const char* cell_names[4] = {"xx", "xy", "yx", "yy"};
  json probes = json::array();
  for (const MomentProbeReport& probe : report.probes) {
    json cells;
    for (int i = 0; i < 4; ++i) {
      if (!probe.cells[i]) continue;
      const MomentCellStats& st = *probe.cells[i];
      json cell = {{"draws", st.draws},
                   {"empirical_mean", st.empirical_mean},
                   {"empirical_second_moment", st.empirical_second_moment},
                   {"zero_fraction", st.zero_fraction},
                   {"zero_possibility_ok", st.zero_possibility_ok},
                   {"mean_within_bound", st.mean_within_bound},
                   {"domination_violations", st.domination_violations}};
      if (st.declared_mean_bound) cell["declared_mean_bound"] = *st.declared_mean_bound;
      if (st.declared_second_moment)
        cell["declared_second_moment"] = *st.declared_second_moment;
      cells[cell_names[i]] = std::move(cell);
    }
    probes.push_back({{"state",
                       {{"cx", probe.state.cx},
                        {"cy", probe.state.cy},
                        {"ax", probe.state.ax},
                        {"ay", probe.state.ay}}},
                      {"cells", cells}});
  }
  return json{{"moments_declared", report.moments_declared},
              {"coupling_checked", report.coupling_checked},
              {"passed", report.passed()},
              {"probes", probes}}
             .dump(2) +
         "\n";
}

std::string oracle_report_to_json(const OracleReport& report) {
  return json{{"tv", report.tv},
              {"bound", report.bound},
              {"support_size", report.support_size},
              {"draws", report.draws},
              {"pass", report.pass}}
             .dump(2) +
         "\n";
}

std::string ensemble_to_json(const EnsembleSummary& summary) {
  return json{{"replications", summary.replications},
              {"horizon", summary.horizon},
              {"extinct_count", summary.extinct_count},
              {"surviving_count", summary.surviving_count},
              {"extinction_fraction", summary.extinction_fraction},
              {"survival_fraction", summary.survival_fraction},
              {"mean_psi_c", summary.mean_psi_c},
              {"ci95_psi_c", summary.ci_psi_c},
              {"mean_psi_a", summary.mean_psi_a},
              {"ci95_psi_a", summary.ci_psi_a},
              {"beta_c_histogram", histogram_to_json(summary.beta_c_survivors)}}
             .dump(2) +
         "\n";
}

std::string manifest_to_json(const RunManifest& manifest) {
  return json{{"config_hash", manifest.config_hash},
              {"subcommand", manifest.subcommand},
              {"seed", manifest.seed},
              {"tool_version", manifest.tool_version},
              {"outputs", manifest.outputs},
              {"wall_seconds", manifest.wall_seconds}}
             .dump(2) +
         "\n";
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << contents;
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace branchsim
