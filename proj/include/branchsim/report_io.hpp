#ifndef BRANCHSIM_REPORT_IO_HPP
#define BRANCHSIM_REPORT_IO_HPP

#include <string>
#include <vector>

#include "branchsim/analysis.hpp"
#include "branchsim/engine.hpp"
#include "branchsim/mean_field.hpp"
#include "branchsim/offspring.hpp"

namespace branchsim {

// All numeric text output renders floats with 12 significant digits and a
// '.' decimal separator regardless of environment.
std::string fmt_g12(double v);

std::string ode_solution_to_csv(const OdeSolution& sol);
std::string fixed_points_to_csv(const FixedPointSearch& search);
std::string ensemble_to_csv(const EnsembleSummary& summary);
std::string comparison_to_csv(const ComparisonReport& report);

std::string comparison_to_json(const ComparisonReport& report);
std::string limit_report_to_json(const LimitReport& report);
std::string fixed_points_to_json(const FixedPointSearch& search);
std::string moment_report_to_json(const MomentValidationReport& report);
std::string oracle_report_to_json(const OracleReport& report);
std::string ensemble_to_json(const EnsembleSummary& summary);

struct RunManifest {
  std::string config_hash;
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

std::string manifest_to_json(const RunManifest& manifest);

void write_file(const std::string& path, const std::string& contents);

}  // namespace branchsim

#endif
