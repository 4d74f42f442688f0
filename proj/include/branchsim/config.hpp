#ifndef BRANCHSIM_CONFIG_HPP
#define BRANCHSIM_CONFIG_HPP

#include <array>
#include <optional>
#include <string>

#include "branchsim/engine.hpp"
#include "branchsim/mean_field.hpp"
#include "branchsim/offspring.hpp"

namespace branchsim {

enum class LawFamily { Independent, ProportionDependent, Bpa };

std::string law_family_name(LawFamily family);

// Mean function c0 + c_bc*beta_c + c_ba*beta_a; affine means cover the
// configurable proportion family and make the sup over [0,1]^2 exact.
struct AffineMean {
  double c0 = 0.0;
  double c_bc = 0.0;
  double c_ba = 0.0;

  double eval(double bc, double ba) const { return c0 + c_bc * bc + c_ba * ba; }
  double sup01() const;
  double inf01() const;
};

// Config-file-facing description of an offspring law; build() produces the
// immutable runtime law.
struct LawSpec {
  LawFamily family = LawFamily::Independent;

  // independent
  std::optional<DistSpec> indep_x;
  std::optional<DistSpec> indep_y;

  // proportion-dependent (cell order xx, xy, yx, yy)
  DistKind prop_base = DistKind::Poisson;
  std::array<AffineMean, 4> prop_means{};

  // branching with attack
  std::optional<DistSpec> own_x, own_y, attack_xy, attack_yx;

  void validate() const;
  LawPtr build() const;
  std::string canonical() const;

  static LawSpec independent(DistSpec x, DistSpec y);
  static LawSpec proportion(DistKind base, AffineMean mxx, AffineMean mxy,
                            AffineMean myx, AffineMean myy);
  static LawSpec bpa(DistSpec own_x, DistSpec own_y, DistSpec attack_xy, DistSpec attack_yx);
};

// Optional mean-field inputs of the `ode` subcommand.
struct OdeRunSpec {
  OdeState init{0.5, 0.25, 1.5, 0.75, 0.0};
  double t0 = 1.0;
};

// A parsed scenario file: [run] scalars plus one [law] section.
struct ScenarioFile {
  ScenarioConfig run;
  LawSpec law;
  OdeRunSpec ode;

  std::string canonical() const;
  std::string hash8() const;  // fnv1a-64 of the canonical text, 8 hex chars
};

// Line-oriented `key = value` parser with [run]/[law] sections, `#` comments
// and strict key checking. Errors carry the line number.
ScenarioFile parse_scenario_text(const std::string& text);
ScenarioFile parse_scenario_file(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace branchsim

#endif
