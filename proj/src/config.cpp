#include "branchsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "branchsim/errors.hpp"

namespace branchsim {

std::string law_family_name(LawFamily family) {
  switch (family) {
    case LawFamily::Independent: return "independent";
    case LawFamily::ProportionDependent: return "proportion";
    case LawFamily::Bpa: return "bpa";
  }
  return "?";
}

double AffineMean::sup01() const {
  return c0 + std::max(0.0, c_bc) + std::max(0.0, c_ba);
}

double AffineMean::inf01() const {
  return c0 + std::min(0.0, c_bc) + std::min(0.0, c_ba);
}

LawSpec LawSpec::independent(DistSpec x, DistSpec y) {
  LawSpec s;
  s.family = LawFamily::Independent;
  s.indep_x = std::move(x);
  s.indep_y = std::move(y);
  return s;
}

LawSpec LawSpec::proportion(DistKind base, AffineMean mxx, AffineMean mxy,
                            AffineMean myx, AffineMean myy) {
  LawSpec s;
  s.family = LawFamily::ProportionDependent;
  s.prop_base = base;
  s.prop_means = {mxx, mxy, myx, myy};
  return s;
}

LawSpec LawSpec::bpa(DistSpec own_x, DistSpec own_y, DistSpec attack_xy, DistSpec attack_yx) {
  LawSpec s;
  s.family = LawFamily::Bpa;
  s.own_x = std::move(own_x);
  s.own_y = std::move(own_y);
  s.attack_xy = std::move(attack_xy);
  s.attack_yx = std::move(attack_yx);
  return s;
}

void LawSpec::validate() const {
  switch (family) {
    case LawFamily::Independent:
      if (!indep_x || !indep_y)
        throw ConfigError("independent law: both x and y distributions are required");
      return;
    case LawFamily::ProportionDependent: {
      if (prop_base == DistKind::FinitePmf)
        throw ConfigError("proportion law: base must be poisson or geometric");
      const char* names[4] = {"mxx", "mxy", "myx", "myy"};
      for (int i = 0; i < 4; ++i)
        if (prop_means[i].inf01() < 0.0)
          throw ConfigError(std::string("proportion law: mean function ") + names[i] +
                            " goes negative on [0,1]^2");
      return;
    }
    case LawFamily::Bpa:
      if (!own_x || !own_y || !attack_xy || !attack_yx)
        throw ConfigError("bpa law: all four offspring/attack distributions are required");
      return;
  }
}

LawPtr LawSpec::build() const {
  validate();
  switch (family) {
    case LawFamily::Independent:
      return make_independent_law(*indep_x, *indep_y);
    case LawFamily::ProportionDependent: {
      ProportionMeanFns fns;
      const AffineMean mxx = prop_means[0], mxy = prop_means[1];
      const AffineMean myx = prop_means[2], myy = prop_means[3];
      fns.xx = [mxx](double bc, double ba) { return mxx.eval(bc, ba); };
      fns.xy = [mxy](double bc, double ba) { return mxy.eval(bc, ba); };
      fns.yx = [myx](double bc, double ba) { return myx.eval(bc, ba); };
      fns.yy = [myy](double bc, double ba) { return myy.eval(bc, ba); };
      return make_proportion_law(std::move(fns), prop_base,
                                 {mxx.sup01(), mxy.sup01(), myx.sup01(), myy.sup01()});
    }
    case LawFamily::Bpa:
      return make_bpa_law(*own_x, *own_y, *attack_xy, *attack_yx);
  }
  throw ConfigError("unknown law family");
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string affine_canonical(const AffineMean& m) {
  return fmt17(m.c0) + "," + fmt17(m.c_bc) + "," + fmt17(m.c_ba);
}

}  // namespace

std::string LawSpec::canonical() const {
  std::string s = "family=" + law_family_name(family) + "\n";
  switch (family) {
    case LawFamily::Independent:
      s += "x=" + indep_x->canonical() + "\ny=" + indep_y->canonical() + "\n";
      break;
    case LawFamily::ProportionDependent:
      s += "base=" + dist_kind_name(prop_base) + "\n";
      s += "mxx=" + affine_canonical(prop_means[0]) + "\n";
      s += "mxy=" + affine_canonical(prop_means[1]) + "\n";
      s += "myx=" + affine_canonical(prop_means[2]) + "\n";
      s += "myy=" + affine_canonical(prop_means[3]) + "\n";
      break;
    case LawFamily::Bpa:
      s += "own_x=" + own_x->canonical() + "\nattack_xy=" + attack_xy->canonical() + "\n";
      s += "attack_yx=" + attack_yx->canonical() + "\nown_y=" + own_y->canonical() + "\n";
      break;
  }
  return s;
}

std::string ScenarioFile::canonical() const {
  std::string s;
  s += "lambda=" + fmt17(run.lambda) + "\n";
  s += "cx0=" + std::to_string(run.cx0) + "\n";
  s += "cy0=" + std::to_string(run.cy0) + "\n";
  s += "horizon_epochs=" + std::to_string(run.horizon_epochs) + "\n";
  s += "replications=" + std::to_string(run.replications) + "\n";
  s += "base_seed=" + std::to_string(run.base_seed) + "\n";
  s += "max_wall_seconds=" + fmt17(run.max_wall_seconds) + "\n";
  s += "ode_init=" + fmt17(ode.init.psi_c) + "," + fmt17(ode.init.theta_c) + "," +
       fmt17(ode.init.psi_a) + "," + fmt17(ode.init.theta_a) + "\n";
  s += "ode_t0=" + fmt17(ode.t0) + "\n";
  s += law.canonical();
  return s;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string ScenarioFile::hash8() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return std::string(buf).substr(0, 8);
}

// --- parsing -------------------------------------------------------------------

namespace {

struct RawConfig {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "law")
        fail(lineno, "unknown section [" + section + "] (expected [run] or [law])");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected key = value");
    if (section.empty()) fail(lineno, "key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(lineno, "empty key or value");
    auto [it, inserted] = raw.sections[section].insert({key, {value, lineno}});
    if (!inserted) fail(lineno, "duplicate key '" + key + "'");
  }
  return raw;
}

class SectionReader {
 public:
  SectionReader(const RawConfig& raw, const std::string& section) {
    auto it = raw.sections.find(section);
    if (it != raw.sections.end()) entries_ = &it->second;
    section_ = section;
  }

  bool has(const std::string& key) const {
    return entries_ && entries_->count(key) > 0;
  }

  std::string str(const std::string& key) {
    if (!has(key))
      throw ConfigError("[" + section_ + "] missing key '" + key + "'");
    used_.insert(key);
    return entries_->find(key)->second.first;
  }

  double number(const std::string& key) {
    const std::string v = str(key);
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("[" + section_ + "] " + key + ": not a number: '" + v + "'");
    }
  }

  std::int64_t integer(const std::string& key) {
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 9e15)
      throw ConfigError("[" + section_ + "] " + key + ": not an integer");
    return static_cast<std::int64_t>(d);
  }

  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  void reject_unused() const {
    if (!entries_) return;
    for (const auto& [key, value] : *entries_)
      if (!used_.count(key))
        fail(value.second, "unknown key '" + key + "' in section [" + section_ + "]");
  }

 private:
  const std::map<std::string, std::pair<std::string, int>>* entries_ = nullptr;
  std::set<std::string> used_;
  std::string section_;
};

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) throw ConfigError(what + ": empty entry in list");
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(token, &pos));
      if (pos != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError(what + ": not a number: '" + token + "'");
    }
  }
  return out;
}

DistSpec parse_pmf(const std::string& text, const std::string& what) {
  std::vector<std::pair<std::int64_t, double>> pmf;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    token = trim(token);
    const auto colon = token.find(':');
    if (colon == std::string::npos)
      throw ConfigError(what + ": pmf entries are value:probability");
    try {
      const std::int64_t v = std::stoll(trim(token.substr(0, colon)));
      const double p = std::stod(trim(token.substr(colon + 1)));
      pmf.push_back({v, p});
    } catch (const std::exception&) {
      throw ConfigError(what + ": bad pmf entry '" + token + "'");
    }
  }
  return DistSpec::finite_pmf(std::move(pmf));
}

DistSpec parse_dist(SectionReader& law, const std::string& prefix) {
  const std::string kind_key = prefix + "_dist";
  if (!law.has(kind_key))
    throw ConfigError("[law] missing key '" + kind_key + "'");
  const std::string kind = law.str(kind_key);
  if (kind == "poisson") return DistSpec::poisson(law.number(prefix + "_mean"));
  if (kind == "geometric") return DistSpec::geometric(law.number(prefix + "_mean"));
  if (kind == "finite") return parse_pmf(law.str(prefix + "_pmf"), "[law] " + prefix);
  throw ConfigError("[law] " + kind_key + ": unknown distribution '" + kind +
                    "' (poisson|geometric|finite)");
}

AffineMean parse_affine(SectionReader& law, const std::string& key) {
  AffineMean m;
  if (law.has(key + "_const")) m.c0 = law.number(key + "_const");
  if (law.has(key + "_bc")) m.c_bc = law.number(key + "_bc");
  if (law.has(key + "_ba")) m.c_ba = law.number(key + "_ba");
  return m;
}

}  // namespace

ScenarioFile parse_scenario_text(const std::string& text) {
  const RawConfig raw = tokenize(text);
  ScenarioFile file;

  SectionReader run(raw, "run");
  file.run.lambda = run.number_or("lambda", 1.0);
  file.run.cx0 = run.integer_or("cx0", 1);
  file.run.cy0 = run.integer_or("cy0", 1);
  file.run.horizon_epochs = run.integer_or("horizon_epochs", 1000);
  file.run.replications = run.integer_or("replications", 1);
  file.run.base_seed = static_cast<std::uint64_t>(run.integer_or("base_seed", 1));
  file.run.max_wall_seconds = run.number_or("max_wall_seconds", 0.0);
  if (run.has("ode_init")) {
    const auto v = parse_number_list(run.str("ode_init"), "[run] ode_init");
    if (v.size() != 4)
      throw ConfigError("[run] ode_init: expected psi_c,theta_c,psi_a,theta_a");
    file.ode.init = OdeState{v[0], v[1], v[2], v[3], 0.0};
  }
  file.ode.t0 = run.number_or("ode_t0", 1.0);
  run.reject_unused();
  file.run.validate();

  SectionReader law(raw, "law");
  if (!law.has("family")) throw ConfigError("[law] missing key 'family'");
  const std::string family = law.str("family");
  if (family == "independent") {
    file.law = LawSpec::independent(parse_dist(law, "x"), parse_dist(law, "y"));
  } else if (family == "proportion") {
    const std::string base = law.has("base") ? law.str("base") : "poisson";
    DistKind kind;
    if (base == "poisson")
      kind = DistKind::Poisson;
    else if (base == "geometric")
      kind = DistKind::Geometric;
    else
      throw ConfigError("[law] base: proportion laws need poisson or geometric");
    file.law = LawSpec::proportion(kind, parse_affine(law, "mxx"), parse_affine(law, "mxy"),
                                   parse_affine(law, "myx"), parse_affine(law, "myy"));
  } else if (family == "bpa") {
    file.law = LawSpec::bpa(parse_dist(law, "own_x"), parse_dist(law, "own_y"),
                            parse_dist(law, "attack_xy"), parse_dist(law, "attack_yx"));
  } else {
    throw ConfigError("[law] family: unknown family '" + family +
                      "' (independent|proportion|bpa)");
  }
  law.reject_unused();
  file.law.validate();
  return file;
}

ScenarioFile parse_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

}  // namespace branchsim
