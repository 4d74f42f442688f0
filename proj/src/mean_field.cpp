#include "branchsim/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "branchsim/errors.hpp"

namespace branchsim {

// --- harmonic_time / harmonic_inverse ------------------------------------------------------

namespace {

constexpr std::int64_t kStride = 1024;
constexpr std::int64_t kTableMaxN = 10'000'000;
constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// (sum, carry) of the compensated harmonic sum after n = index*kStride terms.
// Grown lazily under a mutex; entries are immutable once written, and every
// growth replays the same canonical recurrence, so concurrent callers always
// read identical values.
struct HarmonicTable {
  std::mutex mu;
  std::vector<std::pair<double, double>> checkpoints{{0.0, 0.0}};

  double value_at(std::int64_t n) {
    const std::int64_t chk = n / kStride;
    double sum, carry;
    {
      std::lock_guard<std::mutex> lock(mu);
      while (static_cast<std::int64_t>(checkpoints.size()) <= chk) {
        auto [s, c] = checkpoints.back();
        const std::int64_t from =
            (static_cast<std::int64_t>(checkpoints.size()) - 1) * kStride;
        for (std::int64_t k = from + 1; k <= from + kStride; ++k)
          kahan_add(s, c, 1.0 / static_cast<double>(k));
        checkpoints.emplace_back(s, c);
      }
      std::tie(sum, carry) = checkpoints[static_cast<std::size_t>(chk)];
    }
    for (std::int64_t k = chk * kStride + 1; k <= n; ++k)
      kahan_add(sum, carry, 1.0 / static_cast<double>(k));
    return sum;
  }
};

HarmonicTable& harmonic_table() {
  static HarmonicTable table;
  return table;
}

double harmonic_asymptotic(double n) {
  return std::log(n) + kEulerGamma + 1.0 / (2.0 * n) - 1.0 / (12.0 * n * n);
}

}  // namespace

double harmonic_time(std::int64_t n) {
  if (n <= 0) return 0.0;
  if (n <= kTableMaxN) return harmonic_table().value_at(n);
  return harmonic_asymptotic(static_cast<double>(n));
}

std::int64_t harmonic_inverse(double t) {
  if (!(t == t)) throw std::invalid_argument("harmonic_inverse: t is NaN");
  if (t < 1.0) return 0;
  if (t > 30.0)
    throw std::invalid_argument(
        "harmonic_inverse: beyond t = 30 consecutive harmonic times are not resolvable in double "
        "precision");
  const double estimate = std::exp(t - kEulerGamma);
  std::int64_t n = std::max<std::int64_t>(1, static_cast<std::int64_t>(estimate));
  while (harmonic_time(n) > t) --n;
  while (harmonic_time(n + 1) <= t) ++n;
  return n;
}

double harmonic_inverse_real(double t) {
  if (t < 1.0) return 0.0;
  if (t <= 30.0) return static_cast<double>(harmonic_inverse(t));
  return std::exp(t - kEulerGamma);
}

// --- ODE ----------------------------------------------------------------------

std::array<double, 4> ode_rhs(const OdeState& state, const OffspringLaw& law) {
  if (!(state.psi_c > 0.0)) return {0.0, 0.0, 0.0, 0.0};
  const double mult = harmonic_inverse_real(state.t);
  const RealState phi{state.theta_c * mult, (state.psi_c - state.theta_c) * mult,
                      state.theta_a * mult, (state.psi_a - state.theta_a) * mult};
  const MeanMatrix m = law.mean_matrix(phi);
  const double beta = state.theta_c / state.psi_c;
  const double growth = beta * (m.xx + m.xy) + (1.0 - beta) * (m.yy + m.yx);
  return {growth - 1.0 - state.psi_c,
          beta * (m.xx - 1.0) + (1.0 - beta) * m.yx - state.theta_c,
          growth - state.psi_a,
          beta * m.xx + (1.0 - beta) * m.yx - state.theta_a};
}

namespace {

constexpr double kInvariantSlack = 1e-9;

OdeState clamp_into_invariants(OdeState s) {
  auto fix = [](double& lo_bounded, const char* what) {
    if (lo_bounded < 0.0) {
      if (lo_bounded < -kInvariantSlack)
        throw ContractViolation(std::string("integrate_ode: ") + what +
                                " left its invariant range");
      lo_bounded = 0.0;
    }
  };
  fix(s.psi_c, "psi_c");
  fix(s.psi_a, "psi_a");
  fix(s.theta_c, "theta_c");
  fix(s.theta_a, "theta_a");
  if (s.theta_c > s.psi_c) {
    if (s.theta_c > s.psi_c + kInvariantSlack)
      throw ContractViolation("integrate_ode: theta_c exceeded psi_c beyond tolerance");
    s.theta_c = s.psi_c;
  }
  if (s.theta_a > s.psi_a) {
    if (s.theta_a > s.psi_a + kInvariantSlack)
      throw ContractViolation("integrate_ode: theta_a exceeded psi_a beyond tolerance");
    s.theta_a = s.psi_a;
  }
  return s;
}

OdeState rk4_step(const OdeState& y, double dt, const OffspringLaw& law) {
  auto shifted = [&](const std::array<double, 4>& k, double scale, double t_off) {
    return OdeState{y.psi_c + scale * k[0], y.theta_c + scale * k[1],
                    y.psi_a + scale * k[2], y.theta_a + scale * k[3], y.t + t_off};
  };
  const auto k1 = ode_rhs(y, law);
  const auto k2 = ode_rhs(shifted(k1, dt / 2.0, dt / 2.0), law);
  const auto k3 = ode_rhs(shifted(k2, dt / 2.0, dt / 2.0), law);
  const auto k4 = ode_rhs(shifted(k3, dt, dt), law);
  OdeState out{y.psi_c + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
               y.theta_c + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
               y.psi_a + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
               y.theta_a + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
               y.t + dt};
  for (double v : out.components())
    if (!std::isfinite(v))
      throw ContractViolation("integrate_ode: non-finite component, step rejected");
  return out;
}

OdeState frozen_copy(const OdeState& s, double t) {
  OdeState f = s;
  f.psi_c = 0.0;
  f.theta_c = 0.0;
  f.t = t;
  return f;
}

}  // namespace

OdeSolution integrate_ode(const OdeState& init, double t0, double T, double h,
                          const OffspringLaw& law) {
  if (!(h > 0.0)) throw ContractViolation("integrate_ode: step must be > 0");
  if (!(T >= 0.0)) throw ContractViolation("integrate_ode: horizon must be >= 0");

  OdeSolution sol;
  OdeState cur = init;
  cur.t = t0;
  cur = clamp_into_invariants(cur);
  bool frozen = !(cur.psi_c > 0.0);
  if (frozen) {
    cur = frozen_copy(cur, t0);
    sol.frozen_at = t0;
  }
  sol.states.push_back(cur);

  const std::int64_t steps = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(T / h - 1e-9)));
  if (T == 0.0) return sol;

  for (std::int64_t i = 1; i <= steps; ++i) {
    const double t_next = (i == steps) ? t0 + T : t0 + static_cast<double>(i) * h;
    if (frozen) {
      sol.states.push_back(frozen_copy(cur, t_next));
      continue;
    }
    const double dt = t_next - cur.t;
    OdeState next = rk4_step(cur, dt, law);
    if (!(next.psi_c > 0.0)) {
      // Locate the boundary crossing inside the step, then freeze.
      double lo = 0.0, hi = dt;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (rk4_step(cur, mid, law).psi_c > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      sol.frozen_at = cur.t + hi;
      frozen = true;
      OdeState at_cross = clamp_into_invariants(rk4_step(cur, lo, law));
      cur = frozen_copy(at_cross, t_next);
      sol.states.push_back(cur);
      continue;
    }
    cur = clamp_into_invariants(next);
    sol.states.push_back(cur);
  }
  return sol;
}

OdeState OdeSolution::at_time(double t) const {
  if (states.empty()) throw ContractViolation("OdeSolution: empty");
  const double t_begin = states.front().t, t_end = states.back().t;
  if (t < t_begin - 1e-9 || t > t_end + 1e-9)
    throw ContractViolation("OdeSolution: time outside solution range");
  const double tq = std::clamp(t, t_begin, t_end);
  auto it = std::lower_bound(states.begin(), states.end(), tq,
                             [](const OdeState& s, double v) { return s.t < v; });
  if (it == states.begin()) return states.front();
  if (it == states.end()) return states.back();
  const OdeState& hi = *it;
  const OdeState& lo = *(it - 1);
  const double span = hi.t - lo.t;
  if (span <= 0.0) return hi;
  const double w = (tq - lo.t) / span;
  return OdeState{lo.psi_c + w * (hi.psi_c - lo.psi_c),
                  lo.theta_c + w * (hi.theta_c - lo.theta_c),
                  lo.psi_a + w * (hi.psi_a - lo.psi_a),
                  lo.theta_a + w * (hi.theta_a - lo.theta_a), tq};
}

// --- Fixed points --------------------------------------------------------------

namespace {

constexpr double kPsiFloor = 1e-10;       // below this the iterate is "on the boundary"
constexpr double kResidualTol = 1e-10;
constexpr double kJacobianStep = 1e-6;
constexpr double kMergeTol = 1e-8;
constexpr double kStableThreshold = -1e-8;
constexpr double kNullEigenTol = 1e-6;

using Vec4 = std::array<double, 4>;

double max_norm(const Vec4& v) {
  return std::max(std::max(std::abs(v[0]), std::abs(v[1])),
                  std::max(std::abs(v[2]), std::abs(v[3])));
}

// Autonomous reduction of the ODE field: means evaluated straight from the
// proportions, psi > 0 branch.
Vec4 reduced_field(const OffspringLaw& law, const Vec4& v) {
  const double psi_c = v[0], theta_c = v[1], psi_a = v[2], theta_a = v[3];
  const double beta = theta_c / psi_c;
  const double beta_a = (std::abs(psi_a) > kPsiFloor) ? theta_a / psi_a : 0.0;
  const MeanMatrix m = *law.proportion_means(beta, beta_a);
  const double growth = beta * (m.xx + m.xy) + (1.0 - beta) * (m.yy + m.yx);
  return {growth - 1.0 - psi_c,
          beta * (m.xx - 1.0) + (1.0 - beta) * m.yx - theta_c,
          growth - psi_a,
          beta * m.xx + (1.0 - beta) * m.yx - theta_a};
}

using Mat4 = std::array<std::array<double, 4>, 4>;

Mat4 jacobian(const OffspringLaw& law, const Vec4& v) {
  const Vec4 f0 = reduced_field(law, v);
  Mat4 j{};
  for (int col = 0; col < 4; ++col) {
    Vec4 bumped = v;
    bumped[col] += kJacobianStep;
    const Vec4 f1 = reduced_field(law, bumped);
    for (int row = 0; row < 4; ++row)
      j[row][col] = (f1[row] - f0[row]) / kJacobianStep;
  }
  return j;
}

// Solve A x = b by Gaussian elimination with partial pivoting; returns false
// on a numerically singular pivot.
bool solve4(Mat4 a, Vec4 b, Vec4& x) {
  int perm[4] = {0, 1, 2, 3};
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[perm[r]][col]) > std::abs(a[perm[piv]][col])) piv = r;
    std::swap(perm[col], perm[piv]);
    const double d = a[perm[col]][col];
    if (std::abs(d) < 1e-14) return false;
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[perm[r]][col] / d;
      for (int c = col; c < 4; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  for (int row = 3; row >= 0; --row) {
    double s = b[perm[row]];
    for (int c = row + 1; c < 4; ++c) s -= a[perm[row]][c] * x[c];
    x[row] = s / a[perm[row]][row];
  }
  return true;
}

// Levenberg step: (J^T J + mu I) d = -J^T g. Always solvable, and close to
// the Newton step when J is well conditioned.
bool lm_step(const Mat4& j, const Vec4& g, double mu, Vec4& d) {
  Mat4 jtj{};
  Vec4 jtg{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += j[k][r] * j[k][c];
      jtj[r][c] = s;
    }
  for (int r = 0; r < 4; ++r) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += j[k][r] * g[k];
    jtg[r] = -s;
  }
  double scale = 0.0;
  for (int r = 0; r < 4; ++r) scale = std::max(scale, std::abs(jtj[r][r]));
  for (int r = 0; r < 4; ++r) jtj[r][r] += mu * (1.0 + scale);
  return solve4(jtj, jtg, d);
}

// Eigenvalues of a 4x4 via Newton-identity characteristic coefficients and
// Durand-Kerner iteration. Plenty accurate for stability classification.
std::array<std::complex<double>, 4> eigenvalues4(const Mat4& a) {
  auto matmul = [](const Mat4& x, const Mat4& y) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += x[i][k] * y[k][j];
        r[i][j] = s;
      }
    return r;
  };
  auto trace = [](const Mat4& x) { return x[0][0] + x[1][1] + x[2][2] + x[3][3]; };

  const Mat4 a2 = matmul(a, a);
  const Mat4 a3 = matmul(a2, a);
  const Mat4 a4 = matmul(a3, a);
  const double p1 = trace(a), p2 = trace(a2), p3 = trace(a3), p4 = trace(a4);
  const double e1 = p1;
  const double e2 = (e1 * p1 - p2) / 2.0;
  const double e3 = (e2 * p1 - e1 * p2 + p3) / 3.0;
  const double e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0;
  // p(z) = z^4 - e1 z^3 + e2 z^2 - e3 z + e4
  const std::complex<double> coef[5] = {1.0, -e1, e2, -e3, e4};
  auto eval = [&](std::complex<double> z) {
    std::complex<double> r = coef[0];
    for (int i = 1; i < 5; ++i) r = r * z + coef[i];
    return r;
  };

  double radius = 1.0;
  for (int i = 1; i < 5; ++i) radius = std::max(radius, std::abs(coef[i]));
  std::array<std::complex<double>, 4> roots;
  const std::complex<double> seed(0.4, 0.9);
  std::complex<double> power = 1.0;
  for (int i = 0; i < 4; ++i) {
    power *= seed;
    roots[i] = power * radius;
  }
  for (int iter = 0; iter < 500; ++iter) {
    double shift = 0.0;
    for (int i = 0; i < 4; ++i) {
      std::complex<double> denom = 1.0;
      for (int k = 0; k < 4; ++k)
        if (k != i) denom *= roots[i] - roots[k];
      if (std::abs(denom) < 1e-300) continue;
      const std::complex<double> delta = eval(roots[i]) / denom;
      roots[i] -= delta;
      shift = std::max(shift, std::abs(delta));
    }
    if (shift < 1e-14) break;
  }
  std::sort(roots.begin(), roots.end(), [](const auto& l, const auto& r) {
    if (l.real() != r.real()) return l.real() < r.real();
    return l.imag() < r.imag();
  });
  return roots;
}

Stability classify(const std::array<std::complex<double>, 4>& eig) {
  bool all_negative = true;
  bool any_positive = false;
  for (const auto& z : eig) {
    if (!(z.real() < kStableThreshold)) all_negative = false;
    if (z.real() > -kStableThreshold) any_positive = true;
  }
  if (all_negative) return Stability::Stable;
  if (any_positive) return Stability::Unstable;
  return Stability::Marginal;
}

FixedPoint boundary_point(const Vec4& v) {
  FixedPoint fp;
  fp.state = OdeState{0.0, 0.0, std::max(0.0, v[2]),
                      std::clamp(v[3], 0.0, std::max(0.0, v[2])), 0.0};
  fp.residual = 0.0;  // the field is identically zero on the frozen boundary
  fp.classification = Stability::Marginal;
  fp.boundary = true;
  return fp;
}

}  // namespace

bool FixedPoint::has_null_direction() const {
  if (boundary) return false;
  for (const auto& z : eigenvalues)
    if (std::abs(z) <= kNullEigenTol) return true;
  return false;
}

std::vector<OdeState> default_fixed_point_guesses() {
  std::vector<OdeState> guesses;
  for (double psi : {0.2, 0.5, 1.0, 2.0})
    for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0})
      guesses.push_back(OdeState{psi, beta * psi, psi + 1.0, beta * (psi + 1.0), 0.0});
  return guesses;
}

FixedPointSearch find_fixed_points(const OffspringLaw& law,
                                   const std::vector<OdeState>& guesses) {
  if (!law.proportion_means(0.5, 0.5))
    throw ContractViolation(
        "find_fixed_points: law '" + law.name() +
        "' is not proportion-autonomous; analyse its limits empirically instead");

  FixedPointSearch result;
  auto add_point = [&](FixedPoint fp) {
    for (const FixedPoint& seen : result.points) {
      const Vec4 d = {seen.state.psi_c - fp.state.psi_c,
                      seen.state.theta_c - fp.state.theta_c,
                      seen.state.psi_a - fp.state.psi_a,
                      seen.state.theta_a - fp.state.theta_a};
      if (max_norm(d) <= kMergeTol) return;
    }
    result.points.push_back(std::move(fp));
  };

  for (const OdeState& guess : guesses) {
    Vec4 v = {std::max(guess.psi_c, 1e-3), std::clamp(guess.theta_c, 0.0, guess.psi_c),
              std::max(guess.psi_a, 1e-3), guess.theta_a};
    bool converged = false, on_boundary = false;
    for (int iter = 0; iter < 200; ++iter) {
      if (v[0] <= kPsiFloor) {
        on_boundary = true;
        break;
      }
      const Vec4 g = reduced_field(law, v);
      const double gnorm = max_norm(g);
      if (gnorm <= 1e-12) {
        converged = true;
        break;
      }
      const Mat4 j = jacobian(law, v);
      Vec4 d{};
      if (!lm_step(j, g, 1e-12, d) && !lm_step(j, g, 1e-6, d)) break;
      double alpha = 1.0;
      bool improved = false;
      for (int half = 0; half < 40; ++half) {
        Vec4 trial = {v[0] + alpha * d[0], v[1] + alpha * d[1], v[2] + alpha * d[2],
                      v[3] + alpha * d[3]};
        if (trial[0] <= kPsiFloor) {
          // The step wants to leave the psi > 0 branch: the root, if any,
          // lies on the frozen boundary.
          v = trial;
          on_boundary = true;
          improved = true;
          break;
        }
        if (max_norm(reduced_field(law, trial)) < gnorm) {
          v = trial;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (on_boundary) break;
      if (!improved) break;
    }

    if (on_boundary) {
      add_point(boundary_point(v));
      continue;
    }
    if (!converged) {
      result.skipped_guesses.push_back(guess);
      continue;
    }
    const double residual = max_norm(reduced_field(law, v));
    if (residual > kResidualTol) {
      result.skipped_guesses.push_back(guess);
      continue;
    }
    FixedPoint fp;
    fp.state = OdeState{v[0], v[1], v[2], v[3], 0.0};
    fp.residual = residual;
    fp.eigenvalues = eigenvalues4(jacobian(law, v));
    fp.classification = classify(fp.eigenvalues);
    fp.boundary = false;
    add_point(std::move(fp));
  }
  return result;
}

}  // namespace branchsim
