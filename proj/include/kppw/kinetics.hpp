#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kppw/error.hpp"
#include "kppw/matrix.hpp"
#include "kppw/spectral.hpp"

namespace kppw {

/// Largest number of species handled by the fixed-size kernels.
inline constexpr std::size_t kMaxComponents = 16;

/// c(v) = C v.
struct LotkaVolterra {
  SquareMatrix C;
  bool operator==(const LotkaVolterra&) const = default;
};

/// c(v) = (b^T v) a, with max_i a_i = 1.
struct Separated {
  Vector a;
  Vector b;
  bool operator==(const Separated&) const = default;
};

using CompetitionLaw = std::variant<LotkaVolterra, Separated>;

/// Two-species split L = diag(r) + eta [[-1, 1], [1, -1]] diag(m), m a unit vector.
struct MutationDecomposition {
  Vector r;
  double eta = 0.0;
  Vector m;
  bool operator==(const MutationDecomposition&) const = default;
};

struct SystemSpec {
  Vector d;
  SquareMatrix L;
  CompetitionLaw law;
  std::optional<MutationDecomposition> mutation;

  std::size_t size() const noexcept { return L.size(); }
  bool operator==(const SystemSpec&) const = default;
};

/// L rebuilt from a two-species decomposition (m taken as given).
inline SquareMatrix mutation_matrix(const Vector& r, double eta, const Vector& m) {
  return SquareMatrix{{r[0] - eta * m[0], eta * m[1]}, {eta * m[0], r[1] - eta * m[1]}};
}

/// Recovers (r, eta, m) from a 2x2 L. The columns of L - diag(r) sum to zero.
inline std::optional<MutationDecomposition> decompose_mutation(const SquareMatrix& l) {
  if (l.size() != 2) return std::nullopt;
  const double eta = std::hypot(l(1, 0), l(0, 1));
  if (!(eta > 0.0)) return std::nullopt;
  return MutationDecomposition{{l(0, 0) + l(1, 0), l(1, 1) + l(0, 1)}, eta, {l(1, 0) / eta, l(0, 1) / eta}};
}

/// Two-species Lotka-Volterra system with mutation. `m` may be given up to
/// scale; it is normalized and the scale is folded into eta, so L is the
/// same as with the raw pair.
inline SystemSpec make_two_species(Vector d, Vector r, double eta, Vector m, SquareMatrix c) {
  if (d.size() != 2 || r.size() != 2 || m.size() != 2 || c.size() != 2)
    throw Error(ErrorCode::InvalidInput, "two-species system needs 2-vectors and a 2x2 competition matrix");
  const double norm = norm2(m);
  if (!(norm > 0.0) || m[0] <= 0.0 || m[1] <= 0.0 || !(eta > 0.0))
    throw Error(ErrorCode::InvalidInput, "mutation rate and weights must be positive");
  if (std::abs(norm - 1.0) > 4 * std::numeric_limits<double>::epsilon()) {
    for (double& v : m) v /= norm;
    eta *= norm;
  }
  SystemSpec s;
  s.d = std::move(d);
  s.L = mutation_matrix(r, eta, m);
  s.law = LotkaVolterra{std::move(c)};
  s.mutation = MutationDecomposition{std::move(r), eta, std::move(m)};
  return s;
}

/// Same system with a different mutation rate (unit-m convention).
inline SystemSpec with_mutation_rate(const SystemSpec& base, double eta) {
  if (!base.mutation) throw Error(ErrorCode::InvalidInput, "system has no mutation decomposition");
  SystemSpec s = base;
  s.mutation->eta = eta;
  s.L = mutation_matrix(s.mutation->r, eta, s.mutation->m);
  return s;
}

/// The matrix C with c(v) = C v (a b^T for the separated law).
inline SquareMatrix competition_matrix(const CompetitionLaw& law, std::size_t n) {
  if (const auto* lv = std::get_if<LotkaVolterra>(&law)) return lv->C;
  const auto& sep = std::get<Separated>(law);
  SquareMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = sep.a[i] * sep.b[j];
  return c;
}

/// L u - c(u) o u.
inline Vector reaction(const SystemSpec& spec, std::span<const double> u) {
  Vector out = spec.L.apply(u);
  const std::size_t n = spec.size();
  if (const auto* lv = std::get_if<LotkaVolterra>(&spec.law)) {
    const Vector cu = lv->C.apply(u);
    for (std::size_t i = 0; i < n; ++i) out[i] -= cu[i] * u[i];
  } else {
    const auto& sep = std::get<Separated>(spec.law);
    const double bu = dot(sep.b, u);
    for (std::size_t i = 0; i < n; ++i) out[i] -= bu * sep.a[i] * u[i];
  }
  return out;
}

/// Jacobian of the reaction: L - diag(c(u)) - (u 1^T) o Dc(u).
inline SquareMatrix linearization(const SystemSpec& spec, std::span<const double> u) {
  const std::size_t n = spec.size();
  const SquareMatrix c = competition_matrix(spec.law, n);
  const Vector cu = c.apply(u);
  SquareMatrix j = spec.L;
  for (std::size_t r = 0; r < n; ++r) {
    j(r, r) -= cu[r];
    for (std::size_t k = 0; k < n; ++k) j(r, k) -= u[r] * c(r, k);
  }
  return j;
}

enum class Stability { StableNode, Saddle, UnstableNode, SpiralStable, SpiralUnstable, Marginal };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::StableNode: return "StableNode";
    case Stability::Saddle: return "Saddle";
    case Stability::UnstableNode: return "UnstableNode";
    case Stability::SpiralStable: return "SpiralStable";
    case Stability::SpiralUnstable: return "SpiralUnstable";
    case Stability::Marginal: return "Marginal";
  }
  return "?";
}

inline std::vector<std::complex<double>> eigenvalues(const SquareMatrix& j) {
  const std::size_t n = j.size();
  Eigen::MatrixXd m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = j(r, c);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = solver.eigenvalues()[k];
  return out;
}

/// Node/saddle/spiral tag from the eigenvalues of a Jacobian.
inline Stability classify_stability(const SquareMatrix& jac, double margin = 1e-8) {
  bool any_pos = false, any_neg = false, any_complex = false;
  for (const auto& ev : eigenvalues(jac)) {
    if (std::abs(ev.real()) <= margin) return Stability::Marginal;
    (ev.real() > 0.0 ? any_pos : any_neg) = true;
    if (std::abs(ev.imag()) > margin) any_complex = true;
  }
  if (any_pos && any_neg) return Stability::Saddle;
  if (any_neg) return any_complex ? Stability::SpiralStable : Stability::StableNode;
  return any_complex ? Stability::SpiralUnstable : Stability::UnstableNode;
}

struct SteadyState {
  Vector value;
  Stability stability = Stability::Marginal;
};

/// Coexistence state C^{-1} r of the two-species Lotka-Volterra kinetics.
inline Vector v_m(const Vector& r, const SquareMatrix& c) {
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  if (std::abs(det) <= 1e-12) throw Error(ErrorCode::SingularC, "det C vanishes");
  return {(r[0] * c(1, 1) - r[1] * c(0, 1)) / det, (r[1] * c(0, 0) - r[0] * c(1, 0)) / det};
}

enum class Regime { Extinction2, Coexistence, Bistable, Extinction1, Degenerate };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Extinction2: return "Extinction2";
    case Regime::Coexistence: return "Coexistence";
    case Regime::Bistable: return "Bistable";
    case Regime::Extinction1: return "Extinction1";
    case Regime::Degenerate: return "Degenerate";
  }
  return "?";
}

/// Long-time regime of u' = diag(r) u - (C u) o u from the ratio tests on
/// r1/r2 against c11/c21 and c12/c22.
inline Regime classify_two_species(const Vector& r, const SquareMatrix& c) {
  const double rho = r[0] / r[1];
  const double p = c(0, 0) / c(1, 0);
  const double q = c(0, 1) / c(1, 1);
  const double tol = 1e-12;
  if (std::abs(rho - p) <= tol && std::abs(rho - q) <= tol) return Regime::Degenerate;
  if (rho >= std::max(p, q) && rho > std::min(p, q)) return Regime::Extinction2;
  if (q < rho && rho < p) return Regime::Coexistence;
  if (q > rho && rho > p) return Regime::Bistable;
  if (rho <= std::min(p, q) && rho < std::max(p, q)) return Regime::Extinction1;
  return Regime::Degenerate;
}

/// alpha* > 0 solving b(alpha n_a) = lambda_a for an increasing functional b,
/// by bisection after doubling the upper end.
template <typename Functional>
double separated_alpha_star(const Functional& b, const Vector& n_a, double lambda_a) {
  auto f = [&](double alpha) {
    Vector v = n_a;
    for (double& x : v) x *= alpha;
    return b(v) - lambda_a;
  };
  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw Error(ErrorCode::InvalidInput, "b does not reach lambda_a along n_a");
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// (lambda_a, n_a) = PF eigenpair of A^{-1} L for the separated law.
inline Eigenpair separated_eigenpair(const SystemSpec& spec) {
  const auto* sep = std::get_if<Separated>(&spec.law);
  if (!sep) throw Error(ErrorCode::InvalidInput, "system does not use separated competition");
  SquareMatrix m = spec.L;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) m(i, j) /= sep->a[i];
  return pf_eigenpair(m);
}

/// Unique positive constant state v* = (lambda_a / b^T n_a) n_a under separated competition.
inline SteadyState v_star_separated(const SystemSpec& spec) {
  const Eigenpair ea = separated_eigenpair(spec);
  if (!(ea.value > 0.0)) throw Error(ErrorCode::NonPositiveLambdaA, "lambda_a <= 0: no positive steady state");
  const auto& sep = std::get<Separated>(spec.law);
  Vector v = ea.vector;
  const double alpha = ea.value / dot(sep.b, ea.vector);
  for (double& x : v) x *= alpha;
  return {v, classify_stability(linearization(spec, v))};
}

/// Species carrying capacities r_i / c_ii (two-species Lotka-Volterra).
inline double carrying_capacity(const SystemSpec& spec, std::size_t i) {
  const auto& lv = std::get<LotkaVolterra>(spec.law);
  return spec.mutation->r[i] / lv.C(i, i);
}

/// Every nonnegative constant solution of L u = c(u) o u for N = 2, found by
/// Newton iterations seeded on a regular grid over [0, u_max]^2.
inline std::vector<SteadyState> constant_solutions_two_species(const SystemSpec& spec, int seeds_per_axis = 64) {
  if (spec.size() != 2) throw Error(ErrorCode::InvalidInput, "two-species search needs N = 2");
  const SquareMatrix c = competition_matrix(spec.law, 2);
  double c_min = INFINITY;
  for (double v : c.row_major()) c_min = std::min(c_min, v);
  double lam = 0.0;
  try {
    lam = pf_eigenpair(spec.L).value;
  } catch (const Error&) {
    lam = spec.L.max_diagonal();
  }
  const double u_max = 2.0 * std::max(lam, spec.L.max_diagonal()) / c_min;

  std::vector<Vector> found{{0.0, 0.0}};
  auto known = [&](const Vector& u) {
    return std::any_of(found.begin(), found.end(), [&](const Vector& f) { return distance2(f, u) <= 1e-7; });
  };
  for (int a = 0; a < seeds_per_axis; ++a) {
    for (int b = 0; b < seeds_per_axis; ++b) {
      Vector u{(a + 0.5) / seeds_per_axis * u_max, (b + 0.5) / seeds_per_axis * u_max};
      bool ok = false;
      for (int it = 0; it < 100; ++it) {
        const Vector f = reaction(spec, u);
        Vector step;
        try {
          step = solve_linear(linearization(spec, u), f);
        } catch (const Error&) {
          break;
        }
        for (std::size_t k = 0; k < 2; ++k) u[k] -= step[k];
        if (!std::isfinite(u[0]) || !std::isfinite(u[1]) || norm_inf(u) > 10.0 * u_max) break;
        if (norm_inf(step) <= 1e-15 * std::max(1.0, norm_inf(u))) {
          ok = true;
          break;
        }
      }
      if (!ok || u[0] < -1e-9 || u[1] < -1e-9) continue;
      for (double& x : u) x = std::max(x, 0.0);
      if (norm_inf(reaction(spec, u)) > 1e-10) continue;
      if (!known(u)) found.push_back(u);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<SteadyState> out;
  for (const Vector& u : found) out.push_back({u, classify_stability(linearization(spec, u))});
  return out;
}

struct LemmaThresholds {
  double eta_bar = 0.0;  // mutation rates below this keep local minima of u_i above rho
  double rho = 0.0;
};

/// Thresholds (eta_bar_i, rho_i) under which every traveling wave crosses
/// level rho in component i exactly once. Requires r_i / r_j > c_ij / c_jj.
inline LemmaThresholds lemma_thresholds(const SystemSpec& spec, std::size_t i) {
  if (!spec.mutation || i > 1) throw Error(ErrorCode::InvalidInput, "needs a two-species mutation system");
  const auto& c = std::get<LotkaVolterra>(spec.law).C;
  const auto& r = spec.mutation->r;
  const auto& m = spec.mutation->m;
  const std::size_t j = 1 - i;
  const double excess = r[i] / r[j] - c(i, j) / c(j, j);
  if (!(excess > 0.0)) throw Error(ErrorCode::HypothesisViolated, "r_i/r_j <= c_ij/c_jj");
  return {0.5 * std::min(r[j] * c(j, i) / (m[i] * c(j, j)), r[j] / m[i] * excess), 0.5 * r[j] / c(i, i) * excess};
}

/// Largest mutation rate for which u_i <= alpha_i is preserved: r_i c_ij / (m_j c_ii).
inline double linf_bound_threshold(const SystemSpec& spec, std::size_t i) {
  const auto& c = std::get<LotkaVolterra>(spec.law).C;
  const std::size_t j = 1 - i;
  return spec.mutation->r[i] * c(i, j) / (spec.mutation->m[j] * c(i, i));
}

/// Stable state reached at the back in the monostable two-species case:
/// alpha_i e_i when r_i/r_j >= c_ii/c_ji, the coexistence state otherwise.
inline Vector stable_back_state(const SystemSpec& spec, std::size_t i) {
  const auto& c = std::get<LotkaVolterra>(spec.law).C;
  const auto& r = spec.mutation->r;
  const std::size_t j = 1 - i;
  if (r[i] / r[j] >= c(i, i) / c(j, i)) {
    Vector v(2, 0.0);
    v[i] = r[i] / c(i, i);
    return v;
  }
  return v_m(r, c);
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
};

/// Classic RK4 for u' = L u - c(u) o u. Undershoots below -1e-12 raise
/// StepTooLarge; smaller ones are clipped to 0.
inline Trajectory integrate_kinetics(const SystemSpec& spec, Vector u, double t_end, double dt) {
  if (!(dt > 0.0) || t_end < 0.0) throw Error(ErrorCode::InvalidInput, "need dt > 0 and T >= 0");
  for (double v : u)
    if (v < 0.0) throw Error(ErrorCode::InvalidInput, "initial state must be nonnegative");
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_end / dt - 1e-9)));
  const double h = t_end / static_cast<double>(steps);
  const long every = std::max(1L, static_cast<long>(t_end / (1000.0 * dt)));
  const std::size_t n = u.size();

  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(u);
  if (t_end == 0.0) return out;
  Vector tmp(n);
  for (long s = 1; s <= steps; ++s) {
    const Vector k1 = reaction(spec, u);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
    const Vector k2 = reaction(spec, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
    const Vector k3 = reaction(spec, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * k3[i];
    const Vector k4 = reaction(spec, tmp);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (u[i] < -1e-12) throw Error(ErrorCode::StepTooLarge, "RK4 step drove a component negative");
      if (u[i] < 0.0) u[i] = 0.0;
    }
    if (s % every == 0 || s == steps) {
      out.times.push_back(s == steps ? t_end : s * h);
      out.states.push_back(u);
    }
  }
  return out;
}

struct HypothesisCheck {
  std::string name;
  bool passed = false;
  std::string message;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
  }

  bool passed(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c.passed;
    return false;
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks) os << (c.passed ? "[ok]   " : "[FAIL] ") << c.name << ": " << c.message << '\n';
    return os.str();
  }
};

/// Structural checks on a system: H1 (essentially nonnegative, irreducible L),
/// H5 (lambda_PF(L) > 0), law positivity (which gives H2-H4 by construction),
/// and the two-species decomposition with r >> 0 when one is present.
inline HypothesisReport check_hypotheses(const SystemSpec& spec) {
  HypothesisReport rep;
  const std::size_t n = spec.size();
  auto add = [&](std::string name, bool ok, std::string msg) { rep.checks.push_back({std::move(name), ok, std::move(msg)}); };

  const bool shape_ok = n >= 1 && n <= kMaxComponents && spec.d.size() == n && spec.L.all_finite();
  add("shape", shape_ok, shape_ok ? "dimensions consistent" : "d and L must have matching dimension in [1, 16]");
  if (!shape_ok) return rep;

  const bool d_ok = std::all_of(spec.d.begin(), spec.d.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
  add("diffusion", d_ok, d_ok ? "d >> 0" : "every diffusion rate must be positive");

  const bool ess = is_essentially_nonnegative(spec.L);
  const bool irr = ess && is_irreducible(spec.L);
  add("H1", ess && irr,
      !ess ? "L has a negative off-diagonal entry" : (irr ? "L essentially nonnegative and irreducible" : "L is reducible"));

  if (ess && irr) {
    const double lam = pf_eigenpair(spec.L).value;
    std::ostringstream os;
    os.precision(17);
    os << "lambda_PF(L) = " << lam;
    add("H5", lam > 0.0, os.str());
  } else {
    add("H5", false, "undefined without H1");
  }

  if (const auto* lv = std::get_if<LotkaVolterra>(&spec.law)) {
    bool ok = lv->C.size() == n;
    if (ok)
      for (double v : lv->C.row_major()) ok = ok && v > 0.0 && std::isfinite(v);
    add("H2-H4", ok, ok ? "Lotka-Volterra with C >> 0 (satisfied by construction)" : "C must be N x N with positive entries");
  } else {
    const auto& sep = std::get<Separated>(spec.law);
    bool ok = sep.a.size() == n && sep.b.size() == n;
    if (ok) {
      for (std::size_t i = 0; i < n; ++i) ok = ok && sep.a[i] > 0.0 && sep.b[i] > 0.0;
      ok = ok && std::abs(*std::max_element(sep.a.begin(), sep.a.end()) - 1.0) <= 1e-12;
    }
    add("H6", ok, ok ? "separated competition, a >> 0 with max a = 1, b >> 0" : "a, b must be positive N-vectors with max a = 1");
  }

  if (spec.mutation) {
    const auto& mu = *spec.mutation;
    bool ok = n == 2 && std::holds_alternative<LotkaVolterra>(spec.law) && mu.r.size() == 2 && mu.m.size() == 2 &&
              mu.r[0] > 0.0 && mu.r[1] > 0.0 && mu.eta > 0.0 && mu.m[0] > 0.0 && mu.m[1] > 0.0 &&
              std::abs(norm2(mu.m) - 1.0) <= 1e-12;
    if (ok) ok = mutation_matrix(mu.r, mu.eta, mu.m) == spec.L;
    add("H7", ok, ok ? "N = 2, C >> 0, L = diag(r) + eta M diag(m) with r >> 0" : "decomposition invalid or does not reproduce L");
  }
  return rep;
}

}  // namespace kppw
