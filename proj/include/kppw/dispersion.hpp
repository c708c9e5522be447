#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "kppw/error.hpp"
#include "kppw/matrix.hpp"
#include "kppw/spectral.hpp"

namespace kppw {

/// Diffusion rates and linear interaction matrix of the linearization at 0.
struct DispersionInput {
  Vector d;
  SquareMatrix L;
};

struct SpeedResult {
  double c_star = 0.0;
  double mu_star = 0.0;
};

struct DecayRoots {
  double mu1 = 0.0;
  double mu2 = 0.0;
  int k_c = 0;
};

namespace dispersion_limits {
inline constexpr double kMuMin = 1e-8;
inline constexpr double kMuMax = 1e8;
inline constexpr double kSpeedTolerance = 1e-9;
inline constexpr double kRootMergeRelative = 1e-5;
inline constexpr double kGoldenRelativeWidth = 1e-10;
inline constexpr int kGridPoints = 10000;
inline constexpr double kGridAgreement = 1e-6;
}  // namespace dispersion_limits

inline void validate(const DispersionInput& in) {
  const std::size_t n = in.L.size();
  if (n == 0 || in.d.size() != n)
    throw Error(ErrorCode::InvalidInput, "d and L must have matching dimension >= 1");
  for (double di : in.d)
    if (!(di > 0.0) || !std::isfinite(di)) throw Error(ErrorCode::InvalidInput, "diffusion rates must be positive");
  if (!is_essentially_nonnegative(in.L)) throw Error(ErrorCode::InvalidInput, "L is not essentially nonnegative");
  if (!is_irreducible(in.L)) throw Error(ErrorCode::NotIrreducible, "L is reducible");
  if (!(pf_eigenpair(in.L).value > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda_PF(L) must be positive");
}

/// mu^2 diag(d) + L.
inline SquareMatrix dispersion_pencil(const DispersionInput& in, double mu) {
  SquareMatrix m = in.L;
  for (std::size_t i = 0; i < m.size(); ++i) m(i, i) += mu * mu * in.d[i];
  return m;
}

/// lambda_PF(mu^2 D + L). Assumes `in` was validated.
inline double lambda_of_mu(const DispersionInput& in, double mu) {
  return pf_eigenpair(dispersion_pencil(in, mu)).value;
}

namespace detail {

inline double speed_ratio(const DispersionInput& in, double mu) { return lambda_of_mu(in, mu) / mu; }

// Sign of d/dmu [lambda(mu)/mu] through the tangency residual 2 mu^2 <m, D n>/<m, n> - lambda,
// using left (m) and right (n) eigenvectors for the eigenvalue derivative.
inline double tangency_residual(const DispersionInput& in, double mu) {
  const SquareMatrix p = dispersion_pencil(in, mu);
  const Eigenpair right = pf_eigenpair(p);
  const Vector left = pf_eigenpair(p.transpose()).vector;
  double num = 0.0;
  for (std::size_t i = 0; i < in.d.size(); ++i) num += left[i] * in.d[i] * right.vector[i];
  return 2.0 * mu * mu * num / dot(left, right.vector) - right.value;
}

inline double grid_minimum(const DispersionInput& in) {
  using namespace dispersion_limits;
  const double log_lo = std::log(kMuMin);
  const double log_hi = std::log(kMuMax);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGridPoints; ++k) {
    const double mu = std::exp(log_lo + (log_hi - log_lo) * k / (kGridPoints - 1));
    best = std::min(best, speed_ratio(in, mu));
  }
  return best;
}

}  // namespace detail

/// c* = min over mu > 0 of lambda_PF(mu^2 D + L) / mu and its minimizer.
///
/// Brackets by doubling/halving from mu = 1, refines by golden section, then
/// sharpens the minimizer by bisection on the tangency condition (golden
/// section alone cannot resolve mu* below sqrt(machine epsilon)). The result
/// is cross-checked against a log-uniform grid scan of the ratio; a
/// disagreement beyond 1e-6 raises DiagnosticMismatch.
inline SpeedResult minimal_speed(const DispersionInput& in) {
  using namespace dispersion_limits;
  validate(in);
  auto g = [&](double mu) { return detail::speed_ratio(in, mu); };

  double lo = 0.5, mid = 1.0, hi = 2.0;
  double g_lo = g(lo), g_mid = g(mid), g_hi = g(hi);
  while (g_hi < g_mid) {
    lo = mid, g_lo = g_mid;
    mid = hi, g_mid = g_hi;
    hi *= 2.0;
    if (hi > kMuMax) throw Error(ErrorCode::BracketFailure, "no interior minimum below mu = 1e8");
    g_hi = g(hi);
  }
  while (g_lo < g_mid) {
    hi = mid, g_hi = g_mid;
    mid = lo, g_mid = g_lo;
    lo *= 0.5;
    if (lo < kMuMin) throw Error(ErrorCode::BracketFailure, "no interior minimum above mu = 1e-8");
    g_lo = g(lo);
  }

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  while (b - a > kGoldenRelativeWidth * 0.5 * (a + b)) {
    if (f1 < f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = g(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = g(x2);
    }
  }
  double mu_star = 0.5 * (a + b);

  // Tangency polish: the residual is negative left of mu* and positive right of it.
  double left = mu_star * (1.0 - 1e-6), right = mu_star * (1.0 + 1e-6);
  if (detail::tangency_residual(in, left) < 0.0 && detail::tangency_residual(in, right) > 0.0) {
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (left + right);
      if (m <= left || m >= right) break;
      (detail::tangency_residual(in, m) < 0.0 ? left : right) = m;
    }
    mu_star = 0.5 * (left + right);
  }

  SpeedResult out{g(mu_star), mu_star};
  const double grid_min = detail::grid_minimum(in);
  if (out.c_star > grid_min + kGridAgreement)
    throw Error(ErrorCode::DiagnosticMismatch, "golden-section minimum disagrees with the grid scan");
  return out;
}

/// Positive roots of lambda_PF(mu^2 D + L) = c mu. Below c* there are none.
inline DecayRoots decay_roots(const DispersionInput& in, double c, const SpeedResult& speed) {
  using namespace dispersion_limits;
  if (c < speed.c_star - kSpeedTolerance)
    throw Error(ErrorCode::NoRealRoots, "the dispersion relation admits no real solution below c*");
  if (std::abs(c - speed.c_star) <= kSpeedTolerance) return {speed.mu_star, speed.mu_star, 1};

  auto h = [&](double mu) { return lambda_of_mu(in, mu) - c * mu; };
  auto bisect = [&](double neg, double pos) {
    for (int it = 0; it < 400; ++it) {
      const double m = 0.5 * (neg + pos);
      if (m == neg || m == pos) break;
      (h(m) < 0.0 ? neg : pos) = m;
    }
    return 0.5 * (neg + pos);
  };

  const double ms = speed.mu_star;
  double lo = 0.5 * ms;
  while (h(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < kMuMin) throw Error(ErrorCode::BracketFailure, "lower decay root below mu = 1e-8");
  }
  double hi = 2.0 * ms;
  while (h(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > kMuMax) throw Error(ErrorCode::BracketFailure, "upper decay root above mu = 1e8");
  }
  DecayRoots out{bisect(ms, lo), bisect(ms, hi), 0};
  if (std::abs(out.mu2 - out.mu1) <= kRootMergeRelative * ms) out.k_c = 1;
  return out;
}

inline DecayRoots decay_roots(const DispersionInput& in, double c) {
  return decay_roots(in, c, minimal_speed(in));
}

/// n_mu = n_PF(mu^2 D + L).
inline Vector edge_eigenvector(const DispersionInput& in, double mu) {
  return pf_eigenpair(dispersion_pencil(in, mu)).vector;
}

/// Reference edge profile A xi^{k_c} exp(-mu_c xi) n_{mu_c}, mu_c the smaller decay root.
/// The amplitude A is a free parameter; it is not computable from the linearization.
inline Vector predict_edge_profile(const DispersionInput& in, double c, double amplitude, double xi) {
  const DecayRoots roots = decay_roots(in, c);
  Vector n = edge_eigenvector(in, roots.mu1);
  const double factor = amplitude * (roots.k_c == 1 ? xi : 1.0) * std::exp(-roots.mu1 * xi);
  for (double& v : n) v *= factor;
  return n;
}

}  // namespace kppw
