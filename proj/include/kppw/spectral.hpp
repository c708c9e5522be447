#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "kppw/error.hpp"
#include "kppw/matrix.hpp"

namespace kppw {

/// Perron-Frobenius eigenvalue together with its unit, strictly positive eigenvector.
struct Eigenpair {
  double value = 0.0;
  Vector vector;
};

struct PowerIterationOptions {
  double residual_tolerance = 1e-12;  // relative to max(1, |A|_inf)
  int max_iterations = 100000;
  // Plain iterations on the shifted matrix before switching to the resolvent.
  int plain_iterations = 64;
};

inline bool is_essentially_nonnegative(const SquareMatrix& a) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j && a(i, j) < 0.0) return false;
  return true;
}

namespace detail {

inline bool reaches_all(const SquareMatrix& a, bool transposed) {
  const std::size_t n = a.size();
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> queue{0};
  seen[0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t i = queue[head];
    for (std::size_t j = 0; j < n; ++j) {
      const double w = transposed ? a(j, i) : a(i, j);
      if (j != i && w != 0.0 && !seen[j]) {
        seen[j] = 1;
        queue.push_back(j);
      }
    }
  }
  return queue.size() == n;
}

inline void require_valid_square(const SquareMatrix& a) {
  if (a.size() == 0) throw Error(ErrorCode::InvalidInput, "matrix dimension must be >= 1");
  if (!a.all_finite()) throw Error(ErrorCode::InvalidInput, "matrix has non-finite entries");
}

}  // namespace detail

/// Strong connectivity of the off-diagonal support graph (edge i->j iff a_ij != 0).
inline bool is_irreducible(const SquareMatrix& a) {
  detail::require_valid_square(a);
  if (!is_essentially_nonnegative(a))
    throw Error(ErrorCode::InvalidInput, "irreducibility is only defined here for essentially nonnegative matrices");
  return detail::reaches_all(a, false) && detail::reaches_all(a, true);
}

/// Perron-Frobenius eigenpair of an essentially nonnegative irreducible matrix.
///
/// Iterates on A - (min diag - 1) I, which is nonnegative with a positive
/// diagonal. When that stalls (nearly degenerate dominant pair), the iteration
/// continues on the resolvent (sigma I - A)^{-1} with sigma just above the
/// Collatz-Wielandt upper bound max_i (Ax)_i / x_i. The resolvent is a positive
/// matrix whose dominant eigenvector is the same, so iterates stay positive.
/// Stops once |A x - lambda x|_inf is below tolerance.
inline Eigenpair pf_eigenpair(const SquareMatrix& a, const PowerIterationOptions& opt = {}) {
  detail::require_valid_square(a);
  if (!is_essentially_nonnegative(a))
    throw Error(ErrorCode::InvalidInput, "matrix is not essentially nonnegative");
  if (!is_irreducible(a)) throw Error(ErrorCode::NotIrreducible, "matrix is reducible");

  const std::size_t n = a.size();
  if (n == 1) return {a(0, 0), {1.0}};

  const double scale = std::max(1.0, a.norm_inf());
  const double tol = opt.residual_tolerance * scale;
  const SquareMatrix shifted = a.shifted(-(a.min_diagonal() - 1.0));

  double max_row_sum = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a(i, j);
    max_row_sum = std::max(max_row_sum, s);
  }

  Vector x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector ax = a.apply(x);
    const double lambda = dot(x, ax);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(ax[i] - lambda * x[i]));

    if (residual <= tol) {
      Eigenpair out{lambda, x};
      for (double v : out.vector)
        if (!(v > 0.0)) throw Error(ErrorCode::NonConvergence, "eigenvector lost positivity");
      return out;
    }

    Vector y;
    if (it < opt.plain_iterations) {
      y = shifted.apply(x);
    } else {
      double upper = max_row_sum;
      if (std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0; })) {
        upper = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) upper = std::max(upper, ax[i] / x[i]);
      }
      double gap = 1e-14 * scale;
      for (int attempt = 0;; ++attempt) {
        try {
          SquareMatrix resolvent = a;
          resolvent *= -1.0;
          y = solve_linear(resolvent.shifted(upper + gap), x);
          break;
        } catch (const Error&) {
          if (attempt > 8) throw Error(ErrorCode::NonConvergence, "resolvent shift stays singular");
          gap *= 1e3;
        }
      }
    }
    double s = 0.0;
    for (double v : y) s += v;
    const double norm = norm2(y) * (s < 0.0 ? -1.0 : 1.0);
    if (!std::isfinite(norm) || norm == 0.0) throw Error(ErrorCode::NonConvergence, "iterate degenerated");
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
  }
  throw Error(ErrorCode::NonConvergence, "power iteration hit the iteration cap");
}

/// Rank-one spectral projector n m^T / (m^T n) onto the Perron-Frobenius
/// eigenspace, with n and m the right and left Perron-Frobenius eigenvectors.
inline SquareMatrix pf_projection(const SquareMatrix& l) {
  const Vector right = pf_eigenpair(l).vector;
  const Vector left = pf_eigenpair(l.transpose()).vector;
  const double denom = dot(left, right);
  const std::size_t n = l.size();
  SquareMatrix p(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = right[i] * left[j] / denom;
  return p;
}

}  // namespace kppw
