#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "kppw/matrix.hpp"

namespace kppw {

/// Uniform 1-D grid: nodes at x_left + k dx, k = 0..nx-1.
struct Grid1D {
  double x_left = 0.0;
  double dx = 0.1;
  std::size_t nx = 16;

  double x(std::size_t k) const { return x_left + static_cast<double>(k) * dx; }
  double x_right() const { return x(nx - 1); }
  double length() const { return static_cast<double>(nx - 1) * dx; }
  bool operator==(const Grid1D&) const = default;
};

/// Selects the summed density sum_i u_i instead of a single component.
inline constexpr std::size_t kTotal = static_cast<std::size_t>(-1);

/// Sampled solution u(t, .) on a grid; values are stored component-major.
struct Field {
  double t = 0.0;
  Grid1D grid;
  std::size_t n_components = 0;
  std::vector<double> values;
  long window_offset = 0;            // cells dropped on the left so far
  std::vector<Vector> frozen_back;   // dropped nodes, leftmost first

  Field() = default;
  Field(const Grid1D& g, std::size_t n) : grid(g), n_components(n), values(n * g.nx, 0.0) {}

  double& at(std::size_t i, std::size_t k) { return values[i * grid.nx + k]; }
  double at(std::size_t i, std::size_t k) const { return values[i * grid.nx + k]; }

  std::span<const double> component(std::size_t i) const {
    return std::span<const double>(values).subspan(i * grid.nx, grid.nx);
  }

  Vector node(std::size_t k) const {
    Vector v(n_components);
    for (std::size_t i = 0; i < n_components; ++i) v[i] = at(i, k);
    return v;
  }

  double total(std::size_t k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_components; ++i) s += at(i, k);
    return s;
  }

  /// u_component(x_k), or the summed density for kTotal.
  double scalar(std::size_t component, std::size_t k) const {
    return component == kTotal ? total(k) : at(component, k);
  }
};

/// Rightmost x where the selected scalar crosses `level`, by linear
/// interpolation between neighbouring nodes; -inf if it never reaches it.
inline double front_position(const Field& f, std::size_t component, double level) {
  const std::size_t nx = f.grid.nx;
  for (std::size_t k = nx; k-- > 0;) {
    const double s = f.scalar(component, k);
    if (s >= level) {
      if (k + 1 == nx) return f.grid.x(k);
      const double s_next = f.scalar(component, k + 1);
      return f.grid.x(k) + f.grid.dx * (s - level) / (s - s_next);
    }
  }
  return -std::numeric_limits<double>::infinity();
}

}  // namespace kppw
