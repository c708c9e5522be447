#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kppw/error.hpp"
#include "kppw/field.hpp"
#include "kppw/kinetics.hpp"
#include "kppw/matrix.hpp"
#include "kppw/spectral.hpp"

namespace kppw {

/// `level` on x < interface - width/2, 0 on x > interface + width/2, linear in between.
struct FrontStep {
  Vector level;
  double interface = 0.0;
  double width = 0.0;
  bool operator==(const FrontStep&) const = default;
};

/// `height` on [center - width/2, center + width/2], with linear ramps of
/// width `ramp` centred on both ends.
struct CompactBump {
  double center = 0.0;
  double width = 1.0;
  Vector height;
  double ramp = 0.0;
  bool operator==(const CompactBump&) const = default;
};

struct TerraceBand {
  double x_lo = 0.0;
  double x_hi = 0.0;
  Vector level;
  bool operator==(const TerraceBand&) const = default;
};

/// Piecewise-constant levels, smoothed by linear ramps at interior band ends.
struct TerracePreset {
  std::vector<TerraceBand> bands;
  double smoothing = 0.0;
  bool operator==(const TerracePreset&) const = default;
};

using InitialData = std::variant<FrontStep, CompactBump, TerracePreset>;

enum class TimeScheme { ExplicitEuler, Imex };

struct WindowPolicy {
  enum class Kind { Off, FollowFront };
  Kind kind = Kind::Off;
  std::size_t component = kTotal;
  double level = 0.1;
  double margin = 0.25;  // shift once the front passes (1 - margin) of the window
  bool operator==(const WindowPolicy&) const = default;
};

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Indicator of [a, b] with linear ramps of width s centred on a and b.
// An end at or beyond the grid edge is left sharp.
inline double smoothed_box(double x, double a, double b, double s, const Grid1D& g) {
  const double eps = 1e-12 * std::max(1.0, std::abs(g.x_left) + g.length());
  const bool sharp_left = s <= 0.0 || a <= g.x_left + eps;
  const bool sharp_right = s <= 0.0 || b >= g.x_right() - eps;
  const double left = sharp_left ? (x >= a ? 1.0 : 0.0) : clamp01((x - (a - 0.5 * s)) / s);
  const double right = sharp_right ? (x <= b ? 1.0 : 0.0) : clamp01(((b + 0.5 * s) - x) / s);
  return left * right;
}

inline void require_inside(const Grid1D& g, double a, double b) {
  const double eps = 1e-9 * std::max(1.0, g.dx);
  if (a < g.x_left - eps || b > g.x_right() + eps || a > b)
    throw Error(ErrorCode::IntervalOutOfRange, "initial-data interval lies outside the grid");
}

}  // namespace detail

inline Field build_initial(const Grid1D& grid, const InitialData& init) {
  if (grid.nx < 16 || !(grid.dx > 0.0)) throw Error(ErrorCode::InvalidInput, "grid needs nx >= 16 and dx > 0");
  return std::visit(
      [&](const auto& d) -> Field {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FrontStep>) {
          detail::require_inside(grid, d.interface, d.interface);
          Field f(grid, d.level.size());
          for (std::size_t k = 0; k < grid.nx; ++k) {
            const double x = grid.x(k);
            const double w = d.width > 0.0 ? detail::clamp01((d.interface + 0.5 * d.width - x) / d.width)
                                           : (x <= d.interface ? 1.0 : 0.0);
            for (std::size_t i = 0; i < f.n_components; ++i) f.at(i, k) = w * d.level[i];
          }
          return f;
        } else if constexpr (std::is_same_v<T, CompactBump>) {
          const double a = d.center - 0.5 * d.width, b = d.center + 0.5 * d.width;
          detail::require_inside(grid, a - 0.5 * d.ramp, b + 0.5 * d.ramp);
          Field f(grid, d.height.size());
          for (std::size_t k = 0; k < grid.nx; ++k) {
            const double w = detail::smoothed_box(grid.x(k), a, b, d.ramp, grid);
            for (std::size_t i = 0; i < f.n_components; ++i) f.at(i, k) = w * d.height[i];
          }
          return f;
        } else {
          if (d.bands.empty()) throw Error(ErrorCode::InvalidInput, "terrace needs at least one band");
          Field f(grid, d.bands.front().level.size());
          for (const auto& band : d.bands) {
            detail::require_inside(grid, band.x_lo, band.x_hi);
            for (std::size_t k = 0; k < grid.nx; ++k) {
              const double w = detail::smoothed_box(grid.x(k), band.x_lo, band.x_hi, d.smoothing, grid);
              for (std::size_t i = 0; i < f.n_components; ++i) f.at(i, k) += w * band.level[i];
            }
          }
          return f;
        }
      },
      init);
}

/// Blow-up tripwire: 10 max_i alpha_i (Lotka-Volterra), 10 |v*|_inf (separated).
inline double default_u_cap(const SystemSpec& spec) {
  const std::size_t n = spec.size();
  if (std::holds_alternative<Separated>(spec.law)) return 10.0 * norm_inf(v_star_separated(spec).value);
  const auto& c = std::get<LotkaVolterra>(spec.law).C;
  Vector r(n, 0.0);
  if (spec.mutation) {
    r = spec.mutation->r;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) r[j] += spec.L(i, j);
  }
  const double lam = pf_eigenpair(spec.L).value;
  double best = 0.0, c_min = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    best = std::max(best, r[i] / c(i, i));
    c_min = std::min(c_min, c(i, i));
  }
  return 10.0 * std::max(best, lam / c_min);
}

/// 0.4 min(dx^2 / (2 max d), 1 / rho) with rho = |L|_inf + 2 |C|_inf u_cap
/// bounding the reaction stiffness. The diffusion cap is dropped for IMEX.
inline double stable_dt(const SystemSpec& spec, const Grid1D& grid, TimeScheme scheme = TimeScheme::ExplicitEuler,
                        std::optional<double> u_cap = std::nullopt) {
  constexpr double kSafety = 0.4;
  const double cap = u_cap ? *u_cap : default_u_cap(spec);
  const double stiffness = spec.L.norm_inf() + 2.0 * competition_matrix(spec.law, spec.size()).norm_inf() * cap;
  const double d_max = *std::max_element(spec.d.begin(), spec.d.end());
  const double reaction_dt = 1.0 / stiffness;
  if (scheme == TimeScheme::Imex) return kSafety * reaction_dt;
  return kSafety * std::min(grid.dx * grid.dx / (2.0 * d_max), reaction_dt);
}

/// Three-point second difference with mirrored ghost nodes (homogeneous Neumann).
inline void apply_neumann_laplacian(std::span<const double> u, std::span<double> out, double dx) {
  const std::size_t nx = u.size();
  const double inv = 1.0 / (dx * dx);
  out[0] = 2.0 * (u[1] - u[0]) * inv;
  for (std::size_t k = 1; k + 1 < nx; ++k) out[k] = (u[k - 1] - 2.0 * u[k] + u[k + 1]) * inv;
  out[nx - 1] = 2.0 * (u[nx - 2] - u[nx - 1]) * inv;
}

/// Owns the scratch buffers for repeated time steps of one system.
class Stepper {
 public:
  static constexpr int kMaxHalvings = 6;

  Stepper(const SystemSpec& spec, TimeScheme scheme = TimeScheme::ExplicitEuler) : spec_(spec), scheme_(scheme) {
    n_ = spec.size();
    if (n_ == 0 || n_ > kMaxComponents) throw Error(ErrorCode::InvalidInput, "unsupported number of components");
    l_.assign(spec.L.row_major().begin(), spec.L.row_major().end());
    if (const auto* lv = std::get_if<LotkaVolterra>(&spec.law)) {
      c_.assign(lv->C.row_major().begin(), lv->C.row_major().end());
    } else {
      separated_ = true;
      a_ = std::get<Separated>(spec.law).a;
      b_ = std::get<Separated>(spec.law).b;
    }
  }

  /// Advances `f` by exactly dt; an attempt that undershoots below
  /// -1e-13 max(1, |u|_inf) is replaced by two half steps, at most 6 levels deep.
  void advance(Field& f, double dt) { advance(f, dt, 0); }

  void reaction_at(const double* u, double* out) const {
    const std::size_t n = n_;
    if (separated_) {
      double bu = 0.0;
      for (std::size_t j = 0; j < n; ++j) bu += b_[j] * u[j];
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += l_[i * n + j] * u[j];
        out[i] = s - bu * a_[i] * u[i];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0, cu = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          s += l_[i * n + j] * u[j];
          cu += c_[i * n + j] * u[j];
        }
        out[i] = s - cu * u[i];
      }
    }
  }

 private:
  void advance(Field& f, double dt, int depth) {
    if (attempt(f, dt)) {
      f.values.swap(next_);
      f.t += dt;
      return;
    }
    if (depth == kMaxHalvings) throw Error(ErrorCode::StepFailure, "negative undershoot persists after 6 halvings");
    advance(f, 0.5 * dt, depth + 1);
    advance(f, 0.5 * dt, depth + 1);
  }

  bool attempt(const Field& f, double dt) {
    const std::size_t nx = f.grid.nx, n = n_;
    const double inv_dx2 = 1.0 / (f.grid.dx * f.grid.dx);
    const std::vector<double>& v = f.values;
    next_.resize(v.size());
    double scale = 1.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    const double floor = -1e-13 * scale;

    std::array<double, kMaxComponents> u{}, r{};
    for (std::size_t k = 0; k < nx; ++k) {
      for (std::size_t i = 0; i < n; ++i) u[i] = v[i * nx + k];
      reaction_at(u.data(), r.data());
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = v.data() + i * nx;
        double update = dt * r[i];
        if (scheme_ == TimeScheme::ExplicitEuler) {
          const double left = k == 0 ? row[1] : row[k - 1];
          const double right = k + 1 == nx ? row[nx - 2] : row[k + 1];
          update += dt * spec_.d[i] * (left - 2.0 * u[i] + right) * inv_dx2;
        }
        next_[i * nx + k] = u[i] + update;
      }
    }
    if (scheme_ == TimeScheme::Imex) {
      for (std::size_t i = 0; i < n; ++i)
        solve_implicit_diffusion(std::span<double>(next_).subspan(i * nx, nx), spec_.d[i] * dt * inv_dx2);
    }
    for (double& x : next_) {
      if (!(x >= floor)) return false;
      if (x < 0.0) x = 0.0;
    }
    return true;
  }

  // (I - s Delta_h) y = rhs with mirrored ghosts, overwritten in place (Thomas elimination).
  void solve_implicit_diffusion(std::span<double> y, double s) {
    const std::size_t nx = y.size();
    cprime_.resize(nx);
    const double diag = 1.0 + 2.0 * s;
    double beta = diag;
    cprime_[0] = -2.0 * s / beta;
    y[0] /= beta;
    for (std::size_t k = 1; k < nx; ++k) {
      const double lower = k + 1 == nx ? -2.0 * s : -s;
      const double upper = -s;
      beta = diag - lower * cprime_[k - 1];
      cprime_[k] = upper / beta;
      y[k] = (y[k] - lower * y[k - 1]) / beta;
    }
    for (std::size_t k = nx - 1; k-- > 0;) y[k] -= cprime_[k] * y[k + 1];
  }

  const SystemSpec& spec_;
  TimeScheme scheme_;
  std::size_t n_ = 0;
  bool separated_ = false;
  std::vector<double> l_, c_, a_, b_;
  std::vector<double> next_, cprime_;
};

/// One time step of dt (explicit Euler by default).
inline Field step(const SystemSpec& spec, const Field& field, double dt, TimeScheme scheme = TimeScheme::ExplicitEuler) {
  Field out = field;
  Stepper(spec, scheme).advance(out, dt);
  return out;
}

/// Drops `cells` nodes on the left (recording them as frozen back state) and
/// appends zero nodes on the right.
inline void shift_window(Field& f, std::size_t cells) {
  const std::size_t nx = f.grid.nx;
  cells = std::min(cells, nx);
  for (std::size_t k = 0; k < cells; ++k) f.frozen_back.push_back(f.node(k));
  for (std::size_t i = 0; i < f.n_components; ++i) {
    double* row = f.values.data() + i * nx;
    std::copy(row + cells, row + nx, row);
    std::fill(row + nx - cells, row + nx, 0.0);
  }
  f.grid.x_left += static_cast<double>(cells) * f.grid.dx;
  f.window_offset += static_cast<long>(cells);
}

struct RunOptions {
  TimeScheme scheme = TimeScheme::ExplicitEuler;
  std::optional<double> u_cap;
  bool operator==(const RunOptions&) const = default;
};

/// Integrates from the initial data to t_end, recording a snapshot at t = 0,
/// every `snapshot_every`, and at t_end. Each inter-snapshot interval is split
/// into equal steps no larger than stable_dt, so snapshot times are exact.
inline std::vector<Field> run(const SystemSpec& spec, const Grid1D& grid, const InitialData& init, double t_end,
                              double snapshot_every, const WindowPolicy& window = {}, const RunOptions& options = {}) {
  if (t_end < 0.0) throw Error(ErrorCode::InvalidInput, "T must be nonnegative");
  Field f = build_initial(grid, init);
  if (f.n_components != spec.size()) throw Error(ErrorCode::InvalidInput, "initial data has the wrong number of components");
  std::vector<Field> snaps{f};
  if (t_end == 0.0) return snaps;

  const double cap = options.u_cap ? *options.u_cap : default_u_cap(spec);
  const double dt_max = stable_dt(spec, grid, options.scheme, cap);
  const double every = snapshot_every > 0.0 ? snapshot_every : t_end;
  Stepper stepper(spec, options.scheme);
  const std::size_t shift_cells =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window.margin * static_cast<double>(grid.nx))));

  double t_prev = 0.0;
  for (long k = 1;; ++k) {
    const double t_next = std::min(static_cast<double>(k) * every, t_end);
    const double span = t_next - t_prev;
    const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt_max - 1e-9)));
    const double dt = span / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      stepper.advance(f, dt);
      for (double v : f.values)
        if (!(v <= cap)) throw Error(ErrorCode::CapExceeded, "solution exceeded the blow-up cap");
      if (window.kind == WindowPolicy::Kind::FollowFront) {
        const double front = front_position(f, window.component, window.level);
        if (std::isfinite(front) && front - f.grid.x_left > (1.0 - window.margin) * f.grid.length())
          shift_window(f, shift_cells);
      }
    }
    f.t = t_next;
    snaps.push_back(f);
    t_prev = t_next;
    if (t_next >= t_end) break;
  }
  return snaps;
}

/// `t,x,u1,...,uN`, one row per node, 17 significant digits.
inline void write_snapshot_csv(std::ostream& os, const Field& f) {
  os << "t,x";
  for (std::size_t i = 0; i < f.n_components; ++i) os << ",u" << (i + 1);
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < f.grid.nx; ++k) {
    os << f.t << ',' << f.grid.x(k);
    for (std::size_t i = 0; i < f.n_components; ++i) os << ',' << f.at(i, k);
    os << '\n';
  }
}

/// Writes snap_<index>.csv for each snapshot under `dir`.
inline void write_snapshots(const std::filesystem::path& dir, const std::vector<Field>& snaps) {
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    const auto path = dir / ("snap_" + std::to_string(s) + ".csv");
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    write_snapshot_csv(os, snaps[s]);
  }
}

inline Field read_snapshot_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,x", 0) != 0) throw Error(ErrorCode::ParseError, "snapshot header must start with t,x");
  const std::size_t n = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
  if (n == 0) throw Error(ErrorCode::ParseError, "snapshot has no components");
  std::vector<double> xs;
  std::vector<Vector> rows;
  double t = 0.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Vector vals;
    while (std::getline(ls, cell, ',')) {
      // strtod rather than stod: subnormal values must read back, not throw.
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw Error(ErrorCode::ParseError, "snapshot cell '" + cell + "' is not a number");
      vals.push_back(v);
    }
    if (vals.size() != n + 2) throw Error(ErrorCode::ParseError, "snapshot row has the wrong number of columns");
    t = vals[0];
    xs.push_back(vals[1]);
    rows.emplace_back(vals.begin() + 2, vals.end());
  }
  if (xs.size() < 2) throw Error(ErrorCode::ParseError, "snapshot needs at least two nodes");
  Grid1D g{xs.front(), (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1), xs.size()};
  Field f(g, n);
  f.t = t;
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) f.at(i, k) = rows[k][i];
  return f;
}

/// Reads snap_0.csv, snap_1.csv, ... until the first missing index.
inline std::vector<Field> read_snapshots(const std::filesystem::path& dir) {
  std::vector<Field> out;
  for (std::size_t s = 0;; ++s) {
    std::ifstream is(dir / ("snap_" + std::to_string(s) + ".csv"));
    if (!is) break;
    out.push_back(read_snapshot_csv(is));
  }
  if (out.empty()) throw Error(ErrorCode::IoError, "no snapshots under " + dir.string());
  return out;
}

}  // namespace kppw
