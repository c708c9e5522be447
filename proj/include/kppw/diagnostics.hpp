#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kppw/error.hpp"
#include "kppw/field.hpp"
#include "kppw/matrix.hpp"

namespace kppw {

struct FrontTrack {
  std::vector<double> times;
  std::vector<double> positions;
  std::size_t component = kTotal;
};

/// Front positions across snapshots. Snapshots where the level is never
/// reached are skipped.
inline FrontTrack track_front(const std::vector<Field>& snaps, std::size_t component, double level) {
  FrontTrack tr;
  tr.component = component;
  for (const Field& f : snaps) {
    const double x = front_position(f, component, level);
    if (!std::isfinite(x)) continue;
    tr.times.push_back(f.t);
    tr.positions.push_back(x);
  }
  return tr;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) mx += x[k], my += y[k];
  mx /= n, my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - (fit.intercept + fit.slope * x[k]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

/// Least-squares slope of position against time over the last `fraction` of samples.
inline double spreading_speed(const FrontTrack& track, double fraction = 0.5) {
  const std::size_t n = track.times.size();
  const std::size_t first = n - static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n - first < 10) throw Error(ErrorCode::InsufficientSamples, "need at least 10 front samples in the fit window");
  return least_squares_line(std::span(track.times).subspan(first), std::span(track.positions).subspan(first)).slope;
}

struct EdgeFit {
  double mu_hat = 0.0;
  Vector direction_hat;
  double r_squared = 0.0;
  double u_lo = 0.0;
  double u_hi = 0.0;
  std::size_t nodes = 0;
};

/// Exponential fit of the leading edge: over the contiguous nodes right of
/// the front where sum_i u_i lies in (u_lo, u_hi), mu_hat is minus the slope of
/// log sum_i u_i against x and direction_hat the renormalized mean of u/|u|.
inline EdgeFit edge_decay_fit(const Field& f, double u_lo = 1e-8, double u_hi = 1e-4) {
  const std::size_t nx = f.grid.nx;
  std::size_t start = 0;
  for (std::size_t k = nx; k-- > 0;)
    if (f.total(k) >= u_hi) {
      start = k + 1;
      break;
    }
  std::vector<double> xs, logs;
  Vector dir(f.n_components, 0.0);
  for (std::size_t k = start; k < nx; ++k) {
    const double s = f.total(k);
    if (!(s > u_lo && s < u_hi)) break;
    xs.push_back(f.grid.x(k));
    logs.push_back(std::log(s));
    const Vector u = f.node(k);
    const double norm = norm2(u);
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] += u[i] / norm;
  }
  if (xs.size() < 3) throw Error(ErrorCode::EdgeWindowEmpty, "no edge window between the thresholds; enlarge the domain");
  const LineFit fit = least_squares_line(xs, logs);
  const double norm = norm2(dir);
  for (double& v : dir) v /= norm;
  return {-fit.slope, dir, fit.r_squared, u_lo, u_hi, xs.size()};
}

/// Componentwise mean over the leftmost `fraction` of nodes, counting nodes
/// already dropped by a moving window.
inline Vector back_state(const Field& f, double fraction = 0.1) {
  if (!(fraction > 0.0 && fraction <= 0.5)) throw Error(ErrorCode::InvalidInput, "back fraction must lie in (0, 0.5]");
  const std::size_t total = f.frozen_back.size() + f.grid.nx;
  const std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(total)));
  Vector mean(f.n_components, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t i = 0; i < f.n_components; ++i)
      mean[i] += k < f.frozen_back.size() ? f.frozen_back[k][i] : f.at(i, k - f.frozen_back.size());
  }
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

/// Largest sine of the angle between u(x) and n over nodes with sum_i u_i above the threshold.
inline double collinearity_error(const Field& f, const Vector& n, double support_threshold) {
  const double nn = norm2(n);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.grid.nx; ++k) {
    if (!(f.total(k) > support_threshold)) continue;
    const Vector u = f.node(k);
    const double nu = norm2(u);
    const double c = std::clamp(dot(u, n) / (nu * nn), -1.0, 1.0);
    worst = std::max(worst, std::sqrt(std::max(0.0, 1.0 - c * c)));
  }
  return worst;
}

struct Plateau {
  double x_lo = 0.0;
  double x_hi = 0.0;
  std::size_t first = 0;
  std::size_t last = 0;
  Vector level;
  double deviation = 0.0;
};

/// Greedy left-to-right scan for maximal runs of at least `min_width` nodes
/// whose componentwise range stays within rel_tol |u|_inf + abs_tol.
inline std::vector<Plateau> plateau_detect(const Field& f, double rel_tol = 1e-2, double abs_tol = 1e-4,
                                           std::size_t min_width = 20) {
  const std::size_t nx = f.grid.nx, n = f.n_components;
  std::vector<Plateau> out;
  std::size_t start = 0;
  while (start < nx) {
    Vector lo = f.node(start), hi = lo;
    std::size_t end = start + 1;
    for (; end < nx; ++end) {
      bool ok = true;
      Vector nlo = lo, nhi = hi;
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nlo[i] = std::min(nlo[i], f.at(i, end));
        nhi[i] = std::max(nhi[i], f.at(i, end));
        mag = std::max({mag, std::abs(nlo[i]), std::abs(nhi[i])});
      }
      const double tol = rel_tol * mag + abs_tol;
      for (std::size_t i = 0; i < n && ok; ++i) ok = nhi[i] - nlo[i] <= tol;
      if (!ok) break;
      lo = std::move(nlo);
      hi = std::move(nhi);
    }
    if (end - start >= min_width) {
      Plateau p;
      p.first = start;
      p.last = end - 1;
      p.x_lo = f.grid.x(start);
      p.x_hi = f.grid.x(end - 1);
      p.level.assign(n, 0.0);
      for (std::size_t k = start; k < end; ++k)
        for (std::size_t i = 0; i < n; ++i) p.level[i] += f.at(i, k);
      for (double& v : p.level) v /= static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k)
        for (std::size_t i = 0; i < n; ++i) p.deviation = std::max(p.deviation, std::abs(f.at(i, k) - p.level[i]));
      out.push_back(std::move(p));
      start = end;
    } else {
      ++start;
    }
  }
  return out;
}

struct BumpMetrics {
  double amplitude = 0.0;
  double length = 0.0;
};

/// Amplitude max_x u_i and the measure of {x : u_i(x) >= h} for the piecewise
/// linear interpolant, h = baseline + half_fraction (amplitude - baseline).
/// A bump with prominence below `min_prominence` over the baseline has length 0.
inline BumpMetrics bump_metrics(const Field& f, std::size_t i, double half_fraction = 0.5, double baseline = 0.0,
                                double min_prominence = 0.0) {
  if (i >= f.n_components) throw Error(ErrorCode::InvalidInput, "component index out of range");
  const auto u = f.component(i);
  BumpMetrics out;
  out.amplitude = *std::max_element(u.begin(), u.end());
  if (!(out.amplitude > baseline) || out.amplitude - baseline <= min_prominence) return {out.amplitude, 0.0};
  const double h = baseline + half_fraction * (out.amplitude - baseline);
  const double dx = f.grid.dx;
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    const double a = u[k] - h, b = u[k + 1] - h;
    if (a >= 0.0 && b >= 0.0) out.length += dx;
    else if (a >= 0.0) out.length += dx * a / (a - b);
    else if (b >= 0.0) out.length += dx * b / (b - a);
  }
  return out;
}

/// Flat key = value summary of one run.
struct DiagnosticsReport {
  double t_final = 0.0;
  std::optional<double> speed;
  std::optional<EdgeFit> edge;
  Vector back;
  std::optional<double> collinearity;
  std::vector<Plateau> plateaus;
  std::optional<BumpMetrics> bump;
  long window_offset = 0;

  void write(std::ostream& os) const {
    const auto saved = os.precision(17);
    auto opt = [&](const char* key, const std::optional<double>& v) {
      os << key << " = ";
      if (v) os << *v;
      else os << "nan";
      os << '\n';
    };
    os << "t_final = " << t_final << '\n';
    os << "window_offset = " << window_offset << '\n';
    opt("speed", speed);
    opt("mu_hat", edge ? std::optional<double>(edge->mu_hat) : std::nullopt);
    opt("edge_r_squared", edge ? std::optional<double>(edge->r_squared) : std::nullopt);
    if (edge)
      for (std::size_t i = 0; i < edge->direction_hat.size(); ++i)
        os << "direction_" << (i + 1) << " = " << edge->direction_hat[i] << '\n';
    for (std::size_t i = 0; i < back.size(); ++i) os << "back_" << (i + 1) << " = " << back[i] << '\n';
    opt("collinearity", collinearity);
    if (bump) os << "bump_amplitude = " << bump->amplitude << "\nbump_length = " << bump->length << '\n';
    os << "plateau_count = " << plateaus.size() << '\n';
    for (std::size_t p = 0; p < plateaus.size(); ++p) {
      const auto& pl = plateaus[p];
      os << "plateau_" << (p + 1) << "_x_lo = " << pl.x_lo << '\n';
      os << "plateau_" << (p + 1) << "_x_hi = " << pl.x_hi << '\n';
      for (std::size_t i = 0; i < pl.level.size(); ++i)
        os << "plateau_" << (p + 1) << "_level_" << (i + 1) << " = " << pl.level[i] << '\n';
      os << "plateau_" << (p + 1) << "_deviation = " << pl.deviation << '\n';
    }
    os.precision(saved);
  }

  std::string to_string() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }
};

}  // namespace kppw
