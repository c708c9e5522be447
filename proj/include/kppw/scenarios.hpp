#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kppw/diagnostics.hpp"
#include "kppw/dispersion.hpp"
#include "kppw/error.hpp"
#include "kppw/kinetics.hpp"
#include "kppw/pde_sim.hpp"

namespace kppw {

/// Which diagnostics run_scenario computes and with which thresholds.
struct DiagnosticsConfig {
  std::size_t front_component = kTotal;
  double front_level = 0.1;
  double fit_fraction = 0.5;
  double edge_lo = 1e-8;
  double edge_hi = 1e-4;
  double back_fraction = 0.1;
  bool collinearity = false;       // against n_PF(L)
  double support_threshold = 1e-6;
  double plateau_rel_tol = 1e-2;
  double plateau_abs_tol = 1e-4;
  std::size_t plateau_min_width = 20;
  std::optional<std::size_t> bump_component;
  double bump_half_fraction = 0.5;
  double bump_min_prominence = 1e-3;
  bool bump_over_back = false;     // measure the bump above the back state
  bool operator==(const DiagnosticsConfig&) const = default;
};

struct Scenario {
  std::string name;
  SystemSpec spec;
  Grid1D grid;
  InitialData init;
  double t_end = 0.0;
  double snapshot_every = 1.0;
  WindowPolicy window;
  RunOptions options;
  DiagnosticsConfig diagnostics;
  std::optional<Regime> regime;  // declared two-species regime, checked by validate_scenario
  bool operator==(const Scenario&) const = default;
};

struct ScenarioResult {
  std::vector<Field> snapshots;
  DiagnosticsReport report;
};

enum class ConnectionTag { ZeroToVs, AlphaJToVs, SemiExtinctZeroToAlphaI, Undetermined };

inline const char* to_string(ConnectionTag t) {
  switch (t) {
    case ConnectionTag::ZeroToVs: return "ZeroToVs";
    case ConnectionTag::AlphaJToVs: return "AlphaJToVs";
    case ConnectionTag::SemiExtinctZeroToAlphaI: return "SemiExtinctZeroToAlphaI";
    case ConnectionTag::Undetermined: return "Undetermined";
  }
  return "?";
}

struct SweepRecord {
  double eta = 0.0;
  double c_star_eta = 0.0;
  double measured_speed = std::nan("");
  double bump_amplitude = 0.0;
  double bump_length = 0.0;
  Vector back;
  double xi_rho = std::nan("");
  Vector left_state;   // level of the nearest plateau left of xi_rho
  Vector right_state;  // level of the nearest plateau right of xi_rho
  ConnectionTag tag = ConnectionTag::Undetermined;
};

/// Settings of the eta sweep beyond the base scenario.
struct SweepOptions {
  std::optional<std::size_t> species;  // 0-based i; chosen automatically if empty
  double tag_tolerance = 5e-2;
  bool parallel = true;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig1_bistable",         "fig2_monostable", "h6_collinearity",
                                              "saddle_connection_5_1", "diagonal_5_4",    "pulled_front"};
  return names;
}

namespace detail {

inline SquareMatrix exchange(double eta) { return SquareMatrix{{-eta, eta}, {eta, -eta}}; }

}  // namespace detail

inline constexpr double kFig2DefaultEta = 0.25;

/// Named experiment. `eta` overrides the mutation rate of two-species presets
/// (unit-norm m convention); fig2_monostable defaults to 0.25.
// Interface ramps are 5 dx wide.
inline Scenario preset(std::string_view name, std::optional<double> eta = std::nullopt) {
  Scenario s;
  s.name = std::string(name);
  if (name == "fig1_bistable") {
    // Caption rate 0.025 with m = (1, 1); make_two_species folds |m| into eta.
    s.spec = make_two_species({1.0, 1.5125}, {1.0, 1.0}, 0.025, {1.0, 1.0}, SquareMatrix{{1.0, 20.0}, {110.0, 1.0}});
    s.grid = {0.0, 0.2, 2251};
    s.init = TerracePreset{{{0.0, 60.0, {1.0, 0.0}}, {60.0, 160.0, {0.0, 1.0}}}, 1.0};
    s.t_end = 100.0;
    s.snapshot_every = 5.0;
    s.regime = Regime::Bistable;
  } else if (name == "fig2_monostable") {
    s.spec = with_mutation_rate(
        make_two_species({1.0, 1.0 / 3.0}, {1.0, 6.0}, 1.0, {1.0, 1.0}, SquareMatrix{{1.0, 0.2}, {0.5, 6.0}}),
        kFig2DefaultEta);
    const Vector vm = v_m({1.0, 6.0}, SquareMatrix{{1.0, 0.2}, {0.5, 6.0}});
    s.grid = {0.0, 0.1, 3001};
    s.init = TerracePreset{{{0.0, 20.0, vm}, {20.0, 40.0, {0.0, 1.0}}}, 0.5};
    s.t_end = 40.0;
    s.snapshot_every = 0.5;
    s.window = {WindowPolicy::Kind::FollowFront, kTotal, 0.1, 0.25};
    s.diagnostics.bump_component = 1;
    s.diagnostics.bump_over_back = true;
    s.regime = Regime::Coexistence;
  } else if (name == "h6_collinearity") {
    s.spec.d = {1.0, 1.0};
    s.spec.L = SquareMatrix::identity(2) + detail::exchange(0.2);
    s.spec.law = Separated{{1.0, 1.0}, {1.0, 1.0}};
    s.grid = {0.0, 0.1, 2048};
    s.init = FrontStep{{0.6, 0.2}, 20.0, 0.5};
    s.t_end = 150.0;
    s.snapshot_every = 1.0;
    s.window = {WindowPolicy::Kind::FollowFront, kTotal, 0.1, 0.25};
    s.diagnostics.collinearity = true;
  } else if (name == "saddle_connection_5_1") {
    s.spec = make_two_species({1.0, 1.0}, {1.0, 1.0}, 0.2, {1.0, 1.0}, SquareMatrix{{0.1, 0.9}, {0.9, 0.1}});
    s.grid = {0.0, 0.1, 2048};
    s.init = FrontStep{{1.0, 1.0}, 20.0, 0.5};
    s.t_end = 50.0;
    s.snapshot_every = 1.0;
    s.window = {WindowPolicy::Kind::FollowFront, kTotal, 0.1, 0.25};
    s.regime = Regime::Bistable;
  } else if (name == "diagonal_5_4") {
    s.spec = make_two_species({1.0, 1.0}, {1.0, 1.0}, 0.1, {1.0, 1.0}, SquareMatrix{{1.0, 2.0}, {2.0, 1.0}});
    s.grid = {0.0, 0.1, 2048};
    s.init = FrontStep{{1.0 / 3.0, 1.0 / 3.0}, 20.0, 0.5};
    s.t_end = 50.0;
    s.snapshot_every = 0.5;
    s.regime = Regime::Bistable;
  } else if (name == "pulled_front") {
    s.spec = make_two_species({1.0, 1.0}, {1.0, 1.0}, 0.1, {1.0, 1.0}, SquareMatrix{{1.0, 1.0}, {1.0, 1.0}});
    s.grid = {0.0, 0.1, 4096};
    s.init = CompactBump{20.0, 10.0, {0.5, 0.5}, 0.5};
    s.t_end = 150.0;
    s.snapshot_every = 1.0;
    s.window = {WindowPolicy::Kind::FollowFront, kTotal, 0.1, 0.25};
    s.regime = Regime::Degenerate;
  } else {
    throw Error(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
  }
  if (eta) {
    if (!s.spec.mutation) throw Error(ErrorCode::InvalidInput, "preset '" + s.name + "' has no mutation rate");
    s.spec = with_mutation_rate(s.spec, *eta);
  }
  return s;
}

/// Throws ValidationError unless the spec passes check_hypotheses and, when
/// declared, falls in the declared two-species regime.
inline void validate_scenario(const Scenario& s) {
  const HypothesisReport report = check_hypotheses(s.spec);
  if (!report.all_passed()) throw Error(ErrorCode::ValidationError, report.summary());
  if (s.regime) {
    const auto* lv = std::get_if<LotkaVolterra>(&s.spec.law);
    if (!lv || !s.spec.mutation || s.spec.size() != 2)
      throw Error(ErrorCode::ValidationError, "a regime is declared for a non two-species system");
    const Regime got = classify_two_species(s.spec.mutation->r, lv->C);
    if (got != *s.regime)
      throw Error(ErrorCode::ValidationError,
                  std::string("declared regime ") + to_string(*s.regime) + " but the kinetics are " + to_string(got));
  }
}

/// Diagnostics of a finished run; entries that cannot be computed stay empty.
inline DiagnosticsReport diagnose(const SystemSpec& spec, const std::vector<Field>& snaps, const DiagnosticsConfig& cfg) {
  DiagnosticsReport rep;
  if (snaps.empty()) return rep;
  const Field& last = snaps.back();
  rep.t_final = last.t;
  rep.window_offset = last.window_offset;
  try {
    rep.speed = spreading_speed(track_front(snaps, cfg.front_component, cfg.front_level), cfg.fit_fraction);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientSamples) throw;
  }
  try {
    rep.edge = edge_decay_fit(last, cfg.edge_lo, cfg.edge_hi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EdgeWindowEmpty) throw;
  }
  rep.back = back_state(last, cfg.back_fraction);
  if (cfg.collinearity) rep.collinearity = collinearity_error(last, pf_eigenpair(spec.L).vector, cfg.support_threshold);
  rep.plateaus = plateau_detect(last, cfg.plateau_rel_tol, cfg.plateau_abs_tol, cfg.plateau_min_width);
  if (cfg.bump_component) {
    const std::size_t i = *cfg.bump_component;
    const double base = cfg.bump_over_back ? rep.back.at(i) : 0.0;
    rep.bump = bump_metrics(last, i, cfg.bump_half_fraction, base, cfg.bump_min_prominence);
  }
  return rep;
}

/// pde_sim::run followed by the configured diagnostics. Deterministic.
inline ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult out;
  out.snapshots = run(s.spec, s.grid, s.init, s.t_end, s.snapshot_every, s.window, s.options);
  out.report = diagnose(s.spec, out.snapshots, s.diagnostics);
  return out;
}

/// The species i tracked by the sweep: the one satisfying r_i/r_j > c_ij/c_jj,
/// ties broken by the larger linear spreading speed d_i r_i.
inline std::size_t sweep_species(const SystemSpec& spec) {
  if (!spec.mutation) throw Error(ErrorCode::HypothesisViolated, "the sweep needs a mutation decomposition");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < 2; ++i) {
    try {
      lemma_thresholds(spec, i);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::HypothesisViolated) throw;
      continue;
    }
    const auto& r = spec.mutation->r;
    if (!best || spec.d[i] * r[i] > spec.d[*best] * r[*best]) best = i;
  }
  if (!best) throw Error(ErrorCode::HypothesisViolated, "no species satisfies r_i/r_j > c_ij/c_jj");
  return *best;
}

/// Runs one member of an eta sweep and summarizes it.
inline SweepRecord sweep_member(const Scenario& base, double eta, std::size_t i, const SweepOptions& opt) {
  Scenario s = base;
  s.spec = with_mutation_rate(base.spec, eta);
  s.diagnostics.bump_component = i;
  s.diagnostics.bump_over_back = true;
  const ScenarioResult res = run_scenario(s);
  const Field& last = res.snapshots.back();

  SweepRecord rec;
  rec.eta = eta;
  rec.c_star_eta = minimal_speed({s.spec.d, s.spec.L}).c_star;
  if (res.report.speed) rec.measured_speed = *res.report.speed;
  rec.bump_amplitude = res.report.bump->amplitude;
  rec.bump_length = res.report.bump->length;
  rec.back = res.report.back;

  const std::size_t j = 1 - i;
  const Vector vs = stable_back_state(s.spec, i);
  const double rho = std::min(lemma_thresholds(s.spec, i).rho, vs[i]);
  rec.xi_rho = front_position(last, i, rho);
  if (!std::isfinite(rec.xi_rho)) return rec;
  const DiagnosticsConfig& dc = s.diagnostics;
  for (const Plateau& p : plateau_detect(last, dc.plateau_rel_tol, dc.plateau_abs_tol, dc.plateau_min_width)) {
    if (p.x_hi <= rec.xi_rho) rec.left_state = p.level;
    else if (p.x_lo >= rec.xi_rho && rec.right_state.empty()) rec.right_state = p.level;
  }
  if (rec.left_state.empty() || rec.right_state.empty()) return rec;

  const double ai = carrying_capacity(s.spec, i), aj = carrying_capacity(s.spec, j);
  Vector zero(2, 0.0), alpha_i(2, 0.0), alpha_j(2, 0.0);
  alpha_i[i] = ai;
  alpha_j[j] = aj;
  auto near = [&](const Vector& a, const Vector& b) { return distance_inf(a, b) <= opt.tag_tolerance; };
  if (near(rec.left_state, vs) && near(rec.right_state, zero)) rec.tag = ConnectionTag::ZeroToVs;
  else if (near(rec.left_state, vs) && near(rec.right_state, alpha_j)) rec.tag = ConnectionTag::AlphaJToVs;
  else if (near(rec.left_state, alpha_i) && near(rec.right_state, zero)) rec.tag = ConnectionTag::SemiExtinctZeroToAlphaI;
  return rec;
}

/// Runs the base scenario for each eta as independent tasks and returns the
/// records in the order of `etas`. The list is normally descending; any order
/// of distinct values is accepted and gives the same record per eta.
inline std::vector<SweepRecord> sweep_eta(const Scenario& base, const std::vector<double>& etas,
                                          const SweepOptions& opt = {}) {
  if (etas.empty()) throw Error(ErrorCode::InvalidInput, "empty eta list");
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (!(etas[k] > 0.0)) throw Error(ErrorCode::InvalidInput, "eta must be positive");
    if (std::count(etas.begin(), etas.end(), etas[k]) > 1) throw Error(ErrorCode::InvalidInput, "eta values must be distinct");
  }
  if (!std::holds_alternative<LotkaVolterra>(base.spec.law) || base.spec.size() != 2)
    throw Error(ErrorCode::InvalidInput, "the eta sweep needs a two-species Lotka-Volterra scenario");
  const std::size_t i = opt.species ? *opt.species : sweep_species(base.spec);
  if (i > 1) throw Error(ErrorCode::InvalidInput, "species index must be 0 or 1");

  std::vector<SweepRecord> out;
  if (!opt.parallel) {
    for (double eta : etas) out.push_back(sweep_member(base, eta, i, opt));
    return out;
  }
  std::vector<std::future<SweepRecord>> tasks;
  for (double eta : etas) tasks.push_back(std::async(std::launch::async, sweep_member, std::cref(base), eta, i, std::cref(opt)));
  for (auto& t : tasks) out.push_back(t.get());
  return out;
}

/// `eta,c_star_eta,measured_speed,bump_amplitude,bump_length,back_u1,...,back_uN,tag`.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  const auto saved = os.precision(17);
  const std::size_t n = records.empty() ? 0 : records.front().back.size();
  os << "eta,c_star_eta,measured_speed,bump_amplitude,bump_length";
  for (std::size_t i = 0; i < n; ++i) os << ",back_u" << (i + 1);
  os << ",tag\n";
  for (const auto& r : records) {
    os << r.eta << ',' << r.c_star_eta << ',' << r.measured_speed << ',' << r.bump_amplitude << ',' << r.bump_length;
    for (double v : r.back) os << ',' << v;
    os << ',' << to_string(r.tag) << '\n';
  }
  os.precision(saved);
}

}  // namespace kppw
