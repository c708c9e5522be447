#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kppw/error.hpp"
#include "kppw/kinetics.hpp"
#include "kppw/pde_sim.hpp"
#include "kppw/scenarios.hpp"

namespace kppw {

/// A scenario plus where its output goes.
struct RunConfig {
  Scenario scenario;
  std::string output_dir = "out";
  bool operator==(const RunConfig&) const = default;
};

namespace config_detail {

struct Entry {
  std::string value;
  int line = 0;
};

// section -> key -> entries (only `band` may repeat)
using Table = std::map<std::string, std::map<std::string, std::vector<Entry>>>;

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"scenario", {"name", "preset", "eta", "regime"}},
      {"system", {"d", "L", "r", "eta", "m"}},
      {"law", {"kind", "C", "a", "b"}},
      {"grid", {"x_left", "dx", "nx"}},
      {"init", {"kind", "level", "interface", "width", "center", "height", "ramp", "band", "smoothing"}},
      {"time", {"T", "snapshot_every", "scheme", "u_cap"}},
      {"window", {"kind", "component", "level", "margin"}},
      {"diagnostics",
       {"front_component", "front_level", "fit_fraction", "edge_lo", "edge_hi", "back_fraction", "collinearity",
        "support_threshold", "plateau_rel_tol", "plateau_abs_tol", "plateau_min_width", "bump_component",
        "bump_half_fraction", "bump_min_prominence", "bump_over_back"}},
      {"output", {"dir"}},
  };
  return s;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void fail(int line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
}

inline Table tokenize(std::string_view text) {
  Table t;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!schema().contains(section)) fail(line_no, "unknown section [" + section + "]");
      t[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) fail(line_no, "key '" + key + "' outside any section");
    if (!schema().at(section).contains(key)) fail(line_no, "unknown key '" + key + "' in [" + section + "]");
    auto& slot = t[section][key];
    if (!slot.empty() && key != "band") fail(line_no, "duplicate key '" + key + "' in [" + section + "]");
    slot.push_back({value, line_no});
  }
  return t;
}

inline double parse_double(std::string_view s, int line) {
  const std::string v = trim(s);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) fail(line, "not a number: '" + v + "'");
  return out;
}

inline Vector parse_vector(std::string_view s, int line) {
  Vector out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = s.find(',', pos);
    out.push_back(parse_double(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos), line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::size_t parse_size(std::string_view s, int line) {
  const std::string v = trim(s);
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) fail(line, "not a nonnegative integer: '" + v + "'");
  return out;
}

// `n; a11, a12, ..., ann`
inline SquareMatrix parse_matrix(std::string_view s, int line) {
  const auto semi = s.find(';');
  if (semi == std::string_view::npos) fail(line, "matrix needs the form 'n; a11, a12, ...'");
  const std::size_t n = parse_size(s.substr(0, semi), line);
  const Vector vals = parse_vector(s.substr(semi + 1), line);
  if (n == 0 || vals.size() != n * n) fail(line, "matrix of dimension " + std::to_string(n) + " needs n^2 entries");
  return SquareMatrix::from_row_major(n, vals);
}

inline bool parse_bool(std::string_view s, int line) {
  const std::string v = trim(s);
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line, "expected true or false, got '" + v + "'");
}

// "total" or a 1-based component index.
inline std::size_t parse_component(std::string_view s, int line) {
  const std::string v = trim(s);
  if (v == "total") return kTotal;
  const std::size_t k = parse_size(v, line);
  if (k == 0) fail(line, "component indices are 1-based");
  return k - 1;
}

inline std::optional<Regime> parse_regime(const std::string& v, int line) {
  for (Regime r : {Regime::Extinction2, Regime::Coexistence, Regime::Bistable, Regime::Extinction1, Regime::Degenerate})
    if (v == to_string(r)) return r;
  if (v == "none") return std::nullopt;
  fail(line, "unknown regime '" + v + "'");
}

class Reader {
 public:
  explicit Reader(const Table& t) : t_(t) {}

  const Entry* get(const std::string& section, const std::string& key) const {
    const auto s = t_.find(section);
    if (s == t_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second.front();
  }
  bool has(const std::string& section) const { return t_.contains(section); }

  template <typename F>
  void with(const std::string& section, const std::string& key, F&& f) const {
    if (const Entry* e = get(section, key)) f(e->value, e->line);
  }

  void number(const std::string& section, const std::string& key, double& out) const {
    with(section, key, [&](const std::string& v, int l) { out = parse_double(v, l); });
  }

  const std::vector<Entry>* all(const std::string& section, const std::string& key) const {
    const auto s = t_.find(section);
    if (s == t_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

 private:
  const Table& t_;
};

inline int line_of(const Reader& rd, const std::string& section, const std::string& key) {
  const Entry* e = rd.get(section, key);
  return e ? e->line : 0;
}

inline void parse_system(const Reader& rd, Scenario& s, bool from_preset) {
  const bool any_system = rd.has("system") || rd.has("law");
  if (!any_system && from_preset) return;
  if (!rd.get("system", "d")) fail(0, "[system] d is required");

  const Entry* d = rd.get("system", "d");
  Vector dv = parse_vector(d->value, d->line);

  std::string kind = "lotka_volterra";
  rd.with("law", "kind", [&](const std::string& v, int l) {
    if (v != "lotka_volterra" && v != "separated") fail(l, "law kind must be lotka_volterra or separated");
    kind = v;
  });
  CompetitionLaw law;
  if (kind == "lotka_volterra") {
    const Entry* c = rd.get("law", "C");
    if (!c) fail(0, "[law] C is required for lotka_volterra");
    if (rd.get("law", "a") || rd.get("law", "b")) fail(line_of(rd, "law", rd.get("law", "a") ? "a" : "b"), "a and b belong to the separated law");
    law = LotkaVolterra{parse_matrix(c->value, c->line)};
  } else {
    const Entry* a = rd.get("law", "a");
    const Entry* b = rd.get("law", "b");
    if (!a || !b) fail(0, "[law] a and b are required for the separated law");
    if (rd.get("law", "C")) fail(line_of(rd, "law", "C"), "C belongs to the lotka_volterra law");
    law = Separated{parse_vector(a->value, a->line), parse_vector(b->value, b->line)};
  }

  const Entry* l = rd.get("system", "L");
  const Entry* r = rd.get("system", "r");
  const Entry* eta = rd.get("system", "eta");
  const Entry* m = rd.get("system", "m");
  const bool has_decomp = r || eta || m;
  if (has_decomp && !(r && eta && m)) fail((r ? r : eta ? eta : m)->line, "r, eta and m must be given together");
  if (!has_decomp && !l) fail(0, "[system] needs L or the triple r, eta, m");

  SystemSpec spec;
  if (has_decomp) {
    const auto* lv = std::get_if<LotkaVolterra>(&law);
    if (!lv) fail(r->line, "the r, eta, m decomposition needs the lotka_volterra law");
    try {
      spec = make_two_species(dv, parse_vector(r->value, r->line), parse_double(eta->value, eta->line),
                              parse_vector(m->value, m->line), lv->C);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidInput) throw Error(ErrorCode::ValidationError, e.what());
      throw;
    }
    if (l) {
      const SquareMatrix given = parse_matrix(l->value, l->line);
      const double scale = std::max(1.0, spec.L.norm_inf());
      bool same = given.size() == spec.L.size();
      for (std::size_t i = 0; same && i < given.size(); ++i)
        for (std::size_t j = 0; j < given.size(); ++j) same = same && std::abs(given(i, j) - spec.L(i, j)) <= 1e-12 * scale;
      if (!same) throw Error(ErrorCode::ValidationError, "L does not match diag(r) + eta M diag(m)");
    }
  } else {
    spec.d = dv;
    spec.L = parse_matrix(l->value, l->line);
    spec.law = law;
  }
  s.spec = std::move(spec);
}

inline InitialData parse_init(const Reader& rd, const Scenario& s, int& line) {
  std::string kind;
  rd.with("init", "kind", [&](const std::string& v, int l) { kind = v, line = l; });
  auto vec = [&](const char* key) -> Vector {
    const Entry* e = rd.get("init", key);
    if (!e) fail(line, std::string("[init] ") + key + " is required for kind " + kind);
    return parse_vector(e->value, e->line);
  };
  auto num = [&](const char* key, double fallback) {
    double v = fallback;
    rd.number("init", key, v);
    return v;
  };
  if (kind == "front_step") {
    return FrontStep{vec("level"), num("interface", s.grid.x_left + 0.1 * s.grid.length()), num("width", 0.0)};
  }
  if (kind == "compact_bump") {
    return CompactBump{num("center", s.grid.x_left + 0.1 * s.grid.length()), num("width", 1.0), vec("height"),
                       num("ramp", 0.0)};
  }
  if (kind == "terrace") {
    TerracePreset tp;
    tp.smoothing = num("smoothing", 0.0);
    const auto* bands = rd.all("init", "band");
    if (!bands) fail(line, "[init] terrace needs at least one band = lo, hi; v1, ..., vN");
    for (const Entry& b : *bands) {
      const auto semi = b.value.find(';');
      if (semi == std::string::npos) fail(b.line, "band needs the form 'lo, hi; v1, ..., vN'");
      const Vector range = parse_vector(std::string_view(b.value).substr(0, semi), b.line);
      if (range.size() != 2) fail(b.line, "band range needs exactly two numbers");
      tp.bands.push_back({range[0], range[1], parse_vector(std::string_view(b.value).substr(semi + 1), b.line)});
    }
    return tp;
  }
  fail(line, "init kind must be front_step, compact_bump or terrace");
}

inline void parse_rest(const Reader& rd, Scenario& s, bool from_preset) {
  rd.with("scenario", "name", [&](const std::string& v, int) { s.name = v; });
  rd.with("scenario", "regime", [&](const std::string& v, int l) { s.regime = parse_regime(v, l); });

  rd.number("grid", "x_left", s.grid.x_left);
  rd.number("grid", "dx", s.grid.dx);
  rd.with("grid", "nx", [&](const std::string& v, int l) { s.grid.nx = parse_size(v, l); });

  if (rd.get("init", "kind")) {
    int line = 0;
    s.init = parse_init(rd, s, line);
  } else if (rd.has("init")) {
    fail(0, "[init] kind is required");
  } else if (!from_preset) {
    s.init = FrontStep{Vector(s.spec.size(), 1.0), s.grid.x_left + 0.1 * s.grid.length(), 0.0};
  }

  rd.number("time", "T", s.t_end);
  rd.number("time", "snapshot_every", s.snapshot_every);
  rd.with("time", "scheme", [&](const std::string& v, int l) {
    if (v == "explicit_euler") s.options.scheme = TimeScheme::ExplicitEuler;
    else if (v == "imex") s.options.scheme = TimeScheme::Imex;
    else fail(l, "scheme must be explicit_euler or imex");
  });
  rd.with("time", "u_cap", [&](const std::string& v, int l) {
    if (v == "auto") s.options.u_cap.reset();
    else s.options.u_cap = parse_double(v, l);
  });

  rd.with("window", "kind", [&](const std::string& v, int l) {
    if (v == "off") s.window.kind = WindowPolicy::Kind::Off;
    else if (v == "follow_front") s.window.kind = WindowPolicy::Kind::FollowFront;
    else fail(l, "window kind must be off or follow_front");
  });
  rd.with("window", "component", [&](const std::string& v, int l) { s.window.component = parse_component(v, l); });
  rd.number("window", "level", s.window.level);
  rd.number("window", "margin", s.window.margin);

  auto& dc = s.diagnostics;
  rd.with("diagnostics", "front_component", [&](const std::string& v, int l) { dc.front_component = parse_component(v, l); });
  rd.number("diagnostics", "front_level", dc.front_level);
  rd.number("diagnostics", "fit_fraction", dc.fit_fraction);
  rd.number("diagnostics", "edge_lo", dc.edge_lo);
  rd.number("diagnostics", "edge_hi", dc.edge_hi);
  rd.number("diagnostics", "back_fraction", dc.back_fraction);
  rd.with("diagnostics", "collinearity", [&](const std::string& v, int l) { dc.collinearity = parse_bool(v, l); });
  rd.number("diagnostics", "support_threshold", dc.support_threshold);
  rd.number("diagnostics", "plateau_rel_tol", dc.plateau_rel_tol);
  rd.number("diagnostics", "plateau_abs_tol", dc.plateau_abs_tol);
  rd.with("diagnostics", "plateau_min_width", [&](const std::string& v, int l) { dc.plateau_min_width = parse_size(v, l); });
  rd.with("diagnostics", "bump_component", [&](const std::string& v, int l) {
    if (v == "none") {
      dc.bump_component.reset();
      return;
    }
    const std::size_t c = parse_component(v, l);
    if (c == kTotal) fail(l, "bump_component must be a component index or none");
    dc.bump_component = c;
  });
  rd.number("diagnostics", "bump_half_fraction", dc.bump_half_fraction);
  rd.number("diagnostics", "bump_min_prominence", dc.bump_min_prominence);
  rd.with("diagnostics", "bump_over_back", [&](const std::string& v, int l) { dc.bump_over_back = parse_bool(v, l); });
}

// Range checks on the non-spec blocks.
inline void check_run_blocks(const Scenario& s) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); };
  const std::size_t n = s.spec.size();
  if (!(s.grid.dx > 0.0) || s.grid.nx < 16) bad("grid needs dx > 0 and nx >= 16");
  if (!(s.t_end >= 0.0)) bad("T must be nonnegative");
  if (!(s.snapshot_every > 0.0)) bad("snapshot_every must be positive");
  if (s.options.u_cap && !(*s.options.u_cap > 0.0)) bad("u_cap must be positive");
  if (!(s.window.margin > 0.0 && s.window.margin < 1.0)) bad("window margin must lie in (0, 1)");
  if (!(s.window.level > 0.0)) bad("window level must be positive");
  if (s.window.component != kTotal && s.window.component >= n) bad("window component out of range");
  const auto& dc = s.diagnostics;
  if (dc.front_component != kTotal && dc.front_component >= n) bad("front_component out of range");
  if (dc.bump_component && *dc.bump_component >= n) bad("bump_component out of range");
  if (!(dc.edge_lo > 0.0 && dc.edge_lo < dc.edge_hi)) bad("edge thresholds need 0 < edge_lo < edge_hi");
  if (!(dc.back_fraction > 0.0 && dc.back_fraction <= 0.5)) bad("back_fraction must lie in (0, 0.5]");
  if (!(dc.fit_fraction > 0.0 && dc.fit_fraction <= 1.0)) bad("fit_fraction must lie in (0, 1]");
  const std::size_t init_n = std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FrontStep>) return d.level.size();
        else if constexpr (std::is_same_v<T, CompactBump>) return d.height.size();
        else {
          for (const auto& b : d.bands)
            if (b.level.size() != d.bands.front().level.size()) return 0;
          return d.bands.empty() ? 0 : d.bands.front().level.size();
        }
      },
      s.init);
  if (init_n != n) bad("initial data must have one value per component");
}

}  // namespace config_detail

/// Parses the INI-like run configuration. Sections:
///   [scenario] name, preset, eta, regime
///   [system]   d, L (matrix) or r, eta, m (two species)
///   [law]      kind = lotka_volterra (C) | separated (a, b)
///   [grid]     x_left, dx, nx
///   [init]     kind = front_step (level, interface, width) |
///              compact_bump (center, width, height, ramp) |
///              terrace (band = lo, hi; v1, ..., vN, repeated; smoothing)
///   [time]     T, snapshot_every, scheme = explicit_euler | imex, u_cap
///   [window]   kind = off | follow_front, component, level, margin
///   [diagnostics] thresholds, see DiagnosticsConfig
///   [output]   dir
/// Vectors are comma lists; matrices are `n; a11, a12, ...` row-major.
/// Comments start with '#'. Unknown sections or keys are ParseErrors.
inline RunConfig parse_config(std::string_view text) {
  using namespace config_detail;
  const Table table = tokenize(text);
  const Reader rd(table);

  RunConfig cfg;
  Scenario& s = cfg.scenario;
  s.grid = {0.0, 0.1, 2048};
  s.t_end = 10.0;
  bool from_preset = false;
  if (const Entry* p = rd.get("scenario", "preset")) {
    std::optional<double> eta;
    rd.with("scenario", "eta", [&](const std::string& v, int l) { eta = parse_double(v, l); });
    try {
      s = preset(p->value, eta);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownPreset) fail(p->line, e.what());
      throw;
    }
    from_preset = true;
  } else if (const Entry* e = rd.get("scenario", "eta")) {
    fail(e->line, "[scenario] eta only applies together with preset");
  }

  parse_system(rd, s, from_preset);
  parse_rest(rd, s, from_preset);
  rd.with("output", "dir", [&](const std::string& v, int) { cfg.output_dir = v; });

  validate_scenario(s);
  check_run_blocks(s);
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace config_detail {

inline void write_vector(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
}

inline void write_matrix(std::ostream& os, const SquareMatrix& m) {
  os << m.size() << "; ";
  write_vector(os, m.row_major());
}

inline void write_component(std::ostream& os, std::size_t c) {
  if (c == kTotal) os << "total";
  else os << c + 1;
}

}  // namespace config_detail

/// Writes a config that parse_config reads back to an identical RunConfig
/// (17 significant digits; both L and its decomposition when present).
inline void serialize_config(std::ostream& os, const RunConfig& cfg) {
  using namespace config_detail;
  const auto saved = os.precision(17);
  const Scenario& s = cfg.scenario;
  os << "[scenario]\nname = " << s.name << "\nregime = " << (s.regime ? to_string(*s.regime) : "none") << "\n\n";

  os << "[system]\nd = ";
  write_vector(os, s.spec.d);
  os << "\nL = ";
  write_matrix(os, s.spec.L);
  if (s.spec.mutation) {
    os << "\nr = ";
    write_vector(os, s.spec.mutation->r);
    os << "\neta = " << s.spec.mutation->eta << "\nm = ";
    write_vector(os, s.spec.mutation->m);
  }
  os << "\n\n[law]\n";
  if (const auto* lv = std::get_if<LotkaVolterra>(&s.spec.law)) {
    os << "kind = lotka_volterra\nC = ";
    write_matrix(os, lv->C);
  } else {
    const auto& sep = std::get<Separated>(s.spec.law);
    os << "kind = separated\na = ";
    write_vector(os, sep.a);
    os << "\nb = ";
    write_vector(os, sep.b);
  }

  os << "\n\n[grid]\nx_left = " << s.grid.x_left << "\ndx = " << s.grid.dx << "\nnx = " << s.grid.nx << "\n\n[init]\n";
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FrontStep>) {
          os << "kind = front_step\nlevel = ";
          write_vector(os, d.level);
          os << "\ninterface = " << d.interface << "\nwidth = " << d.width << '\n';
        } else if constexpr (std::is_same_v<T, CompactBump>) {
          os << "kind = compact_bump\ncenter = " << d.center << "\nwidth = " << d.width << "\nheight = ";
          write_vector(os, d.height);
          os << "\nramp = " << d.ramp << '\n';
        } else {
          os << "kind = terrace\nsmoothing = " << d.smoothing << '\n';
          for (const auto& b : d.bands) {
            os << "band = " << b.x_lo << ", " << b.x_hi << "; ";
            write_vector(os, b.level);
            os << '\n';
          }
        }
      },
      s.init);

  os << "\n[time]\nT = " << s.t_end << "\nsnapshot_every = " << s.snapshot_every
     << "\nscheme = " << (s.options.scheme == TimeScheme::Imex ? "imex" : "explicit_euler") << "\nu_cap = ";
  if (s.options.u_cap) os << *s.options.u_cap;
  else os << "auto";

  os << "\n\n[window]\nkind = " << (s.window.kind == WindowPolicy::Kind::FollowFront ? "follow_front" : "off")
     << "\ncomponent = ";
  write_component(os, s.window.component);
  os << "\nlevel = " << s.window.level << "\nmargin = " << s.window.margin << "\n\n";

  const auto& dc = s.diagnostics;
  os << "[diagnostics]\nfront_component = ";
  write_component(os, dc.front_component);
  os << "\nfront_level = " << dc.front_level << "\nfit_fraction = " << dc.fit_fraction << "\nedge_lo = " << dc.edge_lo
     << "\nedge_hi = " << dc.edge_hi << "\nback_fraction = " << dc.back_fraction
     << "\ncollinearity = " << (dc.collinearity ? "true" : "false") << "\nsupport_threshold = " << dc.support_threshold
     << "\nplateau_rel_tol = " << dc.plateau_rel_tol << "\nplateau_abs_tol = " << dc.plateau_abs_tol
     << "\nplateau_min_width = " << dc.plateau_min_width << "\nbump_component = ";
  if (dc.bump_component) os << *dc.bump_component + 1;
  else os << "none";
  os << "\nbump_half_fraction = " << dc.bump_half_fraction << "\nbump_min_prominence = " << dc.bump_min_prominence
     << "\nbump_over_back = " << (dc.bump_over_back ? "true" : "false") << "\n\n";

  os << "[output]\ndir = " << cfg.output_dir << '\n';
  os.precision(saved);
}

inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  serialize_config(os, cfg);
  return os.str();
}

}  // namespace kppw
