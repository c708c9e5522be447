#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kppw/kppw.hpp"

namespace kppw::cli {

/// Where a command takes its system from: a preset, a config file, or flags.
struct Source {
  std::string preset;
  std::optional<double> eta;
  std::string config;
};

inline void add_source(CLI::App* cmd, Source& src) {
  cmd->add_option("--preset", src.preset, "preset name (see preset-list)");
  cmd->add_option("--eta", src.eta, "mutation rate override for two-species presets (unit-norm m)");
  cmd->add_option("--config", src.config, "run configuration file");
}

inline std::optional<RunConfig> resolve(const Source& src) {
  if (!src.preset.empty() && !src.config.empty())
    throw Error(ErrorCode::InvalidInput, "give either --preset or --config, not both");
  if (!src.config.empty()) {
    RunConfig cfg = load_config(src.config);
    if (src.eta) cfg.scenario.spec = with_mutation_rate(cfg.scenario.spec, *src.eta);
    return cfg;
  }
  if (!src.preset.empty()) {
    RunConfig cfg{preset(src.preset, src.eta), "out"};
    validate_scenario(cfg.scenario);
    return cfg;
  }
  return std::nullopt;
}

inline Vector parse_list(const std::string& s) { return config_detail::parse_vector(s, 0); }

inline void print_vector(std::ostream& os, const Vector& v) {
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
}

inline std::filesystem::path output_dir(const std::string& configured) {
  if (const char* env = std::getenv("KPPW_OUT_DIR"); env && *env) return env;
  return configured;
}

/// 0 on success, 1 on invalid input or configuration, 2 on runtime failure.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::NotIrreducible:
    case ErrorCode::SingularC:
    case ErrorCode::NonPositiveLambdaA:
    case ErrorCode::HypothesisViolated:
    case ErrorCode::IntervalOutOfRange:
    case ErrorCode::UnknownPreset:
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::NoRealRoots:
      return 1;
    default:
      return 2;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral quantities and front simulations for KPP reaction-diffusion systems", "kppw"};
  app.require_subcommand(1);

  // speed
  Source speed_src;
  std::string speed_d, speed_l;
  std::optional<double> speed_c;
  auto* speed = app.add_subcommand("speed", "minimal speed c*, mu*, and decay roots at --c");
  add_source(speed, speed_src);
  speed->add_option("--d", speed_d, "diffusion rates, comma separated");
  speed->add_option("--L", speed_l, "interaction matrix 'n; a11, a12, ...'");
  speed->add_option("--c", speed_c, "speed at which to solve lambda_PF(mu^2 D + L) = c mu");

  // steady
  Source steady_src;
  auto* steady = app.add_subcommand("steady", "constant steady states with stability tags");
  add_source(steady, steady_src);

  // classify
  Source classify_src;
  std::string classify_r, classify_c;
  auto* classify = app.add_subcommand("classify", "two-species Lotka-Volterra regime");
  add_source(classify, classify_src);
  classify->add_option("--r", classify_r, "growth rates r1,r2");
  classify->add_option("--C", classify_c, "competition matrix c11,c12,c21,c22");

  // simulate
  Source sim_src;
  std::optional<double> sim_t;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "run a config or preset, write snapshots and report");
  add_source(simulate, sim_src);
  simulate->add_option("--T", sim_t, "override the final time");
  simulate->add_option("--out", sim_out, "output directory (KPPW_OUT_DIR takes precedence)");

  // diagnose
  Source diag_src;
  std::string diag_dir;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "diagnostics of snapshots written by simulate");
  add_source(diagnose_cmd, diag_src);
  diagnose_cmd->add_option("--dir", diag_dir, "directory holding snap_<i>.csv")->required();

  // sweep
  Source sweep_src;
  std::string sweep_etas = "0.25,0.0025,2.5e-05";
  std::optional<double> sweep_t;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "mutation-rate sweep of a two-species scenario");
  add_source(sweep, sweep_src);
  sweep->add_option("--etas", sweep_etas, "distinct mutation rates, comma separated")->capture_default_str();
  sweep->add_option("--T", sweep_t, "override the final time");
  sweep->add_option("--out", sweep_out, "output directory (KPPW_OUT_DIR takes precedence)");

  app.add_subcommand("preset-list", "list preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return 1;
  }

  const auto saved = out.precision(17);
  try {
    if (speed->parsed()) {
      DispersionInput in;
      if (auto cfg = resolve(speed_src)) {
        in = {cfg->scenario.spec.d, cfg->scenario.spec.L};
      } else {
        if (speed_d.empty() || speed_l.empty()) throw Error(ErrorCode::InvalidInput, "speed needs --preset, --config or --d with --L");
        in = {parse_list(speed_d), config_detail::parse_matrix(speed_l, 0)};
      }
      const SpeedResult s = minimal_speed(in);
      out << "c_star = " << s.c_star << "\nmu_star = " << s.mu_star << '\n';
      if (speed_c) {
        const DecayRoots roots = decay_roots(in, *speed_c, s);
        out << "c = " << *speed_c << "\nmu_1 = " << roots.mu1 << "\nmu_2 = " << roots.mu2 << "\nk_c = " << roots.k_c
            << "\nn_mu = ";
        print_vector(out, edge_eigenvector(in, roots.mu1));
        out << '\n';
      }
    } else if (steady->parsed()) {
      auto cfg = resolve(steady_src);
      if (!cfg) throw Error(ErrorCode::InvalidInput, "steady needs --preset or --config");
      const SystemSpec& spec = cfg->scenario.spec;
      if (std::holds_alternative<Separated>(spec.law)) {
        const SteadyState v = v_star_separated(spec);
        out << "v_star = ";
        print_vector(out, v.value);
        out << ' ' << to_string(v.stability) << '\n';
      } else {
        for (const SteadyState& st : constant_solutions_two_species(spec)) {
          print_vector(out, st.value);
          out << ' ' << to_string(st.stability) << '\n';
        }
      }
    } else if (classify->parsed()) {
      Vector r;
      SquareMatrix c;
      if (auto cfg = resolve(classify_src)) {
        const auto& spec = cfg->scenario.spec;
        if (!spec.mutation || !std::holds_alternative<LotkaVolterra>(spec.law))
          throw Error(ErrorCode::InvalidInput, "classify needs a two-species Lotka-Volterra system");
        r = spec.mutation->r;
        c = std::get<LotkaVolterra>(spec.law).C;
      } else {
        if (classify_r.empty() || classify_c.empty()) throw Error(ErrorCode::InvalidInput, "classify needs --r and --C");
        r = parse_list(classify_r);
        const Vector cv = parse_list(classify_c);
        if (r.size() != 2 || cv.size() != 4) throw Error(ErrorCode::InvalidInput, "--r needs 2 values and --C needs 4");
        c = SquareMatrix::from_row_major(2, cv);
      }
      out << to_string(classify_two_species(r, c)) << '\n';
    } else if (simulate->parsed()) {
      auto cfg = resolve(sim_src);
      if (!cfg) throw Error(ErrorCode::InvalidInput, "simulate needs --preset or --config");
      if (sim_t) cfg->scenario.t_end = *sim_t;
      const auto dir = output_dir(sim_out.empty() ? cfg->output_dir : sim_out);
      const ScenarioResult res = run_scenario(cfg->scenario);
      write_snapshots(dir, res.snapshots);
      std::ofstream report(dir / "report.txt");
      res.report.write(report);
      std::ofstream used(dir / "config.ini");
      serialize_config(used, *cfg);
      if (!report || !used) throw Error(ErrorCode::IoError, "cannot write to " + dir.string());
      res.report.write(out);
      out << "snapshots = " << res.snapshots.size() << "\ndir = " << dir.string() << '\n';
    } else if (diagnose_cmd->parsed()) {
      const std::vector<Field> snaps = read_snapshots(diag_dir);
      auto cfg = resolve(diag_src);
      DiagnosticsConfig dc = cfg ? cfg->scenario.diagnostics : DiagnosticsConfig{};
      if (!cfg) dc.collinearity = false;
      const SystemSpec spec = cfg ? cfg->scenario.spec : SystemSpec{};
      diagnose(spec, snaps, dc).write(out);
    } else if (sweep->parsed()) {
      auto cfg = resolve(sweep_src);
      if (!cfg) throw Error(ErrorCode::InvalidInput, "sweep needs --preset or --config");
      if (sweep_t) cfg->scenario.t_end = *sweep_t;
      const auto records = sweep_eta(cfg->scenario, parse_list(sweep_etas));
      const auto dir = output_dir(sweep_out.empty() ? cfg->output_dir : sweep_out);
      std::filesystem::create_directories(dir);
      std::ofstream csv(dir / "sweep.csv");
      write_sweep_csv(csv, records);
      if (!csv) throw Error(ErrorCode::IoError, "cannot write to " + dir.string());
      write_sweep_csv(out, records);
    } else {
      for (const auto& name : preset_names()) out << name << '\n';
    }
  } catch (const Error& e) {
    out.precision(saved);
    err << "kppw: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    out.precision(saved);
    err << "kppw: " << e.what() << '\n';
    return 2;
  }
  out.precision(saved);
  return 0;
}

}  // namespace kppw::cli
