#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli_app.hpp"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "kppw");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = kppw::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

double value_of(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (line.rfind(key + " = ", 0) == 0) return std::stod(line.substr(key.size() + 3));
  ADD_FAILURE() << "missing " << key << " in\n" << text;
  return NAN;
}

}  // namespace

TEST(Cli, SpeedPreset) {
  const Outcome r = call({"speed", "--preset", "h6_collinearity"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(value_of(r.out, "c_star"), 2.0, 1e-9);
  EXPECT_NEAR(value_of(r.out, "mu_star"), 1.0, 1e-8);
}

TEST(Cli, SpeedFlagsWithC) {
  const Outcome r = call({"speed", "--d", "1,1", "--L", "2; 0.9, 0.1, 0.1, 0.9", "--c", "2.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(value_of(r.out, "mu_1"), 0.5, 1e-10);
  EXPECT_NEAR(value_of(r.out, "mu_2"), 2.0, 1e-10);
  EXPECT_EQ(value_of(r.out, "k_c"), 0.0);
  EXPECT_NE(r.out.find("n_mu = (0.7071067811865"), std::string::npos) << r.out;
}

TEST(Cli, SpeedBelowMinimum) {
  const Outcome r = call({"speed", "--d", "1,1", "--L", "2; 0.9, 0.1, 0.1, 0.9", "--c", "1.5"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("NoRealRoots"), std::string::npos);
}

TEST(Cli, SteadySaddle) {
  const Outcome r = call({"steady", "--preset", "saddle_connection_5_1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Saddle"), std::string::npos);
  std::istringstream is(r.out);
  std::string line;
  int stable = 0, saddle = 0;
  while (std::getline(is, line)) {
    if (line.find("(0, 0)") == 0) continue;
    stable += line.find("StableNode") != std::string::npos;
    saddle += line.find("Saddle") != std::string::npos;
  }
  EXPECT_EQ(stable, 2);
  EXPECT_EQ(saddle, 1);
}

TEST(Cli, SteadySeparated) {
  const Outcome r = call({"steady", "--preset", "h6_collinearity"});
  ASSERT_EQ(r.code, 0) << r.err;
  double a = 0, b = 0;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "v_star = (%lf, %lf) StableNode", &a, &b), 2) << r.out;
  EXPECT_NEAR(a, 0.5, 1e-12);
  EXPECT_NEAR(b, 0.5, 1e-12);
}

TEST(Cli, Classify) {
  EXPECT_EQ(call({"classify", "--r", "1,1", "--C", "1,20,110,1"}).out, "Bistable\n");
  EXPECT_EQ(call({"classify", "--preset", "fig2_monostable"}).out, "Coexistence\n");
  EXPECT_EQ(call({"classify", "--r", "1,1", "--C", "1,2,3"}).code, 1);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(call({"speed", "--preset", "nope"}).code, 1);
  EXPECT_EQ(call({"speed", "--bogus"}).code, 1);
  EXPECT_EQ(call({}).code, 1);
  EXPECT_EQ(call({"simulate", "--config", "/nonexistent/run.ini"}).code, 2);
  EXPECT_EQ(kppw::cli::exit_code(kppw::ErrorCode::CapExceeded), 2);
  EXPECT_EQ(kppw::cli::exit_code(kppw::ErrorCode::ValidationError), 1);
}

TEST(Cli, PresetList) {
  const Outcome r = call({"preset-list"});
  EXPECT_EQ(r.code, 0);
  for (const auto& name : kppw::preset_names()) EXPECT_NE(r.out.find(name + "\n"), std::string::npos);
}

TEST(Cli, SimulateThenDiagnose) {
  const auto dir = std::filesystem::temp_directory_path() / "kppw_cli_simulate";
  std::filesystem::remove_all(dir);
  const Outcome sim =
      call({"simulate", "--config", std::string(KPPW_SOURCE_DIR) + "/configs/diagonal_5_4.ini", "--T", "2", "--out", dir.string()});
  ASSERT_EQ(sim.code, 0) << sim.err;
  EXPECT_NE(sim.out.find("snapshots = 5\n"), std::string::npos) << sim.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "snap_4.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report.txt"));

  // The written config reproduces the run.
  const kppw::RunConfig used = kppw::load_config(dir / "config.ini");
  EXPECT_EQ(used.scenario.t_end, 2.0);

  const Outcome diag = call({"diagnose", "--dir", dir.string(), "--config", (dir / "config.ini").string()});
  ASSERT_EQ(diag.code, 0) << diag.err;
  std::ifstream report(dir / "report.txt");
  std::stringstream ss;
  ss << report.rdbuf();
  EXPECT_EQ(value_of(diag.out, "back_1"), value_of(ss.str(), "back_1"));
  std::filesystem::remove_all(dir);
}

TEST(Cli, SweepWritesCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "kppw_cli_sweep";
  std::filesystem::remove_all(dir);
  const Outcome r = call({"sweep", "--preset", "fig2_monostable", "--etas", "0.25", "--T", "1", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("eta,c_star_eta,", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "sweep.csv"));
  std::filesystem::remove_all(dir);
}
