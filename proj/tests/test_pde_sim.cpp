#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kppw/pde_sim.hpp"

using namespace kppw;

namespace {

SquareMatrix exchange(double eta) { return SquareMatrix{{-eta, eta}, {eta, -eta}}; }

SystemSpec weak_lv() {
  return make_two_species({1, 1}, {1, 1}, 0.1, {1, 1}, SquareMatrix{{1, 1}, {1, 1}});
}

SystemSpec h6_spec(Vector d = {1, 1}) {
  SystemSpec s;
  s.d = std::move(d);
  s.L = SquareMatrix::identity(2) + exchange(0.2);
  s.law = Separated{{1, 1}, {1, 1}};
  return s;
}

// Straightforward forward-Euler update with mirrored ghosts, written
// independently of the library kernel.
Field reference_step(const SystemSpec& s, const Field& f, double dt) {
  const auto& c = std::get<LotkaVolterra>(s.law).C;
  const std::size_t nx = f.grid.nx, n = f.n_components;
  Field out = f;
  for (std::size_t k = 0; k < nx; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double lu = 0.0, cu = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        lu += s.L(i, j) * f.at(j, k);
        cu += c(i, j) * f.at(j, k);
      }
      const double left = f.at(i, k == 0 ? 1 : k - 1);
      const double right = f.at(i, k + 1 == nx ? nx - 2 : k + 1);
      const double lap = (left - 2.0 * f.at(i, k) + right) / (f.grid.dx * f.grid.dx);
      out.at(i, k) = f.at(i, k) + (dt * (lu - cu * f.at(i, k)) + dt * s.d[i] * lap);
    }
  }
  out.t += dt;
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

}  // namespace

TEST(PdeSim, FrontStepRamp) {
  const Grid1D g{-5.0, 0.1, 101};
  const Field f = build_initial(g, FrontStep{{0.5, 0.5}, 0.0, 2.0});
  for (std::size_t k = 0; k < g.nx; ++k) {
    const double x = g.x(k);
    if (x < -1.0 - 1e-9) {
      EXPECT_EQ(f.at(0, k), 0.5);
    } else if (x > 1.0 + 1e-9) {
      EXPECT_EQ(f.at(1, k), 0.0);
    } else {
      EXPECT_NEAR(f.at(0, k), 0.5 * (1.0 - x) / 2.0, 1e-12);
    }
  }
}

TEST(PdeSim, CompactBumpSupport) {
  const Grid1D g{0.0, 0.1, 401};
  const Field f = build_initial(g, CompactBump{20.0, 10.0, {0.5, 0.25}, 0.5});
  EXPECT_EQ(f.at(0, 0), 0.0);
  EXPECT_EQ(f.at(1, g.nx - 1), 0.0);
  EXPECT_EQ(f.at(0, 200), 0.5);
  EXPECT_EQ(f.at(1, 200), 0.25);
  for (std::size_t k = 0; k < g.nx; ++k) {
    const double x = g.x(k);
    if (x < 14.75 - 1e-9 || x > 25.25 + 1e-9) {
      EXPECT_EQ(f.at(0, k), 0.0);
    }
  }
  EXPECT_EQ(code_of([&] { build_initial(g, CompactBump{38.0, 10.0, {1, 1}, 0.5}); }), ErrorCode::IntervalOutOfRange);
}

TEST(PdeSim, TerraceBands) {
  const Grid1D g{0.0, 0.1, 1001};
  const Field f = build_initial(g, TerracePreset{{{0, 30, {1, 0}}, {30, 60, {0, 1}}}, 0.5});
  EXPECT_EQ(f.at(0, 100), 1.0);
  EXPECT_EQ(f.at(1, 100), 0.0);
  EXPECT_EQ(f.at(1, 450), 1.0);
  EXPECT_EQ(f.at(1, 900), 0.0);
  EXPECT_NEAR(f.at(0, 300) + f.at(1, 300), 1.0, 1e-12);  // ramps cross-fade at the shared end
}

TEST(PdeSim, StableDt) {
  const Grid1D g{0.0, 0.1, 100};
  SystemSpec weak = weak_lv();
  std::get<LotkaVolterra>(weak.law).C = SquareMatrix{{1e-3, 1e-3}, {1e-3, 1e-3}};
  EXPECT_NEAR(stable_dt(weak, g), 0.002, 1e-15);

  SystemSpec stiff = weak_lv();
  std::get<LotkaVolterra>(stiff.law).C = SquareMatrix{{1e4, 1e4}, {1e4, 1e4}};
  EXPECT_LT(stable_dt(stiff, g, TimeScheme::ExplicitEuler, 1.0), 0.4 * 0.1 * 0.1 / 2.0);

  const SystemSpec fig2 = make_two_species({1, 1.0 / 3.0}, {1, 6}, 0.25 / std::sqrt(2.0), {1, 1},
                                           SquareMatrix{{1, 0.2}, {0.5, 6}});
  const Grid1D fine{0.0, 0.05, 100};
  EXPECT_EQ(stable_dt(fig2, fine), stable_dt(fig2, fine));
  EXPECT_GT(stable_dt(fig2, fine, TimeScheme::Imex), stable_dt(fig2, fine));
}

TEST(PdeSim, StepMatchesReference) {
  const SystemSpec s = weak_lv();
  const Grid1D g{0.0, 0.1, 200};
  Field f(g, 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  for (double& v : f.values) v = pos(rng);
  const double dt = stable_dt(s, g);
  const Field a = step(s, f, dt);
  const Field b = reference_step(s, f, dt);
  for (std::size_t k = 0; k < f.values.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-15);
  EXPECT_EQ(a.t, dt);
}

TEST(PdeSim, ZeroAndConstantSteadyStatesAreFixed) {
  const Grid1D g{0.0, 0.1, 64};
  const Field zero(g, 2);
  EXPECT_EQ(step(weak_lv(), zero, 0.002).values, zero.values);

  const SystemSpec s = h6_spec({1.0, 3.0});
  Field v(g, 2);
  for (double& x : v.values) x = 0.5;
  Field w = v;
  for (int k = 0; k < 100; ++k) w = step(s, w, stable_dt(s, g));
  for (double x : w.values) EXPECT_NEAR(x, 0.5, 1e-12);
}

TEST(PdeSim, NeumannLaplacianConservesMass) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::vector<double> u(257), out(257);
  for (double& x : u) x = pos(rng);
  apply_neumann_laplacian(u, out, 0.1);
  // Trapezoid weights make the discrete flux telescope to zero.
  double mass = 0.5 * (out.front() + out.back());
  for (std::size_t k = 1; k + 1 < out.size(); ++k) mass += out[k];
  EXPECT_NEAR(mass, 0.0, 1e-9);
}

TEST(PdeSim, ImexStepStaysNonnegative) {
  const SystemSpec s = weak_lv();
  const Grid1D g{0.0, 0.1, 128};
  Field f = build_initial(g, FrontStep{{1, 1}, 6.0, 0.5});
  const double dt = stable_dt(s, g, TimeScheme::Imex);
  for (int k = 0; k < 50; ++k) f = step(s, f, dt, TimeScheme::Imex);
  for (double v : f.values) EXPECT_GE(v, 0.0);
}

TEST(PdeSim, RunIsDeterministic) {
  const SystemSpec s = weak_lv();
  const Grid1D g{0.0, 0.1, 256};
  const InitialData init = FrontStep{{0.5, 0.5}, 5.0, 0.5};
  const auto a = run(s, g, init, 2.0, 0.5);
  const auto b = run(s, g, init, 2.0, 0.5);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].values, b[k].values);
    EXPECT_DOUBLE_EQ(a[k].t, 0.5 * static_cast<double>(k));
  }
}

TEST(PdeSim, ZeroHorizon) {
  const Grid1D g{0.0, 0.1, 64};
  const auto snaps = run(weak_lv(), g, FrontStep{{1, 1}, 2.0, 0.5}, 0.0, 1.0);
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].values, build_initial(g, FrontStep{{1, 1}, 2.0, 0.5}).values);
}

TEST(PdeSim, CapExceeded) {
  const Grid1D g{0.0, 0.1, 64};
  RunOptions opt;
  opt.u_cap = 0.5;
  EXPECT_EQ(code_of([&] { run(weak_lv(), g, FrontStep{{1, 1}, 2.0, 0.5}, 1.0, 1.0, {}, opt); }),
            ErrorCode::CapExceeded);
}

TEST(PdeSim, WindowFollowsFront) {
  const SystemSpec s = weak_lv();
  const Grid1D g{0.0, 0.1, 256};
  WindowPolicy w;
  w.kind = WindowPolicy::Kind::FollowFront;
  const auto snaps = run(s, g, FrontStep{{0.5, 0.5}, 5.0, 0.5}, 10.0, 1.0, w);
  const Field& last = snaps.back();
  EXPECT_GT(last.window_offset, 0);
  EXPECT_EQ(last.frozen_back.size(), static_cast<std::size_t>(last.window_offset));
  EXPECT_DOUBLE_EQ(last.grid.x_left, 0.1 * static_cast<double>(last.window_offset));
  const double front = front_position(last, kTotal, 0.1);
  EXPECT_LT(front - last.grid.x_left, 0.75 * last.grid.length() + 1.0);
}

TEST(PdeSim, WindowMatchesLargeDomain) {
  const SystemSpec s = weak_lv();
  const InitialData init = FrontStep{{0.5, 0.5}, 5.0, 0.5};
  WindowPolicy w;
  w.kind = WindowPolicy::Kind::FollowFront;
  const auto moving = run(s, Grid1D{0.0, 0.1, 1024}, init, 40.0, 2.0, w);
  const auto fixed = run(s, Grid1D{0.0, 0.1, 2048}, init, 40.0, 2.0);
  ASSERT_EQ(moving.size(), fixed.size());
  for (std::size_t t = 0; t < moving.size(); ++t) {
    const long off = moving[t].window_offset;
    for (std::size_t k = 0; k < moving[t].grid.nx; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        ASSERT_NEAR(moving[t].at(i, k), fixed[t].at(i, k + static_cast<std::size_t>(off)), 1e-8)
            << "t=" << moving[t].t << " k=" << k;
  }
  EXPECT_GT(moving.back().window_offset, 0);
}

TEST(PdeSim, CsvRoundTrip) {
  const Grid1D g{-1.5, 0.1, 32};
  Field f = build_initial(g, FrontStep{{0.3, 0.7}, 0.0, 0.5});
  f.t = 2.5;
  std::stringstream ss;
  write_snapshot_csv(ss, f);
  const Field back = read_snapshot_csv(ss);
  EXPECT_EQ(back.values, f.values);
  EXPECT_EQ(back.t, 2.5);
  EXPECT_EQ(back.grid.nx, g.nx);
  EXPECT_NEAR(back.grid.dx, g.dx, 1e-15);

  const auto dir = std::filesystem::temp_directory_path() / "kppw_csv_round_trip";
  std::filesystem::remove_all(dir);
  f.at(0, 3) = 4.9406564584124654e-324;
  write_snapshots(dir, {f, f});
  EXPECT_EQ(read_snapshots(dir)[1].at(0, 3), 4.9406564584124654e-324);
  EXPECT_EQ(read_snapshots(dir).size(), 2u);
  std::filesystem::remove_all(dir);

  std::stringstream bad("x,y\n1,2\n");
  EXPECT_EQ(code_of([&] { read_snapshot_csv(bad); }), ErrorCode::ParseError);
}
