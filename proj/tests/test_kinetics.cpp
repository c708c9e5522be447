#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kppw/kinetics.hpp"

using namespace kppw;

namespace {

SquareMatrix exchange(double eta) { return SquareMatrix{{-eta, eta}, {eta, -eta}}; }

SystemSpec saddle_spec() {
  return make_two_species({1, 1}, {1, 1}, 0.2, {1, 1}, SquareMatrix{{0.1, 0.9}, {0.9, 0.1}});
}

SystemSpec separated_spec(SquareMatrix l) {
  SystemSpec s;
  s.d = {1, 1};
  s.L = std::move(l);
  s.law = Separated{{1, 1}, {1, 1}};
  return s;
}

SystemSpec fig2_spec(double eta) {
  return with_mutation_rate(
      make_two_species({1, 1.0 / 3.0}, {1, 6}, 1.0, {1, 1}, SquareMatrix{{1, 0.2}, {0.5, 6}}), eta);
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

TEST(Kinetics, MutationMatrixFoldsScale) {
  const SystemSpec s = saddle_spec();
  EXPECT_EQ(s.L, SquareMatrix::identity(2) + exchange(0.2));
  EXPECT_NEAR(s.mutation->eta, 0.2 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(norm2(s.mutation->m), 1.0, 1e-15);
  const auto dec = decompose_mutation(s.L);
  ASSERT_TRUE(dec);
  EXPECT_NEAR(dec->eta, s.mutation->eta, 1e-15);
  EXPECT_NEAR(dec->r[0], 1.0, 1e-15);
}

TEST(Kinetics, ReactionExamples) {
  const SystemSpec s = saddle_spec();
  const Vector zero = reaction(s, Vector{0, 0});
  EXPECT_EQ(zero[0], 0.0);
  EXPECT_EQ(zero[1], 0.0);
  EXPECT_LE(norm_inf(reaction(s, Vector{1, 1})), 1e-15);
  EXPECT_EQ(linearization(s, Vector{0, 0}), s.L);
}

TEST(Kinetics, LinearizationMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(0.0, 3.0);
  const std::vector<SystemSpec> specs{saddle_spec(), fig2_spec(0.25),
                                      separated_spec(SquareMatrix::identity(2) + exchange(0.2))};
  for (const SystemSpec& s : specs) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vector u{pos(rng), pos(rng)};
      const SquareMatrix j = linearization(s, u);
      const double h = 1e-6;
      for (std::size_t k = 0; k < 2; ++k) {
        Vector up = u, um = u;
        up[k] += h;
        um[k] -= h;
        const Vector fp = reaction(s, up), fm = reaction(s, um);
        for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(j(r, k), (fp[r] - fm[r]) / (2 * h), 1e-6);
      }
    }
  }
}

TEST(Kinetics, CoexistenceState) {
  const Vector v = v_m({1, 6}, SquareMatrix{{1, 0.2}, {0.5, 6}});
  EXPECT_NEAR(v[0], 4.8 / 5.9, 1e-14);
  EXPECT_NEAR(v[1], 5.5 / 5.9, 1e-14);
  const Vector w = v_m({1, 1}, SquareMatrix::identity(2));
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 1.0);
  EXPECT_EQ(code_of([] { v_m({1, 1}, SquareMatrix{{1, 2}, {2, 4}}); }), ErrorCode::SingularC);
}

TEST(Kinetics, Classification) {
  EXPECT_EQ(classify_two_species({1, 1}, SquareMatrix{{1, 20}, {110, 1}}), Regime::Bistable);
  EXPECT_EQ(classify_two_species({1, 6}, SquareMatrix{{1, 0.2}, {0.5, 6}}), Regime::Coexistence);
  EXPECT_EQ(classify_two_species({2, 1}, SquareMatrix{{1, 1}, {1, 1}}), Regime::Extinction2);
  EXPECT_EQ(classify_two_species({1, 2}, SquareMatrix{{1, 1}, {1, 1}}), Regime::Extinction1);
  EXPECT_EQ(classify_two_species({1, 1}, SquareMatrix{{1, 1}, {1, 1}}), Regime::Degenerate);
}

TEST(Kinetics, ClassificationSwapInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(0.05, 5.0);
  auto swap_regime = [](Regime r) {
    if (r == Regime::Extinction1) return Regime::Extinction2;
    if (r == Regime::Extinction2) return Regime::Extinction1;
    return r;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const Vector r{pos(rng), pos(rng)};
    const SquareMatrix c{{pos(rng), pos(rng)}, {pos(rng), pos(rng)}};
    const Vector rs{r[1], r[0]};
    const SquareMatrix cs{{c(1, 1), c(1, 0)}, {c(0, 1), c(0, 0)}};
    EXPECT_EQ(classify_two_species(rs, cs), swap_regime(classify_two_species(r, c)));
  }
}

TEST(Kinetics, SeparatedSteadyState) {
  const SteadyState a = v_star_separated(separated_spec(SquareMatrix{{0, 1}, {1, 0}}));
  EXPECT_NEAR(a.value[0], 0.5, 1e-12);
  EXPECT_NEAR(a.value[1], 0.5, 1e-12);
  const SystemSpec h6 = separated_spec(SquareMatrix::identity(2) + exchange(0.2));
  const SteadyState b = v_star_separated(h6);
  EXPECT_NEAR(b.value[0], 0.5, 1e-12);
  EXPECT_NEAR(b.value[1], 0.5, 1e-12);
  EXPECT_LE(norm_inf(reaction(h6, b.value)), 1e-12);
  EXPECT_EQ(b.stability, Stability::StableNode);
  EXPECT_EQ(code_of([] { v_star_separated(separated_spec(SquareMatrix{{-1, 0.1}, {0.1, -1}})); }),
            ErrorCode::NonPositiveLambdaA);
}

TEST(Kinetics, SaddleTriple) {
  const SystemSpec s = saddle_spec();
  const auto states = constant_solutions_two_species(s);
  std::vector<SteadyState> positive;
  for (const auto& st : states) {
    EXPECT_LE(norm_inf(reaction(s, st.value)), 1e-10);
    if (st.value[0] > 0 && st.value[1] > 0) positive.push_back(st);
  }
  ASSERT_EQ(positive.size(), 3u);
  const double r = std::sqrt(7.5);
  EXPECT_NEAR(positive[0].value[0], 3 - r, 1e-10);
  EXPECT_NEAR(positive[0].value[1], 3 + r, 1e-10);
  EXPECT_NEAR(positive[1].value[0], 1.0, 1e-10);
  EXPECT_NEAR(positive[1].value[1], 1.0, 1e-10);
  EXPECT_NEAR(positive[2].value[0], 3 + r, 1e-10);
  EXPECT_NEAR(positive[2].value[1], 3 - r, 1e-10);
  EXPECT_EQ(positive[0].stability, Stability::StableNode);
  EXPECT_EQ(positive[1].stability, Stability::Saddle);
  EXPECT_EQ(positive[2].stability, Stability::StableNode);

  // A finer seed grid finds nothing new.
  EXPECT_EQ(constant_solutions_two_species(s, 128).size(), states.size());
}

TEST(Kinetics, DecoupledLimitIncludesCarryingCapacities) {
  // Weak mutation and strong competition: each axis state r_i e_i resists invasion,
  // so it persists up to O(eta).
  const SystemSpec s = make_two_species({1, 1}, {1, 2}, 1e-9, {1, 1}, SquareMatrix{{1, 3}, {3, 1}});
  const auto states = constant_solutions_two_species(s);
  bool near_axis1 = false, near_axis2 = false;
  for (const auto& st : states) {
    near_axis1 = near_axis1 || distance_inf(st.value, Vector{1, 0}) < 1e-5;
    near_axis2 = near_axis2 || distance_inf(st.value, Vector{0, 2}) < 1e-5;
  }
  EXPECT_TRUE(near_axis1);
  EXPECT_TRUE(near_axis2);
}

TEST(Kinetics, LemmaThresholds) {
  const SystemSpec s = fig2_spec(0.25);
  const LemmaThresholds t = lemma_thresholds(s, 0);
  EXPECT_NEAR(t.rho, 0.4, 1e-14);
  const double m1 = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(t.eta_bar, 0.5 * std::min(6 * 0.5 / (m1 * 6), (6 / m1) * (1.0 / 6 - 1.0 / 30)), 1e-14);
  EXPECT_NEAR(linf_bound_threshold(s, 0), 1.0 * 0.2 / (m1 * 1.0), 1e-14);

  const SystemSpec bistable = make_two_species({1, 1}, {1, 1}, 0.025, {1, 1}, SquareMatrix{{1, 20}, {110, 1}});
  // r_1/r_2 = 1 > c_12/c_22 = 20 fails.
  EXPECT_EQ(code_of([&] { lemma_thresholds(bistable, 0); }), ErrorCode::HypothesisViolated);
}

TEST(Kinetics, IntegrateAtEquilibrium) {
  const SystemSpec s = separated_spec(SquareMatrix::identity(2) + exchange(0.2));
  const Trajectory tr = integrate_kinetics(s, {0.5, 0.5}, 100.0, 0.01);
  for (const Vector& u : tr.states) EXPECT_LE(distance_inf(u, Vector{0.5, 0.5}), 1e-8);
  EXPECT_EQ(tr.times.back(), 100.0);
}

TEST(Kinetics, IntegrateConvergesToVStar) {
  const SystemSpec s = separated_spec(SquareMatrix::identity(2) + exchange(0.2));
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(1e-3, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Trajectory tr = integrate_kinetics(s, {pos(rng), pos(rng)}, 200.0, 0.01);
    EXPECT_LE(distance_inf(tr.states.back(), Vector{0.5, 0.5}), 1e-6);
    for (const Vector& u : tr.states) EXPECT_TRUE(u[0] >= 0.0 && u[1] >= 0.0);
  }
}

TEST(Kinetics, IntegrateLeavesSaddle) {
  const SystemSpec s = saddle_spec();
  const Trajectory tr = integrate_kinetics(s, {1.01, 0.99}, 200.0, 0.01);
  const double r = std::sqrt(7.5);
  // Species 1 starts ahead, so the trajectory falls to the node favouring it.
  EXPECT_LE(distance_inf(tr.states.back(), Vector{3 + r, 3 - r}), 1e-6);
}

TEST(Kinetics, RayIsInvariant) {
  SquareMatrix l{{0.5, 0.3}, {0.7, 1.0}};
  const SystemSpec s = separated_spec(l);
  const Vector n = pf_eigenpair(l).vector;
  const Trajectory tr = integrate_kinetics(s, {0.2 * n[0], 0.2 * n[1]}, 50.0, 0.01);
  for (const Vector& u : tr.states) {
    // Sine of the angle through the 2-D cross product, which keeps full precision.
    EXPECT_LE(std::abs(u[0] * n[1] - u[1] * n[0]) / norm2(u), 1e-8);
  }
}

TEST(Kinetics, IntegrateRejectsLargeSteps) {
  const SystemSpec s = make_two_species({1, 1}, {1, 1}, 0.1, {1, 1}, SquareMatrix{{50, 50}, {50, 50}});
  EXPECT_EQ(code_of([&] { integrate_kinetics(s, {5, 5}, 1.0, 0.5); }), ErrorCode::StepTooLarge);
}

TEST(Kinetics, Hypotheses) {
  const SystemSpec fig1 = make_two_species({1, 1.5125}, {1, 1}, 0.025, {1, 1}, SquareMatrix{{1, 20}, {110, 1}});
  EXPECT_TRUE(check_hypotheses(fig1).all_passed()) << check_hypotheses(fig1).summary();

  SystemSpec bad = fig1;
  bad.mutation.reset();
  bad.L = SquareMatrix{{1, -0.1}, {0.1, 1}};
  EXPECT_FALSE(check_hypotheses(bad).passed("H1"));

  bad.L = SquareMatrix{{-2, 1}, {1, -2}};
  const HypothesisReport rep = check_hypotheses(bad);
  EXPECT_TRUE(rep.passed("H1"));
  EXPECT_FALSE(rep.passed("H5"));
  EXPECT_NE(rep.summary().find("lambda_PF(L) = -0.9999999"), std::string::npos) << rep.summary();
}
