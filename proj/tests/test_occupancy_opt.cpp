#include <gtest/gtest.h>

#include <cmath>
#include <decept/error.hpp>
#include <decept/occupancy_opt.hpp>

#include "fixtures.hpp"

using namespace decept;

namespace {

const double kLn5 = std::log(5.0);
const double kLn9 = std::log(9.0);

double xlogx_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

struct GridPoint {
  double kl;
  double reach;
};

// Closed form for the two decision states of the fixture: a = P(r at 1),
// b = P(land at 2). ref_r1 is the reference probability of r at 1.
GridPoint closed_form(double a, double b, double ref_r1) {
  const double q = 0.9 * a + 0.1 * (1.0 - a);
  const double q_ref = 0.9 * ref_r1 + 0.1 * (1.0 - ref_r1);
  const double kl1 = xlogx_ratio(q, q_ref) + xlogx_ratio(1.0 - q, 1.0 - q_ref);
  const double up = 0.2 + 0.8 * b;
  const double kl2 = xlogx_ratio(up, 0.2) + xlogx_ratio(1.0 - up, 0.8);
  return {kl1 + q * kl2, q * up};
}

double best_reach_on_grid(double k, double ref_r1) {
  double best = 0.0;
  const int n = 400;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const auto g = closed_form(i / double(n), j / double(n), ref_r1);
      if (g.kl <= k) best = std::max(best, g.reach);
    }
  }
  return best;
}

double mixture_kl(double lambda) {
  const double up = 0.2 + 0.8 * lambda;
  return 0.9 * (xlogx_ratio(1.0 - lambda, 1.0) * 0.8 + up * std::log(up / 0.2));
}

}  // namespace

TEST(ReachSubproblem, ZeroBudgetKeepsReference) {
  const auto a1 = fx::agent1();
  const auto a2 = fx::agent2();
  EXPECT_NEAR(reach_subproblem(a1, 0.0).reach_value, 0.18, 1e-6);
  EXPECT_NEAR(reach_subproblem(a2, 0.0).reach_value, 0.02, 1e-6);
}

TEST(ReachSubproblem, LandDeviationBudget) {
  const auto a1 = fx::agent1();
  const auto s = reach_subproblem(a1, 0.9 * kLn5);
  EXPECT_NEAR(s.reach_value, 0.9, 1e-6);
  EXPECT_LE(s.kl_value, 0.9 * kLn5 + 1e-6);
  EXPECT_LE(s.duality_gap, 1e-6);
  EXPECT_NEAR(policy_reach(a1, s.policy), s.reach_value, 1e-6);
}

TEST(ReachSubproblem, UnboundedBudgetGivesMaxReach) {
  for (const auto& a : fx::fig2_pair()) {
    const auto s = reach_subproblem(a, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(s.reach_value, max_reach_policy(a).reach, 1e-6);
  }
}

TEST(ReachSubproblem, MatchesGridOracle) {
  const auto a1 = fx::agent1();
  const auto a2 = fx::agent2();
  for (double k : {0.05, 0.3, 1.0}) {
    const auto s = reach_subproblem(a1, k);
    EXPECT_GE(s.reach_value, best_reach_on_grid(k, 1.0) - 1e-7) << "K=" << k;
    EXPECT_LE(policy_kl(a1, s.policy), k + 1e-6);
    EXPECT_NEAR(policy_reach(a1, s.policy), s.reach_value, 1e-6);
  }
  for (double k : {0.2, 1.0, 2.5}) {
    const auto s = reach_subproblem(a2, k);
    EXPECT_GE(s.reach_value, best_reach_on_grid(k, 0.0) - 1e-7) << "K=" << k;
    EXPECT_LE(policy_kl(a2, s.policy), k + 1e-6);
    // The grid is a lower bound; a finer grid can only get closer.
    EXPECT_LE(s.reach_value, best_reach_on_grid(k + 1e-3, 0.0) + 2e-3);
  }
}

TEST(ReachSubproblem, RejectsNegativeBudget) {
  try {
    reach_subproblem(fx::agent1(), -1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidParams);
  }
}

TEST(ReachSubproblem, KlAndReachFromPolicies) {
  const auto a1 = fx::agent1();
  EXPECT_NEAR(policy_kl(a1, fx::land1(a1.mdp)), 0.9 * kLn5, 1e-12);
  EXPECT_NEAR(policy_reach(a1, fx::land1(a1.mdp)), 0.9, 1e-12);
  EXPECT_NEAR(policy_kl(a1, a1.reference), 0.0, 1e-15);
}

TEST(MaxReach, Fig2Agents) {
  const auto m1 = max_reach_policy(fx::agent1());
  EXPECT_NEAR(m1.reach, 0.9, 1e-12);
  EXPECT_NEAR(m1.kl, 0.9 * kLn5, 1e-9);
  const auto m2 = max_reach_policy(fx::agent2());
  EXPECT_NEAR(m2.reach, 0.9, 1e-12);
  EXPECT_NEAR(m2.kl, 0.8 * kLn9 + 0.9 * kLn5, 1e-9);
}

TEST(Kmax, Fig2Pair) {
  const auto agents = fx::fig2_pair();
  const auto r = compute_kmax(agents, 0.5);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.k_max, 0.8 * kLn9 + 0.9 * kLn5, 1e-6);
  EXPECT_NEAR(r.disjunctive_reach, 1.0 - 0.1 * 0.1, 1e-9);
  EXPECT_TRUE(compute_kmax(agents, 0.0).feasible);
}

TEST(Kmax, ZeroReferenceTransitionBlocksTarget) {
  // The only way to the target is an action the reference never uses and
  // whose successor the reference never visits.
  MdpBuilder b;
  b.add_state("s");
  b.add_state("z");
  b.add_state("t");
  b.add_transition("s", "safe", "z", 1.0);
  b.add_transition("s", "go", "t", 1.0);
  b.add_transition("z", "stay", "z", 1.0);
  b.add_transition("t", "stay", "t", 1.0);
  const auto m = b.build();
  std::vector<ActionIndex> c{0, 0, 0};
  auto ref = StationaryPolicy::deterministic(m, c);
  std::vector<AgentSpec> agents{
      AgentSpec::make(m, ref, std::vector<StateIndex>{m.state_index("t")})};
  const auto r = compute_kmax(agents, 1.0);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.diagnosis.empty());
}

TEST(PolicyWithKl, ClosedFormMixture) {
  const auto a1 = fx::agent1();
  const auto land = fx::land1(a1.mdp);
  const auto zero = policy_with_kl(a1, land, 0.0, 1e-9);
  EXPECT_EQ(zero.policy, a1.reference);

  // Scalar bisection on the closed form.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mixture_kl(mid) < 0.7 ? lo : hi) = mid;
  }
  const auto m = policy_with_kl(a1, land, 0.7, 1e-9);
  EXPECT_NEAR(m.kl, 0.7, 1e-6);
  EXPECT_NEAR(policy_kl(a1, m.policy), 0.7, 1e-6);
  EXPECT_NEAR(m.weight, lo, 1e-6);

  const auto top = policy_with_kl(a1, land, 0.9 * kLn5, 1e-9);
  EXPECT_NEAR(top.weight, 1.0, 1e-9);
  try {
    policy_with_kl(a1, land, 2.0, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TargetUnattainable);
  }
}

TEST(PolicyWithKl, DefaultWitnessReachesMaxReachKl) {
  const auto a2 = fx::agent2();
  const auto r = policy_with_kl(a2, 3.0, 1e-7);
  EXPECT_NEAR(policy_kl(a2, r.policy), 3.0, 1e-6);
}

TEST(MixPolicies, Endpoints) {
  const auto m = fx::fig2_mdp();
  EXPECT_EQ(mix_policies(fx::land1(m), fx::ref1(m), 0.0), fx::ref1(m));
  EXPECT_EQ(mix_policies(fx::land1(m), fx::ref1(m), 1.0), fx::land1(m));
}
