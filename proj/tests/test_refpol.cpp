#include <gtest/gtest.h>

#include <cmath>
#include <decept/analysis.hpp>
#include <decept/error.hpp>
#include <decept/refpol.hpp>

#include "fixtures.hpp"

using namespace decept;

namespace {

SupervisorTask fig2_task(double th1, double th2, int iterations) {
  const auto m = fx::fig2_mdp();
  SupervisorTask t;
  t.supervisor_targets = {{fx::st(m, "3")}, {fx::st(m, "4")}};
  t.thresholds = {th1, th2};
  t.iterations = iterations;
  return t;
}

}  // namespace

TEST(SmoothedMax, Bounds) {
  EXPECT_NEAR(smoothed_worst_kl(std::vector<double>{1, 1, 1}, 0.3), 1.0, 1e-15);
  const std::vector<double> v{0.0, 2.0};
  const double s = smoothed_worst_kl(v, 0.1);
  EXPECT_GE(s, 2.0 - 0.1 * std::log(2.0) - 1e-15);
  EXPECT_LE(s, 2.0);
  EXPECT_NEAR(smoothed_worst_kl(v, 1e-6), 2.0, 1e-5);
  EXPECT_NEAR(smoothed_worst_kl(std::vector<double>{700.0, 3.0}, 0.01), 700.0 - 0.01 * std::log(2.0),
              1e-9);
}

TEST(ProjectReference, FeasibleInputIsKept) {
  const auto m = fx::fig2_mdp();
  const std::vector<StateIndex> t{fx::st(m, "3")};
  EXPECT_EQ(project_reference(m, fx::ref1(m), fx::ref1(m), t, 0.6), fx::ref1(m));
}

TEST(ProjectReference, LiftsReachToThreshold) {
  const auto m = fx::fig2_mdp();
  const std::vector<StateIndex> t{fx::st(m, "3")};
  // Landing at 2 never reaches 3; the projection has to undo part of it.
  const auto p = project_reference(m, fx::land1(m), fx::ref1(m), t, 0.5);
  EXPECT_GE(reach_probability(m, p, t), 0.5);
  EXPECT_LT(reach_probability(m, p, t), 0.72);
  EXPECT_NO_THROW(validate_policy(m, p));
}

TEST(Refpol, ZeroIterationsKeepsFeasibleReferences) {
  const auto agents = fx::fig2_pair();
  const auto r = synthesize_reference(agents, fig2_task(0.6, 0.8, 0), 0.5);
  EXPECT_EQ(r.references[0], agents[0].reference);
  EXPECT_EQ(r.references[1], agents[1].reference);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_NEAR(r.worst_kl, 0.159687, 1e-3);
}

TEST(Refpol, AcceptedObjectiveNeverDrops) {
  const auto agents = fx::fig2_pair();
  const auto task = fig2_task(0.6, 0.8, 20);
  const auto r = synthesize_reference(agents, task, 0.5);
  double last = -1.0;
  for (const auto& it : r.trace) {
    if (!it.accepted) continue;
    EXPECT_GE(it.objective, last - 1e-12) << "iteration " << it.iteration;
    last = it.objective;
  }
  EXPECT_GE(r.objective, r.initial_objective);
  ASSERT_EQ(r.supervisor_reach.size(), 2u);
  EXPECT_GE(r.supervisor_reach[0], 0.6 - 1e-9);
  EXPECT_GE(r.supervisor_reach[1], 0.8 - 1e-9);
}

TEST(Refpol, UnreachableTeamTaskIsUnbounded) {
  const auto agents = fx::fig2_pair();
  const auto r = synthesize_reference(agents, fig2_task(0.0, 0.0, 5), 0.995);
  EXPECT_TRUE(r.unbounded);
  EXPECT_TRUE(std::isinf(r.objective));
}

TEST(Refpol, InfeasibleSupervisorTask) {
  const auto agents = fx::fig2_pair();
  try {
    synthesize_reference(agents, fig2_task(0.8, 0.0, 5), 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasibleSupervisorTask);
  }
}
