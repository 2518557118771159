#include <gtest/gtest.h>

#include <cmath>
#include <decept/analysis.hpp>
#include <decept/error.hpp>
#include <decept/mdp.hpp>
#include <numeric>
#include <random>

#include "fixtures.hpp"

using namespace decept;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

// Brute-force oracle for the closed classes of a chain: s is closed iff
// everything reachable from s can reach s back.
std::vector<bool> closed_by_reachability(const MarkovChain& c) {
  const auto n = c.num_states();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    r[s][s] = true;
    for (const auto& o : c.rows[s]) r[s][o.next] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  std::vector<bool> closed(n, true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (r[i][j] && !r[j][i]) closed[i] = false;
  return closed;
}

}  // namespace

TEST(Mdp, Fig2Validates) {
  const auto m = fx::fig2_mdp();
  EXPECT_NO_THROW(validate_mdp(m));
  EXPECT_EQ(m.num_states(), 5u);
  EXPECT_TRUE(m.is_absorbing(fx::st(m, "*")));
  EXPECT_FALSE(m.is_absorbing(fx::st(m, "2")));
}

TEST(Mdp, RowSumHalfIsRejected) {
  MdpBuilder b;
  b.add_state("1");
  b.add_state("2");
  b.add_transition("1", "r", "2", 0.5);
  b.add_transition("2", "stay", "2", 1.0);
  const auto m = b.build();
  try {
    validate_mdp(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RowNotStochastic);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("r"), std::string::npos);
  }
}

TEST(Mdp, SingleAbsorbingState) {
  MdpBuilder b;
  b.add_state("s");
  b.add_transition("s", "stay", "s", 1.0);
  EXPECT_NO_THROW(validate_mdp(b.build()));
}

TEST(Mdp, EmptyActionAndUnknownState) {
  MdpBuilder b;
  b.add_state("s");
  EXPECT_EQ(kind_of([&] { validate_mdp(b.build()); }), ErrorKind::EmptyActionSet);
  EXPECT_EQ(kind_of([&] { MdpBuilder c; c.add_transition("s", "a", "nowhere", 1.0); }),
            ErrorKind::UnknownState);
  const auto m = fx::fig2_mdp();
  EXPECT_EQ(kind_of([&] { m.state_index("9"); }), ErrorKind::UnknownState);
  EXPECT_EQ(kind_of([&] { m.action_index(0, "fly"); }), ErrorKind::UnknownAction);
}

TEST(Mdp, InducedChainFig2) {
  const auto m = fx::fig2_mdp();
  const auto c = induced_chain(m, fx::ref1(m));
  EXPECT_DOUBLE_EQ(c.prob(fx::st(m, "1"), fx::st(m, "2")), 0.9);
  EXPECT_DOUBLE_EQ(c.prob(fx::st(m, "1"), fx::st(m, "4")), 0.1);
  EXPECT_DOUBLE_EQ(c.prob(fx::st(m, "2"), fx::st(m, "3")), 0.8);
  EXPECT_DOUBLE_EQ(c.prob(fx::st(m, "2"), fx::st(m, "*")), 0.2);
  const auto l = induced_chain(m, fx::land1(m));
  EXPECT_DOUBLE_EQ(l.prob(fx::st(m, "2"), fx::st(m, "*")), 1.0);
  EXPECT_DOUBLE_EQ(l.prob(fx::st(m, "2"), fx::st(m, "3")), 0.0);
}

TEST(Mdp, UniformOverIdenticalActions) {
  MdpBuilder b;
  b.add_state("s");
  b.add_state("t");
  b.add_state("u");
  b.add_transition("s", "a", "t", 0.3);
  b.add_transition("s", "a", "u", 0.7);
  b.add_transition("s", "b", "t", 0.3);
  b.add_transition("s", "b", "u", 0.7);
  b.add_transition("t", "stay", "t", 1.0);
  b.add_transition("u", "stay", "u", 1.0);
  const auto m = b.build();
  const auto c = induced_chain(m, StationaryPolicy::uniform(m));
  EXPECT_NEAR(c.prob(0, m.state_index("t")), 0.3, 1e-15);
  EXPECT_NEAR(c.prob(0, m.state_index("u")), 0.7, 1e-15);
}

TEST(Mdp, PolicyMismatch) {
  const auto m = fx::fig2_mdp();
  StationaryPolicy bad({{0.5, 0.4}, {1.0, 0.0}, {1.0}, {1.0}, {1.0}});
  EXPECT_EQ(kind_of([&] { validate_policy(m, bad); }), ErrorKind::PolicyMismatch);
  StationaryPolicy short_table({{1.0, 0.0}});
  EXPECT_EQ(kind_of([&] { validate_policy(m, short_table); }), ErrorKind::PolicyMismatch);
}

TEST(Analysis, DecomposeFig2) {
  const auto m = fx::fig2_mdp();
  const auto t = fx::star(m);
  for (const auto& ref : {fx::ref1(m), fx::ref2(m)}) {
    const auto d = decompose(m, ref, t);
    EXPECT_EQ(d.deviation_states, (std::vector<StateIndex>{fx::st(m, "1"), fx::st(m, "2")}));
    EXPECT_TRUE(d.is_target(fx::st(m, "*")));
    EXPECT_EQ(d.role[fx::st(m, "3")], StateRole::Closed);
    EXPECT_EQ(d.role[fx::st(m, "4")], StateRole::Closed);
  }
}

TEST(Analysis, DecomposeAbsorbingStart) {
  MdpBuilder b;
  b.add_state("s");
  b.add_transition("s", "stay", "s", 1.0);
  const auto m = b.build();
  const auto d = decompose(m, StationaryPolicy::uniform(m), {});
  EXPECT_TRUE(d.deviation_states.empty());
}

TEST(Analysis, NonAbsorbingTarget) {
  const auto m = fx::fig2_mdp();
  const std::vector<StateIndex> t{fx::st(m, "2")};
  EXPECT_EQ(kind_of([&] { decompose(m, fx::ref1(m), t); }), ErrorKind::NonAbsorbingTarget);
}

TEST(Analysis, SccMatchesReachabilityOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng() % 8;
    MdpBuilder b;
    for (std::size_t s = 0; s < n; ++s) b.add_state("s" + std::to_string(s));
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t k = 1 + rng() % 2;
      for (std::size_t j = 0; j < k; ++j) {
        b.add_transition("s" + std::to_string(s), "a", "s" + std::to_string(rng() % n),
                         1.0 / static_cast<double>(k));
      }
    }
    const auto m = b.build();
    const auto pol = StationaryPolicy::uniform(m);
    const auto chain = induced_chain(m, pol);
    const auto oracle = closed_by_reachability(chain);
    const auto d = decompose(m, pol, {});
    for (std::size_t s = 0; s < n; ++s) {
      EXPECT_EQ(d.role[s] == StateRole::Closed, oracle[s]) << "trial " << trial << " state " << s;
    }
  }
}

TEST(Analysis, ReachProbabilityFig2) {
  const auto m = fx::fig2_mdp();
  const auto t = fx::star(m);
  EXPECT_NEAR(reach_probability(m, fx::ref1(m), t), 0.9 * 0.2, 1e-12);
  EXPECT_NEAR(reach_probability(m, fx::ref2(m), t), 0.1 * 0.2, 1e-12);
  EXPECT_NEAR(reach_probability(m, fx::land1(m), t), 0.9, 1e-12);
  const std::vector<StateIndex> start{fx::st(m, "1")};
  EXPECT_DOUBLE_EQ(reach_probability(m, fx::ref1(m), start), 1.0);
}

TEST(Analysis, DisjunctiveReach) {
  const std::vector<double> ref{0.18, 0.02};
  EXPECT_NEAR(disjunctive_reach(ref), 0.1964, 1e-12);
  const std::vector<double> dev{0.9, 0.02};
  EXPECT_NEAR(disjunctive_reach(dev), 0.902, 1e-12);
  const std::vector<double> sure{1.0, 0.3};
  EXPECT_DOUBLE_EQ(disjunctive_reach(sure), 1.0);
  EXPECT_DOUBLE_EQ(disjunctive_reach(std::vector<double>{}), 0.0);
  EXPECT_EQ(kind_of([] { disjunctive_reach(std::vector<double>{1.5}); }), ErrorKind::OutOfRange);
}

TEST(Analysis, OccupancyFig2) {
  const auto m = fx::fig2_mdp();
  const auto t = fx::star(m);
  const auto ref = fx::ref1(m);
  const auto d = decompose(m, ref, t);
  const auto s1 = fx::st(m, "1"), s2 = fx::st(m, "2");
  const auto x = occupancy_from_policy(m, ref, d);
  EXPECT_NEAR(x.entry(s1, m.action_index(s1, "r")), 1.0, 1e-12);
  EXPECT_NEAR(x.entry(s2, m.action_index(s2, "r")), 0.9, 1e-12);
  const auto xl = occupancy_from_policy(m, fx::land1(m), d);
  EXPECT_NEAR(xl.entry(s1, m.action_index(s1, "r")), 1.0, 1e-12);
  EXPECT_NEAR(xl.entry(s2, m.action_index(s2, "land")), 0.9, 1e-12);
  EXPECT_NEAR(xl.entry(s2, m.action_index(s2, "r")), 0.0, 1e-15);
  for (double r : flow_residuals(m, xl)) EXPECT_NEAR(r, 0.0, 1e-12);
  EXPECT_NEAR(occupancy_reach(m, xl, t), 0.9, 1e-12);
  EXPECT_NEAR(occupancy_reach(m, x, t), 0.18, 1e-12);
}

TEST(Analysis, InfiniteOccupancy) {
  MdpBuilder b;
  b.add_state("a");
  b.add_state("b");
  b.add_state("t");
  b.add_transition("a", "go", "b", 1.0);
  b.add_transition("a", "out", "t", 1.0);
  b.add_transition("b", "go", "a", 1.0);
  b.add_transition("b", "out", "t", 1.0);
  b.add_transition("t", "stay", "t", 1.0);
  b.set_initial("a");
  const auto m = b.build();
  const auto ref = StationaryPolicy::uniform(m);
  const std::vector<StateIndex> t{m.state_index("t")};
  const auto d = decompose(m, ref, t);
  std::vector<ActionIndex> loop{0, 0, 0};
  EXPECT_EQ(kind_of([&] { occupancy_from_policy(m, StationaryPolicy::deterministic(m, loop), d); }),
            ErrorKind::InfiniteOccupancy);
}

TEST(Analysis, PolicyFromOccupancy) {
  const auto m = fx::fig2_mdp();
  const auto t = fx::star(m);
  const auto ref = fx::ref1(m);
  const auto d = decompose(m, ref, t);
  const auto s2 = fx::st(m, "2");
  const auto xl = occupancy_from_policy(m, fx::land1(m), d);
  const auto back = policy_from_occupancy(m, xl, ref);
  EXPECT_DOUBLE_EQ(back.prob(s2, m.action_index(s2, "land")), 1.0);
  EXPECT_EQ(policy_from_occupancy(m, occupancy_from_policy(m, ref, d), ref), ref);

  auto zero = xl;
  for (auto& v : zero.entries[*zero.local_index(s2)]) v = 0.0;
  const auto fb = policy_from_occupancy(m, zero, ref);
  EXPECT_DOUBLE_EQ(fb.prob(s2, m.action_index(s2, "r")), 1.0);

  auto neg = xl;
  neg.entries[0][0] = -0.5;
  EXPECT_EQ(kind_of([&] { policy_from_occupancy(m, neg, ref); }), ErrorKind::NegativeEntry);
}

TEST(Analysis, KlOccupancy) {
  const auto m = fx::fig2_mdp();
  const auto t = fx::star(m);
  const auto ref = fx::ref1(m);
  const auto d = decompose(m, ref, t);
  EXPECT_NEAR(kl_occupancy(m, occupancy_from_policy(m, ref, d), ref), 0.0, 1e-15);
  EXPECT_NEAR(kl_occupancy(m, occupancy_from_policy(m, fx::land1(m), d), ref), 0.9 * std::log(5.0),
              1e-12);
  // Mass on a transition the reference never takes.
  MdpBuilder b;
  b.add_state("s");
  b.add_state("t");
  b.add_state("u");
  b.add_transition("s", "a", "t", 1.0);
  b.add_transition("s", "b", "u", 1.0);
  b.add_transition("t", "stay", "t", 1.0);
  b.add_transition("u", "stay", "u", 1.0);
  const auto m2 = b.build();
  std::vector<ActionIndex> ca{0, 0, 0}, cb{1, 0, 0};
  const auto pa = StationaryPolicy::deterministic(m2, ca);
  const auto d2 = decompose(m2, pa, std::vector<StateIndex>{m2.state_index("t")});
  const auto xb = occupancy_from_policy(m2, StationaryPolicy::deterministic(m2, cb), d2);
  EXPECT_TRUE(std::isinf(kl_occupancy(m2, xb, pa)));
}

TEST(Analysis, PathLlr) {
  const auto m = fx::fig2_mdp();
  const std::vector<StateIndex> p{fx::st(m, "1"), fx::st(m, "2"), fx::st(m, "*")};
  const auto l = path_llr(p, fx::land1(m), fx::ref1(m), m);
  EXPECT_EQ(l.status, LlrStatus::Finite);
  EXPECT_NEAR(l.value, std::log(5.0), 1e-12);
  EXPECT_NEAR(path_llr(p, fx::ref1(m), fx::ref1(m), m).value, 0.0, 1e-15);
  // Agent 2's r-policy vs its d reference on 1 -> 4.
  const std::vector<StateIndex> q{fx::st(m, "1"), fx::st(m, "4")};
  EXPECT_NEAR(path_llr(q, fx::ref1(m), fx::ref2(m), m).value, std::log(0.1 / 0.9), 1e-12);
  // 2 -> 3 is impossible under landing: -inf.
  const std::vector<StateIndex> r{fx::st(m, "1"), fx::st(m, "2"), fx::st(m, "3")};
  EXPECT_EQ(path_llr(r, fx::land1(m), fx::ref1(m), m).status, LlrStatus::InfeasibleUnderDeceptive);
  EXPECT_EQ(path_llr(r, fx::ref1(m), fx::land1(m), m).status, LlrStatus::InfeasibleUnderReference);
}
