#include <gtest/gtest.h>

#include <cmath>
#include <decept/error.hpp>
#include <decept/supervisor.hpp>
#include <random>

#include "fixtures.hpp"

using namespace decept;

namespace {

// Exhaustive oracle: maximize sum -log theta s.t. sum theta V <= C.
double best_profit(const std::vector<double>& th, const std::vector<double>& v, double c) {
  double best = 0.0;
  const std::size_t n = th.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double w = 0.0, p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        w += th[i] * v[i];
        p -= std::log(th[i]);
      }
    }
    if (w <= c) best = std::max(best, p);
  }
  return best;
}

double profit_of(const std::vector<std::size_t>& t, const std::vector<double>& th) {
  double p = 0.0;
  for (auto i : t) p -= std::log(th[i]);
  return p;
}

}  // namespace

TEST(Belief, FromLlr) {
  EXPECT_DOUBLE_EQ(belief_from_llr(0.3, 0.0), 0.7);
  EXPECT_NEAR(belief_from_llr(0.5, std::log(5.0)), 1.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(belief_from_llr(0.5, -std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_DOUBLE_EQ(belief_from_llr(0.5, std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_GT(belief_from_llr(0.5, 700.0), 0.0);
  EXPECT_FALSE(std::isnan(belief_from_llr(0.5, 800.0)));  // underflows to 0, never NaN
}

TEST(Belief, UpdateFromPaths) {
  const auto m = fx::fig2_mdp();
  PathRecord p;
  p.states = {fx::st(m, "1"), fx::st(m, "2"), fx::st(m, "*")};
  const std::vector<PathRecord> one{p};
  EXPECT_NEAR(belief_update(0.5, one, fx::land1(m), fx::ref1(m), m), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(belief_update(0.5, one, fx::ref1(m), fx::ref1(m), m), 0.5, 1e-12);
  // Two identical observations double the LLR.
  const std::vector<PathRecord> two{p, p};
  const double expect = 1.0 - 0.5 / (0.5 + 0.5 / 25.0);
  EXPECT_NEAR(belief_update(0.5, two, fx::land1(m), fx::ref1(m), m), expect, 1e-12);
  // A path the deceptive policy cannot produce clears the agent.
  PathRecord q;
  q.states = {fx::st(m, "1"), fx::st(m, "2"), fx::st(m, "3")};
  const std::vector<PathRecord> clear{q};
  EXPECT_DOUBLE_EQ(belief_update(0.5, clear, fx::land1(m), fx::ref1(m), m), 1.0);
  EXPECT_DOUBLE_EQ(belief_update(0.5, std::vector<PathRecord>{}, fx::land1(m), fx::ref1(m), m), 0.5);

  PathRecord cut = p;
  cut.truncated = true;
  try {
    belief_update(0.5, std::vector<PathRecord>{cut}, fx::land1(m), fx::ref1(m), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TruncatedPath);
  }
}

TEST(Belief, InitialState) {
  const std::vector<double> pri{0.2, 0.5};
  const auto b = BeliefState::initial(pri);
  EXPECT_DOUBLE_EQ(b.beliefs[0], 0.8);
  EXPECT_DOUBLE_EQ(b.beliefs[1], 0.5);
  EXPECT_EQ(b.observed_rounds, 0);
}

TEST(Belief, Proxy) {
  EXPECT_DOUBLE_EQ(belief_proxy(0.3, 1, 0.0), 0.7);
  EXPECT_NEAR(belief_proxy(0.5, 1, std::log(5.0)), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(belief_proxy(0.5, 2, std::log(5.0)), 1.0 - 0.5 / (0.5 + 0.5 / 25.0), 1e-15);
  EXPECT_LT(belief_proxy(0.5, 1, 60.0), 1e-20);
  EXPECT_GE(belief_proxy(0.5, 1, 1e6), 0.0);
}

TEST(Eliminate, GreedyExamples) {
  const std::vector<double> th{0.2, 0.5, 0.9};
  EXPECT_EQ(eliminate_greedy(th, 0.75), (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(eliminate_greedy(th, 0.0).empty());
  EXPECT_EQ(eliminate_greedy(th, 1.6), (std::vector<std::size_t>{0, 1, 2}));
  const std::vector<double> perm{0.9, 0.2, 0.5};
  EXPECT_EQ(eliminate_greedy(perm, 0.75), (std::vector<std::size_t>{1, 2}));
}

TEST(Eliminate, GeneralExamples) {
  const std::vector<double> th{0.5, 0.5}, v{1.0, 10.0};
  EXPECT_EQ(eliminate_general(th, v, 1.0), std::vector<std::size_t>{0});
  const std::vector<double> one{0.4}, vone{2.0};
  EXPECT_EQ(eliminate_general(one, vone, 0.8), std::vector<std::size_t>{0});
  EXPECT_TRUE(eliminate_general(one, vone, 0.7).empty());
  const std::vector<double> many(21, 0.5), vmany(21, 1.0);
  try {
    eliminate_general(many, vmany, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooManyAgents);
  }
}

TEST(Eliminate, GeneralMatchesExhaustiveOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99), uv(0.2, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    std::vector<double> th(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      th[i] = u(rng);
      v[i] = uv(rng);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += th[i] * v[i];
    const double c = total * u(rng);
    const auto t = eliminate_general(th, v, c);
    double w = 0.0;
    for (auto i : t) w += th[i] * v[i];
    EXPECT_LE(w, c + 1e-12);
    EXPECT_NEAR(profit_of(t, th), best_profit(th, v, c), 1e-9) << "trial " << trial;
  }
}

TEST(Eliminate, EqualProfitsFillInIndexOrder) {
  const std::vector<double> th(5, 0.3), v(5, 1.0);
  EXPECT_EQ(eliminate_general(th, v, 0.95), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(eliminate_greedy(th, 0.95), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Knapsack, ClosedFormSingle) {
  const std::vector<double> w{1.0}, p{std::log(2.0)};
  const auto ag = knapsack_fixture(w, p, 0.1);
  ASSERT_EQ(ag.size(), 1u);
  const double th = belief_update(ag[0].prior, std::vector<PathRecord>{ag[0].path}, ag[0].deceptive,
                                  ag[0].reference, ag[0].mdp);
  EXPECT_NEAR(th, 0.5, 1e-12);
  EXPECT_NEAR(ag[0].utility, 2.0, 1e-12);
}

TEST(Knapsack, KappaTooLarge) {
  const std::vector<double> w{1.0}, p{0.01};
  try {
    knapsack_fixture(w, p, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::KappaTooLarge);
  }
}
