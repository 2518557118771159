#include <gtest/gtest.h>

#include <decept/analysis.hpp>
#include <decept/delivery.hpp>
#include <decept/error.hpp>

using namespace decept;

namespace {

DeliveryGraph path_ab() {
  DeliveryGraph g;
  g.nodes = {"a", "b"};
  g.edges = {{"a", "b"}};
  g.agent_targets = {"b"};
  g.initial_node_of = {"a"};
  g.supervisor_target_of = {"b"};
  return g;
}

DeliveryGraph triangle() {
  DeliveryGraph g;
  g.nodes = {"a", "b", "c"};
  g.edges = {{"a", "b"}, {"b", "c"}, {"a", "c"}};
  g.agent_targets = {"c"};
  g.initial_node_of = {"a"};
  g.supervisor_target_of = {"c"};
  return g;
}

DeliveryGraph grid3() {
  DeliveryGraph g;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) g.nodes.push_back(std::to_string(r) + std::to_string(c));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const auto v = std::to_string(r) + std::to_string(c);
      if (c + 1 < 3) g.edges.emplace_back(v, std::to_string(r) + std::to_string(c + 1));
      if (r + 1 < 3) g.edges.emplace_back(v, std::to_string(r + 1) + std::to_string(c));
    }
  }
  g.agent_targets = {"22"};
  g.initial_node_of = {"00"};
  g.supervisor_target_of = {"11"};
  return g;
}

ActionIndex act(const Mdp& m, const std::string& s, const std::string& a) {
  return m.action_index(m.state_index(s), a);
}

// Next hop of a deterministic reference at a flight state.
std::string next_hop(const Mdp& m, const StationaryPolicy& p, const std::string& node) {
  const auto s = m.state_index(flight_state(node));
  for (ActionIndex a = 0; a < m.num_actions(s); ++a) {
    if (p.prob(s, a) == 1.0) return m.actions(s)[a].name;
  }
  return "";
}

}  // namespace

TEST(Delivery, DegreeOneFoldsWeatherIntoLanding) {
  const auto inst = build_delivery_mdp(path_ab(), {0.8, 0.1}, 0);
  const auto& m = inst.mdp;
  const auto s = m.state_index(flight_state("a"));
  const auto a = act(m, flight_state("a"), move_action("b"));
  EXPECT_NEAR(m.transition(s, a, m.state_index(flight_state("b"))), 0.8, 1e-15);
  EXPECT_NEAR(m.transition(s, a, m.state_index(landed_state("a"))), 0.2, 1e-15);
  EXPECT_NO_THROW(validate_mdp(m));
}

TEST(Delivery, TriangleWeatherToThirdNode) {
  const auto inst = build_delivery_mdp(triangle(), {0.8, 0.1}, 0);
  const auto& m = inst.mdp;
  const auto s = m.state_index(flight_state("a"));
  const auto a = act(m, flight_state("a"), move_action("b"));
  EXPECT_NEAR(m.transition(s, a, m.state_index(flight_state("c"))), 0.1, 1e-12);
  EXPECT_NEAR(m.transition(s, a, m.state_index(flight_state("b"))), 0.8, 1e-12);
  EXPECT_NEAR(m.transition(s, a, m.state_index(landed_state("a"))), 0.1, 1e-12);
  EXPECT_NO_THROW(validate_mdp(m));
}

TEST(Delivery, DeterministicWeather) {
  const auto inst = build_delivery_mdp(triangle(), {1.0, 0.0}, 0);
  const auto& m = inst.mdp;
  const auto s = m.state_index(flight_state("a"));
  const auto land = act(m, flight_state("a"), kLandAction);
  EXPECT_DOUBLE_EQ(m.transition(s, land, m.state_index(landed_state("a"))), 1.0);
  EXPECT_EQ(m.actions(s)[land].outcomes.size(), 1u);
  const auto mv = act(m, flight_state("a"), move_action("c"));
  EXPECT_DOUBLE_EQ(m.transition(s, mv, m.state_index(flight_state("c"))), 1.0);
}

TEST(Delivery, LandedStatesAbsorbAndTargets) {
  const auto inst = build_delivery_mdp(grid3(), {0.8, 0.05}, 0);
  const auto& m = inst.mdp;
  EXPECT_EQ(m.num_states(), 18u);
  for (const auto& v : grid3().nodes) EXPECT_TRUE(m.is_absorbing(m.state_index(landed_state(v))));
  EXPECT_EQ(inst.agent_targets, (std::vector<StateIndex>{m.state_index(landed_state("22"))}));
  EXPECT_EQ(inst.supervisor_targets, (std::vector<StateIndex>{m.state_index(landed_state("11"))}));
  EXPECT_EQ(m.initial(), m.state_index(flight_state("00")));
}

TEST(Delivery, InvalidInputs) {
  auto g = path_ab();
  EXPECT_THROW(build_delivery_mdp(g, {0.8, 0.3}, 0), Error);
  EXPECT_THROW(build_delivery_mdp(g, {0.8, 0.1}, 3), Error);
  g.nodes.push_back("lonely");
  try {
    validate_graph(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidGraph);
  }
  auto h = path_ab();
  h.nodes.push_back("c");
  h.nodes.push_back("d");
  h.edges.emplace_back("c", "d");
  EXPECT_THROW(validate_graph(h), Error);  // two components
  auto k = path_ab();
  k.agent_targets = {"zz"};
  EXPECT_THROW(validate_graph(k), Error);
}

TEST(Delivery, ShortestPathOnPath) {
  DeliveryGraph g;
  g.nodes = {"a", "b", "c"};
  g.edges = {{"a", "b"}, {"b", "c"}};
  g.agent_targets = {"a"};
  g.initial_node_of = {"a", "c"};
  g.supervisor_target_of = {"c", "c"};
  const auto m = build_delivery_mdp(g, {0.8, 0.05}, 0).mdp;
  const auto p = shortest_path_reference(m, g, 0);
  EXPECT_EQ(next_hop(m, p, "a"), move_action("b"));
  EXPECT_EQ(next_hop(m, p, "b"), move_action("c"));
  EXPECT_EQ(next_hop(m, p, "c"), kLandAction);
  // Agent starting at its target lands at once.
  const auto m1 = build_delivery_mdp(g, {0.8, 0.05}, 1).mdp;
  EXPECT_EQ(next_hop(m1, shortest_path_reference(m1, g, 1), "c"), kLandAction);
}

TEST(Delivery, ShortestPathTieBreak) {
  // From 00 to 11 both 01 and 10 are one step closer; "01" < "10".
  const auto g = grid3();
  const auto m = build_delivery_mdp(g, {0.8, 0.05}, 0).mdp;
  const auto p = shortest_path_reference(m, g, 0);
  EXPECT_EQ(next_hop(m, p, "00"), move_action("01"));
  EXPECT_EQ(next_hop(m, p, "22"), move_action("12"));
  EXPECT_EQ(next_hop(m, p, "11"), kLandAction);
  EXPECT_NO_THROW(validate_policy(m, p));
  // The reference reaches its own landing spot with decent probability.
  EXPECT_GT(reach_probability(m, p, std::vector<StateIndex>{m.state_index(landed_state("11"))}),
            0.5);
}
