#pragma once

// Small shared fixtures: the two-agent delivery MDP used throughout
// (states 1,2,3,4,*) and its reference policies.

#include <decept/analysis.hpp>
#include <decept/mdp.hpp>
#include <decept/occupancy_opt.hpp>

#include <string>
#include <vector>

namespace fx {

inline decept::Mdp fig2_mdp() {
  decept::MdpBuilder b;
  for (const char* s : {"1", "2", "3", "4", "*"}) b.add_state(s);
  b.add_transition("1", "r", "2", 0.9);
  b.add_transition("1", "r", "4", 0.1);
  b.add_transition("1", "d", "4", 0.9);
  b.add_transition("1", "d", "2", 0.1);
  b.add_transition("2", "r", "3", 0.8);
  b.add_transition("2", "r", "*", 0.2);
  b.add_transition("2", "land", "*", 1.0);
  b.add_transition("3", "stay", "3", 1.0);
  b.add_transition("4", "stay", "4", 1.0);
  b.add_transition("*", "stay", "*", 1.0);
  b.set_initial("1");
  return b.build();
}

inline decept::StateIndex st(const decept::Mdp& m, const char* name) { return m.state_index(name); }

// choice per state by action name; states with one action take it.
inline decept::StationaryPolicy det(const decept::Mdp& m, const char* at1, const char* at2) {
  std::vector<decept::ActionIndex> c(m.num_states(), 0);
  c[st(m, "1")] = m.action_index(st(m, "1"), at1);
  c[st(m, "2")] = m.action_index(st(m, "2"), at2);
  return decept::StationaryPolicy::deterministic(m, c);
}

inline decept::StationaryPolicy ref1(const decept::Mdp& m) { return det(m, "r", "r"); }
inline decept::StationaryPolicy ref2(const decept::Mdp& m) { return det(m, "d", "r"); }
inline decept::StationaryPolicy land1(const decept::Mdp& m) { return det(m, "r", "land"); }

inline std::vector<decept::StateIndex> star(const decept::Mdp& m) { return {st(m, "*")}; }

inline decept::AgentSpec agent1() {
  auto m = fig2_mdp();
  auto r = ref1(m);
  auto t = star(m);
  return decept::AgentSpec::make(std::move(m), std::move(r), std::move(t));
}

inline decept::AgentSpec agent2() {
  auto m = fig2_mdp();
  auto r = ref2(m);
  auto t = star(m);
  return decept::AgentSpec::make(std::move(m), std::move(r), std::move(t));
}

inline std::vector<decept::AgentSpec> fig2_pair() { return {agent1(), agent2()}; }

}  // namespace fx
