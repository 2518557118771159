#pragma once

#include <string>
#include <utility>
#include <vector>

#include "decept/mdp.hpp"

namespace decept {

/// Undirected region graph for the package-delivery environment.
struct DeliveryGraph {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> agent_targets;        // N, shared by all agents
  std::vector<std::string> supervisor_target_of;  // n_i per agent
  std::vector<std::string> initial_node_of;       // start node per agent

  std::size_t num_agents() const { return initial_node_of.size(); }
};

struct DeliveryParams {
  double p_target = 0.8;
  double p_land = 0.05;
};

/// Generated MDP plus the state sets the agent and supervisor care about.
struct DeliveryInstance {
  Mdp mdp;
  std::vector<StateIndex> agent_targets;       // {(v,1) | v in N}
  std::vector<StateIndex> supervisor_targets;  // {(n_i,1)}
};

/// Throws Error(InvalidGraph) for disconnected graphs, isolated nodes,
/// unknown node references or mismatched per-agent lists.
void validate_graph(const DeliveryGraph& g);

/// Sorted neighbour ids of every node (same order as g.nodes).
std::vector<std::vector<std::string>> adjacency(const DeliveryGraph& g);

/// State naming used by the generator: "<node>/0" in flight, "<node>/1" landed.
std::string flight_state(const std::string& node);
std::string landed_state(const std::string& node);
/// Move action toward neighbour u, and the landing action.
std::string move_action(const std::string& node);
inline constexpr const char* kLandAction = "land";
inline constexpr const char* kStayAction = "stay";

/// States V x {0,1}; landed states are absorbing. A degree-one node folds
/// the leftover weather mass of its move action into its forced landing.
/// Throws Error(InvalidParams | InvalidGraph).
DeliveryInstance build_delivery_mdp(const DeliveryGraph& g, const DeliveryParams& params,
                                    std::size_t agent);

/// Deterministic BFS shortest-path navigation to n_i, landing on arrival;
/// ties go to the lexicographically smallest neighbour id.
/// Throws Error(UnreachableTarget).
StationaryPolicy shortest_path_reference(const Mdp& mdp, const DeliveryGraph& g,
                                         std::size_t agent);

}  // namespace decept
