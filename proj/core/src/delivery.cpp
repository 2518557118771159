#include "decept/delivery.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "decept/error.hpp"

namespace decept {

namespace {

std::map<std::string, std::size_t> node_index(const DeliveryGraph& g) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!idx.emplace(g.nodes[i], i).second) {
      throw Error(ErrorKind::InvalidGraph, "duplicate node '" + g.nodes[i] + "'");
    }
  }
  return idx;
}

void require_node(const std::map<std::string, std::size_t>& idx, const std::string& v,
                  const char* what) {
  if (!idx.contains(v)) {
    throw Error(ErrorKind::InvalidGraph, std::string(what) + " '" + v + "' is not a node");
  }
}

}  // namespace

std::string flight_state(const std::string& node) { return node + "/0"; }
std::string landed_state(const std::string& node) { return node + "/1"; }
std::string move_action(const std::string& node) { return "to_" + node; }

std::vector<std::vector<std::string>> adjacency(const DeliveryGraph& g) {
  const auto idx = node_index(g);
  std::vector<std::set<std::string>> adj(g.nodes.size());
  for (const auto& [u, v] : g.edges) {
    require_node(idx, u, "edge endpoint");
    require_node(idx, v, "edge endpoint");
    if (u == v) throw Error(ErrorKind::InvalidGraph, "self loop at '" + u + "'");
    adj[idx.at(u)].insert(v);
    adj[idx.at(v)].insert(u);
  }
  std::vector<std::vector<std::string>> out(g.nodes.size());
  for (std::size_t i = 0; i < adj.size(); ++i) out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

void validate_graph(const DeliveryGraph& g) {
  if (g.nodes.empty()) throw Error(ErrorKind::InvalidGraph, "graph has no nodes");
  const auto idx = node_index(g);
  const auto adj = adjacency(g);
  for (std::size_t i = 0; i < adj.size(); ++i) {
    if (adj[i].empty()) throw Error(ErrorKind::InvalidGraph, "node '" + g.nodes[i] + "' is isolated");
  }
  std::vector<bool> seen(g.nodes.size(), false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto& u : adj[v]) {
      const auto ui = idx.at(u);
      if (!seen[ui]) {
        seen[ui] = true;
        queue.push_back(ui);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error(ErrorKind::InvalidGraph, "graph is not connected");
  }
  for (const auto& v : g.agent_targets) require_node(idx, v, "agent target");
  if (g.supervisor_target_of.size() != g.initial_node_of.size()) {
    throw Error(ErrorKind::InvalidGraph, "per-agent start and supervisor target lists differ in size");
  }
  for (const auto& v : g.supervisor_target_of) require_node(idx, v, "supervisor target");
  for (const auto& v : g.initial_node_of) require_node(idx, v, "initial node");
}

DeliveryInstance build_delivery_mdp(const DeliveryGraph& g, const DeliveryParams& params,
                                    std::size_t agent) {
  if (!(params.p_target >= 0.0 && params.p_land >= 0.0 &&
        params.p_target + params.p_land <= 1.0 + 1e-12)) {
    throw Error(ErrorKind::InvalidParams, "need p_target, p_land >= 0 and p_target + p_land <= 1");
  }
  validate_graph(g);
  if (agent >= g.num_agents()) {
    throw Error(ErrorKind::InvalidParams, "agent index " + std::to_string(agent) + " undefined");
  }
  const auto adj = adjacency(g);
  const double weather = std::max(0.0, 1.0 - params.p_target - params.p_land);

  MdpBuilder b;
  for (const auto& v : g.nodes) b.add_state(flight_state(v));
  for (const auto& v : g.nodes) b.add_state(landed_state(v));

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& v = g.nodes[i];
    const auto& nbrs = adj[i];
    const auto from = flight_state(v);
    const double deg = static_cast<double>(nbrs.size());
    for (const auto& u : nbrs) {
      const auto act = move_action(u);
      b.add_transition(from, act, flight_state(u), params.p_target);
      if (nbrs.size() == 1) {
        b.add_transition(from, act, landed_state(v), params.p_land + weather);
      } else {
        b.add_transition(from, act, landed_state(v), params.p_land);
        for (const auto& w : nbrs) {
          if (w != u) b.add_transition(from, act, flight_state(w), weather / (deg - 1.0));
        }
      }
    }
    b.add_transition(from, kLandAction, landed_state(v), params.p_target + params.p_land);
    for (const auto& u : nbrs) b.add_transition(from, kLandAction, flight_state(u), weather / deg);
    b.add_transition(landed_state(v), kStayAction, landed_state(v), 1.0);
  }
  b.set_initial(flight_state(g.initial_node_of[agent]));

  DeliveryInstance inst{b.build(), {}, {}};
  for (const auto& v : g.agent_targets) {
    inst.agent_targets.push_back(inst.mdp.state_index(landed_state(v)));
  }
  std::sort(inst.agent_targets.begin(), inst.agent_targets.end());
  inst.agent_targets.erase(std::unique(inst.agent_targets.begin(), inst.agent_targets.end()),
                           inst.agent_targets.end());
  inst.supervisor_targets.push_back(
      inst.mdp.state_index(landed_state(g.supervisor_target_of[agent])));

  // Zero-probability outcomes (e.g. weather == 0) are dropped so Succ(s) is exact.
  std::vector<std::string> names = inst.mdp.state_names();
  std::vector<std::vector<Action>> actions(inst.mdp.num_states());
  for (StateIndex s = 0; s < inst.mdp.num_states(); ++s) {
    for (const auto& act : inst.mdp.actions(s)) {
      Action a{act.name, {}};
      for (const auto& o : act.outcomes) {
        if (o.prob > 0.0) a.outcomes.push_back(o);
      }
      actions[s].push_back(std::move(a));
    }
  }
  inst.mdp = Mdp(std::move(names), std::move(actions), inst.mdp.initial());
  return inst;
}

StationaryPolicy shortest_path_reference(const Mdp& mdp, const DeliveryGraph& g,
                                         std::size_t agent) {
  if (agent >= g.num_agents()) {
    throw Error(ErrorKind::InvalidParams, "agent index " + std::to_string(agent) + " undefined");
  }
  const auto idx = node_index(g);
  const auto adj = adjacency(g);
  const auto& goal = g.supervisor_target_of[agent];
  constexpr auto kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.nodes.size(), kInf);
  std::deque<std::size_t> queue{idx.at(goal)};
  dist[idx.at(goal)] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto& u : adj[v]) {
      const auto ui = idx.at(u);
      if (dist[ui] == kInf) {
        dist[ui] = dist[v] + 1;
        queue.push_back(ui);
      }
    }
  }
  if (dist[idx.at(g.initial_node_of[agent])] == kInf) {
    throw Error(ErrorKind::UnreachableTarget, "supervisor target '" + goal + "'");
  }

  auto policy = StationaryPolicy::uniform(mdp);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& v = g.nodes[i];
    const auto fs = mdp.state_index(flight_state(v));
    if (v == goal || dist[i] == kInf) {
      policy.set_deterministic(fs, mdp.action_index(fs, kLandAction));
    } else {
      // adj[i] is sorted, so the first neighbour one step closer is the
      // lexicographically smallest.
      for (const auto& u : adj[i]) {
        if (dist[idx.at(u)] + 1 == dist[i]) {
          policy.set_deterministic(fs, mdp.action_index(fs, move_action(u)));
          break;
        }
      }
    }
    const auto ls = mdp.state_index(landed_state(v));
    policy.set_deterministic(ls, 0);
  }
  return policy;
}

}  // namespace decept
