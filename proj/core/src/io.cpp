#include "decept/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "decept/error.hpp"
#include "json_io.hpp"

namespace decept {

namespace detail {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::ParseError, where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorKind::MissingField, where + "/" + key);
  }
  return *it;
}

double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorKind::ParseError, where + ": expected a number");
  return v.get<double>();
}

std::string string_at(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorKind::ParseError, where + ": expected a string");
}

Mdp mdp_from_json(const json& j, const std::string& where) {
  const auto& states = require(j, "states", where);
  if (!states.is_array()) throw Error(ErrorKind::ParseError, where + "/states: expected an array");
  MdpBuilder b;
  for (std::size_t i = 0; i < states.size(); ++i) {
    b.add_state(string_at(states[i], where + "/states/" + std::to_string(i)));
  }
  const auto& trans = require(j, "transitions", where);
  if (!trans.is_array()) {
    throw Error(ErrorKind::ParseError, where + "/transitions: expected an array");
  }
  for (std::size_t i = 0; i < trans.size(); ++i) {
    const auto w = where + "/transitions/" + std::to_string(i);
    const auto& t = trans[i];
    if (!t.is_array() || t.size() != 4) {
      throw Error(ErrorKind::ParseError, w + ": expected [state, action, next, prob]");
    }
    b.add_transition(string_at(t[0], w), string_at(t[1], w), string_at(t[2], w),
                     number_at(t[3], w));
  }
  b.set_initial(string_at(require(j, "initial", where), where + "/initial"));
  return b.build();
}

json mdp_json(const Mdp& mdp) {
  json j;
  j["states"] = mdp.state_names();
  j["initial"] = mdp.state_name(mdp.initial());
  json trans = json::array();
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    for (const auto& act : mdp.actions(s)) {
      for (const auto& o : act.outcomes) {
        trans.push_back({mdp.state_name(s), act.name, mdp.state_name(o.next), o.prob});
      }
    }
  }
  j["transitions"] = std::move(trans);
  return j;
}

StationaryPolicy policy_from_json(const Mdp& mdp, const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::ParseError, where + ": expected an object");
  std::vector<std::vector<double>> dist(mdp.num_states());
  std::vector<bool> seen(mdp.num_states(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto s = mdp.state_index(it.key());
    seen[s] = true;
    dist[s].assign(mdp.num_actions(s), 0.0);
    if (!it->is_object()) {
      throw Error(ErrorKind::ParseError, where + "/" + it.key() + ": expected an object");
    }
    for (auto a = it->begin(); a != it->end(); ++a) {
      dist[s][mdp.action_index(s, a.key())] = number_at(*a, where + "/" + it.key() + "/" + a.key());
    }
  }
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    if (seen[s]) continue;
    if (mdp.num_actions(s) != 1) {
      throw Error(ErrorKind::MissingField, where + "/" + mdp.state_name(s));
    }
    dist[s] = {1.0};
  }
  StationaryPolicy pol(std::move(dist));
  validate_policy(mdp, pol);
  return pol;
}

json policy_json(const Mdp& mdp, const StationaryPolicy& policy) {
  json j = json::object();
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    json row = json::object();
    const auto acts = mdp.actions(s);
    for (ActionIndex a = 0; a < acts.size(); ++a) row[acts[a].name] = policy.prob(s, a);
    j[mdp.state_name(s)] = std::move(row);
  }
  return j;
}

DeliveryGraph graph_from_json(const json& j, const std::string& where) {
  DeliveryGraph g;
  const auto& nodes = require(j, "nodes", where);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    g.nodes.push_back(string_at(nodes[i], where + "/nodes/" + std::to_string(i)));
  }
  const auto& edges = require(j, "edges", where);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto w = where + "/edges/" + std::to_string(i);
    if (!edges[i].is_array() || edges[i].size() != 2) {
      throw Error(ErrorKind::ParseError, w + ": expected [u, v]");
    }
    g.edges.emplace_back(string_at(edges[i][0], w), string_at(edges[i][1], w));
  }
  const auto& targets = require(j, "agent_targets", where);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    g.agent_targets.push_back(string_at(targets[i], where + "/agent_targets/" + std::to_string(i)));
  }
  const auto& agents = require(j, "agents", where);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto w = where + "/agents/" + std::to_string(i);
    g.initial_node_of.push_back(string_at(require(agents[i], "start", w), w + "/start"));
    g.supervisor_target_of.push_back(
        string_at(require(agents[i], "supervisor_target", w), w + "/supervisor_target"));
  }
  return g;
}

json graph_json(const DeliveryGraph& g) {
  json j;
  j["nodes"] = g.nodes;
  json edges = json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["agent_targets"] = g.agent_targets;
  json agents = json::array();
  for (std::size_t i = 0; i < g.num_agents(); ++i) {
    agents.push_back({{"start", g.initial_node_of[i]}, {"supervisor_target", g.supervisor_target_of[i]}});
  }
  j["agents"] = std::move(agents);
  return j;
}

json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorKind::ParseError,
                origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

}  // namespace detail

Mdp parse_mdp(const std::string& json_text) {
  return detail::mdp_from_json(detail::parse_text(json_text, "<mdp>"), "");
}

std::string mdp_to_json(const Mdp& mdp) { return detail::mdp_json(mdp).dump(2); }

StationaryPolicy parse_policy(const Mdp& mdp, const std::string& json_text) {
  return detail::policy_from_json(mdp, detail::parse_text(json_text, "<policy>"), "");
}

std::string policy_to_json(const Mdp& mdp, const StationaryPolicy& policy) {
  return detail::policy_json(mdp, policy).dump(2);
}

DeliveryGraph parse_delivery_graph(const std::string& json_text) {
  return detail::graph_from_json(detail::parse_text(json_text, "<graph>"), "");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename into '" + path + "'");
  }
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace decept
