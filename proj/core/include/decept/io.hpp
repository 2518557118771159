#pragma once

#include <string>

#include "decept/delivery.hpp"
#include "decept/mdp.hpp"

namespace decept {

/// MDP document:
///   {"states": [...], "initial": s,
///    "transitions": [[s, a, q, p], ...]}
/// Actions are declared by their first transition, in document order.
/// Throws Error(ParseError | MissingField | UnknownState).
Mdp parse_mdp(const std::string& json_text);
std::string mdp_to_json(const Mdp& mdp);

/// Policy document: {state: {action: prob}}. States with a single action may
/// be omitted. Throws Error(ParseError | MissingField | UnknownState |
/// UnknownAction | PolicyMismatch).
StationaryPolicy parse_policy(const Mdp& mdp, const std::string& json_text);
std::string policy_to_json(const Mdp& mdp, const StationaryPolicy& policy);

/// Delivery graph document:
///   {"nodes": [...], "edges": [[u, v], ...], "agent_targets": [...],
///    "agents": [{"start": v, "supervisor_target": v}, ...]}
DeliveryGraph parse_delivery_graph(const std::string& json_text);

/// Whole file contents. Throws Error(Io).
std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it into place. Throws Error(Io).
void write_file_atomic(const std::string& path, const std::string& contents);

/// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace decept
