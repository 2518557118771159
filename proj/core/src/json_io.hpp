#pragma once

#include <json.hpp>
#include <string>

#include "decept/delivery.hpp"
#include "decept/mdp.hpp"

namespace decept::detail {

using nlohmann::json;

/// `where` is a JSON-pointer-like location used in diagnostics.
const json& require(const json& obj, const char* key, const std::string& where);
double number_at(const json& v, const std::string& where);
std::string string_at(const json& v, const std::string& where);

Mdp mdp_from_json(const json& j, const std::string& where);
json mdp_json(const Mdp& mdp);
StationaryPolicy policy_from_json(const Mdp& mdp, const json& j, const std::string& where);
json policy_json(const Mdp& mdp, const StationaryPolicy& policy);
DeliveryGraph graph_from_json(const json& j, const std::string& where);
json graph_json(const DeliveryGraph& g);

/// Parses text; syntax errors become Error(ParseError) with line and column.
json parse_text(const std::string& text, const std::string& origin);

}  // namespace decept::detail
