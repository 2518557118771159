#include "decept/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "decept/error.hpp"

namespace decept {

Mdp::Mdp(std::vector<std::string> state_names, std::vector<std::vector<Action>> actions,
         StateIndex initial)
    : names_(std::move(state_names)), actions_(std::move(actions)), initial_(initial) {
  if (actions_.size() != names_.size()) {
    throw Error(ErrorKind::InvalidParams, "action table does not match state count");
  }
  for (StateIndex s = 0; s < names_.size(); ++s) {
    if (!index_.emplace(names_[s], s).second) {
      throw Error(ErrorKind::InvalidParams, "duplicate state name '" + names_[s] + "'");
    }
  }
}

StateIndex Mdp::state_index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw Error(ErrorKind::UnknownState, "state '" + std::string(name) + "'");
  }
  return it->second;
}

ActionIndex Mdp::action_index(StateIndex s, std::string_view name) const {
  const auto& acts = actions_.at(s);
  for (ActionIndex a = 0; a < acts.size(); ++a) {
    if (acts[a].name == name) return a;
  }
  throw Error(ErrorKind::UnknownAction,
              "action '" + std::string(name) + "' at state '" + names_.at(s) + "'");
}

double Mdp::transition(StateIndex s, ActionIndex a, StateIndex q) const {
  double p = 0.0;
  for (const auto& o : actions_.at(s).at(a).outcomes) {
    if (o.next == q) p += o.prob;
  }
  return p;
}

std::vector<StateIndex> Mdp::successors(StateIndex s) const {
  std::vector<StateIndex> out;
  for (const auto& act : actions_.at(s)) {
    for (const auto& o : act.outcomes) {
      if (o.prob > 0.0) out.push_back(o.next);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Mdp::is_absorbing(StateIndex s) const {
  const auto succ = successors(s);
  return succ.size() == 1 && succ.front() == s;
}

StateIndex MdpBuilder::add_state(const std::string& name) {
  auto [it, inserted] = index_.emplace(name, names_.size());
  if (inserted) {
    names_.push_back(name);
    actions_.emplace_back();
  }
  return it->second;
}

StateIndex MdpBuilder::require(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::UnknownState, "state '" + name + "'");
  return it->second;
}

void MdpBuilder::add_action(const std::string& s, const std::string& a) {
  auto& acts = actions_.at(require(s));
  auto it = std::find_if(acts.begin(), acts.end(), [&](const Action& x) { return x.name == a; });
  if (it == acts.end()) acts.push_back(Action{a, {}});
}

void MdpBuilder::add_transition(const std::string& s, const std::string& a, const std::string& q,
                                double p) {
  const StateIndex si = require(s);
  const StateIndex qi = require(q);
  add_action(s, a);
  auto& acts = actions_[si];
  auto it = std::find_if(acts.begin(), acts.end(), [&](const Action& x) { return x.name == a; });
  auto& outs = it->outcomes;
  auto hit = std::find_if(outs.begin(), outs.end(), [&](const Outcome& o) { return o.next == qi; });
  if (hit != outs.end()) {
    hit->prob += p;
  } else {
    outs.push_back(Outcome{qi, p});
  }
}

void MdpBuilder::set_initial(const std::string& s) { initial_ = require(s); }

Mdp MdpBuilder::build() const {
  auto actions = actions_;
  for (auto& acts : actions) {
    for (auto& act : acts) {
      std::sort(act.outcomes.begin(), act.outcomes.end(),
                [](const Outcome& x, const Outcome& y) { return x.next < y.next; });
    }
  }
  return Mdp(names_, std::move(actions), initial_);
}

StationaryPolicy StationaryPolicy::uniform(const Mdp& mdp) {
  std::vector<std::vector<double>> dist(mdp.num_states());
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    const auto n = mdp.num_actions(s);
    dist[s].assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  }
  return StationaryPolicy(std::move(dist));
}

StationaryPolicy StationaryPolicy::deterministic(const Mdp& mdp,
                                                 std::span<const ActionIndex> choice) {
  if (choice.size() != mdp.num_states()) {
    throw Error(ErrorKind::PolicyMismatch, "deterministic choice size mismatch");
  }
  std::vector<std::vector<double>> dist(mdp.num_states());
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    dist[s].assign(mdp.num_actions(s), 0.0);
    dist[s].at(choice[s]) = 1.0;
  }
  return StationaryPolicy(std::move(dist));
}

void StationaryPolicy::set_deterministic(StateIndex s, ActionIndex a) {
  auto& r = dist_.at(s);
  std::fill(r.begin(), r.end(), 0.0);
  r.at(a) = 1.0;
}

double MarkovChain::prob(StateIndex s, StateIndex q) const {
  const auto& r = rows.at(s);
  auto it = std::lower_bound(r.begin(), r.end(), q,
                             [](const Outcome& o, StateIndex v) { return o.next < v; });
  return (it != r.end() && it->next == q) ? it->prob : 0.0;
}

void validate_mdp(const Mdp& mdp) {
  const auto n = mdp.num_states();
  if (n == 0) throw Error(ErrorKind::InvalidParams, "MDP has no states");
  if (mdp.initial() >= n) throw Error(ErrorKind::UnknownState, "initial state out of range");
  for (StateIndex s = 0; s < n; ++s) {
    const auto acts = mdp.actions(s);
    if (acts.empty()) throw Error(ErrorKind::EmptyActionSet, mdp.state_name(s));
    for (const auto& act : acts) {
      double sum = 0.0;
      for (const auto& o : act.outcomes) {
        if (o.next >= n) {
          throw Error(ErrorKind::UnknownState,
                      "transition from '" + mdp.state_name(s) + "' targets an unknown state");
        }
        if (!(o.prob >= 0.0) || o.prob > 1.0) {
          throw Error(ErrorKind::RowNotStochastic,
                      "(" + mdp.state_name(s) + "," + act.name + ") has probability outside [0,1]");
        }
        sum += o.prob;
      }
      if (std::abs(sum - 1.0) > kStochasticTolerance) {
        throw Error(ErrorKind::RowNotStochastic, "(" + mdp.state_name(s) + "," + act.name +
                                                     ") sums to " + std::to_string(sum));
      }
    }
  }
}

void validate_policy(const Mdp& mdp, const StationaryPolicy& policy) {
  if (policy.num_states() != mdp.num_states()) {
    throw Error(ErrorKind::PolicyMismatch, "policy covers " + std::to_string(policy.num_states()) +
                                               " states, MDP has " +
                                               std::to_string(mdp.num_states()));
  }
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    const auto row = policy.row(s);
    if (row.size() != mdp.num_actions(s)) {
      throw Error(ErrorKind::PolicyMismatch, "action count mismatch at '" + mdp.state_name(s) + "'");
    }
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) {
        throw Error(ErrorKind::PolicyMismatch, "negative probability at '" + mdp.state_name(s) + "'");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      throw Error(ErrorKind::PolicyMismatch, "row at '" + mdp.state_name(s) + "' sums to " +
                                                 std::to_string(sum));
    }
  }
}

std::vector<Outcome> induced_row(const Mdp& mdp, const StationaryPolicy& policy, StateIndex s) {
  std::map<StateIndex, double> acc;
  const auto acts = mdp.actions(s);
  const auto row = policy.row(s);
  for (ActionIndex a = 0; a < acts.size(); ++a) {
    if (row[a] <= 0.0) continue;
    for (const auto& o : acts[a].outcomes) acc[o.next] += row[a] * o.prob;
  }
  std::vector<Outcome> out;
  out.reserve(acc.size());
  for (const auto& [q, p] : acc) {
    if (p > 0.0) out.push_back(Outcome{q, p});
  }
  return out;
}

MarkovChain induced_chain(const Mdp& mdp, const StationaryPolicy& policy) {
  validate_policy(mdp, policy);
  MarkovChain chain;
  chain.rows.resize(mdp.num_states());
  for (StateIndex s = 0; s < mdp.num_states(); ++s) chain.rows[s] = induced_row(mdp, policy, s);
  return chain;
}

}  // namespace decept
