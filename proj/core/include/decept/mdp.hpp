#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace decept {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Tolerance used when checking that distributions sum to one.
inline constexpr double kStochasticTolerance = 1e-9;

struct Outcome {
  StateIndex next;
  double prob;
};

struct Action {
  std::string name;
  std::vector<Outcome> outcomes;  // sparse successor distribution
};

/// Finite MDP (S, A, P, s0). States and actions are addressed by dense
/// indices; names are kept for I/O. Construction does not validate, see
/// validate_mdp().
class Mdp {
 public:
  Mdp() = default;
  Mdp(std::vector<std::string> state_names, std::vector<std::vector<Action>> actions,
      StateIndex initial);

  std::size_t num_states() const { return names_.size(); }
  StateIndex initial() const { return initial_; }

  const std::string& state_name(StateIndex s) const { return names_.at(s); }
  const std::vector<std::string>& state_names() const { return names_; }
  /// Throws Error(UnknownState).
  StateIndex state_index(std::string_view name) const;

  std::span<const Action> actions(StateIndex s) const { return actions_.at(s); }
  std::size_t num_actions(StateIndex s) const { return actions_.at(s).size(); }
  /// Throws Error(UnknownAction).
  ActionIndex action_index(StateIndex s, std::string_view name) const;

  double transition(StateIndex s, ActionIndex a, StateIndex q) const;

  /// Succ(s): states reachable in one step under some action, sorted.
  std::vector<StateIndex> successors(StateIndex s) const;
  /// True when Succ(s) = {s}.
  bool is_absorbing(StateIndex s) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<Action>> actions_;
  std::unordered_map<std::string, StateIndex> index_;
  StateIndex initial_ = 0;
};

/// Incremental name-based construction, mainly for fixtures and parsing.
class MdpBuilder {
 public:
  StateIndex add_state(const std::string& name);
  /// Adds the transition (s, a, q, p); creates the action on first use.
  void add_transition(const std::string& s, const std::string& a, const std::string& q,
                      double p);
  /// Declares an action without outcomes (useful to test EmptyActionSet paths).
  void add_action(const std::string& s, const std::string& a);
  void set_initial(const std::string& s);
  Mdp build() const;

 private:
  StateIndex require(const std::string& name) const;

  std::vector<std::string> names_;
  std::unordered_map<std::string, StateIndex> index_;
  std::vector<std::vector<Action>> actions_;
  StateIndex initial_ = 0;
};

/// Per-state action distribution; entry [s][a] is aligned with mdp.actions(s).
class StationaryPolicy {
 public:
  StationaryPolicy() = default;
  explicit StationaryPolicy(std::vector<std::vector<double>> dist) : dist_(std::move(dist)) {}

  /// Uniform distribution over each state's actions.
  static StationaryPolicy uniform(const Mdp& mdp);
  /// Deterministic policy; choice[s] is an action index.
  static StationaryPolicy deterministic(const Mdp& mdp, std::span<const ActionIndex> choice);

  std::size_t num_states() const { return dist_.size(); }
  std::span<const double> row(StateIndex s) const { return dist_.at(s); }
  std::vector<double>& mutable_row(StateIndex s) { return dist_.at(s); }
  double prob(StateIndex s, ActionIndex a) const { return dist_.at(s).at(a); }
  const std::vector<std::vector<double>>& table() const { return dist_; }

  /// Sets the named action of state s to probability one.
  void set_deterministic(StateIndex s, ActionIndex a);

  bool operator==(const StationaryPolicy&) const = default;

 private:
  std::vector<std::vector<double>> dist_;
};

/// Sparse row-stochastic matrix of the chain induced by (mdp, policy).
struct MarkovChain {
  std::vector<std::vector<Outcome>> rows;  // sorted by next state, no zero entries

  std::size_t num_states() const { return rows.size(); }
  double prob(StateIndex s, StateIndex q) const;
};

/// Throws Error(RowNotStochastic | EmptyActionSet | UnknownState) on the
/// first violated invariant.
void validate_mdp(const Mdp& mdp);

/// Throws Error(PolicyMismatch) if the shape or support is wrong, or the
/// rows are not distributions.
void validate_policy(const Mdp& mdp, const StationaryPolicy& policy);

/// pi_{s,q} = sum_a P(s,a,q) pi(s,a).
MarkovChain induced_chain(const Mdp& mdp, const StationaryPolicy& policy);

/// Induced one-step distribution at a single state (sorted, zeros dropped).
std::vector<Outcome> induced_row(const Mdp& mdp, const StationaryPolicy& policy, StateIndex s);

}  // namespace decept
