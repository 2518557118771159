#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "decept/mdp.hpp"

namespace decept {

/// Strongly connected components of a directed graph given by adjacency
/// lists. Returns the component id of each vertex; ids are assigned in the
/// order Tarjan's algorithm closes them (sinks first).
std::vector<std::size_t> strongly_connected_components(
    const std::vector<std::vector<std::size_t>>& adjacency);

enum class StateRole { Target, Closed, Deviation };

/// Split of S into targets R^A, closed communicating classes C^cl of the
/// reference chain, and the deviation set S_d = S \ (C^cl u R^A).
struct Decomposition {
  std::vector<StateRole> role;               // R^A takes priority over C^cl
  std::vector<StateIndex> closed_states;     // union of closed classes, sorted
  std::vector<StateIndex> targets;           // sorted
  std::vector<StateIndex> deviation_states;  // sorted

  bool is_deviation(StateIndex s) const { return role.at(s) == StateRole::Deviation; }
  bool is_target(StateIndex s) const { return role.at(s) == StateRole::Target; }
};

/// Throws Error(NonAbsorbingTarget) if a target state is not absorbing.
Decomposition decompose(const Mdp& mdp, const StationaryPolicy& reference,
                        std::span<const StateIndex> targets);

/// Exact Pr(s0 |= <> targets). Direct sparse solve for up to 10^4 unknowns,
/// value iteration to 1e-10 beyond that.
double reach_probability(const Mdp& mdp, const StationaryPolicy& policy,
                         std::span<const StateIndex> targets);

/// Hitting probabilities from every state.
std::vector<double> reach_probabilities(const MarkovChain& chain,
                                        std::span<const StateIndex> targets);

/// 1 - prod(1 - p_i); empty input gives 0. Throws Error(OutOfRange).
double disjunctive_reach(std::span<const double> probs);

/// Expected state-action visit counts on S_d.
struct OccupancyVector {
  std::vector<StateIndex> deviation_states;  // S_d, sorted
  std::vector<std::vector<double>> entries;  // [i][a], aligned with mdp.actions(S_d[i])

  std::optional<std::size_t> local_index(StateIndex s) const;
  double state_mass(std::size_t local) const;
  /// x_{s,a}; zero outside S_d.
  double entry(StateIndex s, ActionIndex a) const;
  /// Occupancy flow x_{s,q} for a deviation state.
  double flow(const Mdp& mdp, std::size_t local, StateIndex q) const;
};

/// Throws Error(InfiniteOccupancy) when some S_d state reachable from s0 is
/// recurrent under the policy.
OccupancyVector occupancy_from_policy(const Mdp& mdp, const StationaryPolicy& policy,
                                      const Decomposition& dec);

/// Normalizes x on S_d states with positive mass; everywhere else the
/// reference row is kept. Entries below `clip` count as zero.
/// Throws Error(NegativeEntry).
StationaryPolicy policy_from_occupancy(const Mdp& mdp, const OccupancyVector& x,
                                       const StationaryPolicy& reference, double clip = 1e-12);

/// Path-level KL divergence evaluated from occupancies. Returns +inf when
/// flow leaves the support of the reference chain.
double kl_occupancy(const Mdp& mdp, const OccupancyVector& x, const StationaryPolicy& reference);

/// nu(x, R): probability mass flowing into `targets`, plus 1 if s0 is a target.
double occupancy_reach(const Mdp& mdp, const OccupancyVector& x,
                       std::span<const StateIndex> targets);

/// F(x, s) for every s in S_d (should be ~0).
std::vector<double> flow_residuals(const Mdp& mdp, const OccupancyVector& x);

/// Sampled or observed path. The log-likelihood ratio is filled on demand.
struct PathRecord {
  std::vector<StateIndex> states;
  bool truncated = false;
  std::optional<double> log_likelihood_ratio;
};

enum class LlrStatus {
  Finite,
  InfeasibleUnderReference,  // +inf: a step has zero reference probability
  InfeasibleUnderDeceptive,  // -inf: a step has zero deceptive probability
};

struct PathLlr {
  double value = 0.0;
  LlrStatus status = LlrStatus::Finite;
};

/// sum_t log pi^A_{s_t,s_t+1} - log pi^S_{s_t,s_t+1}, accumulated until a
/// state absorbing under both chains is reached.
PathLlr path_llr(std::span<const StateIndex> path, const StationaryPolicy& deceptive,
                 const StationaryPolicy& reference, const Mdp& mdp);

/// Same as above on precomputed induced chains (hot loop in simulation).
PathLlr path_llr(std::span<const StateIndex> path, const MarkovChain& deceptive,
                 const MarkovChain& reference);

}  // namespace decept
