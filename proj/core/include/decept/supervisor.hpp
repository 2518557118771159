#pragma once

#include <span>
#include <vector>

#include "decept/analysis.hpp"
#include "decept/mdp.hpp"

namespace decept {

/// Posterior that each agent is not deceptive.
struct BeliefState {
  std::vector<double> beliefs;
  std::vector<double> priors;  // p_D,i
  int observed_rounds = 0;

  /// Zero observations: theta_i = 1 - p_D,i.
  static BeliefState initial(std::span<const double> priors);
};

/// 1 - p / (p + (1 - p) exp(-llr)); llr may be +-infinity.
double belief_from_llr(double prior, double total_llr);

/// Belief after observing `paths` of one agent. Throws Error(TruncatedPath).
double belief_update(double prior, std::span<const PathRecord> paths,
                     const StationaryPolicy& deceptive, const StationaryPolicy& reference,
                     const Mdp& mdp);

/// Same with the supervisor's hypotheses as induced chains.
double belief_update(double prior, std::span<const PathRecord> paths, const MarkovChain& deceptive,
                     const MarkovChain& reference);

/// theta-hat = 1 - p / (p + (1 - p) exp(-m_r kl)).
double belief_proxy(double prior, int m_r, double kl);

/// Equal-utility elimination: ascending theta (ties by index), added while
/// the running sum stays within capacity. Returns sorted indices.
std::vector<std::size_t> eliminate_greedy(std::span<const double> beliefs, double capacity);

/// Exact max sum -log theta_i s.t. sum theta_i V_i <= C by enumeration.
/// Profit ties go to the larger set, then the lexicographically smallest.
/// Throws Error(TooManyAgents) for more than 20 agents.
std::vector<std::size_t> eliminate_general(std::span<const double> beliefs,
                                           std::span<const double> utilities, double capacity);

/// One agent of the knapsack-covering construction.
struct KnapsackAgent {
  Mdp mdp;  // S = {o, a, b}, action 1: o -> a, action 2: o -> b
  StationaryPolicy reference;
  StationaryPolicy deceptive;
  PathRecord path;  // (o, a, a, ...)
  double utility = 0.0;
  double prior = 0.0;
};

/// Builds agents whose observed beliefs are exp(-profit_i) and whose
/// elimination weights theta_i V_i equal weight_i.
/// Throws Error(KappaTooLarge | InvalidParams).
std::vector<KnapsackAgent> knapsack_fixture(std::span<const double> weights,
                                            std::span<const double> profits, double kappa);

}  // namespace decept
