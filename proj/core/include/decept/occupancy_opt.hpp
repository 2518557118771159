#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "decept/analysis.hpp"
#include "decept/mdp.hpp"

namespace decept {

/// One agent of the team: its MDP, the supervisor's reference policy, the
/// covert target set, prior of being deceptive and base utility.
struct AgentSpec {
  Mdp mdp;
  StationaryPolicy reference;
  std::vector<StateIndex> targets;
  double prior = 0.5;
  double utility = 1.0;
  Decomposition decomposition;  // of (mdp, reference, targets)

  /// Validates the inputs and caches the decomposition.
  static AgentSpec make(Mdp mdp, StationaryPolicy reference, std::vector<StateIndex> targets,
                        double prior = 0.5, double utility = 1.0);
};

struct ToleranceSet {
  double gap = 1e-8;
  double feasibility = 1e-8;
  double clip = 1e-12;  // occupancy entries below this are treated as zero
};

enum class SolverStatus { Optimal, NearOptimal, Infeasible };

const char* to_string(SolverStatus status);

struct SubproblemSolution {
  double reach_value = 0.0;
  OccupancyVector occupancy;
  double kl_value = 0.0;
  SolverStatus status = SolverStatus::Optimal;
  double duality_gap = 0.0;
  double multiplier = 0.0;  // Lagrange multiplier of the KL constraint
  StationaryPolicy policy;  // policy_from_occupancy(occupancy)
};

/// Reach(pi^S, R^A, K): maximize the probability of reaching R^A over
/// occupancy measures on S_d subject to flow conservation and KL <= K.
///
/// Solved through the Lagrangian dual. For a multiplier lambda > 0 the inner
/// problem max nu(x) - lambda KL(x) is a regularized stochastic shortest path
/// problem whose per-state step is a small strictly concave program, solved
/// here by policy iteration. The multiplier is searched until the certified
/// gap lambda (K - KL(x)) falls under tol.gap; when the KL curve jumps at the
/// optimal multiplier the two bracketing occupancies are mixed.
/// K = +infinity is allowed and yields the maximal reach probability.
/// Throws Error(InvalidParams | SolverFailure).
SubproblemSolution reach_subproblem(const AgentSpec& agent, double k,
                                    const ToleranceSet& tol = {});

/// KL divergence of a policy's path distribution from the reference one.
double policy_kl(const AgentSpec& agent, const StationaryPolicy& policy);
double policy_reach(const AgentSpec& agent, const StationaryPolicy& policy);

struct MaxReachPolicy {
  StationaryPolicy policy;
  double reach = 0.0;
  double kl = 0.0;
};

/// Deterministic reach-maximizing policy on the MDP restricted to actions
/// whose support stays inside the reference chain's support.
MaxReachPolicy max_reach_policy(const AgentSpec& agent);

struct KmaxResult {
  bool feasible = false;
  double k_max = std::numeric_limits<double>::infinity();
  double disjunctive_reach = 0.0;
  std::vector<MaxReachPolicy> per_agent;
  std::string diagnosis;
};

/// Upper bound on the optimal worst-case KL, or an infeasibility marker
/// when the agents would need transitions the reference never takes.
KmaxResult compute_kmax(std::span<const AgentSpec> agents, double nu_a,
                        const ToleranceSet& tol = {});

/// Per-state mixture weight * high + (1 - weight) * reference.
StationaryPolicy mix_policies(const StationaryPolicy& high, const StationaryPolicy& reference,
                              double weight);

struct KlMatchedPolicy {
  StationaryPolicy policy;
  double weight = 0.0;
  double kl = 0.0;
};

/// High-divergence witness used for decoys: the reach_subproblem solution at
/// K = 2 * max(k_hint, KL of the max-reach policy).
StationaryPolicy decoy_witness(const AgentSpec& agent, double k_hint,
                               const ToleranceSet& tol = {});

/// Mixes `witness` with the reference until |KL - target| <= tol.
/// Throws Error(TargetUnattainable) when target exceeds KL(witness) + tol.
KlMatchedPolicy policy_with_kl(const AgentSpec& agent, const StationaryPolicy& witness,
                               double target_kl, double tol);
/// Same, with the witness from decoy_witness(agent, 0).
KlMatchedPolicy policy_with_kl(const AgentSpec& agent, double target_kl, double tol);

}  // namespace decept
