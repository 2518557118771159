#pragma once

#include <span>
#include <vector>

#include "decept/synthesis.hpp"

namespace decept {

struct SupervisorTask {
  std::vector<std::vector<StateIndex>> supervisor_targets;  // R^S_i
  std::vector<double> thresholds;                           // nu_S,i
  int iterations = 50;
  double step_size = 0.5;     // logit units, per accepted step
  double temperature = 0.05;  // tau of the smoothed max
  double fd_step = 1e-4;
  double smoothing = 0.1;  // mass moved to uniform before the first step
};

/// tau log sum_i exp(kl_i / tau) - tau log n; within tau log n of the max.
double smoothed_worst_kl(std::span<const double> kl_values, double tau);

struct RefpolIterate {
  int iteration = 0;
  double objective = 0.0;
  double worst_kl = 0.0;
  bool accepted = false;
  double step = 0.0;
};

struct RefpolResult {
  std::vector<StationaryPolicy> references;
  double objective = 0.0;  // smoothed worst KL of the returned references
  double worst_kl = 0.0;
  double initial_objective = 0.0;
  bool unbounded = false;  // no deceptive policy reaches nu_A at all
  std::vector<RefpolIterate> trace;
  std::vector<double> supervisor_reach;
};

/// Projects `policy` onto {Pr(reach R^S) >= threshold}: Euclidean projection
/// of its occupancy measure (Dykstra), then policy conversion; falls back to
/// mixing with `feasible` when conversion lands outside the set.
StationaryPolicy project_reference(const Mdp& mdp, const StationaryPolicy& policy,
                                   const StationaryPolicy& feasible,
                                   std::span<const StateIndex> targets, double threshold);

/// Gradient ascent with a max-oracle on the agents' optimal worst-case KL.
/// `agents` carry the initial references; `eps` is the inner bisection
/// tolerance and must be small next to fd_step. Returns the best iterate.
/// Throws Error(InfeasibleSupervisorTask | SolverFailure).
RefpolResult synthesize_reference(std::span<const AgentSpec> agents, const SupervisorTask& task,
                                  double nu_a, double eps = 1e-8, unsigned threads = 1);

}  // namespace decept
