#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "decept/occupancy_opt.hpp"
#include "decept/supervisor.hpp"

namespace decept {

struct TeamProblem {
  std::vector<AgentSpec> agents;
  double nu_a = 0.5;
  double epsilon = 1e-3;
  std::optional<double> k_max;  // computed by compute_kmax when unset
  double gamma_prime = 1.2;
  int m_r = 1;
  double delta_margin = 0.0;
  ToleranceSet tol;
  unsigned threads = 1;
};

/// Throws Error(InvalidParams | OutOfRange) on malformed problem data.
void validate_problem(const TeamProblem& problem);

struct SynthesisResult {
  std::vector<StationaryPolicy> policies;
  std::vector<OccupancyVector> occupancies;
  double kl_bound = 0.0;  // K-bar
  double k_max = 0.0;
  std::vector<double> per_agent_kl;
  std::vector<double> per_agent_reach;
  double disjunctive_reach = 0.0;
  int iterations = 0;
  std::size_t subproblem_solves = 0;
};

/// Solves all subproblems at K (in parallel when threads > 1).
std::vector<SubproblemSolution> solve_all(std::span<const AgentSpec> agents, double k,
                                          const ToleranceSet& tol = {}, unsigned threads = 1);

/// 1 - prod_i (1 - Reach_i(K)) - nu_A.
double reach_evaluate(std::span<const AgentSpec> agents, double nu_a, double k,
                      const ToleranceSet& tol = {}, unsigned threads = 1);

struct BisectionResult {
  double value = 0.0;  // upper endpoint
  int iterations = 0;  // halvings performed
  bool feasible = true;
};

/// Finds the smallest K in [0, k_max] with f(K) >= -feasibility up to eps.
/// Keeps f(lower) < 0 <= f(upper) and does not stop early when f hits zero.
/// Throws Error(UpperBoundNotFeasible) when f(k_max) < -feasibility.
BisectionResult bisection(const std::function<double(double)>& f, double k_max, double eps,
                          double feasibility = 0.0);

/// Worst-case deceptive synthesis. Throws Error(Infeasible) with the
/// compute_kmax diagnosis, Error(UpperBoundNotFeasible) for a bad user K_max.
SynthesisResult deceptive_synthesis(const TeamProblem& problem);

/// Kept-set evaluation at K with w survivors.
struct SubsetEvaluation {
  double value = 0.0;  // disjunctive reach of the kept agents - nu_A
  std::vector<std::size_t> kept;     // sorted
  std::vector<std::size_t> dropped;  // sorted; the decoys
  std::vector<SubproblemSolution> solutions;
};

/// Agents whose ceiling is below the decoy KL must stay in the kept set.
struct DecoyEligibility {
  std::vector<double> kl_ceiling;
  double gamma_prime = 1.0;
};

/// Keeps the w agents with the highest reach at K (ties by lower index);
/// decoy-ineligible agents are kept first. When more than w agents are
/// ineligible the evaluation is -1 - nu_A.
SubsetEvaluation reach_evaluate_sub(std::span<const AgentSpec> agents, double nu_a, double k,
                                    std::size_t w, const DecoyEligibility* eligibility = nullptr,
                                    const ToleranceSet& tol = {}, unsigned threads = 1);

struct SubsetSearchResult {
  double kl_bound = 0.0;
  bool fail = false;
  int iterations = 0;
  SubsetEvaluation final_eval;
};

SubsetSearchResult subset_search(std::span<const AgentSpec> agents, double nu_a, double k_max,
                                 double eps, std::size_t w,
                                 const DecoyEligibility* eligibility = nullptr,
                                 const ToleranceSet& tol = {}, unsigned threads = 1);

/// Largest useful non-decoy KL: root of (n-1) M'(K) + M(K) = M(K'_max).
/// Returns n * K'_max when no root exists.
double kmax_for_decoys(std::size_t n, double prior, int m_r, double gamma_prime,
                       double k_max_prime);

struct BRow {
  std::size_t k = 0;
  double b = 0.0;  // 0 when failed
  double kl_bound = 0.0;
  bool fail = false;
  std::vector<std::size_t> decoys;
  double kept_reach = 0.0;
  std::vector<double> agent_kl;
  std::vector<double> agent_reach;
  std::vector<double> agent_proxy;
  std::vector<StationaryPolicy> policies;
};

struct EliminationResult {
  std::vector<BRow> b_table;
  std::size_t k_star = 0;
  std::vector<std::size_t> decoy_set;
  std::vector<StationaryPolicy> policies;
  double non_decoy_kl = 0.0;
  double decoy_kl = 0.0;
  double k_max = 0.0;         // K'_max of the k = 0 search
  double k_max_decoys = 0.0;  // upper end used for k >= 1
  double critical_capacity = 0.0;  // B_{k*}; survivable for C below it
};

/// Elimination-aware synthesis: sweeps k decoys and maximizes
/// B_k = k M' + M. Requires equal priors. Throws Error(AllFailed |
/// Infeasible | InvalidParams).
EliminationResult deceptive_subset_selection(const TeamProblem& problem);

}  // namespace decept
