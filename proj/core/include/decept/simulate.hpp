#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "decept/analysis.hpp"
#include "decept/synthesis.hpp"

namespace decept {

inline constexpr std::size_t kDefaultMaxSteps = 100000;

/// Seed of an independent substream, derived by hashing (seed, a, b, c).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                             std::uint64_t c = 0);

/// Precomputed cumulative tables for drawing actions and successors.
class PathSampler {
 public:
  PathSampler(const Mdp& mdp, const StationaryPolicy& policy);

  /// Draws a path from the MDP's initial state until it hits a state that is
  /// absorbing under the policy, or max_steps transitions (then truncated).
  PathRecord sample(std::mt19937_64& rng, std::size_t max_steps = kDefaultMaxSteps) const;

 private:
  struct Table {
    std::vector<double> cumulative;
    std::vector<std::size_t> value;
  };
  StateIndex initial_ = 0;
  std::vector<bool> absorbing_;
  std::vector<Table> action_;                   // per state
  std::vector<std::vector<Table>> successor_;   // per state, per action
};

PathRecord sample_path(const Mdp& mdp, const StationaryPolicy& policy, std::uint64_t seed,
                       std::size_t max_steps = kDefaultMaxSteps);

struct EpisodeOutcome {
  std::vector<std::vector<PathRecord>> paths;  // per agent, m_r each
  std::vector<double> beliefs;
  std::vector<std::size_t> eliminated;
  bool survivor_success = false;
  std::size_t truncated = 0;
  std::uint64_t seed = 0;
};

/// Runs the observe / update / eliminate lifecycle for fixed policies. The
/// supervisor's alternative hypothesis defaults to the true policies.
class EpisodeSimulator {
 public:
  EpisodeSimulator(const TeamProblem& problem, std::span<const StationaryPolicy> policies,
                   std::size_t max_steps = kDefaultMaxSteps);
  EpisodeSimulator(const TeamProblem& problem, std::span<const StationaryPolicy> policies,
                   std::span<const StationaryPolicy> hypotheses, std::size_t max_steps);

  /// Truncated paths are left out of the belief update and count as failure.
  /// Survivor success looks at the last round's paths.
  EpisodeOutcome run(double capacity, std::uint64_t seed) const;

  std::size_t num_agents() const { return samplers_.size(); }

 private:
  struct AgentData {
    std::vector<StateIndex> targets;
    double prior = 0.5;
    MarkovChain deceptive;
    MarkovChain reference;
  };
  std::vector<PathSampler> samplers_;
  std::vector<AgentData> agents_;
  int m_r_ = 1;
  std::size_t max_steps_;
};

EpisodeOutcome run_episode(const TeamProblem& problem, std::span<const StationaryPolicy> policies,
                           double capacity, std::uint64_t seed);

struct SimulationSummary {
  std::size_t trials = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double success_stderr = 0.0;
  std::vector<double> mean_belief;
  std::vector<double> elimination_frequency;
  std::vector<std::vector<std::size_t>> belief_histogram;  // per agent, 10 bins on [0,1]
  std::size_t truncated_paths = 0;
};

/// Episode e uses substream_seed(seed, e); aggregation order is fixed.
SimulationSummary simulate_episodes(const EpisodeSimulator& sim, double capacity,
                                    std::size_t trials, std::uint64_t seed, unsigned threads = 1);

struct KlEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t samples = 0;
  std::size_t truncated = 0;  // left out of the estimate
};

/// Sample mean of path LLRs under the deceptive policy.
/// Throws Error(InfiniteLLR) on a step the reference never takes.
KlEstimate empirical_kl(const StationaryPolicy& deceptive, const StationaryPolicy& reference,
                        const Mdp& mdp, std::size_t trials, std::uint64_t seed,
                        std::size_t max_steps = kDefaultMaxSteps);

}  // namespace decept
