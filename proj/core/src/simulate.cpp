#include "decept/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "decept/error.hpp"
#include "decept/supervisor.hpp"
#include "parallel.hpp"

namespace decept {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

PathSampler::PathSampler(const Mdp& mdp, const StationaryPolicy& policy) {
  validate_policy(mdp, policy);
  const auto chain = induced_chain(mdp, policy);
  initial_ = mdp.initial();
  const auto n = mdp.num_states();
  absorbing_.resize(n);
  action_.resize(n);
  successor_.resize(n);
  for (StateIndex s = 0; s < n; ++s) {
    absorbing_[s] = chain.prob(s, s) >= 1.0;
    double acc = 0.0;
    const auto row = policy.row(s);
    const auto acts = mdp.actions(s);
    successor_[s].resize(acts.size());
    for (ActionIndex a = 0; a < acts.size(); ++a) {
      if (row[a] > 0.0) {
        acc += row[a];
        action_[s].cumulative.push_back(acc);
        action_[s].value.push_back(a);
      }
      double acc2 = 0.0;
      for (const auto& o : acts[a].outcomes) {
        if (o.prob <= 0.0) continue;
        acc2 += o.prob;
        successor_[s][a].cumulative.push_back(acc2);
        successor_[s][a].value.push_back(o.next);
      }
    }
  }
}

PathRecord PathSampler::sample(std::mt19937_64& rng, std::size_t max_steps) const {
  auto draw = [&rng](const Table& t) {
    const double u = uniform01(rng) * t.cumulative.back();
    const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
    const auto idx = std::min<std::size_t>(it - t.cumulative.begin(), t.value.size() - 1);
    return t.value[idx];
  };
  PathRecord path;
  StateIndex s = initial_;
  path.states.push_back(s);
  std::size_t steps = 0;
  while (!absorbing_[s]) {
    if (steps == max_steps) {
      path.truncated = true;
      break;
    }
    const auto a = draw(action_[s]);
    s = draw(successor_[s][a]);
    path.states.push_back(s);
    ++steps;
  }
  return path;
}

PathRecord sample_path(const Mdp& mdp, const StationaryPolicy& policy, std::uint64_t seed,
                       std::size_t max_steps) {
  std::mt19937_64 rng(seed);
  return PathSampler(mdp, policy).sample(rng, max_steps);
}

EpisodeSimulator::EpisodeSimulator(const TeamProblem& problem,
                                   std::span<const StationaryPolicy> policies,
                                   std::size_t max_steps)
    : EpisodeSimulator(problem, policies, policies, max_steps) {}

EpisodeSimulator::EpisodeSimulator(const TeamProblem& problem,
                                   std::span<const StationaryPolicy> policies,
                                   std::span<const StationaryPolicy> hypotheses,
                                   std::size_t max_steps)
    : m_r_(problem.m_r), max_steps_(max_steps) {
  const auto n = problem.agents.size();
  if (policies.size() != n || hypotheses.size() != n) {
    throw Error(ErrorKind::InvalidParams, "one policy per agent required");
  }
  if (m_r_ < 1) throw Error(ErrorKind::InvalidParams, "m_r must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ag = problem.agents[i];
    samplers_.emplace_back(ag.mdp, policies[i]);
    agents_.push_back({ag.targets, ag.prior, induced_chain(ag.mdp, hypotheses[i]),
                       induced_chain(ag.mdp, ag.reference)});
  }
}

EpisodeOutcome EpisodeSimulator::run(double capacity, std::uint64_t seed) const {
  const auto n = samplers_.size();
  EpisodeOutcome out;
  out.seed = seed;
  out.paths.resize(n);
  out.beliefs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<PathRecord> usable;
    for (int r = 0; r < m_r_; ++r) {
      std::mt19937_64 rng(substream_seed(seed, i, static_cast<std::uint64_t>(r)));
      auto path = samplers_[i].sample(rng, max_steps_);
      if (path.truncated) {
        ++out.truncated;
      } else {
        path.log_likelihood_ratio =
            path_llr(path.states, agents_[i].deceptive, agents_[i].reference).value;
        usable.push_back(path);
      }
      out.paths[i].push_back(std::move(path));
    }
    out.beliefs[i] =
        belief_update(agents_[i].prior, usable, agents_[i].deceptive, agents_[i].reference);
  }
  out.eliminated = eliminate_greedy(out.beliefs, capacity);
  std::vector<bool> gone(n, false);
  for (auto i : out.eliminated) gone[i] = true;
  for (std::size_t i = 0; i < n && !out.survivor_success; ++i) {
    if (gone[i]) continue;
    const auto& last = out.paths[i].back();
    if (last.truncated) continue;
    const auto& t = agents_[i].targets;
    out.survivor_success = std::any_of(last.states.begin(), last.states.end(), [&](StateIndex s) {
      return std::binary_search(t.begin(), t.end(), s);
    });
  }
  return out;
}

EpisodeOutcome run_episode(const TeamProblem& problem, std::span<const StationaryPolicy> policies,
                           double capacity, std::uint64_t seed) {
  return EpisodeSimulator(problem, policies).run(capacity, seed);
}

SimulationSummary simulate_episodes(const EpisodeSimulator& sim, double capacity,
                                    std::size_t trials, std::uint64_t seed, unsigned threads) {
  const auto n = sim.num_agents();
  SimulationSummary sum;
  sum.trials = trials;
  sum.mean_belief.assign(n, 0.0);
  sum.elimination_frequency.assign(n, 0.0);
  sum.belief_histogram.assign(n, std::vector<std::size_t>(10, 0));
  if (trials == 0) return sum;

  struct Slim {
    std::vector<double> beliefs;
    std::vector<std::size_t> eliminated;
    bool success;
    std::size_t truncated;
  };
  std::vector<Slim> episodes(trials);
  detail::parallel_for(trials, threads, [&](std::size_t e) {
    auto o = sim.run(capacity, substream_seed(seed, e));
    episodes[e] = {std::move(o.beliefs), std::move(o.eliminated), o.survivor_success, o.truncated};
  });
  for (const auto& e : episodes) {
    sum.successes += e.success ? 1 : 0;
    sum.truncated_paths += e.truncated;
    for (std::size_t i = 0; i < n; ++i) {
      sum.mean_belief[i] += e.beliefs[i];
      const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(e.beliefs[i] * 10.0));
      ++sum.belief_histogram[i][bin];
    }
    for (auto i : e.eliminated) sum.elimination_frequency[i] += 1.0;
  }
  const double t = static_cast<double>(trials);
  for (std::size_t i = 0; i < n; ++i) {
    sum.mean_belief[i] /= t;
    sum.elimination_frequency[i] /= t;
  }
  sum.success_rate = static_cast<double>(sum.successes) / t;
  sum.success_stderr = std::sqrt(sum.success_rate * (1.0 - sum.success_rate) / t);
  return sum;
}

KlEstimate empirical_kl(const StationaryPolicy& deceptive, const StationaryPolicy& reference,
                        const Mdp& mdp, std::size_t trials, std::uint64_t seed,
                        std::size_t max_steps) {
  const PathSampler sampler(mdp, deceptive);
  const auto dec = induced_chain(mdp, deceptive);
  const auto ref = induced_chain(mdp, reference);
  KlEstimate est;
  double mean = 0.0, m2 = 0.0;  // Welford running moments
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(substream_seed(seed, t));
    const auto path = sampler.sample(rng, max_steps);
    if (path.truncated) {
      ++est.truncated;
      continue;
    }
    const auto llr = path_llr(path.states, dec, ref);
    if (llr.status == LlrStatus::InfeasibleUnderReference) {
      throw Error(ErrorKind::InfiniteLLR, "sampled transition has zero reference probability");
    }
    ++est.samples;
    const double delta = llr.value - mean;
    mean += delta / static_cast<double>(est.samples);
    m2 += delta * (llr.value - mean);
  }
  if (est.samples > 0) {
    const double m = static_cast<double>(est.samples);
    est.mean = mean;
    const double var = est.samples > 1 ? m2 / (m - 1.0) : 0.0;
    est.std_err = std::sqrt(var / m);
  }
  return est;
}

}  // namespace decept
