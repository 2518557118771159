#include "decept/supervisor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "decept/error.hpp"

namespace decept {

BeliefState BeliefState::initial(std::span<const double> priors) {
  BeliefState b;
  b.priors.assign(priors.begin(), priors.end());
  for (double p : priors) b.beliefs.push_back(1.0 - p);
  return b;
}

double belief_from_llr(double prior, double total_llr) {
  if (!(prior >= 0.0 && prior <= 1.0)) throw Error(ErrorKind::OutOfRange, "prior outside [0,1]");
  if (std::isnan(total_llr)) throw Error(ErrorKind::InvalidParams, "log-likelihood ratio is NaN");
  if (prior == 0.0) return 1.0;
  if (prior == 1.0) return 0.0;
  // theta = 1 / (1 + exp(z)) with z = llr + logit(p)
  const double z = total_llr + std::log(prior / (1.0 - prior));
  if (z == std::numeric_limits<double>::infinity()) return 0.0;
  if (z == -std::numeric_limits<double>::infinity()) return 1.0;
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double belief_update(double prior, std::span<const PathRecord> paths, const MarkovChain& deceptive,
                     const MarkovChain& reference) {
  double llr = 0.0;
  for (const auto& path : paths) {
    if (path.truncated) throw Error(ErrorKind::TruncatedPath, "path was not absorbed");
    const auto r = path_llr(path.states, deceptive, reference);
    if (r.status == LlrStatus::InfeasibleUnderDeceptive) return 1.0;
    llr += r.value;
  }
  return belief_from_llr(prior, llr);
}

double belief_update(double prior, std::span<const PathRecord> paths,
                     const StationaryPolicy& deceptive, const StationaryPolicy& reference,
                     const Mdp& mdp) {
  return belief_update(prior, paths, induced_chain(mdp, deceptive), induced_chain(mdp, reference));
}

double belief_proxy(double prior, int m_r, double kl) {
  if (!(kl >= 0.0)) throw Error(ErrorKind::InvalidParams, "kl must be >= 0");
  if (m_r < 0) throw Error(ErrorKind::InvalidParams, "m_r must be >= 0");
  return belief_from_llr(prior, m_r == 0 ? 0.0 : m_r * kl);
}

std::vector<std::size_t> eliminate_greedy(std::span<const double> beliefs, double capacity) {
  std::vector<std::size_t> order(beliefs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return beliefs[a] < beliefs[b]; });
  std::vector<std::size_t> out;
  double used = 0.0;
  for (auto i : order) {
    if (used + beliefs[i] > capacity) break;
    used += beliefs[i];
    out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> eliminate_general(std::span<const double> beliefs,
                                           std::span<const double> utilities, double capacity) {
  const auto n = beliefs.size();
  if (utilities.size() != n) throw Error(ErrorKind::InvalidParams, "beliefs/utilities size mismatch");
  if (n > 20) throw Error(ErrorKind::TooManyAgents, std::to_string(n) + " agents (limit 20)");
  if (capacity < 0.0) throw Error(ErrorKind::InvalidParams, "capacity must be >= 0");

  // Profit as (count of theta = 0 items, finite part) so +inf ties still order.
  struct Score {
    int infinite = 0;
    double finite = 0.0;
  };
  auto better = [](const Score& a, const Score& b) {
    if (a.infinite != b.infinite) return a.infinite > b.infinite ? 1 : -1;
    const double tol = 1e-12 * std::max({1.0, std::abs(a.finite), std::abs(b.finite)});
    if (a.finite > b.finite + tol) return 1;
    if (b.finite > a.finite + tol) return -1;
    return 0;
  };

  std::uint32_t best_mask = 0;
  Score best;
  bool have = false;
  auto members = [n](std::uint32_t mask) {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) v.push_back(i);
    }
    return v;
  };
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double weight = 0.0;
    Score s;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      weight += beliefs[i] * utilities[i];
      if (beliefs[i] <= 0.0) {
        ++s.infinite;
      } else {
        s.finite -= std::log(beliefs[i]);
      }
    }
    if (weight > capacity) continue;
    int cmp = have ? better(s, best) : 1;
    if (cmp == 0) {
      const int pa = std::popcount(mask), pb = std::popcount(best_mask);
      if (pa != pb) {
        cmp = pa > pb ? 1 : -1;
      } else {
        cmp = members(mask) < members(best_mask) ? 1 : -1;
      }
    }
    if (cmp > 0) {
      best = s;
      best_mask = mask;
      have = true;
    }
  }
  return members(best_mask);
}

std::vector<KnapsackAgent> knapsack_fixture(std::span<const double> weights,
                                            std::span<const double> profits, double kappa) {
  if (weights.size() != profits.size()) {
    throw Error(ErrorKind::InvalidParams, "weights/profits size mismatch");
  }
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(ErrorKind::InvalidParams, "kappa must be in (0,1)");
  MdpBuilder b;
  b.add_state("o");
  b.add_state("a");
  b.add_state("b");
  b.add_transition("o", "1", "a", 1.0);
  b.add_transition("o", "2", "b", 1.0);
  b.add_transition("a", "stay", "a", 1.0);
  b.add_transition("b", "stay", "b", 1.0);
  b.set_initial("o");
  const Mdp mdp = b.build();
  const auto o = mdp.state_index("o"), a = mdp.state_index("a");

  std::vector<KnapsackAgent> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0 && profits[i] > 0.0)) {
      throw Error(ErrorKind::InvalidParams, "weights and profits must be positive");
    }
    const double theta = std::exp(-profits[i]);
    // pi^S(o,1) / pi^A(o,1) with pi^A(o,1) = 1
    const double ratio = theta * kappa / ((1.0 - theta) * (1.0 - kappa));
    if (!(ratio < 1.0)) {
      throw Error(ErrorKind::KappaTooLarge, "reference ratio " + std::to_string(ratio) +
                                                " >= 1 for agent " + std::to_string(i));
    }
    KnapsackAgent ag;
    ag.mdp = mdp;
    ag.reference = StationaryPolicy({{ratio, 1.0 - ratio}, {1.0}, {1.0}});
    ag.deceptive = StationaryPolicy({{1.0, 0.0}, {1.0}, {1.0}});
    ag.path.states = {o, a};
    ag.utility = weights[i] / theta;
    ag.prior = kappa;
    out.push_back(std::move(ag));
  }
  return out;
}

}  // namespace decept
