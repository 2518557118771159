#include "decept/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>

#include "decept/error.hpp"
#include "parallel.hpp"

namespace decept {

namespace {

double disjunctive_of(const std::vector<SubproblemSolution>& sols,
                      const std::vector<std::size_t>& members) {
  std::vector<double> r;
  for (auto i : members) r.push_back(sols[i].reach_value);
  return disjunctive_reach(r);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

double resolve_kmax(const TeamProblem& problem) {
  if (problem.k_max) return *problem.k_max;
  const auto km = compute_kmax(problem.agents, problem.nu_a, problem.tol);
  if (!km.feasible) throw Error(ErrorKind::Infeasible, km.diagnosis);
  return km.k_max;
}

}  // namespace

void validate_problem(const TeamProblem& problem) {
  if (problem.agents.empty()) throw Error(ErrorKind::InvalidParams, "no agents");
  if (!(problem.nu_a >= 0.0 && problem.nu_a <= 1.0)) {
    throw Error(ErrorKind::OutOfRange, "nu_A must lie in [0,1]");
  }
  if (!(problem.epsilon > 0.0)) throw Error(ErrorKind::InvalidParams, "epsilon must be > 0");
  if (!(problem.gamma_prime > 1.0)) throw Error(ErrorKind::InvalidParams, "gamma' must be > 1");
  if (problem.m_r < 1) throw Error(ErrorKind::InvalidParams, "m_r must be >= 1");
  if (!(problem.delta_margin >= 0.0)) throw Error(ErrorKind::InvalidParams, "delta must be >= 0");
  if (problem.k_max && !(*problem.k_max >= 0.0)) {
    throw Error(ErrorKind::InvalidParams, "k_max must be >= 0");
  }
}

std::vector<SubproblemSolution> solve_all(std::span<const AgentSpec> agents, double k,
                                          const ToleranceSet& tol, unsigned threads) {
  std::vector<SubproblemSolution> out(agents.size());
  detail::parallel_for(agents.size(), threads,
                       [&](std::size_t i) { out[i] = reach_subproblem(agents[i], k, tol); });
  return out;
}

double reach_evaluate(std::span<const AgentSpec> agents, double nu_a, double k,
                      const ToleranceSet& tol, unsigned threads) {
  const auto sols = solve_all(agents, k, tol, threads);
  return disjunctive_of(sols, all_indices(agents.size())) - nu_a;
}

BisectionResult bisection(const std::function<double(double)>& f, double k_max, double eps,
                          double feasibility) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidParams, "eps must be > 0");
  if (!(k_max >= 0.0)) throw Error(ErrorKind::InvalidParams, "k_max must be >= 0");
  BisectionResult res;
  if (f(0.0) >= -feasibility) return res;
  if (f(k_max) < -feasibility) {
    throw Error(ErrorKind::UpperBoundNotFeasible,
                "reach constraint violated at K_max = " + std::to_string(k_max));
  }
  double lo = 0.0, hi = k_max;
  while (hi - lo > eps) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= -feasibility) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++res.iterations;
  }
  res.value = hi;
  return res;
}

SynthesisResult deceptive_synthesis(const TeamProblem& problem) {
  validate_problem(problem);
  const auto& agents = problem.agents;
  const auto n = agents.size();
  SynthesisResult res;
  res.k_max = resolve_kmax(problem);

  auto f = [&](double k) {
    res.subproblem_solves += n;
    return reach_evaluate(agents, problem.nu_a, k, problem.tol, problem.threads);
  };
  const auto bis = bisection(f, res.k_max, problem.epsilon, problem.tol.feasibility);
  res.kl_bound = bis.value;
  res.iterations = bis.iterations;

  const auto sols = solve_all(agents, res.kl_bound, problem.tol, problem.threads);
  res.subproblem_solves += n;
  std::vector<double> reach;
  for (std::size_t i = 0; i < n; ++i) {
    res.policies.push_back(sols[i].policy);
    res.occupancies.push_back(sols[i].occupancy);
    res.per_agent_kl.push_back(policy_kl(agents[i], sols[i].policy));
    res.per_agent_reach.push_back(policy_reach(agents[i], sols[i].policy));
  }
  res.disjunctive_reach = disjunctive_reach(res.per_agent_reach);
  return res;
}

SubsetEvaluation reach_evaluate_sub(std::span<const AgentSpec> agents, double nu_a, double k,
                                    std::size_t w, const DecoyEligibility* eligibility,
                                    const ToleranceSet& tol, unsigned threads) {
  const auto n = agents.size();
  if (w < 1 || w > n) throw Error(ErrorKind::InvalidParams, "need 1 <= w <= n");
  SubsetEvaluation ev;
  ev.solutions = solve_all(agents, k, tol, threads);

  std::vector<bool> keep(n, false);
  std::size_t forced = 0;
  if (eligibility != nullptr && w < n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (eligibility->kl_ceiling.at(i) < k * eligibility->gamma_prime) {
        keep[i] = true;
        ++forced;
      }
    }
  }
  auto order = all_indices(n);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ev.solutions[a].reach_value > ev.solutions[b].reach_value;
  });
  for (std::size_t i = 0, taken = forced; i < n && taken < w; ++i) {
    if (!keep[order[i]]) {
      keep[order[i]] = true;
      ++taken;
    }
  }
  for (std::size_t i = 0; i < n; ++i) (keep[i] ? ev.kept : ev.dropped).push_back(i);
  if (forced > w) {
    ev.value = -1.0 - nu_a;
  } else {
    ev.value = disjunctive_of(ev.solutions, ev.kept) - nu_a;
  }
  return ev;
}

SubsetSearchResult subset_search(std::span<const AgentSpec> agents, double nu_a, double k_max,
                                 double eps, std::size_t w, const DecoyEligibility* eligibility,
                                 const ToleranceSet& tol, unsigned threads) {
  SubsetSearchResult res;
  auto f = [&](double k) {
    return reach_evaluate_sub(agents, nu_a, k, w, eligibility, tol, threads).value;
  };
  try {
    const auto bis = bisection(f, k_max, eps, tol.feasibility);
    res.kl_bound = bis.value;
    res.iterations = bis.iterations;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UpperBoundNotFeasible) throw;
    res.kl_bound = k_max;
  }
  res.final_eval = reach_evaluate_sub(agents, nu_a, res.kl_bound, w, eligibility, tol, threads);
  res.fail = res.final_eval.value < -tol.feasibility;
  return res;
}

double kmax_for_decoys(std::size_t n, double prior, int m_r, double gamma_prime,
                       double k_max_prime) {
  if (n == 0) throw Error(ErrorKind::InvalidParams, "no agents");
  if (n == 1) return k_max_prime;
  const double b0 = belief_proxy(prior, m_r, k_max_prime);
  auto g = [&](double k) {
    return static_cast<double>(n - 1) * belief_proxy(prior, m_r, k * gamma_prime) +
           belief_proxy(prior, m_r, k) - b0;
  };
  const double cap = static_cast<double>(n) * k_max_prime;
  // g is strictly decreasing with g(K'_max) >= 0.
  double lo = k_max_prime, hi = std::max(k_max_prime, 1e-12);
  if (g(lo) < 0.0) return cap;
  while (g(hi) >= 0.0) {
    hi = 2.0 * hi + 1.0;
    if (hi > 1e6 || !(b0 > 0.0)) return cap;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

EliminationResult deceptive_subset_selection(const TeamProblem& problem) {
  validate_problem(problem);
  const auto& agents = problem.agents;
  const auto n = agents.size();
  const double prior = agents.front().prior;
  for (const auto& a : agents) {
    if (std::abs(a.prior - prior) > 1e-12) {
      throw Error(ErrorKind::InvalidParams, "decoy allocation needs equal priors");
    }
    if (std::abs(a.utility - agents.front().utility) > 1e-12) {
      throw Error(ErrorKind::InvalidParams, "decoy allocation needs equal utilities");
    }
  }

  EliminationResult res;
  res.k_max = resolve_kmax(problem);
  res.k_max_decoys = kmax_for_decoys(n, prior, problem.m_r, problem.gamma_prime, res.k_max);

  // Decoy witnesses and their KL ceilings.
  std::vector<StationaryPolicy> witness(n);
  DecoyEligibility elig;
  elig.gamma_prime = problem.gamma_prime;
  elig.kl_ceiling.resize(n);
  detail::parallel_for(n, problem.threads, [&](std::size_t i) {
    witness[i] = decoy_witness(agents[i], 0.0, problem.tol);
    elig.kl_ceiling[i] = policy_kl(agents[i], witness[i]);
  });

  for (std::size_t k = 0; k < n; ++k) {
    BRow row;
    row.k = k;
    row.b = 0.0;  // failed rows keep B_k = 0
    double upper = k == 0 ? res.k_max : res.k_max_decoys;
    if (k > 0) {
      // Beyond c_(k) / gamma' fewer than k agents can still serve as decoys.
      auto c = elig.kl_ceiling;
      std::sort(c.begin(), c.end(), std::greater<>());
      upper = std::min(upper, c[k - 1] / problem.gamma_prime * (1.0 - 1e-12));
    }
    const auto search = subset_search(agents, problem.nu_a, upper, problem.epsilon, n - k, &elig,
                                      problem.tol, problem.threads);
    row.kl_bound = search.kl_bound;
    row.fail = search.fail;
    row.decoys = search.final_eval.dropped;
    row.kept_reach = search.final_eval.value + problem.nu_a;
    if (!row.fail) {
      const double kbar = row.kl_bound;
      const double decoy_kl = kbar * problem.gamma_prime;
      row.policies.resize(n);
      row.agent_kl.resize(n);
      row.agent_reach.resize(n);
      row.agent_proxy.resize(n);
      const auto& sols = search.final_eval.solutions;
      std::vector<bool> is_decoy(n, false);
      for (auto d : row.decoys) is_decoy[d] = true;
      detail::parallel_for(n, problem.threads, [&](std::size_t i) {
        if (is_decoy[i]) {
          row.policies[i] = policy_with_kl(agents[i], witness[i], decoy_kl, 1e-7).policy;
        } else {
          row.policies[i] = sols[i].policy;
        }
        row.agent_kl[i] = policy_kl(agents[i], row.policies[i]);
        row.agent_reach[i] = policy_reach(agents[i], row.policies[i]);
        row.agent_proxy[i] = belief_proxy(prior, problem.m_r, row.agent_kl[i]);
      });
      row.b = static_cast<double>(k) * belief_proxy(prior, problem.m_r, decoy_kl) +
              belief_proxy(prior, problem.m_r, kbar);
    }
    res.b_table.push_back(std::move(row));
  }

  bool found = false;
  for (const auto& row : res.b_table) {
    if (row.fail) continue;
    if (!found || row.b > res.b_table[res.k_star].b) {
      res.k_star = row.k;
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorKind::AllFailed, "every decoy count fails the reach constraint");
  }
  const auto& best = res.b_table[res.k_star];
  res.decoy_set = best.decoys;
  res.policies = best.policies;
  res.non_decoy_kl = best.kl_bound;
  res.decoy_kl = best.kl_bound * problem.gamma_prime;
  res.critical_capacity = best.b;
  return res;
}

}  // namespace decept
