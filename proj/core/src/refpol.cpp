#include "decept/refpol.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "decept/error.hpp"
#include "parallel.hpp"

namespace decept {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  double objective = 0.0;
  double worst = 0.0;
  bool unbounded = false;
};

std::vector<AgentSpec> with_references(std::span<const AgentSpec> agents,
                                       const std::vector<StationaryPolicy>& refs) {
  std::vector<AgentSpec> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    out.push_back(AgentSpec::make(a.mdp, refs[i], a.targets, a.prior, a.utility));
  }
  return out;
}

Evaluation evaluate(std::span<const AgentSpec> agents, const std::vector<StationaryPolicy>& refs,
                    double nu_a, double eps, double tau) {
  TeamProblem p;
  p.agents = with_references(agents, refs);
  p.nu_a = nu_a;
  p.epsilon = eps;
  Evaluation ev;
  try {
    const auto res = deceptive_synthesis(p);
    ev.objective = smoothed_worst_kl(res.per_agent_kl, tau);
    ev.worst = *std::max_element(res.per_agent_kl.begin(), res.per_agent_kl.end());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infeasible && e.kind() != ErrorKind::UpperBoundNotFeasible) throw;
    ev.objective = ev.worst = kInf;
    ev.unbounded = true;
  }
  return ev;
}

// pi(s,.) proportional to pi(s,.) exp(delta(s,.)) on the current support.
void tilt_row(std::vector<double>& row, const std::vector<double>& delta) {
  double mx = -kInf;
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (row[a] > 0.0) mx = std::max(mx, std::log(row[a]) + delta[a]);
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    row[a] = row[a] > 0.0 ? std::exp(std::log(row[a]) + delta[a] - mx) : 0.0;
    sum += row[a];
  }
  for (auto& v : row) v /= sum;
}

struct Param {
  std::size_t agent;
  StateIndex state;
  ActionIndex action;
};

std::vector<Param> parameters(std::span<const AgentSpec> agents,
                              const std::vector<StationaryPolicy>& refs) {
  std::vector<Param> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (StateIndex s = 0; s < agents[i].mdp.num_states(); ++s) {
      const auto row = refs[i].row(s);
      if (std::count_if(row.begin(), row.end(), [](double v) { return v > 0.0; }) < 2) continue;
      for (ActionIndex a = 0; a < row.size(); ++a) {
        if (row[a] > 0.0) out.push_back({i, s, a});
      }
    }
  }
  return out;
}

StationaryPolicy mix(const StationaryPolicy& a, const StationaryPolicy& b, double alpha) {
  return mix_policies(a, b, alpha);
}

}  // namespace

double smoothed_worst_kl(std::span<const double> kl_values, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidParams, "temperature must be > 0");
  if (kl_values.empty()) return 0.0;
  const double mx = *std::max_element(kl_values.begin(), kl_values.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double v : kl_values) sum += std::exp((v - mx) / tau);
  return mx + tau * std::log(sum) - tau * std::log(static_cast<double>(kl_values.size()));
}

StationaryPolicy project_reference(const Mdp& mdp, const StationaryPolicy& policy,
                                   const StationaryPolicy& feasible,
                                   std::span<const StateIndex> targets, double threshold) {
  std::vector<bool> is_target(mdp.num_states(), false);
  for (auto t : targets) is_target.at(t) = true;
  const auto reach_of = [&](const StationaryPolicy& p) {
    return reach_probability(mdp, p, {targets.begin(), targets.end()});
  };
  if (reach_of(policy) >= threshold) return policy;
  const auto s0 = mdp.initial();
  if (is_target[s0] || mdp.is_absorbing(s0)) return feasible;

  // Occupancy coordinates over D = non-target, non-absorbing states.
  std::vector<StateIndex> d;
  std::vector<std::size_t> local(mdp.num_states(), static_cast<std::size_t>(-1));
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    if (!is_target[s] && !mdp.is_absorbing(s)) {
      local[s] = d.size();
      d.push_back(s);
    }
  }
  std::vector<std::size_t> offset(d.size() + 1, 0);
  for (std::size_t i = 0; i < d.size(); ++i) offset[i + 1] = offset[i] + mdp.num_actions(d[i]);
  const auto m = static_cast<Eigen::Index>(d.size());
  const auto nx = static_cast<Eigen::Index>(offset.back());

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, nx);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(nx);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  b[static_cast<Eigen::Index>(local[s0])] = 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto acts = mdp.actions(d[i]);
    for (ActionIndex act = 0; act < acts.size(); ++act) {
      const auto col = static_cast<Eigen::Index>(offset[i] + act);
      a(static_cast<Eigen::Index>(i), col) += 1.0;
      for (const auto& o : acts[act].outcomes) {
        if (local[o.next] != static_cast<std::size_t>(-1)) {
          a(static_cast<Eigen::Index>(local[o.next]), col) -= o.prob;
        }
        if (is_target[o.next]) r[col] += o.prob;
      }
    }
  }

  auto occupancy = [&](const StationaryPolicy& p) -> std::optional<Eigen::VectorXd> {
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(m, m);
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (const auto& o : induced_row(mdp, p, d[i])) {
        if (local[o.next] != static_cast<std::size_t>(-1)) {
          t(static_cast<Eigen::Index>(local[o.next]), static_cast<Eigen::Index>(i)) -= o.prob;
        }
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(t);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::VectorXd y = lu.solve(b);
    if ((y.array() < -1e-9).any() || !y.allFinite()) return std::nullopt;
    Eigen::VectorXd x(nx);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto row = p.row(d[i]);
      for (std::size_t act = 0; act < row.size(); ++act) {
        x[static_cast<Eigen::Index>(offset[i] + act)] =
            std::max(0.0, y[static_cast<Eigen::Index>(i)]) * row[act];
      }
    }
    return x;
  };

  auto start = occupancy(policy);
  if (!start) start = occupancy(feasible);
  if (!start) return feasible;

  // A small margin keeps the converted policy inside after round-off.
  const double level = std::min(threshold + 1e-7, 1.0);
  Eigen::MatrixXd ar(m + 1, nx);
  ar << a, r.transpose();
  Eigen::VectorXd br(m + 1);
  br << b, level;
  const Eigen::LDLT<Eigen::MatrixXd> gram(a * a.transpose());
  const Eigen::LDLT<Eigen::MatrixXd> gram_r(ar * ar.transpose());
  auto project_c1 = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    Eigen::VectorXd x = y - a.transpose() * gram.solve(a * y - b);
    if (r.dot(x) >= level) return x;
    return y - ar.transpose() * gram_r.solve(ar * y - br);
  };

  Eigen::VectorXd x = *start;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(nx), q = Eigen::VectorXd::Zero(nx);
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd y = project_c1(x + p);
    p = x + p - y;
    const Eigen::VectorXd xn = (y + q).cwiseMax(0.0);
    q = y + q - xn;
    const double change = (xn - x).lpNorm<Eigen::Infinity>();
    x = xn;
    if (change < 1e-14) break;
  }

  StationaryPolicy out = policy;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double mass = 0.0;
    for (auto j = offset[i]; j < offset[i + 1]; ++j) mass += x[static_cast<Eigen::Index>(j)];
    if (mass <= 1e-12) continue;
    auto& row = out.mutable_row(d[i]);
    for (std::size_t act = 0; act < row.size(); ++act) {
      const double v = x[static_cast<Eigen::Index>(offset[i] + act)];
      row[act] = v > 1e-12 ? v / mass : 0.0;
    }
    double s = 0.0;
    for (double v : row) s += v;
    for (double& v : row) v /= s;
  }
  if (reach_of(out) >= threshold) return out;

  // Largest step toward `out` from the feasible policy.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (reach_of(mix(out, feasible, mid)) >= threshold ? lo : hi) = mid;
  }
  return lo > 0.0 ? mix(out, feasible, lo) : feasible;
}

RefpolResult synthesize_reference(std::span<const AgentSpec> agents, const SupervisorTask& task,
                                  double nu_a, double eps, unsigned threads) {
  const auto n = agents.size();
  if (task.supervisor_targets.size() != n || task.thresholds.size() != n) {
    throw Error(ErrorKind::InvalidParams, "one supervisor target set and threshold per agent");
  }
  if (!(task.temperature > 0.0)) throw Error(ErrorKind::InvalidParams, "temperature must be > 0");
  if (task.iterations < 0) throw Error(ErrorKind::InvalidParams, "iterations must be >= 0");

  // Maximal supervisor reach, and a feasible starting point per agent.
  std::vector<StationaryPolicy> feasible(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = task.thresholds[i];
    if (!(th >= 0.0 && th <= 1.0)) throw Error(ErrorKind::OutOfRange, "threshold outside [0,1]");
    const auto& mdp = agents[i].mdp;
    auto uni = AgentSpec::make(mdp, StationaryPolicy::uniform(mdp), task.supervisor_targets[i]);
    const auto best = max_reach_policy(uni);
    if (best.reach < th - 1e-12) {
      throw Error(ErrorKind::InfeasibleSupervisorTask,
                  "agent " + std::to_string(i) + " reaches its supervisor target with at most " +
                      std::to_string(best.reach) + " < " + std::to_string(th));
    }
    feasible[i] = best.policy;
  }
  auto sup_reach = [&](const std::vector<StationaryPolicy>& refs) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(reach_probability(agents[i].mdp, refs[i], task.supervisor_targets[i]));
    }
    return out;
  };

  std::vector<StationaryPolicy> init;
  for (const auto& a : agents) init.push_back(a.reference);
  for (std::size_t i = 0; i < n; ++i) {
    init[i] = project_reference(agents[i].mdp, init[i], feasible[i], task.supervisor_targets[i],
                                task.thresholds[i]);
  }

  RefpolResult res;
  const auto ev0 = evaluate(agents, init, nu_a, eps, task.temperature);
  res.references = init;
  res.objective = res.initial_objective = ev0.objective;
  res.worst_kl = ev0.worst;
  res.unbounded = ev0.unbounded;
  res.trace.push_back({0, ev0.objective, ev0.worst, true, 0.0});
  if (ev0.unbounded || task.iterations == 0) {
    res.supervisor_reach = sup_reach(res.references);
    return res;
  }

  // Interior starting point for the finite differences.
  std::vector<StationaryPolicy> base = init;
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = mix(StationaryPolicy::uniform(agents[i].mdp), init[i], task.smoothing);
    base[i] = project_reference(agents[i].mdp, base[i], init[i], task.supervisor_targets[i],
                                task.thresholds[i]);
  }
  auto base_ev = evaluate(agents, base, nu_a, eps, task.temperature);
  // The trace follows the ascent iterate; the result keeps the best point seen.
  res.trace.front() = {0, base_ev.objective, base_ev.worst, true, 0.0};
  if (base_ev.objective > res.objective) {
    res.references = base;
    res.objective = base_ev.objective;
    res.worst_kl = base_ev.worst;
  }

  double step = task.step_size;
  for (int iter = 1; iter <= task.iterations; ++iter) {
    const auto params = parameters(agents, base);
    std::vector<double> grad(params.size(), 0.0);
    detail::parallel_for(params.size(), threads, [&](std::size_t j) {
      const auto& pm = params[j];
      double f[2];
      for (int side = 0; side < 2; ++side) {
        auto refs = base;
        auto& row = refs[pm.agent].mutable_row(pm.state);
        std::vector<double> delta(row.size(), 0.0);
        delta[pm.action] = side == 0 ? task.fd_step : -task.fd_step;
        tilt_row(row, delta);
        f[side] = evaluate(agents, refs, nu_a, eps, task.temperature).objective;
      }
      grad[j] = std::isfinite(f[0]) && std::isfinite(f[1]) ? (f[0] - f[1]) / (2.0 * task.fd_step)
                                                           : 0.0;
    });
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));

    RefpolIterate entry{iter, base_ev.objective, base_ev.worst, false, step};
    if (gmax > 0.0) {
      auto cand = base;
      for (std::size_t i = 0; i < n; ++i) {
        for (StateIndex s = 0; s < agents[i].mdp.num_states(); ++s) {
          std::vector<double> delta(agents[i].mdp.num_actions(s), 0.0);
          bool touched = false;
          for (std::size_t j = 0; j < params.size(); ++j) {
            if (params[j].agent == i && params[j].state == s) {
              delta[params[j].action] = step * grad[j] / gmax;
              touched = true;
            }
          }
          if (touched) tilt_row(cand[i].mutable_row(s), delta);
        }
        cand[i] = project_reference(agents[i].mdp, cand[i], base[i], task.supervisor_targets[i],
                                    task.thresholds[i]);
      }
      const auto ev = evaluate(agents, cand, nu_a, eps, task.temperature);
      if (ev.objective > base_ev.objective) {
        base = std::move(cand);
        base_ev = ev;
        entry = {iter, ev.objective, ev.worst, true, step};
        step = std::min(task.step_size * 4.0, step * 1.5);
        if (ev.objective > res.objective) {
          res.references = base;
          res.objective = ev.objective;
          res.worst_kl = ev.worst;
        }
      } else {
        step *= 0.5;
      }
    }
    res.trace.push_back(entry);
    if (gmax == 0.0 || step < 1e-8) break;
  }
  res.supervisor_reach = sup_reach(res.references);
  return res;
}

}  // namespace decept
