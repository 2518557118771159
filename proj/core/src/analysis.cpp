#include "decept/analysis.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "decept/error.hpp"

namespace decept {

namespace {

constexpr std::size_t kDirectSolveLimit = 10000;
constexpr double kValueIterationTolerance = 1e-10;
constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

std::vector<bool> membership(std::size_t n, std::span<const StateIndex> set) {
  std::vector<bool> in(n, false);
  for (auto s : set) {
    if (s >= n) throw Error(ErrorKind::UnknownState, "target index out of range");
    in[s] = true;
  }
  return in;
}

// States from which `goal` is reachable in the chain graph (goal included).
std::vector<bool> backward_reachable(const MarkovChain& chain, const std::vector<bool>& goal) {
  const auto n = chain.num_states();
  std::vector<std::vector<StateIndex>> pred(n);
  for (StateIndex s = 0; s < n; ++s) {
    for (const auto& o : chain.rows[s]) pred[o.next].push_back(s);
  }
  std::vector<bool> seen = goal;
  std::deque<StateIndex> queue;
  for (StateIndex s = 0; s < n; ++s) {
    if (goal[s]) queue.push_back(s);
  }
  while (!queue.empty()) {
    const auto q = queue.front();
    queue.pop_front();
    for (auto p : pred[q]) {
      if (!seen[p]) {
        seen[p] = true;
        queue.push_back(p);
      }
    }
  }
  return seen;
}

}  // namespace

std::vector<std::size_t> strongly_connected_components(
    const std::vector<std::vector<std::size_t>>& adjacency) {
  const auto n = adjacency.size();
  std::vector<std::size_t> index(n, kUnassigned), low(n, 0), comp(n, kUnassigned);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, next_comp = 0;

  struct Frame {
    std::size_t v;
    std::size_t edge;
  };
  std::vector<Frame> call;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnassigned) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& f = call.back();
      const auto v = f.v;
      if (f.edge < adjacency[v].size()) {
        const auto w = adjacency[v][f.edge++];
        if (index[w] == kUnassigned) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = next_comp;
        } while (w != v);
        ++next_comp;
      }
      call.pop_back();
      if (!call.empty()) {
        const auto parent = call.back().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return comp;
}

Decomposition decompose(const Mdp& mdp, const StationaryPolicy& reference,
                        std::span<const StateIndex> targets) {
  const auto n = mdp.num_states();
  const auto is_target = membership(n, targets);
  for (StateIndex s = 0; s < n; ++s) {
    if (is_target[s] && !mdp.is_absorbing(s)) {
      throw Error(ErrorKind::NonAbsorbingTarget, mdp.state_name(s));
    }
  }
  const auto chain = induced_chain(mdp, reference);
  std::vector<std::vector<std::size_t>> adj(n);
  for (StateIndex s = 0; s < n; ++s) {
    for (const auto& o : chain.rows[s]) adj[s].push_back(o.next);
  }
  const auto comp = strongly_connected_components(adj);
  const auto ncomp = n == 0 ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<bool> comp_closed(ncomp, true);
  for (StateIndex s = 0; s < n; ++s) {
    for (auto q : adj[s]) {
      if (comp[q] != comp[s]) comp_closed[comp[s]] = false;
    }
  }

  Decomposition dec;
  dec.role.resize(n);
  for (StateIndex s = 0; s < n; ++s) {
    const bool closed = comp_closed[comp[s]];
    if (closed) dec.closed_states.push_back(s);
    if (is_target[s]) {
      dec.role[s] = StateRole::Target;
      dec.targets.push_back(s);
    } else if (closed) {
      dec.role[s] = StateRole::Closed;
    } else {
      dec.role[s] = StateRole::Deviation;
      dec.deviation_states.push_back(s);
    }
  }
  return dec;
}

std::vector<double> reach_probabilities(const MarkovChain& chain,
                                        std::span<const StateIndex> targets) {
  const auto n = chain.num_states();
  const auto goal = membership(n, targets);
  const auto can_reach = backward_reachable(chain, goal);

  std::vector<double> h(n, 0.0);
  std::vector<std::size_t> local(n, kUnassigned);
  std::vector<StateIndex> unknown;
  for (StateIndex s = 0; s < n; ++s) {
    if (goal[s]) {
      h[s] = 1.0;
    } else if (can_reach[s]) {
      local[s] = unknown.size();
      unknown.push_back(s);
    }
  }
  if (unknown.empty()) return h;

  if (unknown.size() <= kDirectSolveLimit) {
    const auto m = static_cast<Eigen::Index>(unknown.size());
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      trip.emplace_back(i, i, 1.0);
      for (const auto& o : chain.rows[unknown[i]]) {
        if (goal[o.next]) {
          rhs[i] += o.prob;
        } else if (local[o.next] != kUnassigned) {
          trip.emplace_back(i, static_cast<Eigen::Index>(local[o.next]), -o.prob);
        }
      }
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorKind::SolverFailure, "hitting-probability system is singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) h[unknown[i]] = std::clamp(sol[i], 0.0, 1.0);
    return h;
  }

  // Gauss-Seidel value iteration from below.
  for (std::size_t iter = 0; iter < 10'000'000; ++iter) {
    double delta = 0.0;
    for (auto s : unknown) {
      double v = 0.0;
      for (const auto& o : chain.rows[s]) v += o.prob * h[o.next];
      delta = std::max(delta, std::abs(v - h[s]));
      h[s] = v;
    }
    if (delta < kValueIterationTolerance) break;
  }
  return h;
}

double reach_probability(const Mdp& mdp, const StationaryPolicy& policy,
                         std::span<const StateIndex> targets) {
  const auto chain = induced_chain(mdp, policy);
  return reach_probabilities(chain, targets).at(mdp.initial());
}

double disjunctive_reach(std::span<const double> probs) {
  double fail = 1.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::OutOfRange, "probability " + std::to_string(p));
    }
    fail *= (1.0 - p);
  }
  return 1.0 - fail;
}

std::optional<std::size_t> OccupancyVector::local_index(StateIndex s) const {
  auto it = std::lower_bound(deviation_states.begin(), deviation_states.end(), s);
  if (it == deviation_states.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - deviation_states.begin());
}

double OccupancyVector::state_mass(std::size_t local) const {
  double m = 0.0;
  for (double v : entries.at(local)) m += v;
  return m;
}

double OccupancyVector::entry(StateIndex s, ActionIndex a) const {
  const auto i = local_index(s);
  return i ? entries[*i].at(a) : 0.0;
}

double OccupancyVector::flow(const Mdp& mdp, std::size_t local, StateIndex q) const {
  const auto s = deviation_states.at(local);
  double f = 0.0;
  const auto acts = mdp.actions(s);
  for (ActionIndex a = 0; a < acts.size(); ++a) {
    if (entries[local][a] == 0.0) continue;
    for (const auto& o : acts[a].outcomes) {
      if (o.next == q) f += entries[local][a] * o.prob;
    }
  }
  return f;
}

OccupancyVector occupancy_from_policy(const Mdp& mdp, const StationaryPolicy& policy,
                                      const Decomposition& dec) {
  const auto chain = induced_chain(mdp, policy);
  const auto& sd = dec.deviation_states;
  const auto n = mdp.num_states();

  OccupancyVector x;
  x.deviation_states = sd;
  x.entries.resize(sd.size());
  for (std::size_t i = 0; i < sd.size(); ++i) x.entries[i].assign(mdp.num_actions(sd[i]), 0.0);

  const auto s0 = mdp.initial();
  if (!dec.is_deviation(s0)) return x;

  // S_d states reachable from s0 without leaving S_d.
  std::vector<bool> visited(n, false);
  std::vector<StateIndex> order{s0};
  visited[s0] = true;
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (const auto& o : chain.rows[order[k]]) {
      if (dec.is_deviation(o.next) && !visited[o.next]) {
        visited[o.next] = true;
        order.push_back(o.next);
      }
    }
  }
  // Every such state must be able to leave S_d, otherwise it is recurrent.
  std::vector<bool> exits(n, false);
  for (StateIndex s = 0; s < n; ++s) exits[s] = !dec.is_deviation(s);
  const auto leaves = backward_reachable(chain, exits);
  for (auto s : order) {
    if (!leaves[s]) throw Error(ErrorKind::InfiniteOccupancy, mdp.state_name(s));
  }

  std::sort(order.begin(), order.end());
  std::vector<std::size_t> local(n, kUnassigned);
  for (std::size_t i = 0; i < order.size(); ++i) local[order[i]] = i;
  const auto m = static_cast<Eigen::Index>(order.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < m; ++i) {
    trip.emplace_back(i, i, 1.0);
    for (const auto& o : chain.rows[order[i]]) {
      if (local[o.next] != kUnassigned) {
        // Transposed system: column i receives inflow from order[i].
        trip.emplace_back(static_cast<Eigen::Index>(local[o.next]), i, -o.prob);
      }
    }
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs[static_cast<Eigen::Index>(local[s0])] = 1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorKind::InfiniteOccupancy, "occupancy system is singular");
  }
  const Eigen::VectorXd visits = lu.solve(rhs);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto s = order[i];
    const auto li = *x.local_index(s);
    const double v = std::max(0.0, visits[i]);
    const auto row = policy.row(s);
    for (ActionIndex act = 0; act < row.size(); ++act) x.entries[li][act] = v * row[act];
  }
  return x;
}

StationaryPolicy policy_from_occupancy(const Mdp& mdp, const OccupancyVector& x,
                                       const StationaryPolicy& reference, double clip) {
  validate_policy(mdp, reference);
  StationaryPolicy out = reference;
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    const auto s = x.deviation_states[i];
    const auto& e = x.entries[i];
    if (e.size() != mdp.num_actions(s)) {
      throw Error(ErrorKind::PolicyMismatch, "occupancy shape mismatch at " + mdp.state_name(s));
    }
    double mass = 0.0;
    for (double v : e) {
      if (v < -clip || !std::isfinite(v)) {
        throw Error(ErrorKind::NegativeEntry, "occupancy at " + mdp.state_name(s));
      }
      if (v > clip) mass += v;
    }
    if (mass <= 0.0) continue;
    auto& row = out.mutable_row(s);
    for (ActionIndex a = 0; a < e.size(); ++a) row[a] = e[a] > clip ? e[a] / mass : 0.0;
  }
  return out;
}

double kl_occupancy(const Mdp& mdp, const OccupancyVector& x, const StationaryPolicy& reference) {
  double kl = 0.0;
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    const auto s = x.deviation_states[i];
    const double mass = x.state_mass(i);
    if (mass <= 0.0) continue;
    const auto ref_row = induced_row(mdp, reference, s);
    std::vector<Outcome> flows;
    const auto acts = mdp.actions(s);
    for (ActionIndex a = 0; a < acts.size(); ++a) {
      const double xa = x.entries[i][a];
      if (xa <= 0.0) continue;
      for (const auto& o : acts[a].outcomes) {
        auto it = std::find_if(flows.begin(), flows.end(),
                               [&](const Outcome& f) { return f.next == o.next; });
        if (it == flows.end()) {
          flows.push_back({o.next, xa * o.prob});
        } else {
          it->prob += xa * o.prob;
        }
      }
    }
    for (const auto& f : flows) {
      if (f.prob <= 0.0) continue;
      auto it = std::find_if(ref_row.begin(), ref_row.end(),
                             [&](const Outcome& r) { return r.next == f.next; });
      if (it == ref_row.end()) return std::numeric_limits<double>::infinity();
      kl += f.prob * std::log(f.prob / (it->prob * mass));
    }
  }
  return std::max(0.0, kl);
}

double occupancy_reach(const Mdp& mdp, const OccupancyVector& x,
                       std::span<const StateIndex> targets) {
  const auto goal = membership(mdp.num_states(), targets);
  double nu = goal[mdp.initial()] ? 1.0 : 0.0;
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    const auto acts = mdp.actions(x.deviation_states[i]);
    for (ActionIndex a = 0; a < acts.size(); ++a) {
      const double xa = x.entries[i][a];
      if (xa == 0.0) continue;
      for (const auto& o : acts[a].outcomes) {
        if (goal[o.next]) nu += xa * o.prob;
      }
    }
  }
  return nu;
}

std::vector<double> flow_residuals(const Mdp& mdp, const OccupancyVector& x) {
  std::vector<double> res(x.deviation_states.size(), 0.0);
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    res[i] = x.state_mass(i) - (x.deviation_states[i] == mdp.initial() ? 1.0 : 0.0);
  }
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    const auto acts = mdp.actions(x.deviation_states[i]);
    for (ActionIndex a = 0; a < acts.size(); ++a) {
      const double xa = x.entries[i][a];
      if (xa == 0.0) continue;
      for (const auto& o : acts[a].outcomes) {
        if (auto j = x.local_index(o.next)) res[*j] -= xa * o.prob;
      }
    }
  }
  return res;
}

PathLlr path_llr(std::span<const StateIndex> path, const MarkovChain& deceptive,
                 const MarkovChain& reference) {
  PathLlr out;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const auto s = path[t];
    const auto q = path[t + 1];
    if (deceptive.prob(s, s) == 1.0 && reference.prob(s, s) == 1.0) break;
    const double pa = deceptive.prob(s, q);
    const double ps = reference.prob(s, q);
    if (pa == 0.0 && ps == 0.0) {
      throw Error(ErrorKind::InvalidParams,
                  "path step impossible under both policies at state " + std::to_string(s));
    }
    if (pa == 0.0) {
      return {-std::numeric_limits<double>::infinity(), LlrStatus::InfeasibleUnderDeceptive};
    }
    if (ps == 0.0) {
      return {std::numeric_limits<double>::infinity(), LlrStatus::InfeasibleUnderReference};
    }
    out.value += std::log(pa) - std::log(ps);
  }
  return out;
}

PathLlr path_llr(std::span<const StateIndex> path, const StationaryPolicy& deceptive,
                 const StationaryPolicy& reference, const Mdp& mdp) {
  return path_llr(path, induced_chain(mdp, deceptive), induced_chain(mdp, reference));
}

}  // namespace decept
