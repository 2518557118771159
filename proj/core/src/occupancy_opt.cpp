#include "decept/occupancy_opt.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>

#include "decept/error.hpp"

namespace decept {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr double kLambdaFloor = 1e-13;
constexpr double kLambdaCeiling = 1e13;
constexpr int kMaxPolicyIterations = 200;
constexpr int kMaxMultiplierSteps = 200;

bool solver_verbose() {
  static const bool verbose = std::getenv("DECEPT_SOLVER_VERBOSE") != nullptr;
  return verbose;
}

// One S_d state of the agent, restricted to the actions whose support lies
// inside the reference row's support (others have infinite KL cost).
struct LocalState {
  StateIndex state = 0;
  std::vector<ActionIndex> allowed;
  std::vector<std::vector<double>> probs;  // [k][pos]
  std::vector<double> ref;                 // reference row over support positions
  std::vector<std::size_t> succ_local;     // local index or kNone
  std::vector<double> succ_value;          // terminal reach value (1 for targets)
  std::vector<double> ref_weights;         // reference weights over `allowed`
};

struct LocalModel {
  std::vector<LocalState> states;
  std::size_t start = kNone;
  double start_value = 0.0;  // reach value of s0 when it is not in S_d
};

LocalModel build_model(const AgentSpec& agent) {
  const auto& mdp = agent.mdp;
  const auto& dec = agent.decomposition;
  const auto& sd = dec.deviation_states;
  std::vector<std::size_t> local(mdp.num_states(), kNone);
  for (std::size_t i = 0; i < sd.size(); ++i) local[sd[i]] = i;

  LocalModel model;
  model.states.resize(sd.size());
  for (std::size_t i = 0; i < sd.size(); ++i) {
    auto& ls = model.states[i];
    ls.state = sd[i];
    const auto ref_row = induced_row(mdp, agent.reference, sd[i]);
    for (const auto& o : ref_row) {
      ls.ref.push_back(o.prob);
      ls.succ_local.push_back(local[o.next]);
      ls.succ_value.push_back(dec.is_target(o.next) ? 1.0 : 0.0);
    }
    auto pos_of = [&](StateIndex q) -> std::size_t {
      for (std::size_t p = 0; p < ref_row.size(); ++p) {
        if (ref_row[p].next == q) return p;
      }
      return kNone;
    };
    const auto acts = mdp.actions(sd[i]);
    double wsum = 0.0;
    for (ActionIndex a = 0; a < acts.size(); ++a) {
      std::vector<double> row(ref_row.size(), 0.0);
      bool inside = true;
      for (const auto& o : acts[a].outcomes) {
        if (o.prob <= 0.0) continue;
        const auto p = pos_of(o.next);
        if (p == kNone) {
          inside = false;
          break;
        }
        row[p] += o.prob;
      }
      if (!inside) continue;
      ls.allowed.push_back(a);
      ls.probs.push_back(std::move(row));
      ls.ref_weights.push_back(agent.reference.prob(sd[i], a));
      wsum += ls.ref_weights.back();
    }
    if (ls.allowed.empty() || wsum <= 0.0) {
      throw Error(ErrorKind::SolverFailure,
                  "no reference-consistent action at " + mdp.state_name(sd[i]));
    }
    for (auto& w : ls.ref_weights) w /= wsum;
  }
  const auto s0 = mdp.initial();
  model.start = local[s0];
  model.start_value = dec.is_target(s0) ? 1.0 : 0.0;
  return model;
}

using Weights = std::vector<std::vector<double>>;  // [i][k]

std::vector<double> mix_row(const LocalState& ls, const std::vector<double>& w) {
  std::vector<double> m(ls.ref.size(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    for (std::size_t p = 0; p < m.size(); ++p) m[p] += w[k] * ls.probs[k][p];
  }
  return m;
}

double row_kl(const LocalState& ls, const std::vector<double>& m) {
  double d = 0.0;
  for (std::size_t p = 0; p < m.size(); ++p) {
    if (m[p] > 0.0) d += m[p] * std::log(m[p] / ls.ref[p]);
  }
  return std::max(0.0, d);
}

Eigen::SparseMatrix<double> transient_matrix(const LocalModel& model,
                                             const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(model.states.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, 1.0);
    const auto& ls = model.states[i];
    for (std::size_t p = 0; p < ls.ref.size(); ++p) {
      if (ls.succ_local[p] != kNone && rows[i][p] != 0.0) {
        trip.emplace_back(i, static_cast<Eigen::Index>(ls.succ_local[p]), -rows[i][p]);
      }
    }
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

// Maximizes sum_p m_p (u_p - lambda log(m_p / ref_p)) over the action simplex
// with pairwise (SMO-style) exact line searches. `w` is the warm start.
void optimize_state(const LocalState& ls, const std::vector<double>& u, double lambda,
                    std::vector<double>& w) {
  const auto na = w.size();
  if (na == 1) {
    w[0] = 1.0;
    return;
  }
  std::vector<double> g(na);
  for (int iter = 0; iter < 2000; ++iter) {
    const auto m = mix_row(ls, w);
    // Log-ratio terms; -inf marks an uncovered support position.
    std::vector<double> lr(m.size());
    for (std::size_t p = 0; p < m.size(); ++p) {
      lr[p] = m[p] > 0.0 ? std::log(m[p] / ls.ref[p]) : -kInf;
    }
    for (std::size_t k = 0; k < na; ++k) {
      double gk = 0.0;
      for (std::size_t p = 0; p < m.size(); ++p) {
        const double pk = ls.probs[k][p];
        if (pk == 0.0) continue;
        if (lr[p] == -kInf) {
          gk = kInf;
          break;
        }
        gk += pk * (u[p] - lambda * lr[p]);
      }
      g[k] = gk;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < na; ++k) {
      if (g[k] > g[best]) best = k;
    }
    double avg = 0.0;
    for (std::size_t k = 0; k < na; ++k) {
      if (w[k] > 0.0) avg += w[k] * g[k];
    }
    const double fw_gap = g[best] - avg;
    if (!(fw_gap > 1e-15 * (1.0 + std::abs(avg)))) break;

    std::size_t worst = kNone;
    for (std::size_t k = 0; k < na; ++k) {
      if (k == best || w[k] <= 0.0) continue;
      if (worst == kNone || g[k] < g[worst]) worst = k;
    }
    if (worst == kNone) break;

    // phi'(t) for moving t mass from `worst` to `best`; decreasing in t.
    std::vector<double> d(m.size());
    for (std::size_t p = 0; p < m.size(); ++p) d[p] = ls.probs[best][p] - ls.probs[worst][p];
    auto slope = [&](double t) {
      double s = 0.0;
      for (std::size_t p = 0; p < m.size(); ++p) {
        if (d[p] == 0.0) continue;
        const double mp = m[p] + t * d[p];
        if (mp <= 0.0) return d[p] > 0.0 ? kInf : -kInf;
        s += d[p] * (u[p] - lambda * std::log(mp / ls.ref[p]));
      }
      return s;
    };
    auto curvature = [&](double t) {
      double c = 0.0;
      for (std::size_t p = 0; p < m.size(); ++p) {
        if (d[p] == 0.0) continue;
        c -= lambda * d[p] * d[p] / std::max(m[p] + t * d[p], 1e-300);
      }
      return c;
    };
    const double hi_t = w[worst];
    double t;
    if (slope(hi_t) >= 0.0) {
      t = hi_t;
    } else {
      double lo = 0.0, hi = hi_t;
      t = 0.5 * hi_t;
      for (int it = 0; it < 200; ++it) {
        const double s = slope(t);
        if (s > 0.0) {
          lo = t;
        } else if (s < 0.0) {
          hi = t;
        } else {
          break;
        }
        const double c = curvature(t);
        double next = (std::isfinite(s) && c < 0.0) ? t - s / c : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 1e-17 * std::max(1.0, hi_t) || next == t) break;
        t = next;
      }
    }
    if (t <= 0.0) break;
    w[best] += t;
    w[worst] = (t >= hi_t) ? 0.0 : w[worst] - t;
  }
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
}

struct LagrangianPoint {
  double lambda = 0.0;
  Weights weights;
  std::vector<double> visits;  // expected visits per local state
  double reach = 0.0;
  double kl = 0.0;
};

class RegularizedReachSolver {
 public:
  explicit RegularizedReachSolver(LocalModel model) : model_(std::move(model)) {}

  const LocalModel& model() const { return model_; }

  Weights reference_weights() const {
    Weights w;
    for (const auto& ls : model_.states) w.push_back(ls.ref_weights);
    return w;
  }

  LagrangianPoint solve(double lambda, Weights w) const {
    const auto n = model_.states.size();
    std::vector<double> value(n, 0.0);
    for (int iter = 0; iter < kMaxPolicyIterations; ++iter) {
      value = evaluate(w, lambda);
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& ls = model_.states[i];
        auto u = successor_values(ls, value);
        const double before = state_objective(ls, u, lambda, w[i]);
        auto trial = w[i];
        optimize_state(ls, u, lambda, trial);
        const double after = state_objective(ls, u, lambda, trial);
        if (after > before) {
          change = std::max(change, after - before);
          w[i] = std::move(trial);
        }
      }
      if (change <= 1e-14 * (1.0 + lambda)) break;
    }
    return finish(lambda, std::move(w));
  }

  LagrangianPoint finish(double lambda, Weights w) const {
    LagrangianPoint pt;
    pt.lambda = lambda;
    pt.weights = std::move(w);
    pt.visits = visits(pt.weights);
    pt.reach = model_.start == kNone ? model_.start_value : 0.0;
    for (std::size_t i = 0; i < model_.states.size(); ++i) {
      if (pt.visits[i] == 0.0) continue;
      const auto& ls = model_.states[i];
      const auto m = mix_row(ls, pt.weights[i]);
      for (std::size_t p = 0; p < m.size(); ++p) {
        if (ls.succ_local[p] == kNone) pt.reach += pt.visits[i] * m[p] * ls.succ_value[p];
      }
      pt.kl += pt.visits[i] * row_kl(ls, m);
    }
    pt.reach = std::clamp(pt.reach, 0.0, 1.0);
    return pt;
  }

  std::vector<double> visits(const Weights& w) const {
    const auto n = model_.states.size();
    std::vector<double> y(n, 0.0);
    if (model_.start == kNone || n == 0) return y;
    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = mix_row(model_.states[i], w[i]);
    Eigen::SparseMatrix<double> a = transient_matrix(model_, rows).transpose();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorKind::SolverFailure, "occupancy system is singular");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    rhs[static_cast<Eigen::Index>(model_.start)] = 1.0;
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(0.0, sol[static_cast<Eigen::Index>(i)]);
    return y;
  }

 private:
  std::vector<double> successor_values(const LocalState& ls, const std::vector<double>& value) const {
    std::vector<double> u(ls.ref.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
      u[p] = ls.succ_local[p] == kNone ? ls.succ_value[p] : value[ls.succ_local[p]];
    }
    return u;
  }

  static double state_objective(const LocalState& ls, const std::vector<double>& u, double lambda,
                                const std::vector<double>& w) {
    const auto m = mix_row(ls, w);
    double h = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (m[p] > 0.0) h += m[p] * (u[p] - lambda * std::log(m[p] / ls.ref[p]));
    }
    return h;
  }

  std::vector<double> evaluate(const Weights& w, double lambda) const {
    const auto n = model_.states.size();
    if (n == 0) return {};
    std::vector<std::vector<double>> rows(n);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ls = model_.states[i];
      rows[i] = mix_row(ls, w[i]);
      double r = -lambda * row_kl(ls, rows[i]);
      for (std::size_t p = 0; p < ls.ref.size(); ++p) {
        if (ls.succ_local[p] == kNone) r += rows[i][p] * ls.succ_value[p];
      }
      rhs[static_cast<Eigen::Index>(i)] = r;
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(transient_matrix(model_, rows));
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorKind::SolverFailure, "policy evaluation system is singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    return std::vector<double>(sol.data(), sol.data() + n);
  }

  LocalModel model_;
};

// State-action occupancies z_{i,k} = y_i w_{i,k}.
Weights occupancies(const LagrangianPoint& pt) {
  Weights z = pt.weights;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (auto& v : z[i]) v *= pt.visits[i];
  }
  return z;
}

double occupancy_kl(const LocalModel& model, const Weights& z) {
  double kl = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double mass = 0.0;
    for (double v : z[i]) mass += v;
    if (mass <= 0.0) continue;
    std::vector<double> w = z[i];
    for (auto& v : w) v /= mass;
    kl += mass * row_kl(model.states[i], mix_row(model.states[i], w));
  }
  return kl;
}

double occupancy_reach_local(const LocalModel& model, const Weights& z) {
  double nu = model.start == kNone ? model.start_value : 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& ls = model.states[i];
    const auto f = mix_row(ls, z[i]);
    for (std::size_t p = 0; p < f.size(); ++p) {
      if (ls.succ_local[p] == kNone) nu += f[p] * ls.succ_value[p];
    }
  }
  return std::clamp(nu, 0.0, 1.0);
}

SubproblemSolution to_solution(const AgentSpec& agent, const LocalModel& model, const Weights& z,
                               const ToleranceSet& tol) {
  SubproblemSolution sol;
  auto& x = sol.occupancy;
  x.deviation_states = agent.decomposition.deviation_states;
  x.entries.resize(x.deviation_states.size());
  for (std::size_t i = 0; i < x.deviation_states.size(); ++i) {
    x.entries[i].assign(agent.mdp.num_actions(x.deviation_states[i]), 0.0);
    const auto& ls = model.states[i];
    for (std::size_t k = 0; k < ls.allowed.size(); ++k) {
      x.entries[i][ls.allowed[k]] = z[i][k] > tol.clip ? z[i][k] : 0.0;
    }
  }
  sol.reach_value = occupancy_reach_local(model, z);
  sol.kl_value = occupancy_kl(model, z);
  sol.policy = policy_from_occupancy(agent.mdp, x, agent.reference, tol.clip);
  return sol;
}

}  // namespace

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::NearOptimal: return "near_optimal";
    case SolverStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

AgentSpec AgentSpec::make(Mdp mdp, StationaryPolicy reference, std::vector<StateIndex> targets,
                          double prior, double utility) {
  validate_mdp(mdp);
  validate_policy(mdp, reference);
  if (!(prior > 0.0 && prior < 1.0)) {
    throw Error(ErrorKind::InvalidParams, "prior must lie in (0,1)");
  }
  if (!(utility >= 0.0)) throw Error(ErrorKind::InvalidParams, "utility must be >= 0");
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  AgentSpec a;
  a.decomposition = decompose(mdp, reference, targets);
  a.mdp = std::move(mdp);
  a.reference = std::move(reference);
  a.targets = std::move(targets);
  a.prior = prior;
  a.utility = utility;
  return a;
}

SubproblemSolution reach_subproblem(const AgentSpec& agent, double k, const ToleranceSet& tol) {
  if (!(k >= 0.0)) throw Error(ErrorKind::InvalidParams, "KL bound must be >= 0");
  const RegularizedReachSolver solver(build_model(agent));
  const auto& model = solver.model();

  if (model.start == kNone || k == 0.0) {
    auto ref = solver.finish(0.0, solver.reference_weights());
    return to_solution(agent, model, occupancies(ref), tol);
  }

  auto warm = solver.reference_weights();
  LagrangianPoint lo, hi;  // KL(lo) > k >= KL(hi)
  bool have_lo = false;
  double lambda = 1.0;
  auto cur = solver.solve(lambda, warm);
  if (cur.kl <= k) {
    hi = cur;
    while (true) {
      lambda /= 8.0;
      if (lambda < kLambdaFloor) break;
      cur = solver.solve(lambda, hi.weights);
      if (cur.kl > k) {
        lo = std::move(cur);
        have_lo = true;
        break;
      }
      hi = std::move(cur);
    }
  } else {
    lo = cur;
    have_lo = true;
    while (true) {
      lambda *= 8.0;
      if (lambda > kLambdaCeiling) {
        // Numerically the reference itself: KL = 0 is feasible.
        auto ref = solver.finish(0.0, solver.reference_weights());
        auto sol = to_solution(agent, model, occupancies(ref), tol);
        sol.status = SolverStatus::NearOptimal;
        sol.multiplier = lambda;
        return sol;
      }
      cur = solver.solve(lambda, lo.weights);
      if (cur.kl <= k) {
        hi = std::move(cur);
        break;
      }
      lo = std::move(cur);
    }
  }

  auto dual_bound = [&](const LagrangianPoint& p) {
    return std::isfinite(k) ? p.reach + p.lambda * (k - p.kl) : kInf;
  };

  if (!have_lo) {
    // Constraint inactive down to the smallest multiplier.
    auto sol = to_solution(agent, model, occupancies(hi), tol);
    sol.multiplier = hi.lambda;
    sol.duality_gap = hi.lambda * (std::isfinite(k) ? k - hi.kl : std::max(1.0, hi.kl));
    sol.status = sol.duality_gap <= tol.gap ? SolverStatus::Optimal : SolverStatus::NearOptimal;
    return sol;
  }

  // Illinois-modified regula falsi on log(lambda) for KL(lambda) = k.
  double flo = lo.kl - k, fhi = hi.kl - k;
  int side = 0;
  double gap = std::min(dual_bound(lo), dual_bound(hi)) - hi.reach;
  for (int step = 0; step < kMaxMultiplierSteps && gap > tol.gap; ++step) {
    const double a = std::log(lo.lambda), b = std::log(hi.lambda);
    if (b - a < 1e-14) break;
    double c = b - fhi * (b - a) / (fhi - flo);
    const double margin = 1e-3 * (b - a);
    if (!(c > a + margin && c < b - margin)) c = 0.5 * (a + b);
    auto mid = solver.solve(std::exp(c), hi.weights);
    const double fm = mid.kl - k;
    if (fm > 0.0) {
      lo = std::move(mid);
      flo = fm;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = std::move(mid);
      fhi = fm;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
    gap = std::min(dual_bound(lo), dual_bound(hi)) - hi.reach;
  }

  Weights best = occupancies(hi);
  double best_reach = hi.reach;
  if (gap > tol.gap) {
    // KL jumps across the optimal multiplier: mix the bracketing occupancies
    // (flow constraints are linear, KL is convex along the segment).
    const Weights zlo = occupancies(lo), zhi = occupancies(hi);
    auto mixed = [&](double alpha) {
      Weights z = zhi;
      for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = 0; j < z[i].size(); ++j) {
          z[i][j] = alpha * zlo[i][j] + (1.0 - alpha) * zhi[i][j];
        }
      }
      return z;
    };
    double a0 = 0.0, a1 = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double am = 0.5 * (a0 + a1);
      if (occupancy_kl(model, mixed(am)) <= k) {
        a0 = am;
      } else {
        a1 = am;
      }
    }
    auto z = mixed(a0);
    const double r = occupancy_reach_local(model, z);
    if (r > best_reach) {
      best = std::move(z);
      best_reach = r;
    }
    gap = std::min(dual_bound(lo), dual_bound(hi)) - best_reach;
  }

  auto sol = to_solution(agent, model, best, tol);
  sol.multiplier = hi.lambda;
  sol.duality_gap = std::max(0.0, gap);
  sol.status = sol.duality_gap <= tol.gap ? SolverStatus::Optimal : SolverStatus::NearOptimal;
  if (solver_verbose()) {
    std::cerr << "[reach_subproblem] K=" << k << " nu=" << sol.reach_value
              << " kl=" << sol.kl_value << " lambda=" << sol.multiplier
              << " gap=" << sol.duality_gap << " status=" << to_string(sol.status) << "\n";
  }
  if (sol.duality_gap > 1e-4) {
    throw Error(ErrorKind::SolverFailure,
                "duality gap " + std::to_string(sol.duality_gap) + " at K=" + std::to_string(k));
  }
  return sol;
}

double policy_kl(const AgentSpec& agent, const StationaryPolicy& policy) {
  const auto x = occupancy_from_policy(agent.mdp, policy, agent.decomposition);
  return kl_occupancy(agent.mdp, x, agent.reference);
}

double policy_reach(const AgentSpec& agent, const StationaryPolicy& policy) {
  return reach_probability(agent.mdp, policy, agent.targets);
}

MaxReachPolicy max_reach_policy(const AgentSpec& agent) {
  const auto model = build_model(agent);
  const auto n = model.states.size();
  StationaryPolicy policy = agent.reference;

  if (n > 0 && model.start != kNone) {
    // Qualitative pass: states that can reach a target through allowed actions.
    std::vector<bool> positive(n, false);
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (positive[i]) continue;
        const auto& ls = model.states[i];
        for (std::size_t k = 0; k < ls.allowed.size() && !positive[i]; ++k) {
          for (std::size_t p = 0; p < ls.ref.size(); ++p) {
            if (ls.probs[k][p] <= 0.0) continue;
            const bool good = ls.succ_local[p] == kNone ? ls.succ_value[p] > 0.0
                                                        : positive[ls.succ_local[p]];
            if (good) {
              positive[i] = true;
              grew = true;
              break;
            }
          }
        }
      }
    }

    std::vector<double> v(n, 0.0);
    auto q_value = [&](const LocalState& ls, std::size_t k) {
      double q = 0.0;
      for (std::size_t p = 0; p < ls.ref.size(); ++p) {
        const double u = ls.succ_local[p] == kNone ? ls.succ_value[p] : v[ls.succ_local[p]];
        q += ls.probs[k][p] * u;
      }
      return q;
    };
    for (int iter = 0; iter < 10'000'000; ++iter) {
      double delta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!positive[i]) continue;
        const auto& ls = model.states[i];
        double best = 0.0;
        for (std::size_t k = 0; k < ls.allowed.size(); ++k) best = std::max(best, q_value(ls, k));
        delta = std::max(delta, best - v[i]);
        v[i] = best;
      }
      if (delta < 1e-15) break;
    }

    // Attractor extraction over optimal actions keeps the policy proper.
    std::vector<std::size_t> choice(n, kNone);
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!positive[i] || choice[i] != kNone) continue;
        const auto& ls = model.states[i];
        for (std::size_t k = 0; k < ls.allowed.size(); ++k) {
          if (q_value(ls, k) < v[i] - 1e-10) continue;
          bool progresses = false;
          for (std::size_t p = 0; p < ls.ref.size() && !progresses; ++p) {
            if (ls.probs[k][p] <= 0.0) continue;
            progresses = ls.succ_local[p] == kNone ? ls.succ_value[p] > 0.0
                                                   : choice[ls.succ_local[p]] != kNone;
          }
          if (progresses) {
            choice[i] = k;
            grew = true;
            break;
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!positive[i]) continue;
      const auto& ls = model.states[i];
      std::size_t k = choice[i];
      if (k == kNone) {
        k = 0;
        for (std::size_t j = 1; j < ls.allowed.size(); ++j) {
          if (q_value(ls, j) > q_value(ls, k)) k = j;
        }
      }
      policy.set_deterministic(ls.state, ls.allowed[k]);
    }
  }

  MaxReachPolicy out;
  out.reach = policy_reach(agent, policy);
  out.kl = policy_kl(agent, policy);
  out.policy = std::move(policy);
  return out;
}

KmaxResult compute_kmax(std::span<const AgentSpec> agents, double nu_a, const ToleranceSet& tol) {
  if (!(nu_a >= 0.0 && nu_a <= 1.0)) throw Error(ErrorKind::OutOfRange, "nu_A must lie in [0,1]");
  KmaxResult res;
  std::vector<double> reach;
  for (const auto& a : agents) {
    res.per_agent.push_back(max_reach_policy(a));
    reach.push_back(res.per_agent.back().reach);
  }
  res.disjunctive_reach = disjunctive_reach(reach);
  if (nu_a == 0.0) {
    res.feasible = true;
    res.k_max = 0.0;
    return res;
  }
  if (res.disjunctive_reach >= nu_a - tol.feasibility) {
    res.feasible = true;
    res.k_max = 0.0;
    for (const auto& p : res.per_agent) res.k_max = std::max(res.k_max, p.kl);
  } else {
    res.feasible = false;
    res.diagnosis =
        "maximal disjunctive reach without zero-probability reference transitions is " +
        std::to_string(res.disjunctive_reach) + " < nu_A = " + std::to_string(nu_a) +
        "; the agents must use state transitions with zero probability under the reference "
        "policies, which have infinite KL divergence";
  }
  return res;
}

StationaryPolicy mix_policies(const StationaryPolicy& high, const StationaryPolicy& reference,
                              double weight) {
  if (high.num_states() != reference.num_states()) {
    throw Error(ErrorKind::PolicyMismatch, "policies cover different state counts");
  }
  std::vector<std::vector<double>> dist(reference.num_states());
  for (StateIndex s = 0; s < reference.num_states(); ++s) {
    const auto h = high.row(s);
    const auto r = reference.row(s);
    if (h.size() != r.size()) throw Error(ErrorKind::PolicyMismatch, "action count mismatch");
    dist[s].resize(r.size());
    for (std::size_t a = 0; a < r.size(); ++a) dist[s][a] = weight * h[a] + (1.0 - weight) * r[a];
  }
  return StationaryPolicy(std::move(dist));
}

StationaryPolicy decoy_witness(const AgentSpec& agent, double k_hint, const ToleranceSet& tol) {
  const double own = max_reach_policy(agent).kl;
  const double k = 2.0 * std::max(k_hint, own);
  if (!(k > 0.0) || !std::isfinite(k)) return agent.reference;
  return reach_subproblem(agent, k, tol).policy;
}

KlMatchedPolicy policy_with_kl(const AgentSpec& agent, const StationaryPolicy& witness,
                               double target_kl, double tol) {
  if (!(target_kl >= 0.0)) throw Error(ErrorKind::InvalidParams, "target KL must be >= 0");
  if (target_kl <= tol) return {agent.reference, 0.0, 0.0};
  auto kl_at = [&](double w) { return policy_kl(agent, mix_policies(witness, agent.reference, w)); };
  const double top = kl_at(1.0);
  if (target_kl > top + tol) {
    throw Error(ErrorKind::TargetUnattainable, "target KL " + std::to_string(target_kl) +
                                                   " exceeds witness KL " + std::to_string(top));
  }
  if (std::abs(top - target_kl) <= tol) return {witness, 1.0, top};
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = kl_at(mid);
    if (std::abs(v - target_kl) <= tol) {
      return {mix_policies(witness, agent.reference, mid), mid, v};
    }
    if (v < target_kl) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double v = kl_at(hi);
  return {mix_policies(witness, agent.reference, hi), hi, v};
}

KlMatchedPolicy policy_with_kl(const AgentSpec& agent, double target_kl, double tol) {
  return policy_with_kl(agent, decoy_witness(agent, 0.0), target_kl, tol);
}

}  // namespace decept
