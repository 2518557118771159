#include "decept/experiment.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "decept/io.hpp"
#include "decept/simulate.hpp"
#include "json_io.hpp"

namespace decept {

namespace {

using detail::json;
using detail::number_at;
using detail::require;
using detail::string_at;

double opt_number(const json& j, const char* key, double fallback, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return number_at(*it, where + "/" + key);
}

void check_probability(double v, const std::string& where) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::OutOfRange, where + " must lie in [0,1]");
}

std::vector<StateIndex> state_list(const Mdp& mdp, const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, where + ": expected an array");
  std::vector<StateIndex> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(mdp.state_index(string_at(j[i], where + "/" + std::to_string(i))));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Rethrows errors with the JSON location prepended.
template <typename Fn>
auto located(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.kind(), where + ": " + msg);
  }
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

ExperimentConfig parse_config_json(const json& root) {
  ExperimentConfig cfg;
  if (!root.is_object()) throw Error(ErrorKind::ParseError, "config root must be an object");
  cfg.canonical_json = root.dump();
  cfg.hash = fnv1a_hex(cfg.canonical_json);
  cfg.mode = root.contains("mode") ? string_at(root["mode"], "/mode") : "worst-case";
  if (cfg.mode != "worst-case" && cfg.mode != "decoys" && cfg.mode != "simulate" &&
      cfg.mode != "refpol") {
    throw Error(ErrorKind::InvalidParams,
                "/mode: expected worst-case, decoys, simulate or refpol, got '" + cfg.mode + "'");
  }
  auto& pb = cfg.problem;
  pb.nu_a = number_at(require(root, "nu_A", ""), "/nu_A");
  check_probability(pb.nu_a, "/nu_A");
  pb.epsilon = opt_number(root, "epsilon", 1e-3, "");
  pb.gamma_prime = opt_number(root, "gamma_prime", 1.2, "");
  pb.m_r = static_cast<int>(opt_number(root, "m_r", 1, ""));
  pb.delta_margin = opt_number(root, "delta", 0.0, "");
  if (root.contains("k_max") && !root["k_max"].is_null()) {
    pb.k_max = number_at(root["k_max"], "/k_max");
  }
  if (root.contains("tolerances")) {
    const auto& t = root["tolerances"];
    pb.tol.gap = opt_number(t, "gap", pb.tol.gap, "/tolerances");
    pb.tol.feasibility = opt_number(t, "feasibility", pb.tol.feasibility, "/tolerances");
    pb.tol.clip = opt_number(t, "clip", pb.tol.clip, "/tolerances");
  }
  pb.threads = static_cast<unsigned>(opt_number(root, "threads", 1, ""));
  if (root.contains("seed") && !root["seed"].is_null()) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) {
      throw Error(ErrorKind::ParseError, "/seed: expected an integer");
    }
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  cfg.capacity = opt_number(root, "capacity", 0.0, "");
  if (cfg.capacity < 0.0) throw Error(ErrorKind::OutOfRange, "/capacity must be >= 0");

  std::vector<double> priors, utilities;
  if (root.contains("priors")) {
    for (std::size_t i = 0; i < root["priors"].size(); ++i) {
      priors.push_back(number_at(root["priors"][i], "/priors/" + std::to_string(i)));
    }
  }
  if (root.contains("utilities")) {
    for (std::size_t i = 0; i < root["utilities"].size(); ++i) {
      utilities.push_back(number_at(root["utilities"][i], "/utilities/" + std::to_string(i)));
    }
  }

  std::optional<Mdp> shared;
  if (root.contains("mdp")) {
    shared = located("/mdp", [&] {
      auto m = detail::mdp_from_json(root["mdp"], "/mdp");
      validate_mdp(m);
      return m;
    });
  }
  DeliveryParams dparams;
  if (root.contains("delivery")) {
    const auto& d = root["delivery"];
    cfg.graph = detail::graph_from_json(require(d, "graph", "/delivery"), "/delivery/graph");
    dparams.p_target = opt_number(d, "p_target", dparams.p_target, "/delivery");
    dparams.p_land = opt_number(d, "p_land", dparams.p_land, "/delivery");
    located("/delivery/graph", [&] {
      validate_graph(*cfg.graph);
      return 0;
    });
  }

  const json no_agents = json::array();
  const json& agents = root.contains("agents") ? root["agents"] : no_agents;
  if (!agents.is_array()) throw Error(ErrorKind::ParseError, "/agents: expected an array");
  const std::size_t n = cfg.graph ? cfg.graph->num_agents() : agents.size();
  if (n == 0) throw Error(ErrorKind::MissingField, "/agents");
  if (cfg.graph && !agents.empty() && agents.size() != n) {
    throw Error(ErrorKind::InvalidParams, "/agents: expected one entry per delivery agent");
  }
  if (!priors.empty() && priors.size() != n) {
    throw Error(ErrorKind::InvalidParams, "/priors: expected one value per agent");
  }
  if (!utilities.empty() && utilities.size() != n) {
    throw Error(ErrorKind::InvalidParams, "/utilities: expected one value per agent");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto where = "/agents/" + std::to_string(i);
    const json empty = json::object();
    const json& a = agents.empty() ? empty : agents[i];
    cfg.agent_names.push_back(a.contains("name") ? string_at(a["name"], where + "/name")
                                                 : std::to_string(i + 1));
    Mdp mdp;
    std::vector<StateIndex> targets, sup_targets;
    if (a.contains("mdp")) {
      mdp = located(where + "/mdp", [&] {
        auto m = detail::mdp_from_json(a["mdp"], where + "/mdp");
        validate_mdp(m);
        return m;
      });
    } else if (cfg.graph) {
      auto inst = located("/delivery", [&] { return build_delivery_mdp(*cfg.graph, dparams, i); });
      mdp = std::move(inst.mdp);
      targets = inst.agent_targets;
      sup_targets = inst.supervisor_targets;
    } else if (shared) {
      mdp = *shared;
    } else {
      throw Error(ErrorKind::MissingField, where + "/mdp");
    }
    if (a.contains("targets")) {
      targets = located(where + "/targets", [&] { return state_list(mdp, a["targets"], where + "/targets"); });
    }
    if (targets.empty()) throw Error(ErrorKind::MissingField, where + "/targets");
    if (a.contains("supervisor_targets")) {
      sup_targets = located(where + "/supervisor_targets", [&] {
        return state_list(mdp, a["supervisor_targets"], where + "/supervisor_targets");
      });
    }

    StationaryPolicy ref;
    const json ref_default = cfg.graph ? json("shortest_path") : json(nullptr);
    const json& r = a.contains("reference") ? a["reference"] : ref_default;
    if (r.is_null()) throw Error(ErrorKind::MissingField, where + "/reference");
    if (r.is_string()) {
      if (r.get<std::string>() != "shortest_path" || !cfg.graph) {
        throw Error(ErrorKind::InvalidParams,
                    where + "/reference: \"shortest_path\" needs a delivery section");
      }
      ref = located(where + "/reference", [&] { return shortest_path_reference(mdp, *cfg.graph, i); });
    } else {
      ref = located(where + "/reference",
                    [&] { return detail::policy_from_json(mdp, r, where + "/reference"); });
    }

    const double prior = opt_number(a, "prior", priors.empty() ? 0.5 : priors[i], where);
    const double utility = opt_number(a, "utility", utilities.empty() ? 1.0 : utilities[i], where);
    pb.agents.push_back(located(where, [&] {
      return AgentSpec::make(std::move(mdp), std::move(ref), targets, prior, utility);
    }));
    cfg.supervisor_targets.push_back(std::move(sup_targets));
  }
  validate_problem(pb);

  if (root.contains("supervisor_task")) {
    const auto& t = root["supervisor_task"];
    const std::string w = "/supervisor_task";
    SupervisorTask task;
    const auto& th = require(t, "thresholds", w);
    if (th.size() != n) throw Error(ErrorKind::InvalidParams, w + "/thresholds: one per agent");
    for (std::size_t i = 0; i < n; ++i) {
      task.thresholds.push_back(number_at(th[i], w + "/thresholds/" + std::to_string(i)));
      check_probability(task.thresholds.back(), w + "/thresholds/" + std::to_string(i));
    }
    if (t.contains("targets")) {
      const auto& tg = t["targets"];
      if (tg.size() != n) throw Error(ErrorKind::InvalidParams, w + "/targets: one list per agent");
      for (std::size_t i = 0; i < n; ++i) {
        const auto wi = w + "/targets/" + std::to_string(i);
        cfg.supervisor_targets[i] =
            located(wi, [&] { return state_list(pb.agents[i].mdp, tg[i], wi); });
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (cfg.supervisor_targets[i].empty()) {
        throw Error(ErrorKind::MissingField, w + "/targets/" + std::to_string(i));
      }
    }
    task.supervisor_targets = cfg.supervisor_targets;
    task.iterations = static_cast<int>(opt_number(t, "iterations", task.iterations, w));
    task.step_size = opt_number(t, "step_size", task.step_size, w);
    task.temperature = opt_number(t, "temperature", task.temperature, w);
    task.fd_step = opt_number(t, "fd_step", task.fd_step, w);
    task.smoothing = opt_number(t, "smoothing", task.smoothing, w);
    cfg.refpol_inner_epsilon = opt_number(t, "inner_epsilon", cfg.refpol_inner_epsilon, w);
    if (!(task.temperature > 0.0) || !(task.fd_step > 0.0) || task.iterations < 0) {
      throw Error(ErrorKind::InvalidParams, w + ": need temperature > 0, fd_step > 0, iterations >= 0");
    }
    cfg.supervisor_task = std::move(task);
  }
  return cfg;
}

json base_document(const ExperimentConfig& cfg, const char* mode) {
  json doc;
  doc["tool"] = "decept";
  doc["version"] = kToolVersion;
  doc["mode"] = mode;
  doc["config_hash"] = cfg.hash;
  doc["config"] = json::parse(cfg.canonical_json);
  return doc;
}

void apply_options(ExperimentConfig& cfg, const CommandOptions& opts) {
  if (opts.eps) {
    if (!(*opts.eps > 0.0)) throw Error(ErrorKind::InvalidParams, "--eps must be > 0");
    cfg.problem.epsilon = *opts.eps;
  }
  cfg.problem.threads = std::max(1u, opts.threads);
}

int report_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  return exit_code_for(e.kind());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

void print_agent_table(std::ostream& out, const ExperimentConfig& cfg,
                       const std::vector<double>& kl, const std::vector<double>& reach) {
  out << std::left << std::setw(12) << "agent" << std::setw(14) << "KL" << "reach\n";
  for (std::size_t i = 0; i < kl.size(); ++i) {
    out << std::setw(12) << cfg.agent_names[i] << std::setw(14) << fmt(kl[i]) << fmt(reach[i])
        << "\n";
  }
}

std::string bk_csv(const json& table) {
  std::ostringstream ss;
  ss << "k,B_k,K_k,Fail_k\n";
  ss << std::setprecision(17);
  for (const auto& row : table) {
    ss << row["k"].get<std::size_t>() << ",";
    if (!row["B_k"].is_null()) ss << row["B_k"].get<double>();
    ss << "," << row["K_k"].get<double>() << "," << (row["fail"].get<bool>() ? 1 : 0) << "\n";
  }
  return ss.str();
}

// Expected visits per state and absorption probabilities of the chain.
struct ChainFlows {
  std::vector<double> visits;
  std::vector<double> absorbed;
};

ChainFlows chain_flows(const Mdp& mdp, const StationaryPolicy& policy) {
  const auto chain = induced_chain(mdp, policy);
  const auto n = chain.num_states();
  std::vector<bool> absorbing(n);
  for (StateIndex s = 0; s < n; ++s) absorbing[s] = chain.prob(s, s) >= 1.0;
  std::vector<Eigen::Triplet<double>> trip;
  for (StateIndex s = 0; s < n; ++s) {
    trip.emplace_back(s, s, 1.0);
    if (absorbing[s]) continue;
    for (const auto& o : chain.rows[s]) {
      if (!absorbing[o.next]) trip.emplace_back(o.next, s, -o.prob);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorKind::InfiniteOccupancy, "policy never leaves a non-absorbing class");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  ChainFlows f;
  f.visits.assign(n, 0.0);
  f.absorbed.assign(n, 0.0);
  if (absorbing[mdp.initial()]) {
    f.absorbed[mdp.initial()] = 1.0;
    return f;
  }
  rhs[static_cast<Eigen::Index>(mdp.initial())] = 1.0;
  const Eigen::VectorXd y = lu.solve(rhs);
  for (StateIndex s = 0; s < n; ++s) {
    if (absorbing[s]) continue;
    f.visits[s] = std::max(0.0, y[static_cast<Eigen::Index>(s)]);
    for (const auto& o : chain.rows[s]) {
      if (absorbing[o.next]) f.absorbed[o.next] += f.visits[s] * o.prob;
    }
  }
  return f;
}

std::string heat_csv(const ExperimentConfig& cfg, const std::vector<StationaryPolicy>& policies) {
  std::ostringstream ss;
  ss << "agent,node,flight_occupancy,landed_flow\n" << std::setprecision(12);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto& mdp = cfg.problem.agents[i].mdp;
    const auto flows = chain_flows(mdp, policies[i]);
    for (const auto& v : cfg.graph->nodes) {
      const auto fs = mdp.state_index(flight_state(v));
      const auto ls = mdp.state_index(landed_state(v));
      ss << cfg.agent_names[i] << "," << v << "," << flows.visits[fs] << "," << flows.absorbed[ls]
         << "\n";
    }
  }
  return ss.str();
}

std::vector<StationaryPolicy> policies_from_result(const ExperimentConfig& cfg, const json& doc,
                                                   const char* field) {
  const auto& agents = require(doc, "agents", "");
  if (agents.size() != cfg.problem.agents.size()) {
    throw Error(ErrorKind::InvalidParams, "result has " + std::to_string(agents.size()) +
                                              " agents, config has " +
                                              std::to_string(cfg.problem.agents.size()));
  }
  std::vector<StationaryPolicy> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto w = "/agents/" + std::to_string(i);
    out.push_back(detail::policy_from_json(cfg.problem.agents[i].mdp, require(agents[i], field, w),
                                           w + "/" + field));
  }
  return out;
}

json load_result(const ExperimentConfig& cfg, const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::MissingField, "--result");
  const auto doc = detail::parse_text(read_file(path), path);
  if (doc.value("config_hash", std::string()) != cfg.hash) {
    throw Error(ErrorKind::InvalidParams, path + " was produced from a different config");
  }
  return doc;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  return parse_config_json(detail::parse_text(text, origin));
}

ExperimentConfig load_config(const std::string& path) {
  try {
    return parse_config(read_file(path), path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::Io) throw;
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.kind(), path + ": " + msg);
  }
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Infeasible:
    case ErrorKind::UpperBoundNotFeasible:
    case ErrorKind::AllFailed:
    case ErrorKind::InfeasibleSupervisorTask:
    case ErrorKind::TargetUnattainable:
      return 2;
    case ErrorKind::SolverFailure:
    case ErrorKind::InfiniteOccupancy:
    case ErrorKind::InfiniteLLR:
    case ErrorKind::TruncatedPath:
    case ErrorKind::Io:
      return 3;
    default:
      return 1;
  }
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  auto stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load_config(config_path);
    out << "valid: " << cfg.problem.agents.size() << " agents, nu_A = " << cfg.problem.nu_a
        << ", config hash " << cfg.hash << "\n";
    for (std::size_t i = 0; i < cfg.problem.agents.size(); ++i) {
      const auto& a = cfg.problem.agents[i];
      out << "  agent " << cfg.agent_names[i] << ": " << a.mdp.num_states() << " states, |S_d| = "
          << a.decomposition.deviation_states.size() << ", reference reach "
          << fmt(policy_reach(a, a.reference)) << "\n";
    }
    return 0;
  });
}

int cmd_worst_case(const std::string& config_path, const std::string& out_path,
                   const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_config(config_path);
    apply_options(cfg, opts);
    const auto res = deceptive_synthesis(cfg.problem);
    auto doc = base_document(cfg, "worst-case");
    doc["k_bar"] = res.kl_bound;
    doc["k_max"] = res.k_max;
    doc["epsilon"] = cfg.problem.epsilon;
    doc["disjunctive_reach"] = res.disjunctive_reach;
    doc["bisection_iterations"] = res.iterations;
    doc["subproblem_solves"] = res.subproblem_solves;
    json agents = json::array();
    for (std::size_t i = 0; i < res.policies.size(); ++i) {
      const auto& a = cfg.problem.agents[i];
      agents.push_back({{"name", cfg.agent_names[i]},
                        {"kl", res.per_agent_kl[i]},
                        {"reach", res.per_agent_reach[i]},
                        {"policy", detail::policy_json(a.mdp, res.policies[i])}});
    }
    doc["agents"] = std::move(agents);
    if (!out_path.empty()) write_file_atomic(out_path, doc.dump(2) + "\n");
    print_agent_table(out, cfg, res.per_agent_kl, res.per_agent_reach);
    out << "K_bar = " << fmt(res.kl_bound) << "  (K_max = " << fmt(res.k_max)
        << ", " << res.iterations << " bisection steps)\n";
    out << "disjunctive reach = " << fmt(res.disjunctive_reach) << " (nu_A = " << cfg.problem.nu_a
        << ")\n";
    return 0;
  });
}

int cmd_decoys(const std::string& config_path, const std::string& out_path,
               const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_config(config_path);
    apply_options(cfg, opts);
    const auto res = deceptive_subset_selection(cfg.problem);
    auto doc = base_document(cfg, "decoys");
    json table = json::array();
    for (const auto& row : res.b_table) {
      json r = {{"k", row.k},
                {"B_k", number_or_null(row.b)},
                {"K_k", row.kl_bound},
                {"fail", row.fail},
                {"decoys", row.decoys},
                {"kept_reach", row.kept_reach}};
      if (!row.fail) {
        r["agent_kl"] = row.agent_kl;
        r["agent_reach"] = row.agent_reach;
        r["agent_belief_proxy"] = row.agent_proxy;
      }
      table.push_back(std::move(r));
    }
    doc["b_table"] = table;
    doc["k_star"] = res.k_star;
    doc["decoy_set"] = res.decoy_set;
    doc["non_decoy_kl"] = res.non_decoy_kl;
    doc["decoy_kl"] = res.decoy_kl;
    doc["k_max"] = res.k_max;
    doc["k_max_decoys"] = res.k_max_decoys;
    doc["critical_capacity"] = res.critical_capacity;
    doc["epsilon"] = cfg.problem.epsilon;
    const auto& best = res.b_table[res.k_star];
    json agents = json::array();
    std::vector<double> reach;
    for (std::size_t i = 0; i < res.policies.size(); ++i) {
      const bool decoy = std::binary_search(res.decoy_set.begin(), res.decoy_set.end(), i);
      agents.push_back({{"name", cfg.agent_names[i]},
                        {"decoy", decoy},
                        {"kl", best.agent_kl[i]},
                        {"reach", best.agent_reach[i]},
                        {"belief_proxy", best.agent_proxy[i]},
                        {"policy", detail::policy_json(cfg.problem.agents[i].mdp, res.policies[i])}});
    }
    doc["agents"] = std::move(agents);
    if (!out_path.empty()) {
      write_file_atomic(out_path, doc.dump(2) + "\n");
      const auto csv = opts.csv_path.empty() ? sibling_path(out_path, "_bk.csv") : opts.csv_path;
      write_file_atomic(csv, bk_csv(table));
    }
    out << "k  B_k          K_k          fail  decoys\n";
    for (const auto& row : res.b_table) {
      out << std::left << std::setw(3) << row.k << std::setw(13)
          << (row.fail ? std::string("-") : fmt(row.b)) << std::setw(13) << fmt(row.kl_bound)
          << std::setw(6) << (row.fail ? "yes" : "no");
      for (auto d : row.decoys) out << cfg.agent_names[d] << " ";
      out << "\n";
    }
    out << "k* = " << res.k_star << ", critical capacity " << fmt(res.critical_capacity) << "\n";
    return 0;
  });
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_config(config_path);
    apply_options(cfg, opts);
    const auto seed = opts.seed ? opts.seed : cfg.seed;
    if (!seed) throw Error(ErrorKind::SeedMissing, "pass --seed or set \"seed\" in the config");
    const auto doc = load_result(cfg, opts.result_path);
    const auto policies = policies_from_result(cfg, doc, "policy");
    const double capacity = opts.capacity.value_or(cfg.capacity);
    const std::size_t trials = opts.trials.value_or(10000);
    const EpisodeSimulator sim(cfg.problem, policies);
    const auto sum = simulate_episodes(sim, capacity, trials, *seed, cfg.problem.threads);

    json summary = base_document(cfg, "simulate");
    summary["result_config_hash"] = doc["config_hash"];
    summary["trials"] = trials;
    summary["seed"] = *seed;
    summary["capacity"] = capacity;
    summary["successes"] = sum.successes;
    summary["success_rate"] = sum.success_rate;
    summary["success_stderr"] = sum.success_stderr;
    summary["truncated_paths"] = sum.truncated_paths;
    summary["mean_belief"] = sum.mean_belief;
    summary["elimination_frequency"] = sum.elimination_frequency;
    summary["belief_histogram"] = sum.belief_histogram;

    std::ostringstream csv;
    csv << "agent,mean_belief,elimination_frequency";
    for (int b = 0; b < 10; ++b) csv << ",belief_bin_" << b;
    csv << "\n" << std::setprecision(12);
    if (trials > 0) {
      for (std::size_t i = 0; i < sim.num_agents(); ++i) {
        csv << cfg.agent_names[i] << "," << sum.mean_belief[i] << ","
            << sum.elimination_frequency[i];
        for (auto c : sum.belief_histogram[i]) csv << "," << c;
        csv << "\n";
      }
    }
    if (!out_path.empty()) {
      write_file_atomic(out_path, summary.dump(2) + "\n");
      write_file_atomic(opts.csv_path.empty() ? sibling_path(out_path, "_agents.csv") : opts.csv_path,
                        csv.str());
    }
    out << "trials " << trials << ", capacity " << capacity << ": success rate "
        << fmt(sum.success_rate) << " +- " << fmt(sum.success_stderr) << "\n";
    if (sum.truncated_paths > 0) out << "truncated paths: " << sum.truncated_paths << "\n";
    return 0;
  });
}

int cmd_refpol(const std::string& config_path, const std::string& out_path,
               const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_config(config_path);
    apply_options(cfg, opts);
    if (!cfg.supervisor_task) throw Error(ErrorKind::MissingField, "/supervisor_task");
    auto task = *cfg.supervisor_task;
    if (opts.iterations) task.iterations = *opts.iterations;
    const auto res = synthesize_reference(cfg.problem.agents, task, cfg.problem.nu_a,
                                          cfg.refpol_inner_epsilon, cfg.problem.threads);
    auto doc = base_document(cfg, "refpol");
    doc["objective"] = number_or_null(res.objective);
    doc["initial_objective"] = number_or_null(res.initial_objective);
    doc["worst_kl"] = number_or_null(res.worst_kl);
    doc["unbounded"] = res.unbounded;
    json trace = json::array();
    for (const auto& t : res.trace) {
      trace.push_back({{"iteration", t.iteration},
                       {"objective", number_or_null(t.objective)},
                       {"worst_kl", number_or_null(t.worst_kl)},
                       {"accepted", t.accepted},
                       {"step", t.step}});
    }
    doc["trace"] = trace;
    json agents = json::array();
    for (std::size_t i = 0; i < res.references.size(); ++i) {
      agents.push_back({{"name", cfg.agent_names[i]},
                        {"supervisor_reach", res.supervisor_reach[i]},
                        {"reference", detail::policy_json(cfg.problem.agents[i].mdp, res.references[i])}});
    }
    doc["agents"] = std::move(agents);
    if (!out_path.empty()) {
      write_file_atomic(out_path, doc.dump(2) + "\n");
      std::ostringstream csv;
      csv << "iteration,objective,worst_kl,accepted,step\n" << std::setprecision(12);
      for (const auto& t : res.trace) {
        csv << t.iteration << "," << t.objective << "," << t.worst_kl << ","
            << (t.accepted ? 1 : 0) << "," << t.step << "\n";
      }
      write_file_atomic(opts.csv_path.empty() ? sibling_path(out_path, "_trace.csv") : opts.csv_path,
                        csv.str());
    }
    if (res.unbounded) {
      out << "no deceptive policy reaches nu_A under these references: deceptive cost is unbounded\n";
    }
    out << "objective " << fmt(res.initial_objective) << " -> " << fmt(res.objective) << " over "
        << res.trace.size() - 1 << " iterations\n";
    for (std::size_t i = 0; i < res.references.size(); ++i) {
      out << "  agent " << cfg.agent_names[i] << ": supervisor reach "
          << fmt(res.supervisor_reach[i]) << " (threshold " << task.thresholds[i] << ")\n";
    }
    return 0;
  });
}

int cmd_emit_plot_data(const std::string& config_path, const std::string& out_path,
                       const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load_config(config_path);
    const auto doc = load_result(cfg, opts.result_path);
    if (out_path.empty()) throw Error(ErrorKind::MissingField, "--out");
    bool wrote = false;
    if (doc.contains("b_table")) {
      write_file_atomic(sibling_path(out_path, "_bk.csv"), bk_csv(doc["b_table"]));
      out << "wrote " << sibling_path(out_path, "_bk.csv") << "\n";
      wrote = true;
    }
    if (cfg.graph) {
      const char* field = doc["agents"].at(0).contains("policy") ? "policy" : "reference";
      write_file_atomic(out_path, heat_csv(cfg, policies_from_result(cfg, doc, field)));
      out << "wrote " << out_path << " (" << field << " heat data)\n";
      wrote = true;
    }
    if (!wrote) out << "nothing to emit: no B_k table and no delivery graph\n";
    return 0;
  });
}

double result_metric_deviation(const ExperimentConfig& cfg, const std::string& result_json) {
  const auto doc = detail::parse_text(result_json, "<result>");
  const auto& agents = require(doc, "agents", "");
  double dev = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!agents[i].contains("policy")) continue;
    const auto& spec = cfg.problem.agents.at(i);
    const auto pol = detail::policy_from_json(spec.mdp, agents[i]["policy"], "");
    dev = std::max(dev, std::abs(policy_kl(spec, pol) - agents[i]["kl"].get<double>()));
    dev = std::max(dev, std::abs(policy_reach(spec, pol) - agents[i]["reach"].get<double>()));
  }
  return dev;
}

}  // namespace decept
