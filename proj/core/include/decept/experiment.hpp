#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "decept/delivery.hpp"
#include "decept/error.hpp"
#include "decept/refpol.hpp"
#include "decept/synthesis.hpp"

namespace decept {

inline constexpr const char* kToolVersion = "0.1.0";

/// Parsed and validated experiment configuration.
struct ExperimentConfig {
  std::string mode;
  TeamProblem problem;
  std::vector<std::string> agent_names;
  std::vector<std::vector<StateIndex>> supervisor_targets;  // empty when not given
  std::optional<DeliveryGraph> graph;
  std::optional<std::uint64_t> seed;
  double capacity = 0.0;
  std::optional<SupervisorTask> supervisor_task;
  double refpol_inner_epsilon = 1e-8;
  std::string canonical_json;  // normalized config, embedded in results
  std::string hash;            // fnv1a_hex(canonical_json)
};

/// Throws Error with the first problem found; JSON paths locate it.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// 0 success, 1 validation, 2 infeasible, 3 solver failure.
int exit_code_for(ErrorKind kind);

struct CommandOptions {
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> capacity;
  std::optional<int> iterations;
  unsigned threads = 1;
  std::string result_path;
  std::string csv_path;  // derived from the output path when empty
};

/// Each command prints a summary to `out`, diagnostics to `err`, and
/// returns the process exit code.
int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_worst_case(const std::string& config_path, const std::string& out_path,
                   const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_decoys(const std::string& config_path, const std::string& out_path,
               const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_refpol(const std::string& config_path, const std::string& out_path,
               const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Writes the B_k table and/or per-node heat data of a result document.
int cmd_emit_plot_data(const std::string& config_path, const std::string& out_path,
                       const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Largest gap between the KL / reach values recorded in a result document
/// and those recomputed from its embedded policies.
double result_metric_deviation(const ExperimentConfig& config, const std::string& result_json);

/// Sibling path: "dir/run.json" + "_bk.csv" -> "dir/run_bk.csv".
std::string sibling_path(const std::string& path, const std::string& suffix);

}  // namespace decept
