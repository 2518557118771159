#include <CLI11.hpp>
#include <iostream>

#include "decept/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deceptive policy synthesis for agent teams"};
  app.set_version_flag("--version", std::string(decept::kToolVersion));
  app.require_subcommand(1);

  std::string config, out;
  decept::CommandOptions opts;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  double eps = 0.0, capacity = 0.0;
  int iterations = 0;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* o = sub->add_option("--out", out, "output path");
    if (needs_out) o->required();
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate", "check a config and its MDPs");
  validate->add_option("--config", config)->required()->check(CLI::ExistingFile);

  auto* worst = app.add_subcommand("worst-case", "worst-case deceptive synthesis");
  common(worst, false);
  auto* eps_w = worst->add_option("--eps", eps, "bisection tolerance");

  auto* decoys = app.add_subcommand("decoys", "elimination-aware synthesis with decoys");
  common(decoys, false);
  auto* eps_d = decoys->add_option("--eps", eps, "bisection tolerance");
  decoys->add_option("--csv", opts.csv_path, "B_k table (default: <out>_bk.csv)");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo episodes of a result's policies");
  common(sim, false);
  sim->add_option("--result", opts.result_path, "result document")->required()->check(CLI::ExistingFile);
  auto* trials_o = sim->add_option("--trials", trials, "episodes (default 10000)");
  auto* seed_o = sim->add_option("--seed", seed, "RNG seed (overrides the config)");
  auto* cap_o = sim->add_option("--capacity", capacity, "elimination budget C");
  sim->add_option("--csv", opts.csv_path, "per-agent aggregates (default: <out>_agents.csv)");

  auto* ref = app.add_subcommand("refpol", "reference-policy synthesis for the supervisor");
  common(ref, false);
  auto* iter_o = ref->add_option("--iterations", iterations, "ascent iterations");
  ref->add_option("--csv", opts.csv_path, "objective trace (default: <out>_trace.csv)");

  auto* plot = app.add_subcommand("emit-plot-data", "B_k and per-node heat CSVs from a result");
  common(plot, true);
  plot->add_option("--result", opts.result_path, "result document")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (eps_w->count() + eps_d->count() > 0) opts.eps = eps;
  if (trials_o->count() > 0) opts.trials = trials;
  if (seed_o->count() > 0) opts.seed = seed;
  if (cap_o->count() > 0) opts.capacity = capacity;
  if (iter_o->count() > 0) opts.iterations = iterations;

  if (validate->parsed()) return decept::cmd_validate(config, std::cout, std::cerr);
  if (worst->parsed()) return decept::cmd_worst_case(config, out, opts, std::cout, std::cerr);
  if (decoys->parsed()) return decept::cmd_decoys(config, out, opts, std::cout, std::cerr);
  if (sim->parsed()) return decept::cmd_simulate(config, out, opts, std::cout, std::cerr);
  if (ref->parsed()) return decept::cmd_refpol(config, out, opts, std::cout, std::cerr);
  return decept::cmd_emit_plot_data(config, out, opts, std::cout, std::cerr);
}
