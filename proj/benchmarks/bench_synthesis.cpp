#include <benchmark/benchmark.h>

#include "decept/experiment.hpp"
#include "decept/occupancy_opt.hpp"
#include "decept/synthesis.hpp"
#include "fixtures.hpp"

namespace {

using namespace decept;

TeamProblem fig2_problem() {
  TeamProblem p;
  p.agents = fx::fig2_pair();
  p.nu_a = 0.5;
  return p;
}

const TeamProblem& delivery_problem() {
  static const auto cfg = load_config(DECEPT_SOURCE_DIR "/configs/delivery_2agents.json");
  return cfg.problem;
}

void BM_ReachSubproblemFig2(benchmark::State& state) {
  const auto agent = fx::agent1();
  for (auto _ : state) benchmark::DoNotOptimize(reach_subproblem(agent, 0.5).reach_value);
}
BENCHMARK(BM_ReachSubproblemFig2);

void BM_ReachSubproblemDelivery(benchmark::State& state) {
  const auto& agent = delivery_problem().agents.front();
  for (auto _ : state) benchmark::DoNotOptimize(reach_subproblem(agent, 0.5).reach_value);
}
BENCHMARK(BM_ReachSubproblemDelivery)->Unit(benchmark::kMillisecond);

void BM_WorstCaseFig2(benchmark::State& state) {
  const auto p = fig2_problem();
  for (auto _ : state) benchmark::DoNotOptimize(deceptive_synthesis(p).kl_bound);
}
BENCHMARK(BM_WorstCaseFig2)->Unit(benchmark::kMillisecond);

void BM_WorstCaseDelivery(benchmark::State& state) {
  const auto& p = delivery_problem();
  for (auto _ : state) benchmark::DoNotOptimize(deceptive_synthesis(p).kl_bound);
}
BENCHMARK(BM_WorstCaseDelivery)->Unit(benchmark::kMillisecond);

void BM_DecoysFig2(benchmark::State& state) {
  const auto p = fig2_problem();
  for (auto _ : state) benchmark::DoNotOptimize(deceptive_subset_selection(p).k_star);
}
BENCHMARK(BM_DecoysFig2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
