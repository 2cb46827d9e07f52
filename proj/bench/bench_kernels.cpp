#include <benchmark/benchmark.h>

#include "rfrl/kernels.hpp"

namespace {

const std::vector<rfrl::iq::Assignment> kAssignments{{"a", 2, rfrl::iq::Modulation::Tone},
                                                     {"b", 7, rfrl::iq::Modulation::Ldapm}};

void BM_DetectSerial(benchmark::State& state) {
  const rfrl::iq::IQConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rfrl::kernels::detect_batch_serial(kAssignments, 10, cfg, 1, state.range(0)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DetectParallel(benchmark::State& state) {
  const rfrl::iq::IQConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rfrl::kernels::detect_batch_parallel(kAssignments, 10, cfg, 1, state.range(0)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

const rfrl::ScenarioSpec& scenario5() {
  static const auto spec = rfrl::load_scenario(std::string(RFRL_SCENARIO_DIR) + "/scenario5.json");
  return spec;
}

void BM_RolloutsSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(rfrl::kernels::random_rollouts_serial(scenario5(), 1, state.range(0)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RolloutsParallel(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(rfrl::kernels::random_rollouts_parallel(scenario5(), 1, state.range(0)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_DetectSerial)->Arg(1000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectParallel)->Arg(1000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RolloutsSerial)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RolloutsParallel)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
