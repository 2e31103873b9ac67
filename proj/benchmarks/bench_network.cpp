#include <benchmark/benchmark.h>

#include "pmuopt/faultsim.hpp"
#include "pmuopt/feeder.hpp"
#include "pmuopt/network.hpp"

using namespace pmuopt;

namespace {

const FeederModel& feeder34() {
  static const FeederModel m = load_feeder(std::filesystem::path(PMUOPT_DATA_DIR) / "feeder34.json");
  return m;
}

void BM_AssembleAndSolve(benchmark::State& state) {
  const FeederModel& m = feeder34();
  for (auto _ : state) {
    const NetworkSystem sys = assemble_network(m, 12);
    benchmark::DoNotOptimize(solve(sys).norm());
  }
}
BENCHMARK(BM_AssembleAndSolve)->Unit(benchmark::kMicrosecond);

void BM_SimulateFault(benchmark::State& state) {
  const FaultSimulator sim(feeder34());
  const auto lines = sim.model().line_ids();
  FaultSpec spec;
  spec.kind = FaultType::BCG;
  std::size_t k = 0;
  for (auto _ : state) {
    spec.line = lines[k++ % lines.size()];
    benchmark::DoNotOptimize(sim.simulate(spec).v_fault.norm());
  }
}
BENCHMARK(BM_SimulateFault)->Unit(benchmark::kMicrosecond);

void BM_PlacementDataset(benchmark::State& state) {
  ScenarioConfig cfg = ScenarioConfig::placement_defaults();
  cfg.hours = {0};
  for (auto _ : state) benchmark::DoNotOptimize(generate_placement_dataset(feeder34(), cfg).size());
}
BENCHMARK(BM_PlacementDataset)->Unit(benchmark::kMillisecond);

}  // namespace
