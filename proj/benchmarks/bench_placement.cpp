#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "pmuopt/faultsim.hpp"
#include "pmuopt/features.hpp"
#include "pmuopt/feeder.hpp"
#include "pmuopt/placement.hpp"

using namespace pmuopt;

namespace {

const FeederModel& feeder34() {
  static const FeederModel m = load_feeder(std::filesystem::path(PMUOPT_DATA_DIR) / "feeder34.json");
  return m;
}

void BM_AdmittanceScore(benchmark::State& state) {
  const PositiveSequenceYbus yb = positive_sequence_ybus(feeder34());
  std::vector<std::size_t> monitored(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < monitored.size(); ++i) monitored[i] = i * 3 % yb.buses.size();
  std::sort(monitored.begin(), monitored.end());
  monitored.erase(std::unique(monitored.begin(), monitored.end()), monitored.end());
  for (auto _ : state) benchmark::DoNotOptimize(admittance_score(yb.y, monitored));
}
BENCHMARK(BM_AdmittanceScore)->Arg(2)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_CorrelationSearch(benchmark::State& state) {
  const FeederModel& m = feeder34();
  ScenarioConfig sc = ScenarioConfig::placement_defaults();
  sc.hours = {0};
  const auto records = generate_placement_dataset(m, sc);
  const FeatureMatrix data =
      build_feature_matrix(records, full_layout(*records.front().index, records.front().substation));
  PlacementConfig cfg;
  cfg.scorer = ScorerKind::CorrelationDiversity;
  cfg.budget = 8;
  const auto scorer = make_scorer(cfg, data, nullptr);
  const BusGraph topo = BusGraph::from_model(m);
  const auto buses = m.bus_ids();
  for (auto _ : state) benchmark::DoNotOptimize(fsnr(*scorer, topo, m.substation(), buses, cfg).selected.size());
}
BENCHMARK(BM_CorrelationSearch)->Unit(benchmark::kMillisecond);

}  // namespace
