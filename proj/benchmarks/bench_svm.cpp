#include <benchmark/benchmark.h>

#include <vector>

#include "pmuopt/random.hpp"
#include "pmuopt/svm.hpp"

using namespace pmuopt;

namespace {

struct Blobs {
  RowMatrix x;
  std::vector<int> labels;
};

Blobs blobs(std::size_t n, int classes, Eigen::Index dims) {
  Rng rng(5);
  Blobs b;
  b.x.resize(static_cast<Eigen::Index>(n), dims);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
    b.labels.push_back(classes == 2 ? 2 * c - 1 : c);
    for (Eigen::Index k = 0; k < dims; ++k) b.x(static_cast<Eigen::Index>(i), k) = c * 0.3 * (k % 3 + 1) + rng.normal();
  }
  return b;
}

void BM_TrainBinary(benchmark::State& state) {
  const Blobs b = blobs(static_cast<std::size_t>(state.range(0)), 2, 12);
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.gamma = 0.1;
  cfg.selection = state.range(1) ? WorkingSet::SecondOrder : WorkingSet::MaxViolatingPair;
  for (auto _ : state) benchmark::DoNotOptimize(train_binary(b.x, b.labels, cfg).bias);
}
BENCHMARK(BM_TrainBinary)->ArgsProduct({{250, 1000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_CrossValidation(benchmark::State& state) {
  const Blobs b = blobs(static_cast<std::size_t>(state.range(0)), 11, 18);
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.gamma = 0.05;
  const CvConfig cv;
  for (auto _ : state) benchmark::DoNotOptimize(cv_accuracy(b.x, b.labels, cfg, cv));
}
BENCHMARK(BM_CrossValidation)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);

void BM_RbfGram(benchmark::State& state) {
  const Blobs b = blobs(static_cast<std::size_t>(state.range(0)), 2, 36);
  for (auto _ : state) benchmark::DoNotOptimize(rbf_gram(b.x, 0.1).sum());
}
BENCHMARK(BM_RbfGram)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

}  // namespace
