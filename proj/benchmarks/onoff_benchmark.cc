//
// Copyright 2026 The ON-OFF Privacy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <random>
#include <vector>

#include "benchmark/benchmark.h"
#include "onoff/bounds.h"
#include "onoff/lp.h"
#include "onoff/markov.h"
#include "onoff/scheme.h"
#include "onoff/sim.h"

namespace onoff {
namespace {

TransitionMatrix RandomChain(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (auto& row : rows) {
    double total = 0.0;
    for (double& v : row) total += v = dist(rng);
    for (double& v : row) v /= total;
  }
  return TransitionMatrix::Create(rows).value();
}

void BM_ConditionalTable(benchmark::State& state) {
  const TransitionMatrix p = RandomChain(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(BuildConditionalTable(p, 5));
  }
}
BENCHMARK(BM_ConditionalTable)->DenseRange(3, 8);

void BM_RateBounds(benchmark::State& state) {
  const TransitionMatrix p = RandomChain(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(RateBoundsForChain(p, 3));
  }
}
BENCHMARK(BM_RateBounds)->DenseRange(3, 8);

void BM_BuildScheme(benchmark::State& state) {
  const TransitionMatrix p = RandomChain(static_cast<int>(state.range(0)), 3);
  const ConditionalTable cond = BuildConditionalTable(p, 2).value();
  const ThetaProfile profile = ComputeThetaProfile(cond).value();
  for (auto _ : state) {
    benchmark::DoNotOptimize(BuildScheme(profile, cond));
  }
}
BENCHMARK(BM_BuildScheme)->DenseRange(3, 8);

void BM_SolveSimplex(benchmark::State& state) {
  const TransitionMatrix p = RandomChain(static_cast<int>(state.range(0)), 4);
  const LpProblem problem =
      FormulateLp(BuildConditionalTable(p, 1).value()).value();
  for (auto _ : state) {
    benchmark::DoNotOptimize(SolveSimplex(problem));
  }
}
BENCHMARK(BM_SolveSimplex)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SimulateSteps(benchmark::State& state) {
  SimConfig cfg(SymmetricChain(3, 0.6).value());
  cfg.schedule = PrivacySchedule::Periodic(4).value();
  cfg.horizon = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(RunSimulation(cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateSteps)->Arg(1000)->Arg(100000)
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace onoff

BENCHMARK_MAIN();
