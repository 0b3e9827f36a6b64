// Copyright 2026 The RMFS Planner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <memory>

#include <benchmark/benchmark.h>

#include "rmfs/heuristics.hpp"
#include "rmfs/htan.hpp"
#include "rmfs/instance.hpp"
#include "rmfs/training.hpp"

namespace {

using namespace rmfs;

std::shared_ptr<const Instance> instance_for(const char* id, std::uint64_t seed) {
  return make_instances(scale_preset(id), 1, seed).front();
}

void BM_StnnEpisode(benchmark::State& state) {
  auto inst = instance_for("F13", 3);
  HeuristicPolicy stnn(HeuristicKind::kStnn);
  Rng rng(1);
  for (auto _ : state) {
    EpisodeResult r = run_episode(inst, stnn, rng);
    benchmark::DoNotOptimize(r.makespan);
  }
}
BENCHMARK(BM_StnnEpisode)->Unit(benchmark::kMicrosecond);

void BM_EnvStep(benchmark::State& state) {
  auto inst = instance_for("U5", 3);
  Rng rng(2);
  EnvState s = EnvState::reset(inst);
  long steps = 0;
  for (auto _ : state) {
    if (s.terminal()) {
      state.PauseTiming();
      s = EnvState::reset(inst);
      state.ResumeTiming();
    }
    const RobotId l = random_robot(s, rng);
    s.apply_robot_option(l);
    s.apply_node_option(random_node(s, l, rng));
    ++steps;
  }
  state.SetItemsProcessed(steps);
}
BENCHMARK(BM_EnvStep);

void BM_HtanJointOption(benchmark::State& state) {
  auto inst = instance_for(state.range(0) == 3 ? "U3" : "U7", 5);
  HtanPolicy policy(Htan::create(HtanConfig{}, 1), SelectMode::kGreedy);
  Rng rng(0);
  EnvState s = EnvState::reset(inst);
  for (int k = 0; k < 5 && !s.terminal(); ++k) {
    const RobotId l = stnn_robot(s);
    s.apply_robot_option(l);
    s.apply_node_option(stnn_node(s, l));
  }
  for (auto _ : state) {
    EnvState a = s;
    const RobotId l = policy.select_robot(a, rng);
    a.apply_robot_option(l);
    benchmark::DoNotOptimize(policy.select_node(a, l, rng));
  }
}
BENCHMARK(BM_HtanJointOption)->Arg(3)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_TrainingMinibatch(benchmark::State& state) {
  TrainerConfig cfg;
  cfg.net = HtanConfig::toy();
  const auto batch = make_instances(scale_preset("F1"), 8, 11);
  TrainState ts = TrainState::create(cfg.net, 1);
  Rng rng(3);
  for (auto _ : state) {
    const auto trajs = collect(ts.net, batch, rng, cfg);
    const Baselines b = counterfactual_baselines(trajs, ts.baseline, false);
    ts.net.zero_grad();
    benchmark::DoNotOptimize(accumulate_losses(ts.net, trajs, b, 0, cfg).total);
  }
}
BENCHMARK(BM_TrainingMinibatch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
