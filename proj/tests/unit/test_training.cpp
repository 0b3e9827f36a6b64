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

#include <cmath>
#include <filesystem>
#include <optional>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rmfs/error.hpp"
#include "rmfs/rollout.hpp"
#include "rmfs/training.hpp"

namespace rmfs {
namespace {

using ad::NormMode;

TrainerConfig toy_config() {
  TrainerConfig cfg;
  cfg.net = HtanConfig::toy();
  cfg.scale = scale_preset("F1");
  cfg.epochs = 1;
  cfg.instances_per_epoch = 4;
  cfg.minibatch = 4;
  cfg.eval_instances = 4;
  return cfg;
}

std::vector<std::shared_ptr<const Instance>> batch_of(int n, std::uint64_t seed) {
  return make_instances(scale_preset("F1"), n, seed);
}

TEST(Trajectory, ReturnsAreSuffixSums) {
  Trajectory t;
  for (double r : {-5.0, -3.0, 0.0, -2.0}) {
    TrajectoryStep s;
    s.reward = r;
    t.steps.push_back(s);
  }
  EXPECT_EQ(t.returns(), (std::vector<double>{-10, -5, -2, -2}));
}

TEST(Collect, OneTrajectoryPerInstanceWithValidLabels) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 1);
  const auto batch = batch_of(6, 3);
  Rng rng(5);
  const auto trajs = collect(net, batch, rng, cfg);
  ASSERT_EQ(trajs.size(), 6u);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& t = trajs[i];
    double sum = 0.0;
    for (const TrajectoryStep& st : t.steps) {
      sum += st.reward;
      ASSERT_TRUE(st.robot_state.is_eligible(st.robot));
      ASSERT_TRUE(st.robot_state.is_eligible(st.robot_label));
      ASSERT_EQ(st.robot_label, stnn_robot(st.robot_state));
      ASSERT_EQ(st.node_state.pending_robot(), std::optional<RobotId>(st.robot));
      ASSERT_TRUE(st.node_state.node_mask(st.robot)[st.node]);
      ASSERT_EQ(st.node_label, stnn_node(st.node_state, st.robot));
      ASSERT_EQ(st.robot_forced, st.robot_state.eligible_robots().size() == 1);
      ASSERT_EQ(st.node_forced, st.node_state.valid_nodes(st.robot).size() == 1);
    }
    EXPECT_NEAR(-sum, t.makespan, 1e-9);
    EXPECT_EQ(t.returns().front(), sum);
  }
}

TEST(Collect, OnlyTheStorageChoiceIsFreeOnT1) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 2);
  Rng rng(0);
  const auto trajs = collect(net, {testing::t1()}, rng, cfg, SelectMode::kGreedy);
  ASSERT_EQ(trajs.size(), 1u);
  int free_choices = 0;
  for (const auto& st : trajs[0].steps) {
    EXPECT_TRUE(st.robot_forced);
    if (!st.node_forced) {
      ++free_choices;
      EXPECT_EQ(st.node_state.valid_nodes(0), (std::vector<NodeId>{1, 3, 4}));
    }
  }
  EXPECT_EQ(free_choices, 1);
}

TEST(Baselines, StnnRolloutOfT1) {
  std::vector<EnvState> s{EnvState::reset(testing::t1())};
  Rng rng(0);
  EXPECT_DOUBLE_EQ(rollout(s, {}, rng).front(), -18.0);
}

TEST(Baselines, SingleForcedLegRemaining) {
  auto inst = testing::make({{0, 0}, {2, 3}, {5, 3}, {0, 5}}, {1, 1, 1, 1}, {2});
  EnvState s = EnvState::reset(inst);
  for (JointOption o : {JointOption{0, 1}, {0, 2}, {0, 3}}) s.apply(o);
  Htan bl = Htan::create(HtanConfig::toy(), 1);
  EXPECT_DOUBLE_EQ(counterfactual_baseline_robot(s, bl.node, false), -5.0);
  s.apply_robot_option(0);
  EXPECT_DOUBLE_EQ(counterfactual_baseline_node(s, bl.robot, false), -5.0);
}

TEST(Baselines, BatchedMatchesPerState) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 3);
  Htan bl = Htan::create(cfg.net, 4);
  Rng rng(1);
  const auto trajs = collect(net, batch_of(3, 8), rng, cfg);
  const Baselines b = counterfactual_baselines(trajs, bl, false);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (std::size_t m = 0; m < trajs[i].steps.size(); ++m) {
      const TrajectoryStep& st = trajs[i].steps[m];
      const double r =
          st.robot_forced ? 0.0 : counterfactual_baseline_robot(st.robot_state, bl.node, false);
      const double g =
          st.node_forced ? 0.0 : counterfactual_baseline_node(st.node_state, bl.robot, false);
      EXPECT_NEAR(b.robot[i][m], r, 1e-9);
      EXPECT_NEAR(b.node[i][m], g, 1e-9);
    }
  }
}

TEST(Losses, ZeroAdvantageGivesZeroRlLoss) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 5);
  Rng rng(2);
  const auto trajs = collect(net, batch_of(3, 9), rng, cfg);
  Baselines b;
  for (const auto& t : trajs) {
    b.robot.push_back(t.returns());
    b.node.push_back(t.returns());
  }
  const LossValues l = accumulate_losses(net, trajs, b, 3, cfg, false);
  EXPECT_EQ(l.rl, 0.0);
  EXPECT_NEAR(l.total, std::pow(cfg.eta, 3) * l.bc, 1e-12);
}

TEST(Losses, LateEpochsReduceToRl) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 5);
  Rng rng(2);
  const auto trajs = collect(net, batch_of(2, 10), rng, cfg);
  Htan bl = Htan::create(cfg.net, 6);
  const Baselines b = counterfactual_baselines(trajs, bl, false);
  const LossValues l = accumulate_losses(net, trajs, b, 20000, cfg, false);
  EXPECT_NEAR(l.total, l.rl, 1e-9 * (1 + std::abs(l.rl)));
}

// With one trajectory the cloning term is sum_m -C log pi(label) over the
// non-forced decisions, computed here through the public policy calls.
TEST(Losses, CloningTermMatchesPolicyProbabilities) {
  TrainerConfig cfg = toy_config();
  cfg.c_robot = 10.0;
  cfg.c_node = 7.0;
  Htan net = Htan::create(cfg.net, 7);
  Rng rng(3);
  const auto trajs = collect(net, batch_of(1, 11), rng, cfg);
  double expected = 0.0;
  for (const TrajectoryStep& st : trajs[0].steps) {
    if (!st.robot_forced) {
      const auto p = robot_policy(net.robot, st.robot_state, NormMode::kTrainFrozen);
      expected += -cfg.c_robot * std::log(p[st.robot_label]);
    }
    if (!st.node_forced) {
      const auto p = node_policy(net.node, st.node_state, NormMode::kTrainFrozen);
      expected += -cfg.c_node * std::log(p[st.node_label]);
    }
  }
  Baselines b;
  b.robot = {std::vector<double>(trajs[0].steps.size(), 0.0)};
  b.node = b.robot;
  const LossValues l = accumulate_losses(net, trajs, b, 0, cfg, false);
  EXPECT_NEAR(l.bc, expected, 1e-9 * std::abs(expected));
}

TEST(Losses, CloningExampleValue) {
  // pi(label) = e^-1 at a single decision contributes C.
  EXPECT_DOUBLE_EQ(-10.0 * std::log(std::exp(-1.0)), 10.0);
}

TEST(Losses, GradientMatchesFiniteDifferences) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 8);
  Htan bl = Htan::create(cfg.net, 9);
  Rng rng(4);
  const auto trajs = collect(net, batch_of(2, 12), rng, cfg);
  const Baselines b = counterfactual_baselines(trajs, bl, false);
  const int epoch = 40;
  net.zero_grad();
  accumulate_losses(net, trajs, b, epoch, cfg, true);
  Rng pick(5);
  auto params = net.parameters();
  for (int k = 0; k < 60; ++k) {
    ad::Parameter* p = params[pick.uniform_int(0, params.size() - 1)];
    const auto i = pick.uniform_int(0, p->value.size() - 1);
    double& x = p->value.data()[i];
    const double saved = x;
    const double h = 1e-6;
    x = saved + h;
    const double up = accumulate_losses(net, trajs, b, epoch, cfg, false).total;
    x = saved - h;
    const double down = accumulate_losses(net, trajs, b, epoch, cfg, false).total;
    x = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p->grad.data()[i];
    EXPECT_NEAR(analytic, numeric, 1e-5 * std::max(1.0, std::abs(numeric)))
        << p->name << "[" << i << "]";
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Htan net = Htan::create(HtanConfig::toy(), 1);
  const Htan before = net;
  Adam opt(net.parameters(), {1e-2});
  net.zero_grad();
  opt.step();
  opt.step();
  Htan copy = before;
  auto a = net.parameters();
  auto b = copy.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value);
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::Parameter p("p", ad::Matrix{{1.0, -2.0}});
  Adam opt({&p}, {0.1});
  p.grad = ad::Matrix{{3.0, -0.5}};
  opt.step();
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(p.value(0, 1), -1.9, 1e-6);
}

TEST(Adam, DescendsOnAFrozenBatch) {
  TrainerConfig cfg = toy_config();
  Htan net = Htan::create(cfg.net, 10);
  Rng rng(6);
  const auto trajs = collect(net, batch_of(4, 13), rng, cfg);
  Baselines b;
  for (const auto& t : trajs) {
    b.robot.push_back(std::vector<double>(t.steps.size(), 0.0));
    b.node.push_back(b.robot.back());
  }
  Adam opt(net.parameters(), {1e-3});
  double prev = 1e300;
  for (int k = 0; k < 10; ++k) {
    net.zero_grad();
    const double l = accumulate_losses(net, trajs, b, 0, cfg).total;
    EXPECT_LT(l, prev);
    prev = l;
    opt.step();
  }
}

TEST(Adam, RepeatedRunsAreIdentical) {
  auto run = [] {
    TrainerConfig cfg = toy_config();
    cfg.epochs = 2;
    TrainState st = TrainState::create(cfg.net, 3);
    train(st, cfg);
    return st.net;
  };
  Htan a = run();
  Htan b = run();
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

TEST(Refresh, IdenticalNetsNeverRefresh) {
  Htan net = Htan::create(HtanConfig::toy(), 1);
  Htan bl = net;
  const RefreshResult r = baseline_refresh(net, bl, batch_of(8, 1), 0.05, {}, false);
  EXPECT_FALSE(r.robot_refreshed);
  EXPECT_FALSE(r.node_refreshed);
  EXPECT_EQ(r.robot_test.p, 1.0);
  EXPECT_DOUBLE_EQ(r.current, r.robot_mix);
}

TEST(Refresh, BaselineNeverGetsWorseOnItsEvalBatch) {
  TrainerConfig cfg = toy_config();
  cfg.epochs = 3;
  cfg.instances_per_epoch = 8;
  cfg.minibatch = 4;
  cfg.eval_instances = 16;
  TrainState st = TrainState::create(cfg.net, 5);
  train(st, cfg, [&](const EpochMetrics& m) {
    if (m.refresh.robot_refreshed) EXPECT_GT(m.refresh.current, m.refresh.robot_mix);
    if (m.refresh.node_refreshed) EXPECT_GT(m.refresh.current, m.refresh.node_mix);
  });
  EXPECT_EQ(st.epochs_done, 3);
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainerConfig cfg = toy_config();
  cfg.eta = 0.9;
  cfg.scale = scale_preset("U2");
  cfg.env.dispatch = DispatchRule::kIdleOnly;
  const TrainerConfig back = TrainerConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.scale, cfg.scale);
  EXPECT_EQ(back.net, cfg.net);
  EXPECT_EQ(back.eta, 0.9);
  EXPECT_EQ(back.env.dispatch, DispatchRule::kIdleOnly);
  TrainerConfig bad = cfg;
  bad.eta = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.gamma = 0.9;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Train, WritesRunDirectory) {
  TrainerConfig cfg = toy_config();
  cfg.epochs = 2;
  cfg.run_dir = std::filesystem::temp_directory_path() / "rmfs_train_test";
  std::filesystem::remove_all(cfg.run_dir);
  TrainState st = TrainState::create(cfg.net, 2);
  const auto metrics = train(st, cfg);
  ASSERT_EQ(metrics.size(), 2u);
  EXPECT_NEAR(metrics[1].lr, cfg.lr * cfg.lr_decay, 1e-18);
  for (const char* f : {"config.json", "metrics.csv", "epoch_000.bin", "epoch_001.bin",
                        "latest.bin", "baseline.bin"}) {
    EXPECT_TRUE(std::filesystem::exists(cfg.run_dir / f)) << f;
  }
  Htan back = load_checkpoint(cfg.run_dir / "latest.bin");
  EXPECT_EQ(back.parameters()[0]->value, st.net.parameters()[0]->value);
  std::filesystem::remove_all(cfg.run_dir);
}

TEST(Curriculum, WidenClampsAtOne) {
  ScaleConfig s;
  s.robots = {1, 2};
  s.racks = {3, 3};
  s.storages = {2, 4};
  const ScaleConfig w = widen(s, {1, 1, 4, 2, 0, 5});
  EXPECT_EQ(w.robots, (IntRange{1, 3}));
  EXPECT_EQ(w.racks, (IntRange{1, 5}));
  EXPECT_EQ(w.storages, (IntRange{2, 9}));
}

TEST(Curriculum, StandardScheduleIsNested) {
  const CurriculumConfig c = CurriculumConfig::standard();
  ASSERT_EQ(c.stages.size(), 3u);
  ScaleConfig s = c.initial;
  EXPECT_EQ(s.robots, (IntRange{2, 2}));
  EXPECT_EQ(s.racks, (IntRange{4, 4}));
  EXPECT_EQ(s.storages, (IntRange{8, 8}));
  std::vector<ScaleConfig> stages;
  for (const auto& st : c.stages) {
    const ScaleConfig next = widen(s, st.delta);
    for (auto [a, b] : {std::pair{s.robots, next.robots}, {s.racks, next.racks},
                        {s.storages, next.storages}}) {
      EXPECT_LE(b.lo, a.lo);
      EXPECT_GE(b.hi, a.hi);
    }
    s = next;
    stages.push_back(s);
  }
  EXPECT_EQ(stages[0].robots, (IntRange{2, 2}));
  EXPECT_EQ(stages[2].robots, (IntRange{1, 5}));
  EXPECT_EQ(stages[2].racks, (IntRange{1, 10}));
  EXPECT_EQ(stages[2].storages, (IntRange{1, 20}));
}

TEST(Curriculum, SmokeRun) {
  CurriculumConfig c = CurriculumConfig::standard();
  c.base.net = HtanConfig::toy();
  c.base.eval_instances = 4;
  c.validation_instances = 6;
  for (auto& st : c.stages) {
    st.epochs = 1;
    st.instances_per_epoch = 4;
    st.minibatch = 4;
  }
  TrainState state = TrainState::create(c.base.net, 1);
  const CurriculumResult r = run_curriculum(state, c);
  ASSERT_EQ(r.stages.size(), 3u);
  EXPECT_EQ(state.epochs_done, 3);
  for (const auto& st : r.stages) {
    EXPECT_TRUE(std::isfinite(st.validation));
    EXPECT_LT(st.validation, 0.0);
  }
}

TEST(Instances, SeedNamespacesAreDeterministic) {
  const auto a = make_instances(scale_preset("F2"), 5, 42);
  const auto b = make_instances(scale_preset("F2"), 5, 42);
  const auto c = make_instances(scale_preset("F2"), 5, 43);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(*a[i], *b[i]);
    EXPECT_FALSE(*a[i] == *c[i]);
  }
}

}  // namespace
}  // namespace rmfs
