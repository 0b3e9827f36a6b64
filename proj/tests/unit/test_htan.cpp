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
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rmfs/error.hpp"
#include "rmfs/gradcheck.hpp"
#include "rmfs/htan.hpp"

namespace rmfs {
namespace {

using ad::NormMode;

double total(const std::vector<double>& p) {
  return std::accumulate(p.begin(), p.end(), 0.0);
}

TEST(Inputs, FeatureRowsNormalised) {
  const EnvState s = EnvState::reset(testing::t1());
  const FeatureRows rows = build_inputs(s);
  ASSERT_EQ(rows.robots.rows(), 1);
  ASSERT_EQ(rows.robots.cols(), kRobotFeatures);
  EXPECT_TRUE(rows.robots.isZero());
  ASSERT_EQ(rows.nodes.rows(), 3);
  EXPECT_NEAR(rows.nodes(0, 0), 0.1, 1e-12);
  EXPECT_NEAR(rows.nodes(0, 1), 0.15, 1e-12);
  EXPECT_NEAR(rows.nodes(0, 2), 0.25, 1e-12);
  EXPECT_NEAR(rows.nodes(0, 3), 0.15, 1e-12);
  EXPECT_NEAR(rows.nodes(2, 2), 0.0, 1e-12);  // storage pairs with itself
  EXPECT_NEAR(rows.nodes(2, 3), 0.05, 1e-12);
}

TEST(Inputs, RowCountMergesStations) {
  auto inst = testing::sampled("F12", 1);
  EXPECT_EQ(num_rows(*inst), 5 + 15 + 30);
  const FeatureRows rows = build_inputs(EnvState::reset(inst));
  EXPECT_EQ(rows.robots.rows() + rows.nodes.rows(), num_rows(*inst));
  for (NodeId v = inst->first_station(); v < inst->first_storage(); ++v) {
    EXPECT_EQ(node_row(*inst, v), -1);
  }
  EXPECT_EQ(node_row(*inst, inst->first_storage()), 5 + 15);
}

TEST(Inputs, VacatedRackLosesStationPairing) {
  auto inst = testing::t1();
  EnvState s = EnvState::reset(inst);
  s.apply({0, 1});
  s.apply({0, 2});  // robot has now picked the rack up
  const FeatureRows rows = build_inputs(s);
  EXPECT_NEAR(rows.nodes(0, 2), 0.1, 1e-12);
  EXPECT_NEAR(rows.robots(0, 0), 8.0 / (8.0 + 1e-6), 1e-12);
}

TEST(Encoder, ShapeAndRowEquivariance) {
  HtanConfig cfg = HtanConfig::toy();
  Htan net = Htan::create(cfg, 3);
  auto a = testing::make({{0, 0}, {2, 3}, {5, 3}, {5, 4}, {0, 1}}, {1, 1, 1, 2}, {2});
  auto b = testing::make({{0, 0}, {2, 3}, {5, 3}, {0, 1}, {5, 4}}, {1, 1, 1, 2}, {2});
  const EnvState sa = EnvState::reset(a);
  const EnvState sb = EnvState::reset(b);
  for (NormMode mode : {NormMode::kInference, NormMode::kTrainFrozen}) {
    ad::Tape t1(false), t2(false);
    const Encoded ea = encode(net.robot.encoder, cfg, t1, {&sa}, mode);
    const Encoded eb = encode(net.robot.encoder, cfg, t2, {&sb}, mode);
    ASSERT_EQ(ea.embeddings.rows(), 4);
    ASSERT_EQ(ea.embeddings.cols(), cfg.dim);
    const ad::Matrix& x = ea.embeddings.value();
    const ad::Matrix& y = eb.embeddings.value();
    EXPECT_TRUE(x.row(0).isApprox(y.row(0), 1e-12));
    EXPECT_TRUE(x.row(1).isApprox(y.row(1), 1e-12));
    EXPECT_TRUE(x.row(2).isApprox(y.row(3), 1e-12));
    EXPECT_TRUE(x.row(3).isApprox(y.row(2), 1e-12));
  }
}

TEST(Encoder, FullSizeShape) {
  Htan net = Htan::create(HtanConfig{}, 1);
  const EnvState s = EnvState::reset(testing::sampled("F5", 2));
  ad::Tape tape(false);
  const Encoded e = encode(net.node.encoder, net.config, tape, {&s}, NormMode::kInference);
  EXPECT_EQ(e.embeddings.rows(), 2 + 8 + 8);
  EXPECT_EQ(e.embeddings.cols(), 128);
  EXPECT_EQ(e.mean.rows(), 1);
}

TEST(Encoder, NonFiniteActivationRaises) {
  Htan net = Htan::create(HtanConfig::toy(), 1);
  net.robot.encoder.robot_w.value(0, 0) = std::nan("");
  const EnvState s = EnvState::reset(testing::t1());
  ad::Tape tape(false);
  try {
    encode(net.robot.encoder, net.config, tape, {&s}, NormMode::kInference);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonFiniteActivation);
  }
}

TEST(RobotDecoder, DistributionOverEligibleRobotsOnly) {
  Htan net = Htan::create(HtanConfig::toy(), 5);
  auto inst = testing::sampled("F9", 4);
  EnvState s = EnvState::reset(inst);  // empty selection history
  auto p = robot_policy(net.robot, s);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_NEAR(total(p), 1.0, 1e-12);
  ad::Tape tape(false);
  const PolicyOutput out = robot_log_probs(net.robot, tape, {&s}, NormMode::kInference);
  for (int r = inst->counts().robots; r < out.rows[0].len; ++r) {
    EXPECT_TRUE(std::isinf(out.log_probs.value()(r, 0)));
  }
  HeuristicPolicy stnn(HeuristicKind::kStnn);
  Rng rng(0);
  for (int k = 0; k < 12; ++k) {
    const RobotId l = stnn.select_robot(s, rng);
    s.apply_robot_option(l);
    s.apply_node_option(stnn.select_node(s, l, rng));
  }
  p = robot_policy(net.robot, s);
  EXPECT_NEAR(total(p), 1.0, 1e-12);
  for (RobotId l = 0; l < s.num_robots(); ++l) {
    if (!s.is_eligible(l)) EXPECT_EQ(p[l], 0.0);
  }
}

TEST(RobotDecoder, EqualCompatibilitiesGiveUniform) {
  Htan net = Htan::create(HtanConfig::toy(), 5);
  net.robot.wq_hat.value.setZero();
  const EnvState s = EnvState::reset(testing::symmetric_pair());
  const auto p = robot_policy(net.robot, s);
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(NodeDecoder, ForcedStationSkipsNetwork) {
  Htan net = Htan::create(HtanConfig::toy(), 5);
  EnvState s = EnvState::reset(testing::t1());
  s.apply({0, 1});
  s.apply_robot_option(0);
  EXPECT_EQ(forced_node(s), 2);
  const auto p = node_policy(net.node, s);
  EXPECT_EQ(p[2], 1.0);
  EXPECT_NEAR(total(p), 1.0, 0.0);
}

TEST(NodeDecoder, EqualCompatibilitiesGiveUniform) {
  Htan net = Htan::create(HtanConfig::toy(), 5);
  net.node.wq_hat.value.setZero();
  EnvState s = EnvState::reset(testing::t1());
  s.apply({0, 1});
  s.apply({0, 2});
  s.apply_robot_option(0);
  EXPECT_EQ(forced_node(s), -1);
  const auto p = node_policy(net.node, s);
  for (NodeId v : {1, 3, 4}) EXPECT_NEAR(p[v], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[2], 0.0);
}

TEST(NodeDecoder, ShortHistoryIsPadded) {
  Htan net = Htan::create(HtanConfig::toy(), 8);
  EnvState s = EnvState::reset(testing::sampled("F3", 1));
  s.apply_robot_option(0);  // history holds only the home node
  const auto p = node_policy(net.node, s);
  EXPECT_NEAR(total(p), 1.0, 1e-12);
  for (NodeId v = 0; v < s.instance().num_nodes(); ++v) {
    if (!s.node_mask(0)[v]) EXPECT_EQ(p[v], 0.0);
  }
}

TEST(Batching, BatchMatchesSingleInInference) {
  Htan net = Htan::create(HtanConfig::toy(), 2);
  std::vector<EnvState> states;
  for (int k = 0; k < 4; ++k) {
    EnvState s = EnvState::reset(testing::sampled(k % 2 ? "F5" : "F10", k));
    Rng rng(k);
    for (int m = 0; m < k * 3; ++m) s.apply(random_joint(s, rng));
    states.push_back(s);
  }
  std::vector<const EnvState*> view;
  for (auto& s : states) view.push_back(&s);
  const auto batch = robot_policy_batch(net.robot, view, NormMode::kInference);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto single = robot_policy(net.robot, states[i]);
    for (std::size_t j = 0; j < single.size(); ++j) {
      EXPECT_NEAR(batch[i][j], single[j], 1e-12);
    }
  }
}

TEST(Selection, SampleOrGreedy) {
  Rng rng(1);
  EXPECT_EQ(sample_or_greedy({0, 1, 0}, SelectMode::kGreedy, rng), 1);
  EXPECT_EQ(sample_or_greedy({0, 1, 0}, SelectMode::kSample, rng), 1);
  EXPECT_EQ(sample_or_greedy({0.2, 0.5, 0.3}, SelectMode::kGreedy, rng), 1);
  EXPECT_EQ(sample_or_greedy({0.5, 0.5}, SelectMode::kGreedy, rng), 0);
  const std::vector<double> dist = {0.2, 0.5, 0.3};
  std::vector<int> hits(3, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++hits[sample_or_greedy(dist, SelectMode::kSample, rng)];
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(hits[j], n * dist[j], 3 * std::sqrt(n * dist[j] * (1 - dist[j])));
  }
}

TEST(Checkpoint, RoundTripPreservesPolicy) {
  Htan net = Htan::create(HtanConfig::toy(), 9);
  // Move running statistics away from their initial values.
  const EnvState s = EnvState::reset(testing::sampled("F6", 3));
  robot_policy(net.robot, s, NormMode::kTrain);
  const auto path = std::filesystem::temp_directory_path() / "rmfs_ckpt_test.bin";
  save_checkpoint(path, net);
  Htan back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config, net.config);
  auto a = net.parameters();
  auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value);
  EXPECT_EQ(robot_policy(net.robot, s), robot_policy(back.robot, s));
  EnvState t = s;
  t.apply_robot_option(0);
  EXPECT_EQ(node_policy(net.node, t), node_policy(back.node, t));
}

TEST(Clip, ScalingSharpensByPower) {
  // log p = u - log Z, so c * u gives p_c proportional to p^c.
  Htan net = Htan::create(HtanConfig::toy(), 4);
  Htan sharp = net;
  const double c = 3.0;
  sharp.config.logit_clip = c;
  sharp.robot.config.logit_clip = c;
  sharp.node.config.logit_clip = c;
  EnvState s = EnvState::reset(testing::sampled("F6", 5));
  auto check = [&](const std::vector<double>& p, const std::vector<double>& q) {
    double z = 0.0;
    for (double x : p) z += std::pow(x, c);
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(q[j], std::pow(p[j], c) / z, 1e-12);
    }
  };
  check(robot_policy(net.robot, s), robot_policy(sharp.robot, s));
  s.apply_robot_option(0);
  check(node_policy(net.node, s), node_policy(sharp.node, s));
}

TEST(Clip, RejectedWhenNotPositiveAndKeptByCheckpoints) {
  HtanConfig c = HtanConfig::toy();
  c.logit_clip = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c.logit_clip = 10.0;
  Htan net = Htan::create(c, 2);
  const auto path = std::filesystem::temp_directory_path() / "rmfs_clip_ckpt.bin";
  save_checkpoint(path, net);
  EXPECT_EQ(load_checkpoint(path).config.logit_clip, 10.0);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "rmfs_bad_ckpt.bin";
  std::ofstream(path) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Gradients, ToyConfigMatchesFiniteDifferences) {
  GradcheckOptions opt;
  opt.draws = 3;
  opt.entries_per_draw = 400;
  opt.seed = 12;
  const GradcheckResult r = htan_gradcheck(opt);
  EXPECT_LT(r.worst_rel_error, 1e-4);
}

TEST(HtanPolicyAdapter, GreedyRolloutIsDeterministicAndValid) {
  HtanPolicy policy(Htan::create(HtanConfig::toy(), 4), SelectMode::kGreedy);
  auto inst = testing::sampled("F7", 5);
  Rng r1(1), r2(2);
  const auto a = run_episode(inst, policy, r1);
  const auto b = run_episode(inst, policy, r2);
  EXPECT_EQ(a.options, b.options);
  EXPECT_NEAR(a.reward_sum, -a.makespan, 1e-9);
}

}  // namespace
}  // namespace rmfs
