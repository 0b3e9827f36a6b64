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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rmfs/error.hpp"

namespace rmfs {
namespace {

using testing::make;

EnvOptions idle_only() {
  EnvOptions o;
  o.dispatch = DispatchRule::kIdleOnly;
  return o;
}

void expect_code(Errc code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Reset, AllRobotsEligibleAndIdle) {
  auto inst = testing::sampled("F9", 1);
  const EnvState s = EnvState::reset(inst);
  EXPECT_EQ(s.eligible_robots(), (std::vector<RobotId>{0, 1, 2, 3, 4}));
  EXPECT_FALSE(s.terminal());
  EXPECT_EQ(s.clock(), 0.0);
  EXPECT_EQ(s.phi(), 0.0);
  for (const RobotState& r : s.robots()) {
    EXPECT_TRUE(r.idle());
    EXPECT_EQ(r.travel, 0.0);
    EXPECT_EQ(r.last_node(), r.id);
  }
  EXPECT_EQ(s, EnvState::reset(inst));
}

TEST(Step, SingleRobotLegSum) {
  auto inst = testing::t1();
  EnvState s = EnvState::reset(inst);
  const std::vector<JointOption> plan = {{0, 1}, {0, 2}, {0, 4}, {0, 0}};
  const std::vector<double> legs = {5, 3, 7, 1};
  double sum = 0.0;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const double r = s.apply(plan[k]);
    EXPECT_DOUBLE_EQ(r, -legs[k]);
    sum += r;
    if (k == 0) EXPECT_DOUBLE_EQ(s.robot(0).travel, 5.0);
  }
  EXPECT_TRUE(s.terminal());
  EXPECT_DOUBLE_EQ(s.makespan(), 16.0);
  EXPECT_DOUBLE_EQ(sum, -16.0);
}

TEST(Step, NearStorageCostsMore) {
  EnvState s = EnvState::reset(testing::t1());
  for (JointOption o : {JointOption{0, 1}, {0, 2}, {0, 3}, {0, 0}}) s.apply(o);
  EXPECT_DOUBLE_EQ(s.makespan(), 18.0);
}

TEST(Step, SpeedCoefficientScalesLegs) {
  auto inst = make({{0, 0}, {2, 3}, {5, 3}, {0, 1}}, {1, 1, 1, 1}, {2}, 2.5);
  EnvState s = EnvState::reset(inst);
  EXPECT_DOUBLE_EQ(s.apply({0, 1}), -12.5);
}

TEST(Step, MakespanBeforeTheEndThrows) {
  EnvState s = EnvState::reset(testing::t1());
  expect_code(Errc::kNotTerminal, [&] { s.makespan(); });
  s.apply({0, 1});
  expect_code(Errc::kNotTerminal, [&] { s.makespan(); });
}

TEST(Step, InvalidOptionsRejected) {
  EnvState s = EnvState::reset(testing::t1());
  expect_code(Errc::kInvalidNode, [&] { s.apply_node_option(1); });  // nothing pending
  s.apply_robot_option(0);
  expect_code(Errc::kInvalidNode, [&] { s.apply_node_option(2); });
  expect_code(Errc::kInvalidNode, [&] { s.apply_node_option(99); });
  s.apply_node_option(1);
  s.apply_robot_option(0);
  expect_code(Errc::kInvalidNode, [&] { s.apply_node_option(3); });
  expect_code(Errc::kIneligibleRobot, [&] { s.apply_robot_option(0); });
}

TEST(Eligibility, IdleOnlyExcludesTravellingRobot) {
  auto inst = testing::symmetric_pair();
  EnvState s = EnvState::reset(inst, idle_only());
  s.apply({0, 2});
  EXPECT_EQ(s.eligible_robots(), (std::vector<RobotId>{1}));
  expect_code(Errc::kIneligibleRobot, [&] { s.apply_robot_option(0); });
  EXPECT_EQ(s.clock(), 0.0);
}

TEST(Eligibility, QueuedDispatchAllowsTravellingRobot) {
  auto inst = testing::symmetric_pair();
  EnvState s = EnvState::reset(inst);
  s.apply({0, 2});
  EXPECT_EQ(s.eligible_robots(), (std::vector<RobotId>{0, 1}));
  s.apply({0, 4});  // queued behind the rack leg
  EXPECT_EQ(s.robot(0).legs.size(), 2u);
  EXPECT_DOUBLE_EQ(s.robot(0).legs.back().arrival, 9.0);
}

TEST(Eligibility, FinishedRobotsLeaveTheSet) {
  auto inst = testing::symmetric_pair();
  EnvState s = EnvState::reset(inst);
  for (JointOption o : {JointOption{0, 2}, {0, 4}, {0, 6}, {0, 3}, {0, 5}, {0, 7},
                        {0, 0}}) {
    s.apply(o);
  }
  EXPECT_TRUE(s.robot(0).finished());
  EXPECT_EQ(s.eligible_robots(), (std::vector<RobotId>{1}));
  s.apply({1, 1});
  EXPECT_TRUE(s.terminal());
  EXPECT_TRUE(s.eligible_robots().empty());
}

// Two robots under idle-only dispatch: both are dispatched at t=0, arrive
// together, and are serviced in ascending id at 5, 9 and 13 s.
TEST(EventLoop, TwoRobotInterleaving) {
  EnvOptions opt = idle_only();
  opt.record_steps = true;
  auto inst = testing::symmetric_pair();
  const auto ep = testing::run(inst, HeuristicKind::kStnn, 0, opt);
  const EnvState s = replay(inst, ep.options, opt);
  EXPECT_EQ(s.selected(), (std::vector<RobotId>{0, 1, 0, 1, 0, 1, 0, 1}));
  std::vector<double> clocks;
  for (const StepRecord& r : s.step_log()) clocks.push_back(r.clock);
  EXPECT_EQ(clocks, (std::vector<double>{0, 0, 5, 5, 9, 9, 13, 13}));
  EXPECT_DOUBLE_EQ(s.makespan(), 18.0);
  EXPECT_EQ(s.robot(0).history.entries().size(), 5u);
  EXPECT_EQ(s.robot(0).history.entries()[3].node, 2);  // vacated origin cell
}

TEST(EventLoop, ExcessRobotsGoHome) {
  auto inst = make({{0, 0}, {3, 0}, {6, 0}, {2, 3}, {5, 3}, {0, 1}}, {3, 1, 1, 1}, {4});
  EnvState s = EnvState::reset(inst);
  s.apply({0, 3});
  for (RobotId l : {1, 2}) {
    EXPECT_EQ(s.valid_nodes(l), (std::vector<NodeId>{l}));
  }
  EXPECT_DOUBLE_EQ(s.apply({1, 1}), 0.0);
  EXPECT_TRUE(s.robot(1).finished());
  EXPECT_DOUBLE_EQ(s.robot(1).travel, 0.0);
}

TEST(ScaledReward, Examples) {
  auto five = make({{0, 0}, {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6},
                    {1, 7}, {1, 8}, {1, 9}, {1, 10}, {0, 5}, {9, 9}},
                   {2, 10, 1, 1}, std::vector<NodeId>(10, 12));
  EXPECT_DOUBLE_EQ(scaled_reward(-10.0, *five), -2.0);
  EXPECT_DOUBLE_EQ(scaled_reward(0.0, *five), 0.0);
  EXPECT_DOUBLE_EQ(scaled_reward(-7.0, *testing::t1()), -7.0);
}

TEST(StepLog, JsonLinesRoundTrip) {
  EnvOptions opt;
  opt.record_steps = true;
  auto inst = testing::sampled("F3", 9);
  const auto ep = testing::run(inst, HeuristicKind::kRandom, 1, opt);
  const EnvState s = replay(inst, ep.options, opt);
  std::stringstream io;
  write_step_log(io, s.step_log());
  EXPECT_EQ(read_step_log(io), s.step_log());
}

// Properties over random episodes on every fixed preset and both dispatch
// rules.
class EpisodeProperties : public ::testing::TestWithParam<int> {};

TEST_P(EpisodeProperties, TelescopingClockAndConservation) {
  const std::string id = "F" + std::to_string(GetParam());
  for (DispatchRule rule : {DispatchRule::kAnyUnfinished, DispatchRule::kIdleOnly}) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto inst = testing::sampled(id.c_str(), seed);
      EnvOptions opt;
      opt.dispatch = rule;
      EnvState s = EnvState::reset(inst, opt);
      HeuristicPolicy p(seed % 2 ? HeuristicKind::kRandom : HeuristicKind::kFn);
      Rng rng(seed);
      double sum = 0.0, last_clock = 0.0, last_phi = 0.0;
      std::vector<double> travel(s.num_robots(), 0.0);
      while (!s.terminal()) {
        ASSERT_FALSE(s.eligible_robots().empty());
        ASSERT_GE(s.clock(), last_clock);
        last_clock = s.clock();
        const RobotId l = p.select_robot(s, rng);
        if (rule == DispatchRule::kIdleOnly) ASSERT_TRUE(s.robot(l).idle());
        s.apply_robot_option(l);
        sum += s.apply_node_option(p.select_node(s, l, rng));
        ASSERT_GE(s.phi(), last_phi);
        last_phi = s.phi();
        for (const RobotState& r : s.robots()) {
          ASSERT_GE(r.travel, travel[r.id]);
          travel[r.id] = r.travel;
        }
      }
      ASSERT_NEAR(-sum, s.makespan(), 1e-9);
      std::multiset<NodeId> racks;
      std::multiset<NodeId> storages;
      for (const RobotState& r : s.robots()) {
        ASSERT_TRUE(r.returned_home);
        ASSERT_TRUE(r.finished());
        for (const HistoryEntry& e : r.history.entries()) {
          if (e.role == NodeType::kRack) racks.insert(e.node);
          if (e.role == NodeType::kStorage) storages.insert(e.node);
        }
      }
      ASSERT_EQ(static_cast<int>(racks.size()), inst->counts().racks);
      ASSERT_EQ(static_cast<int>(std::set<NodeId>(racks.begin(), racks.end()).size()),
                inst->counts().racks);
      ASSERT_EQ(std::set<NodeId>(storages.begin(), storages.end()).size(),
                storages.size());
    }
  }
}

INSTANTIATE_TEST_SUITE_P(FixedPresets, EpisodeProperties, ::testing::Range(1, 17));

}  // namespace
}  // namespace rmfs
