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

#ifndef RMFS_HEURISTICS_HPP_
#define RMFS_HEURISTICS_HPP_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rmfs/env.hpp"
#include "rmfs/random.hpp"

namespace rmfs {

enum class HeuristicKind : std::uint8_t { kStnn, kNn, kFn, kSt, kRandom };

std::string_view to_string(HeuristicKind kind);
HeuristicKind heuristic_from_string(std::string_view name);

// Robot layer of STNN: smallest accumulated travel time, lowest id on ties.
RobotId stnn_robot(const EnvState& s);
// Node layer of STNN: nearest valid node from the robot's position.
NodeId stnn_node(const EnvState& s, RobotId l);
NodeId farthest_node(const EnvState& s, RobotId l);

JointOption nn_joint(const EnvState& s);
JointOption fn_joint(const EnvState& s);
JointOption st_joint(const EnvState& s);

RobotId random_robot(const EnvState& s, Rng& rng);
NodeId random_node(const EnvState& s, RobotId l, Rng& rng);
JointOption random_joint(const EnvState& s, Rng& rng);

// Two-layer decision interface shared by heuristics and learned planners.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual RobotId select_robot(const EnvState& s, Rng& rng) = 0;
  virtual NodeId select_node(const EnvState& s, RobotId l, Rng& rng) = 0;
};

class HeuristicPolicy : public Policy {
 public:
  explicit HeuristicPolicy(HeuristicKind kind) : kind_(kind) {}

  HeuristicKind kind() const { return kind_; }
  std::string name() const override { return std::string(to_string(kind_)); }
  RobotId select_robot(const EnvState& s, Rng& rng) override;
  NodeId select_node(const EnvState& s, RobotId l, Rng& rng) override;

 private:
  HeuristicKind kind_;
};

struct EpisodeResult {
  double makespan = 0.0;
  double reward_sum = 0.0;
  int steps = 0;
  std::vector<JointOption> options;
  double option_seconds = 0.0;  // wall-clock spent choosing options
};

EpisodeResult run_episode(std::shared_ptr<const Instance> inst, Policy& policy,
                          Rng& rng, EnvOptions options = {});

// Replays a fixed option sequence and returns the final state.
EnvState replay(std::shared_ptr<const Instance> inst,
                const std::vector<JointOption>& options,
                EnvOptions env_options = {});

}  // namespace rmfs

#endif  // RMFS_HEURISTICS_HPP_
