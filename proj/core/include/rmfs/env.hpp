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

#ifndef RMFS_ENV_HPP_
#define RMFS_ENV_HPP_

#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "rmfs/instance.hpp"
#include "rmfs/temporal_graph.hpp"

namespace rmfs {

// Which robots may be selected at a decision event. Decision events are
// raised whenever some idle robot can move; kAnyUnfinished then lets the
// planner append legs to robots that are still travelling, kIdleOnly
// restricts the choice to idle robots.
enum class DispatchRule : std::uint8_t {
  kAnyUnfinished,
  kIdleOnly,
};

struct EnvOptions {
  DispatchRule dispatch = DispatchRule::kAnyUnfinished;
  bool record_events = false;
  bool record_steps = false;
};

struct Leg {
  NodeId node = 0;
  NodeType role = NodeType::kHome;
  double arrival = 0.0;

  friend bool operator==(const Leg&, const Leg&) = default;
};

struct RobotState {
  RobotId id = 0;
  double travel = 0.0;  // r: accumulated leg time
  std::deque<Leg> legs;  // committed but not yet completed legs
  RobotHistory history;
  bool returned_home = false;

  bool idle() const { return legs.empty(); }
  bool finished() const { return history.closed(); }
  NodeId last_node() const { return history.back().node; }

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct StepRecord {
  int step = 0;
  double clock = 0.0;
  RobotId robot = 0;
  NodeId node = 0;
  double reward = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct JointOption {
  RobotId robot = 0;
  NodeId node = 0;

  friend bool operator==(const JointOption&, const JointOption&) = default;
};

class EnvState {
 public:
  // An empty placeholder; real states come from reset().
  EnvState() = default;

  static EnvState reset(std::shared_ptr<const Instance> inst,
                        EnvOptions options = {});

  const Instance& instance() const { return *inst_; }
  const std::shared_ptr<const Instance>& instance_ptr() const { return inst_; }
  const EnvOptions& options() const { return options_; }
  const GlobalGraph& global() const { return global_; }
  const std::vector<RobotState>& robots() const { return robots_; }
  const RobotState& robot(RobotId l) const { return robots_[l]; }
  int num_robots() const { return static_cast<int>(robots_.size()); }

  // H^a: robots in the order they were selected.
  const std::vector<RobotId>& selected() const { return selected_; }
  int step() const { return step_; }
  double clock() const { return now_; }
  // Phi_m: the largest accumulated travel time so far.
  double phi() const { return phi_; }

  bool terminal() const { return terminal_; }
  // Robot awaiting its node option, if a robot option was just applied.
  std::optional<RobotId> pending_robot() const { return pending_; }

  bool is_eligible(RobotId l) const;
  std::vector<RobotId> eligible_robots() const;

  // Mask over nodes for robot l under the current global features.
  int node_mask(RobotId l, ArcMask& mask) const;
  ArcMask node_mask(RobotId l) const;
  std::vector<NodeId> valid_nodes(RobotId l) const;

  void apply_robot_option(RobotId l);
  // Returns the instant reward -(Phi_m - Phi_{m-1}).
  double apply_node_option(NodeId node);
  double apply(const JointOption& option);

  double makespan() const;

  // Planned position of robot l: the last node in its history.
  Point robot_position(RobotId l) const {
    return inst_->position(robots_[l].last_node());
  }
  double leg_time(RobotId l, NodeId node) const {
    return inst_->travel_time(robots_[l].last_node(), node);
  }

  const std::vector<GlobalEvent>& event_log() const { return events_; }
  const std::vector<StepRecord>& step_log() const { return steps_; }

  friend bool operator==(const EnvState& a, const EnvState& b) {
    return *a.inst_ == *b.inst_ && a.global_ == b.global_ &&
           a.robots_ == b.robots_ && a.selected_ == b.selected_ &&
           a.step_ == b.step_ && a.now_ == b.now_ && a.phi_ == b.phi_ &&
           a.pending_ == b.pending_ && a.terminal_ == b.terminal_;
  }

 private:
  bool can_move(const RobotState& r) const;
  bool decision_ready() const;
  void fire(EventKind kind, NodeId node, double clock);
  void advance();

  std::shared_ptr<const Instance> inst_;
  EnvOptions options_;
  GlobalGraph global_;
  std::vector<RobotState> robots_;
  std::vector<RobotId> selected_;
  int step_ = 0;
  double now_ = 0.0;
  double phi_ = 0.0;
  std::optional<RobotId> pending_;
  bool terminal_ = false;
  std::vector<GlobalEvent> events_;
  std::vector<StepRecord> steps_;
};

// R / alpha with alpha = N_r / N_a.
double scaled_reward(double reward, const Instance& inst);

void write_step_log(std::ostream& out, const std::vector<StepRecord>& steps);
std::vector<StepRecord> read_step_log(std::istream& in);

}  // namespace rmfs

#endif  // RMFS_ENV_HPP_
