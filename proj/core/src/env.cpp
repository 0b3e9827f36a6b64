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

#include "rmfs/env.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "rmfs/error.hpp"

namespace rmfs {

EnvState EnvState::reset(std::shared_ptr<const Instance> inst,
                         EnvOptions options) {
  if (!inst) throw Error(Errc::kInvalidConfig, "null instance");
  EnvState s;
  s.inst_ = std::move(inst);
  s.options_ = options;
  s.global_ = GlobalGraph(*s.inst_);
  s.robots_.resize(s.inst_->num_robots());
  for (RobotId l = 0; l < s.num_robots(); ++l) {
    s.robots_[l].id = l;
    s.robots_[l].history = RobotHistory(s.inst_->home_of(l));
  }
  s.advance();
  return s;
}

bool EnvState::can_move(const RobotState& r) const {
  if (r.finished()) return false;
  return r.history.back().role != NodeType::kStation ||
         global_.storages_available() > 0;
}

bool EnvState::decision_ready() const {
  return std::any_of(robots_.begin(), robots_.end(), [&](const RobotState& r) {
    return r.idle() && can_move(r);
  });
}

bool EnvState::is_eligible(RobotId l) const {
  if (terminal_ || pending_ || l < 0 || l >= num_robots()) return false;
  const RobotState& r = robots_[l];
  if (options_.dispatch == DispatchRule::kIdleOnly && !r.idle()) return false;
  return can_move(r);
}

std::vector<RobotId> EnvState::eligible_robots() const {
  std::vector<RobotId> out;
  for (RobotId l = 0; l < num_robots(); ++l) {
    if (is_eligible(l)) out.push_back(l);
  }
  return out;
}

int EnvState::node_mask(RobotId l, ArcMask& mask) const {
  return compute_arc_mask(*inst_, global_.features(), robots_[l].history, mask);
}

ArcMask EnvState::node_mask(RobotId l) const {
  ArcMask mask;
  node_mask(l, mask);
  return mask;
}

std::vector<NodeId> EnvState::valid_nodes(RobotId l) const {
  const ArcMask mask = node_mask(l);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < static_cast<NodeId>(mask.size()); ++v) {
    if (mask[v]) out.push_back(v);
  }
  return out;
}

void EnvState::apply_robot_option(RobotId l) {
  if (!is_eligible(l)) {
    throw Error(Errc::kIneligibleRobot,
                "robot " + std::to_string(l) + " cannot be selected now");
  }
  pending_ = l;
  selected_.push_back(l);
}

void EnvState::fire(EventKind kind, NodeId node, double clock) {
  const GlobalEvent ev{kind, node, clock};
  global_.apply(ev);
  if (options_.record_events) events_.push_back(ev);
}

double EnvState::apply_node_option(NodeId node) {
  if (!pending_) {
    throw Error(Errc::kInvalidNode, "no robot awaiting a node option");
  }
  const RobotId l = *pending_;
  RobotState& r = robots_[l];
  ArcMask mask;
  node_mask(l, mask);
  if (node < 0 || node >= static_cast<NodeId>(mask.size()) || !mask[node]) {
    throw Error(Errc::kInvalidNode, "node " + std::to_string(node) +
                                        " is not a valid successor for robot " +
                                        std::to_string(l));
  }
  const NodeType role = global_.feature(node).type;
  const double leg = inst_->travel_time(r.last_node(), node);
  const double departure = r.idle() ? clock() : r.legs.back().arrival;

  if (role == NodeType::kRack) fire(EventKind::kRackAssigned, node, clock());
  if (role == NodeType::kStorage) {
    fire(EventKind::kStorageAssigned, node, clock());
  }

  r.travel += leg;
  r.legs.push_back({node, role, departure + leg});
  r.history.push(node, role);
  const double phi_prev = phi_;
  phi_ = std::max(phi_, r.travel);
  const double reward = -(phi_ - phi_prev);

  if (options_.record_steps) {
    steps_.push_back({step_, clock(), l, node, reward});
  }
  ++step_;
  pending_.reset();
  advance();
  return reward;
}

double EnvState::apply(const JointOption& option) {
  apply_robot_option(option.robot);
  return apply_node_option(option.node);
}

void EnvState::advance() {
  while (!decision_ready()) {
    double next = std::numeric_limits<double>::infinity();
    for (const RobotState& r : robots_) {
      if (!r.legs.empty()) next = std::min(next, r.legs.front().arrival);
    }
    if (next == std::numeric_limits<double>::infinity()) {
      const bool done =
          std::all_of(robots_.begin(), robots_.end(),
                      [](const RobotState& r) { return r.finished(); });
      if (done) {
        terminal_ = true;
        return;
      }
      throw Error(Errc::kNoValidNode,
                  "no robot can move and none is travelling");
    }
    now_ = next;
    // Simultaneous arrivals are serviced in ascending robot id.
    for (RobotState& r : robots_) {
      while (!r.legs.empty() && r.legs.front().arrival <= next) {
        const Leg leg = r.legs.front();
        r.legs.pop_front();
        if (leg.role == NodeType::kRack) {
          fire(EventKind::kRackVacated, leg.node, next);
        } else if (leg.role == NodeType::kHome) {
          r.returned_home = true;
        }
      }
    }
  }
}

double EnvState::makespan() const {
  if (!terminal_) throw Error(Errc::kNotTerminal, "episode still running");
  double best = 0.0;
  for (const RobotState& r : robots_) best = std::max(best, r.travel);
  return best;
}

double scaled_reward(double reward, const Instance& inst) {
  if (inst.counts().racks == 0) return reward;
  const double alpha = static_cast<double>(inst.counts().racks) /
                       static_cast<double>(inst.counts().robots);
  return reward / alpha;
}

void write_step_log(std::ostream& out, const std::vector<StepRecord>& steps) {
  for (const StepRecord& s : steps) {
    const nlohmann::json line = {{"m", s.step},
                                 {"t", s.clock},
                                 {"robot", s.robot},
                                 {"node", s.node},
                                 {"reward", s.reward}};
    out << line.dump() << '\n';
  }
}

std::vector<StepRecord> read_step_log(std::istream& in) {
  std::vector<StepRecord> steps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      steps.push_back({doc.at("m").get<int>(), doc.at("t").get<double>(),
                       doc.at("robot").get<RobotId>(),
                       doc.at("node").get<NodeId>(),
                       doc.at("reward").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParse, std::string("step log: ") + e.what());
    }
  }
  return steps;
}

}  // namespace rmfs
