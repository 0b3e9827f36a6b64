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

#include "rmfs/heuristics.hpp"

#include <chrono>
#include <limits>

#include "rmfs/error.hpp"

namespace rmfs {

std::string_view to_string(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::kStnn: return "stnn";
    case HeuristicKind::kNn: return "nn";
    case HeuristicKind::kFn: return "fn";
    case HeuristicKind::kSt: return "st";
    case HeuristicKind::kRandom: return "random";
  }
  return "unknown";
}

HeuristicKind heuristic_from_string(std::string_view name) {
  for (HeuristicKind k : {HeuristicKind::kStnn, HeuristicKind::kNn,
                          HeuristicKind::kFn, HeuristicKind::kSt,
                          HeuristicKind::kRandom}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::kInvalidConfig,
              "unknown heuristic '" + std::string(name) + "'");
}

namespace {

std::vector<RobotId> require_eligible(const EnvState& s) {
  std::vector<RobotId> eligible = s.eligible_robots();
  if (eligible.empty()) {
    throw Error(Errc::kIneligibleRobot, "no robot can be selected");
  }
  return eligible;
}

struct Pick {
  NodeId node = -1;
  double leg = 0.0;
};

// Nearest (or farthest) valid node, lowest id on ties.
Pick extreme_node(const EnvState& s, RobotId l, bool farthest) {
  ArcMask mask;
  s.node_mask(l, mask);
  Pick best;
  for (NodeId v = 0; v < static_cast<NodeId>(mask.size()); ++v) {
    if (!mask[v]) continue;
    const double d = s.leg_time(l, v);
    if (best.node < 0 || (farthest ? d > best.leg : d < best.leg)) {
      best = {v, d};
    }
  }
  if (best.node < 0) {
    throw Error(Errc::kNoValidNode,
                "robot " + std::to_string(l) + " has no valid node");
  }
  return best;
}

}  // namespace

RobotId stnn_robot(const EnvState& s) {
  RobotId best = -1;
  for (RobotId l : require_eligible(s)) {
    if (best < 0 || s.robot(l).travel < s.robot(best).travel) best = l;
  }
  return best;
}

NodeId stnn_node(const EnvState& s, RobotId l) {
  return extreme_node(s, l, false).node;
}

NodeId farthest_node(const EnvState& s, RobotId l) {
  return extreme_node(s, l, true).node;
}

JointOption nn_joint(const EnvState& s) {
  JointOption best{-1, -1};
  double best_leg = 0.0;
  for (RobotId l : require_eligible(s)) {
    const Pick p = extreme_node(s, l, false);
    if (best.robot < 0 || p.leg < best_leg) {
      best = {l, p.node};
      best_leg = p.leg;
    }
  }
  return best;
}

JointOption fn_joint(const EnvState& s) {
  JointOption best{-1, -1};
  double best_leg = 0.0;
  for (RobotId l : require_eligible(s)) {
    const Pick p = extreme_node(s, l, true);
    if (best.robot < 0 || p.leg > best_leg) {
      best = {l, p.node};
      best_leg = p.leg;
    }
  }
  return best;
}

JointOption st_joint(const EnvState& s) {
  JointOption best{-1, -1};
  double best_time = 0.0;
  for (RobotId l : require_eligible(s)) {
    const Pick p = extreme_node(s, l, false);
    const double t = s.robot(l).travel + p.leg;
    if (best.robot < 0 || t < best_time) {
      best = {l, p.node};
      best_time = t;
    }
  }
  return best;
}

RobotId random_robot(const EnvState& s, Rng& rng) {
  const std::vector<RobotId> eligible = require_eligible(s);
  return eligible[rng.uniform_int(0, std::ssize(eligible) - 1)];
}

NodeId random_node(const EnvState& s, RobotId l, Rng& rng) {
  const std::vector<NodeId> nodes = s.valid_nodes(l);
  if (nodes.empty()) {
    throw Error(Errc::kNoValidNode,
                "robot " + std::to_string(l) + " has no valid node");
  }
  return nodes[rng.uniform_int(0, std::ssize(nodes) - 1)];
}

JointOption random_joint(const EnvState& s, Rng& rng) {
  const RobotId l = random_robot(s, rng);
  return {l, random_node(s, l, rng)};
}

RobotId HeuristicPolicy::select_robot(const EnvState& s, Rng& rng) {
  switch (kind_) {
    case HeuristicKind::kStnn: return stnn_robot(s);
    case HeuristicKind::kNn: return nn_joint(s).robot;
    case HeuristicKind::kFn: return fn_joint(s).robot;
    case HeuristicKind::kSt: return st_joint(s).robot;
    case HeuristicKind::kRandom: return random_robot(s, rng);
  }
  return -1;
}

NodeId HeuristicPolicy::select_node(const EnvState& s, RobotId l, Rng& rng) {
  switch (kind_) {
    case HeuristicKind::kFn: return farthest_node(s, l);
    case HeuristicKind::kRandom: return random_node(s, l, rng);
    default: return stnn_node(s, l);
  }
}

EpisodeResult run_episode(std::shared_ptr<const Instance> inst, Policy& policy,
                          Rng& rng, EnvOptions options) {
  using Clock = std::chrono::steady_clock;
  EnvState s = EnvState::reset(std::move(inst), options);
  EpisodeResult out;
  while (!s.terminal()) {
    const auto t0 = Clock::now();
    const RobotId l = policy.select_robot(s, rng);
    s.apply_robot_option(l);
    const NodeId v = policy.select_node(s, l, rng);
    out.option_seconds +=
        std::chrono::duration<double>(Clock::now() - t0).count();
    out.reward_sum += s.apply_node_option(v);
    out.options.push_back({l, v});
  }
  out.makespan = s.makespan();
  out.steps = s.step();
  return out;
}

EnvState replay(std::shared_ptr<const Instance> inst,
                const std::vector<JointOption>& options,
                EnvOptions env_options) {
  EnvState s = EnvState::reset(std::move(inst), env_options);
  for (const JointOption& o : options) s.apply(o);
  return s;
}

}  // namespace rmfs
