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

#include "rmfs/rollout.hpp"

namespace rmfs {

namespace {

void choose_robots(std::vector<EnvState*>& open, const LayerDrivers& d,
                   Rng& rng) {
  if (d.robot == nullptr) {
    for (EnvState* s : open) s->apply_robot_option(stnn_robot(*s));
    return;
  }
  std::vector<const EnvState*> view(open.begin(), open.end());
  const auto dists = robot_policy_batch(*d.robot, view, d.norm);
  for (std::size_t i = 0; i < open.size(); ++i) {
    open[i]->apply_robot_option(sample_or_greedy(dists[i], d.mode, rng));
  }
}

std::vector<NodeId> choose_nodes(std::vector<EnvState*>& open,
                                 const LayerDrivers& d, Rng& rng) {
  std::vector<NodeId> out(open.size());
  if (d.node == nullptr) {
    for (std::size_t i = 0; i < open.size(); ++i) {
      out[i] = stnn_node(*open[i], *open[i]->pending_robot());
    }
    return out;
  }
  std::vector<const EnvState*> view(open.begin(), open.end());
  const auto dists = node_policy_batch(*d.node, view, d.norm);
  for (std::size_t i = 0; i < open.size(); ++i) {
    out[i] = sample_or_greedy(dists[i], d.mode, rng);
  }
  return out;
}

}  // namespace

std::vector<double> rollout(std::vector<EnvState>& states,
                            const LayerDrivers& drivers, Rng& rng,
                            bool scaled) {
  std::vector<double> total(states.size(), 0.0);
  for (;;) {
    std::vector<EnvState*> need_robot;
    for (EnvState& s : states) {
      if (!s.terminal() && !s.pending_robot()) need_robot.push_back(&s);
    }
    if (!need_robot.empty()) choose_robots(need_robot, drivers, rng);

    std::vector<EnvState*> need_node;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (!states[i].terminal() && states[i].pending_robot()) {
        need_node.push_back(&states[i]);
        where.push_back(i);
      }
    }
    if (need_node.empty()) break;
    const std::vector<NodeId> nodes = choose_nodes(need_node, drivers, rng);
    for (std::size_t i = 0; i < need_node.size(); ++i) {
      const double r = need_node[i]->apply_node_option(nodes[i]);
      total[where[i]] += scaled ? scaled_reward(r, need_node[i]->instance()) : r;
    }
  }
  return total;
}

std::vector<double> rollout_makespans(
    const std::vector<std::shared_ptr<const Instance>>& instances,
    const LayerDrivers& drivers, EnvOptions options) {
  std::vector<EnvState> states;
  states.reserve(instances.size());
  for (const auto& inst : instances) {
    states.push_back(EnvState::reset(inst, options));
  }
  Rng rng(0);
  rollout(states, drivers, rng);
  std::vector<double> out;
  out.reserve(states.size());
  for (const EnvState& s : states) out.push_back(s.makespan());
  return out;
}

}  // namespace rmfs
