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

#ifndef RMFS_ROLLOUT_HPP_
#define RMFS_ROLLOUT_HPP_

#include <vector>

#include "rmfs/htan.hpp"

namespace rmfs {

// Per-layer drivers for batched rollouts. A null net falls back to the
// corresponding STNN layer.
struct LayerDrivers {
  RobotNet* robot = nullptr;
  NodeNet* node = nullptr;
  SelectMode mode = SelectMode::kGreedy;
  ad::NormMode norm = ad::NormMode::kInference;
};

// Advances every state to termination in lockstep; states may start in
// either decision phase. Returns each state's summed reward from its
// starting point, divided by N_r/N_a when `scaled` is set.
std::vector<double> rollout(std::vector<EnvState>& states,
                            const LayerDrivers& drivers, Rng& rng,
                            bool scaled = false);

// Greedy makespans of the given layer drivers on fresh episodes.
std::vector<double> rollout_makespans(
    const std::vector<std::shared_ptr<const Instance>>& instances,
    const LayerDrivers& drivers, EnvOptions options = {});

}  // namespace rmfs

#endif  // RMFS_ROLLOUT_HPP_
