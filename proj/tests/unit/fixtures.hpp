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

#ifndef RMFS_TESTS_FIXTURES_HPP_
#define RMFS_TESTS_FIXTURES_HPP_

#include <memory>
#include <vector>

#include "rmfs/env.hpp"
#include "rmfs/heuristics.hpp"
#include "rmfs/instance.hpp"

namespace rmfs::testing {

inline std::shared_ptr<const Instance> make(std::vector<Point> pos, Counts c,
                                            std::vector<NodeId> f,
                                            double nu = 1.0) {
  return std::make_shared<const Instance>(std::move(pos), c, std::move(f),
                                          Bounds{0, 0, 20, 20}, nu);
}

// One robot at (0,0); rack (2,3) bound for station (5,3); storages at (5,4)
// and (0,1). Ids: home 0, rack 1, station 2, storages 3 and 4.
inline std::shared_ptr<const Instance> t1() {
  return make({{0, 0}, {2, 3}, {5, 3}, {5, 4}, {0, 1}}, {1, 1, 1, 2}, {2});
}

// Single robot, rack, station and storage.
inline std::shared_ptr<const Instance> single() {
  return make({{0, 0}, {2, 3}, {5, 3}, {0, 1}}, {1, 1, 1, 1}, {2});
}

// Two robots side by side, two racks mirrored around them, one station each.
inline std::shared_ptr<const Instance> symmetric_pair() {
  return make({{4, 0}, {6, 0}, {4, 5}, {6, 5}, {0, 5}, {10, 5}, {4, 8}, {6, 8}},
              {2, 2, 2, 2}, {4, 5});
}

inline std::shared_ptr<const Instance> sampled(const char* preset,
                                               std::uint64_t seed) {
  return std::make_shared<const Instance>(
      generate_instance(scale_preset(preset), seed));
}

inline std::shared_ptr<const Instance> tiny(std::uint64_t seed) {
  ScaleConfig s;
  s.id = "tiny";
  s.robots = {1, 2};
  s.racks = {1, 3};
  s.storages = {1, 3};
  s.stations = {1, 2};
  return std::make_shared<const Instance>(
      sample_instance(s, fixed_grid_layout(), seed));
}

inline EpisodeResult run(std::shared_ptr<const Instance> inst, HeuristicKind k,
                         std::uint64_t seed = 0, EnvOptions env = {}) {
  HeuristicPolicy p(k);
  Rng rng(seed);
  return run_episode(std::move(inst), p, rng, env);
}

}  // namespace rmfs::testing

#endif  // RMFS_TESTS_FIXTURES_HPP_
