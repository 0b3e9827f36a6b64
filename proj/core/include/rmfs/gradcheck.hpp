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

#ifndef RMFS_GRADCHECK_HPP_
#define RMFS_GRADCHECK_HPP_

#include <cstdint>
#include <vector>

#include "rmfs/htan.hpp"

namespace rmfs {

struct GradcheckOptions {
  HtanConfig config = HtanConfig::toy();
  int draws = 50;
  int states = 2;               // batch size per layer
  int entries_per_draw = 0;     // 0: every parameter entry
  double step = 1e-6;
  std::uint64_t seed = 1;
};

struct GradcheckDraw {
  double rel_error = 0.0;  // ||g_analytic - g_numeric|| / max norm
  double max_abs_error = 0.0;
  int entries = 0;  // compared
  int kinks = 0;    // skipped: differences at step and step/2 disagree
};

struct GradcheckResult {
  std::vector<GradcheckDraw> draws;
  double worst_rel_error = 0.0;
};

// Compares reverse-mode gradients of a random weighted sum of robot- and
// node-layer log-probabilities against central differences, each draw with
// freshly initialised parameters and freshly sampled mid-episode states.
// Batch norm runs on batch statistics so its gradient path is covered.
GradcheckResult htan_gradcheck(const GradcheckOptions& options);

}  // namespace rmfs

#endif  // RMFS_GRADCHECK_HPP_
