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

#ifndef RMFS_STATS_HPP_
#define RMFS_STATS_HPP_

#include <cstdint>
#include <vector>

namespace rmfs {

double mean(const std::vector<double>& x);
double median(std::vector<double> x);
// Unbiased sample variance; 0 for fewer than two samples.
double variance(const std::vector<double>& x);

struct TTestResult {
  int n = 0;
  double mean_diff = 0.0;
  double sd = 0.0;
  double t = 0.0;
  double p = 1.0;
};

// One-sided paired t-test of H1: mean(a_i - b_i) > 0. A standard deviation
// below 1e-12 is floored to 1e-12; with no positive mean difference the
// p-value is 1.
TTestResult paired_t_test_greater(const std::vector<double>& a,
                                  const std::vector<double>& b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap interval for the mean.
Interval bootstrap_mean_ci(const std::vector<double>& x, double level,
                           int resamples, std::uint64_t seed);

}  // namespace rmfs

#endif  // RMFS_STATS_HPP_
