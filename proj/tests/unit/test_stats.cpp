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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rmfs/error.hpp"
#include "rmfs/stats.hpp"
#include "rmfs/training.hpp"

namespace rmfs {
namespace {

// Upper tail of Student's t by composite Simpson integration of the density.
double t_upper_tail(double t, int dof) {
  const double nu = dof;
  const double c = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) /
                   std::sqrt(nu * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  // Integrate over u in (0, 1] with x = t + u / (1 - u) to cover [t, inf).
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / n * (1 - 1e-9);
    const double x = t + u / (1 - u);
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * pdf(x) / ((1 - u) * (1 - u));
  }
  return acc * (1 - 1e-9) / n / 3.0;
}

TEST(Descriptive, MeanMedianVariance) {
  EXPECT_DOUBLE_EQ(mean({1, 2, 3, 4}), 2.5);
  EXPECT_DOUBLE_EQ(median({5, 1, 3}), 3.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_DOUBLE_EQ(variance({1, 2, 3, 4, 5}), 2.5);
  EXPECT_DOUBLE_EQ(variance({7}), 0.0);
}

TEST(PairedTTest, HandComputedCase) {
  const TTestResult r = paired_t_test_greater({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
  EXPECT_EQ(r.n, 5);
  EXPECT_DOUBLE_EQ(r.mean_diff, 3.0);
  EXPECT_NEAR(r.sd, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(r.t, 3.0 / (std::sqrt(2.5) / std::sqrt(5.0)), 1e-12);
  EXPECT_NEAR(r.t, 4.243, 5e-4);
  EXPECT_NEAR(r.p, 0.0066, 5e-5);
  EXPECT_NEAR(r.p, t_upper_tail(r.t, 4), 1e-7);
}

TEST(PairedTTest, AgreesWithIntegratedDensity) {
  const std::vector<std::vector<double>> diffs = {
      {0.5, -0.2, 1.1, 0.3}, {2, 2.5, 1, 0, 3, 1.5, -1}, {-1, -2, 0.5}};
  for (const auto& d : diffs) {
    const std::vector<double> zero(d.size(), 0.0);
    const TTestResult r = paired_t_test_greater(d, zero);
    if (r.mean_diff > 0) {
      EXPECT_NEAR(r.p, t_upper_tail(r.t, r.n - 1), 1e-7);
    } else {
      EXPECT_GT(r.p, 0.5);
    }
  }
}

TEST(PairedTTest, IdenticalSamplesGivePOne) {
  const TTestResult r = paired_t_test_greater({3, 1, 4}, {3, 1, 4});
  EXPECT_EQ(r.p, 1.0);
  EXPECT_FALSE(refresh_decision({3, 1, 4}, {3, 1, 4}, 0.05));
}

TEST(PairedTTest, ConstantImprovementRefreshes) {
  TTestResult r;
  EXPECT_TRUE(refresh_decision({2, 3, 4, 5}, {1, 2, 3, 4}, 0.05, &r));
  EXPECT_LT(r.p, 1e-6);
}

TEST(PairedTTest, RefreshThresholds) {
  const std::vector<double> cur = {1, 2, 3, 4, 5};
  const std::vector<double> base(5, 0.0);
  EXPECT_TRUE(refresh_decision(cur, base, 0.05));
  EXPECT_FALSE(refresh_decision(cur, base, 0.005));
}

TEST(Bootstrap, IntervalBracketsMeanAndIsSeeded) {
  std::vector<double> x;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) x.push_back(10 + 5 * rng.uniform());
  const Interval a = bootstrap_mean_ci(x, 0.95, 2000, 1);
  const Interval b = bootstrap_mean_ci(x, 0.95, 2000, 1);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_LT(a.lo, mean(x));
  EXPECT_GT(a.hi, mean(x));
  // Standard error of U(10,15) mean over 200 draws is about 0.102.
  EXPECT_NEAR(a.hi - a.lo, 2 * 1.96 * 5 / std::sqrt(12.0 * 200), 0.08);
  const Interval c = bootstrap_mean_ci({4, 4, 4}, 0.95, 100, 2);
  EXPECT_EQ(c.lo, 4.0);
  EXPECT_EQ(c.hi, 4.0);
}

}  // namespace
}  // namespace rmfs
