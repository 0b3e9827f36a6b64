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

#include "rmfs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "rmfs/error.hpp"
#include "rmfs/random.hpp"

namespace rmfs {

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double median(std::vector<double> x) {
  if (x.empty()) return 0.0;
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + mid, x.end());
  const double hi = x[mid];
  if (x.size() % 2 == 1) return hi;
  const double lo = *std::max_element(x.begin(), x.begin() + mid);
  return 0.5 * (lo + hi);
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

TTestResult paired_t_test_greater(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::kInvalidConfig, "paired t-test: sample sizes differ");
  }
  TTestResult r;
  r.n = static_cast<int>(a.size());
  if (r.n < 2) return r;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  r.mean_diff = mean(d);
  r.sd = std::sqrt(variance(d));
  constexpr double kSdFloor = 1e-12;
  if (r.sd < kSdFloor) {
    if (r.mean_diff <= 0.0) {
      r.p = 1.0;
      return r;
    }
    r.sd = kSdFloor;
  }
  r.t = r.mean_diff / (r.sd / std::sqrt(static_cast<double>(r.n)));
  const boost::math::students_t dist(r.n - 1);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

Interval bootstrap_mean_ci(const std::vector<double>& x, double level,
                           int resamples, std::uint64_t seed) {
  if (x.empty() || resamples < 1 || !(level > 0.0 && level < 1.0)) {
    throw Error(Errc::kInvalidConfig, "bootstrap: bad arguments");
  }
  Rng rng(seed);
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<double> means(resamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += x[rng.uniform_int(0, n - 1)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(
        std::clamp(std::floor(q * (resamples - 1) + 0.5), 0.0,
                   static_cast<double>(resamples - 1)));
    return means[k];
  };
  return {at(tail), at(1.0 - tail)};
}

}  // namespace rmfs
