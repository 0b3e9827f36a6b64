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

#ifndef RMFS_EVAL_HPP_
#define RMFS_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmfs/heuristics.hpp"

namespace rmfs {

struct EvalRow {
  std::string instance_id;
  std::uint64_t seed = 0;
  double makespan_s = 0.0;
  double w_s = 0.0;
  double solve_time_s = 0.0;
  double step_time_s = 0.0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
  std::string policy;
  std::string preset;
  std::uint64_t seed = 0;
  std::vector<EvalRow> rows;
  double mean = 0.0;      // V
  double median = 0.0;
  double variance = 0.0;
  double w = 0.0;         // mean of V / alpha
  double total_time_s = 0.0;  // T
  double step_time_s = 0.0;   // t, mean per joint option
  double gap_percent = 0.0;   // against `reference`, 0 when unset
  std::string reference;

  // Recomputes the aggregates from `rows`.
  void summarize();
  nlohmann::json summary_json() const;
};

// Percent by which `value` exceeds `reference`.
double gap(double value, double reference);
// alpha = N_r / N_a; instances without racks keep the makespan.
double w_indicator(double makespan, const Instance& inst);

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

struct EvalOptions {
  std::uint64_t seed = 0;  // per-instance streams for stochastic policies
  int threads = 0;         // 0: RMFS_THREADS, else 1
  EnvOptions env;
  std::string preset;
};

// Greedy evaluation of one policy over an instance set. Each worker owns a
// policy built by `make_policy`.
EvalReport evaluate(const PolicyFactory& make_policy,
                    const std::vector<std::shared_ptr<const Instance>>& instances,
                    const EvalOptions& options = {});

// Sets gap_percent from the per-report means.
void apply_reference(EvalReport& report, const EvalReport& reference);

int eval_threads(int requested);

void write_report_csv(std::ostream& out, const EvalReport& report);
std::vector<EvalRow> read_report_csv(std::istream& in);
void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const EvalReport& report);

struct OracleResult {
  double makespan = 0.0;
  std::vector<JointOption> sequence;
  long long states_visited = 0;
};

// Depth-first enumeration of every mask-valid joint-option sequence through
// the environment, pruned on the running makespan. Limited to 2 robots,
// 3 racks and 3 storages.
OracleResult oracle_search(std::shared_ptr<const Instance> inst,
                           EnvOptions options = {});

}  // namespace rmfs

#endif  // RMFS_EVAL_HPP_
