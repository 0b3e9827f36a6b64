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

#include "rmfs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "rmfs/error.hpp"
#include "rmfs/stats.hpp"

namespace rmfs {

double gap(double value, double reference) {
  if (reference == 0.0) {
    throw Error(Errc::kInvalidConfig, "gap: zero reference");
  }
  return (value - reference) / reference * 100.0;
}

double w_indicator(double makespan, const Instance& inst) {
  if (inst.counts().racks == 0) return makespan;
  return makespan * inst.num_robots() / inst.counts().racks;
}

void EvalReport::summarize() {
  std::vector<double> v, w_values;
  double steps = 0.0;
  total_time_s = 0.0;
  for (const EvalRow& r : rows) {
    v.push_back(r.makespan_s);
    w_values.push_back(r.w_s);
    total_time_s += r.solve_time_s;
    steps += r.step_time_s;
  }
  mean = v.empty() ? 0.0 : rmfs::mean(v);
  median = v.empty() ? 0.0 : rmfs::median(v);
  variance = v.size() < 2 ? 0.0 : rmfs::variance(v);
  w = w_values.empty() ? 0.0 : rmfs::mean(w_values);
  step_time_s = rows.empty() ? 0.0 : steps / rows.size();
}

nlohmann::json EvalReport::summary_json() const {
  return {{"policy", policy},     {"preset", preset},
          {"seed", seed},         {"instances", rows.size()},
          {"V", mean},            {"median", median},
          {"variance", variance}, {"W", w},
          {"T_s", total_time_s},  {"t_s", step_time_s},
          {"reference", reference}, {"gap_percent", gap_percent}};
}

void apply_reference(EvalReport& report, const EvalReport& reference) {
  report.reference = reference.policy;
  report.gap_percent = gap(report.mean, reference.mean);
}

int eval_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RMFS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

EvalReport evaluate(const PolicyFactory& make_policy,
                    const std::vector<std::shared_ptr<const Instance>>& instances,
                    const EvalOptions& options) {
  EvalReport report;
  report.preset = options.preset;
  report.seed = options.seed;
  report.rows.resize(instances.size());
  const int workers = std::max(
      1, std::min<int>(eval_threads(options.threads),
                       static_cast<int>(instances.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::string> names(workers);
  std::vector<std::exception_ptr> failures(workers);

  auto work = [&](int w) {
    try {
      std::unique_ptr<Policy> policy = make_policy();
      names[w] = policy->name();
      for (std::size_t i; (i = next.fetch_add(1)) < instances.size();) {
        const Instance& inst = *instances[i];
        Rng rng(Rng::mix(options.seed, i));
        const auto t0 = std::chrono::steady_clock::now();
        const EpisodeResult ep = run_episode(instances[i], *policy, rng, options.env);
        const double solve = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        EvalRow& row = report.rows[i];
        row.instance_id = (inst.preset.empty() ? std::string("inst")
                                                 : inst.preset) +
                          "-" + std::to_string(i);
        row.seed = inst.seed;
        row.makespan_s = ep.makespan;
        row.w_s = w_indicator(ep.makespan, inst);
        row.solve_time_s = solve;
        row.step_time_s = ep.steps > 0 ? ep.option_seconds / ep.steps : 0.0;
      }
    } catch (...) {
      failures[w] = std::current_exception();
      next.store(instances.size());
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  report.policy = names.front();
  if (report.policy.empty()) report.policy = make_policy()->name();
  report.summarize();
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "instance_id,seed,makespan_s,W_s,solve_time_s,step_time_s\n";
  char buf[256];
  for (const EvalRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), ",%llu,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.seed), r.makespan_s, r.w_s,
                  r.solve_time_s, r.step_time_s);
    out << r.instance_id << buf;
  }
}

std::vector<EvalRow> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "instance_id,seed,makespan_s,W_s,solve_time_s,step_time_s") {
    throw Error(Errc::kParse, "report csv: bad header");
  }
  std::vector<EvalRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) {
      throw Error(Errc::kParse, "report csv: line " + std::to_string(lineno) +
                                    " has " + std::to_string(cells.size()) +
                                    " fields");
    }
    try {
      EvalRow r;
      r.instance_id = cells[0];
      r.seed = std::stoull(cells[1]);
      r.makespan_s = std::stod(cells[2]);
      r.w_s = std::stod(cells[3]);
      r.solve_time_s = std::stod(cells[4]);
      r.step_time_s = std::stod(cells[5]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(Errc::kParse,
                  "report csv: bad number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const EvalReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / (stem + ".csv"));
  std::ofstream js(dir / (stem + ".json"));
  if (!csv || !js) throw Error(Errc::kIo, "cannot write report in " + dir.string());
  write_report_csv(csv, report);
  js << report.summary_json().dump(2) << '\n';
}

namespace {

struct OracleSearch {
  OracleResult best;
  std::vector<JointOption> path;

  void visit(const EnvState& s) {
    ++best.states_visited;
    if (s.terminal()) {
      const double m = s.makespan();
      if (m < best.makespan) {
        best.makespan = m;
        best.sequence = path;
      }
      return;
    }
    if (s.phi() >= best.makespan) return;
    for (RobotId l : s.eligible_robots()) {
      EnvState a = s;
      a.apply_robot_option(l);
      for (NodeId v : a.valid_nodes(l)) {
        EnvState b = a;
        b.apply_node_option(v);
        path.push_back({l, v});
        visit(b);
        path.pop_back();
      }
    }
  }
};

}  // namespace

OracleResult oracle_search(std::shared_ptr<const Instance> inst,
                           EnvOptions options) {
  if (inst->num_robots() > 2 || inst->counts().racks > 3 ||
      inst->counts().storages > 3) {
    throw Error(Errc::kTooLarge,
                "oracle: needs at most 2 robots, 3 racks and 3 storages");
  }
  options.record_events = false;
  options.record_steps = false;
  OracleSearch search;
  search.best.makespan = std::numeric_limits<double>::infinity();
  search.visit(EnvState::reset(std::move(inst), options));
  return search.best;
}

}  // namespace rmfs
