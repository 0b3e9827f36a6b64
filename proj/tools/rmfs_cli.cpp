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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rmfs/error.hpp"
#include "rmfs/eval.hpp"
#include "rmfs/gradcheck.hpp"
#include "rmfs/heuristics.hpp"
#include "rmfs/htan.hpp"
#include "rmfs/instance.hpp"
#include "rmfs/instance_io.hpp"
#include "rmfs/training.hpp"

namespace {

using namespace rmfs;
namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string dispatch = "any";
};

EnvOptions env_options(const std::string& dispatch) {
  EnvOptions e;
  e.dispatch = dispatch == "idle" ? DispatchRule::kIdleOnly
                                  : DispatchRule::kAnyUnfinished;
  return e;
}

std::vector<std::shared_ptr<const Instance>> shared(std::vector<Instance> v) {
  std::vector<std::shared_ptr<const Instance>> out;
  for (auto& i : v) out.push_back(std::make_shared<const Instance>(std::move(i)));
  return out;
}

PolicyFactory policy_factory(const std::string& name,
                             const std::string& checkpoint) {
  if (name == "htan") {
    if (checkpoint.empty()) {
      throw Error(Errc::kInvalidConfig, "policy htan needs --checkpoint");
    }
    auto net = std::make_shared<Htan>(load_checkpoint(checkpoint));
    return [net] { return std::make_unique<HtanPolicy>(*net, SelectMode::kGreedy); };
  }
  const HeuristicKind kind = heuristic_from_string(name);
  return [kind] { return std::make_unique<HeuristicPolicy>(kind); };
}

HtanConfig net_config(const std::string& size) {
  if (size == "toy") return HtanConfig::toy();
  return HtanConfig{};
}

int run_gen(const std::string& id, int count, const Common& c) {
  const ScaleConfig scale = scale_preset(id);
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(dir);
  std::vector<fs::path> files;
  for (int k = 0; k < count; ++k) {
    Instance inst = generate_instance(scale, Rng::mix(c.seed, static_cast<std::uint64_t>(k)));
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04d.json", id.c_str(), k);
    write_instance(dir / name, inst);
    files.emplace_back(name);
  }
  write_manifest(dir / "manifest.json", files);
  std::cout << count << " instances written to " << dir.string() << '\n';
  return 0;
}

int run_plan(const std::string& policy, const std::string& instance,
             const std::string& checkpoint, const Common& c) {
  auto inst = std::make_shared<const Instance>(read_instance(instance));
  auto make = policy_factory(policy, checkpoint);
  auto p = make();
  EnvOptions env = env_options(c.dispatch);
  env.record_events = true;
  env.record_steps = true;
  Rng rng(c.seed);
  const EpisodeResult ep = run_episode(inst, *p, rng, env);
  nlohmann::json options = nlohmann::json::array();
  for (const JointOption& o : ep.options) options.push_back({o.robot, o.node});
  const nlohmann::json report = {
      {"policy", p->name()},
      {"instance", instance},
      {"makespan_s", ep.makespan},
      {"W_s", w_indicator(ep.makespan, *inst)},
      {"steps", ep.steps},
      {"step_time_s", ep.steps > 0 ? ep.option_seconds / ep.steps : 0.0},
      {"options", options}};
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const EnvState end = replay(inst, ep.options, env);
    std::ofstream(fs::path(c.out) / "report.json") << report.dump(2) << '\n';
    std::ofstream steps(fs::path(c.out) / "steps.jsonl");
    write_step_log(steps, end.step_log());
    std::ofstream events(fs::path(c.out) / "events.jsonl");
    write_event_log(events, end.event_log());
  }
  std::cout << report.dump() << '\n';
  return 0;
}

int run_evaluate(const std::vector<std::string>& policies,
                 const std::string& preset_id, const std::string& instances,
                 int count, const std::string& checkpoint,
                 const std::string& reference, int threads, const Common& c) {
  std::vector<std::shared_ptr<const Instance>> set;
  std::string tag = preset_id;
  if (!instances.empty()) {
    set = shared(load_instances(instances));
    if (tag.empty()) tag = fs::path(instances).stem().string();
  } else {
    if (preset_id.empty()) {
      throw Error(Errc::kInvalidConfig, "evaluate needs --preset or --instances");
    }
    set = make_instances(scale_preset(preset_id), count, c.seed);
  }
  EvalOptions opt;
  opt.seed = c.seed;
  opt.threads = threads;
  opt.env = env_options(c.dispatch);
  opt.preset = tag;

  std::vector<EvalReport> reports;
  for (const std::string& name : policies) {
    reports.push_back(evaluate(policy_factory(name, checkpoint), set, opt));
  }
  if (!reference.empty()) {
    const EvalReport ref =
        evaluate(policy_factory(reference, checkpoint), set, opt);
    for (EvalReport& r : reports) apply_reference(r, ref);
  }
  std::printf("%-8s %-8s %5s %10s %10s %10s %9s %10s\n", "policy", "preset", "n",
              "V", "W", "gap%", "T_s", "t_s");
  for (const EvalReport& r : reports) {
    std::printf("%-8s %-8s %5zu %10.3f %10.3f %10.2f %9.3f %10.6f\n",
                r.policy.c_str(), r.preset.c_str(), r.rows.size(), r.mean, r.w,
                r.gap_percent, r.total_time_s, r.step_time_s);
    if (!c.out.empty()) write_report(c.out, r.policy + "_" + tag, r);
  }
  return 0;
}

void print_epoch(const EpochMetrics& m) {
  std::printf(
      "epoch %3d  makespan %9.3f  loss %10.4g  eval %9.3f  refresh %d/%d  %.1fs\n",
      m.epoch, m.mean_makespan, m.loss, m.refresh.current,
      m.refresh.robot_refreshed ? 1 : 0, m.refresh.node_refreshed ? 1 : 0,
      m.seconds);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-robot task planning for robotic mobile fulfillment"};
  app.require_subcommand(1);
  Common c;
  auto common = [&c](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--dispatch", c.dispatch, "Robot eligibility: any or idle")
        ->check(CLI::IsMember({"any", "idle"}));
  };

  std::string preset_id, instance, checkpoint, policy = "stnn", reference;
  std::string net_size = "full", config_file;
  double logit_clip = 0.0;
  std::vector<std::string> policies;
  int count = 1, threads = 0;

  auto* gen = app.add_subcommand("gen", "Write preset instances");
  gen->add_option("--preset", preset_id, "F1..F16 or U1..U9")->required();
  gen->add_option("--count", count, "Number of instances")->check(CLI::PositiveNumber);
  common(gen);

  auto* plan = app.add_subcommand("plan", "Plan one instance");
  plan->add_option("--policy", policy, "stnn, nn, fn, st, random or htan");
  plan->add_option("--instance", instance, "Instance file")->required();
  plan->add_option("--checkpoint", checkpoint, "Network checkpoint");
  common(plan);

  int epochs = -1, per_epoch = -1, minibatch = -1, eval_n = -1;
  double lr = -1.0, eta = -1.0;
  auto* train_cmd = app.add_subcommand("train", "Train the two-layer network");
  train_cmd->add_option("--config", config_file, "Trainer config JSON");
  train_cmd->add_option("--preset", preset_id, "Training scale preset");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--instances", per_epoch, "Instances per epoch");
  train_cmd->add_option("--minibatch", minibatch);
  train_cmd->add_option("--eval-instances", eval_n);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--eta", eta);
  train_cmd->add_option("--net", net_size)->check(CLI::IsMember({"toy", "full"}));
  train_cmd->add_option("--logit-clip", logit_clip, "Scale of the tanh compatibilities");
  train_cmd->add_option("--checkpoint", checkpoint, "Initial weights");
  common(train_cmd);

  int val_n = 256;
  auto* cur = app.add_subcommand("curriculum", "Staged training on widening scales");
  cur->add_option("--epochs", epochs, "Epochs per stage");
  cur->add_option("--instances", per_epoch, "Instances per epoch");
  cur->add_option("--minibatch", minibatch);
  cur->add_option("--eval-instances", eval_n);
  cur->add_option("--validation-instances", val_n);
  cur->add_option("--lr", lr);
  cur->add_option("--net", net_size)->check(CLI::IsMember({"toy", "full"}));
  cur->add_option("--logit-clip", logit_clip, "Scale of the tanh compatibilities");
  common(cur);

  auto* ev = app.add_subcommand("evaluate", "Batch reports");
  ev->add_option("--policy", policies, "Policies to evaluate")->required();
  ev->add_option("--preset", preset_id, "Scale preset");
  ev->add_option("--instances", instance, "Instance file or manifest");
  int eval_count = 100;
  ev->add_option("--count", eval_count, "Instances drawn from the preset")
      ->check(CLI::PositiveNumber);
  ev->add_option("--checkpoint", checkpoint, "Network checkpoint");
  ev->add_option("--reference", reference, "Policy for the gap column");
  ev->add_option("--threads", threads, "Worker threads");
  common(ev);

  GradcheckOptions gc;
  double tol = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference audit");
  grad->add_option("--draws", gc.draws)->check(CLI::PositiveNumber);
  grad->add_option("--entries", gc.entries_per_draw, "Entries per draw, 0 for all");
  grad->add_option("--tol", tol);
  common(grad);

  auto* oracle = app.add_subcommand("oracle", "Exhaustive optimum of a tiny instance");
  oracle->add_option("--instance", instance, "Instance file")->required();
  common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen(preset_id, count, c);
    if (*plan) return run_plan(policy, instance, checkpoint, c);
    if (*ev) {
      return run_evaluate(policies, preset_id, instance, eval_count, checkpoint,
                          reference, threads, c);
    }
    if (*train_cmd) {
      TrainerConfig cfg;
      if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw Error(Errc::kIo, "cannot open " + config_file);
        nlohmann::json doc;
        try {
          in >> doc;
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::kParse, e.what());
        }
        cfg = TrainerConfig::from_json(doc);
      } else {
        cfg.net = net_config(net_size);
      }
      if (logit_clip > 0) cfg.net.logit_clip = logit_clip;
      if (!preset_id.empty()) cfg.scale = scale_preset(preset_id);
      if (epochs >= 0) cfg.epochs = epochs;
      if (per_epoch > 0) cfg.instances_per_epoch = per_epoch;
      if (minibatch > 0) cfg.minibatch = minibatch;
      if (eval_n > 0) cfg.eval_instances = eval_n;
      if (lr > 0) cfg.lr = lr;
      if (eta > 0) cfg.eta = eta;
      if (train_cmd->get_option("--seed")->count() > 0) cfg.seed = c.seed;
      cfg.env = env_options(c.dispatch);
      cfg.run_dir = c.out;
      TrainState state = TrainState::create(cfg.net, cfg.seed);
      if (!checkpoint.empty()) {
        state.net = load_checkpoint(checkpoint);
        state.baseline = state.net;
      }
      train(state, cfg, print_epoch);
      return 0;
    }
    if (*cur) {
      CurriculumConfig cc = CurriculumConfig::standard();
      cc.base.net = net_config(net_size);
      if (logit_clip > 0) cc.base.net.logit_clip = logit_clip;
      cc.base.seed = c.seed;
      cc.base.env = env_options(c.dispatch);
      cc.base.run_dir = c.out;
      cc.validation_instances = val_n;
      if (eval_n > 0) cc.base.eval_instances = eval_n;
      if (lr > 0) cc.base.lr = lr;
      for (CurriculumStage& s : cc.stages) {
        if (epochs >= 0) s.epochs = epochs;
        if (per_epoch > 0) s.instances_per_epoch = per_epoch;
        if (minibatch > 0) s.minibatch = minibatch;
      }
      TrainState state = TrainState::create(cc.base.net, cc.base.seed);
      const CurriculumResult r = run_curriculum(state, cc, print_epoch);
      std::printf("validation initial %.4f\n", r.initial_validation);
      for (std::size_t i = 0; i < r.stages.size(); ++i) {
        std::printf("validation stage %zu %.4f\n", i + 1, r.stages[i].validation);
      }
      return 0;
    }
    if (*grad) {
      gc.seed = c.seed;
      const GradcheckResult r = htan_gradcheck(gc);
      for (std::size_t i = 0; i < r.draws.size(); ++i) {
        std::printf("draw %3zu  rel %.3e  abs %.3e  entries %d  kinks %d\n", i,
                    r.draws[i].rel_error, r.draws[i].max_abs_error,
                    r.draws[i].entries, r.draws[i].kinks);
      }
      std::printf("worst relative error %.3e (tolerance %.1e)\n",
                  r.worst_rel_error, tol);
      return r.worst_rel_error <= tol ? 0 : 1;
    }
    if (*oracle) {
      auto inst = std::make_shared<const Instance>(read_instance(instance));
      const OracleResult r = oracle_search(inst, env_options(c.dispatch));
      nlohmann::json seq = nlohmann::json::array();
      for (const JointOption& o : r.sequence) seq.push_back({o.robot, o.node});
      std::cout << nlohmann::json{{"makespan_s", r.makespan},
                                  {"sequence", seq},
                                  {"states", r.states_visited}}
                       .dump()
                << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
