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

#ifndef RMFS_TRAINING_HPP_
#define RMFS_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmfs/htan.hpp"
#include "rmfs/instance.hpp"
#include "rmfs/stats.hpp"

namespace rmfs {

struct TrainerConfig {
  ScaleConfig scale = scale_preset("F1");
  int epochs = 30;
  int instances_per_epoch = 512;
  int minibatch = 512;
  double alpha = 0.05;   // significance of the baseline refresh test
  double eta = 0.99;     // behaviour-cloning weight decays as eta^epoch
  double c_robot = 10.0;
  double c_node = 10.0;
  double lr = 1e-4;
  double lr_decay = 0.99;
  double gamma = 1.0;
  int eval_instances = 256;
  bool scale_rewards = false;
  std::uint64_t seed = 1;
  HtanConfig net;
  EnvOptions env;
  std::filesystem::path run_dir;  // empty: no files written

  void validate() const;
  nlohmann::json to_json() const;
  static TrainerConfig from_json(const nlohmann::json& doc);
};

struct TrajectoryStep {
  EnvState robot_state;  // awaiting the robot option
  EnvState node_state;   // awaiting the node option
  RobotId robot = -1;
  NodeId node = -1;
  RobotId robot_label = -1;
  NodeId node_label = -1;
  bool robot_forced = false;
  bool node_forced = false;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double makespan = 0.0;

  // G_m: reward suffix sums (gamma = 1).
  std::vector<double> returns() const;
};

// Runs the policy on every instance in lockstep, sampling (or taking the
// argmax of) both layers and recording STNN labels. Forced decisions are
// resolved without the network. Batch norm uses batch statistics and
// updates its running averages.
std::vector<Trajectory> collect(Htan& net,
                                const std::vector<std::shared_ptr<const Instance>>& batch,
                                Rng& rng, const TrainerConfig& cfg,
                                SelectMode mode = SelectMode::kSample);

// b^r: from each robot-decision state, STNN robot layer with the greedy
// node baseline net. b^g: from each node-decision state, STNN node layer
// with the greedy robot baseline net. Entries for forced decisions are 0.
struct Baselines {
  std::vector<std::vector<double>> robot;
  std::vector<std::vector<double>> node;
};

Baselines counterfactual_baselines(const std::vector<Trajectory>& trajs,
                                   Htan& baseline, bool scaled);

double counterfactual_baseline_robot(const EnvState& robot_state,
                                     NodeNet& node_baseline, bool scaled);
double counterfactual_baseline_node(const EnvState& node_state,
                                    RobotNet& robot_baseline, bool scaled);

struct LossValues {
  double rl = 0.0;
  double bc = 0.0;
  double total = 0.0;
};

// Evaluates L = eta^k L_BC + (1 - eta^k) L_RL for the batch and, when
// `backprop` is set, accumulates dL/dtheta into the parameter gradients.
// Each step's forward pass is replayed with the same batch so batch-norm
// statistics match the collection pass.
LossValues accumulate_losses(Htan& net, const std::vector<Trajectory>& trajs,
                             const Baselines& baselines, int epoch,
                             const TrainerConfig& cfg, bool backprop = true);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, AdamOptions options);

  void step();
  // Points the optimizer at the same parameters after the owning network
  // moved; moments are matched by position.
  void rebind(std::vector<ad::Parameter*> params);
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Matrix> m_, v_;
  AdamOptions options_;
  long t_ = 0;
};

// True when `current` returns beat `baseline` returns under a one-sided
// paired t-test at significance alpha.
bool refresh_decision(const std::vector<double>& current,
                      const std::vector<double>& baseline, double alpha,
                      TTestResult* test = nullptr);

struct RefreshResult {
  double current = 0.0;     // mean greedy return of the joint policy
  double robot_mix = 0.0;   // robot baseline net + current node net
  double node_mix = 0.0;    // current robot net + node baseline net
  TTestResult robot_test;
  TTestResult node_test;
  bool robot_refreshed = false;
  bool node_refreshed = false;
};

RefreshResult baseline_refresh(
    Htan& net, Htan& baseline,
    const std::vector<std::shared_ptr<const Instance>>& eval_batch,
    double alpha, const EnvOptions& env, bool scaled);

struct EpochMetrics {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_makespan = 0.0;
  double loss_rl = 0.0;
  double loss_bc = 0.0;
  double loss = 0.0;
  double lr = 0.0;
  RefreshResult refresh;
  double seconds = 0.0;
};

struct TrainState {
  Htan net;
  Htan baseline;
  std::unique_ptr<Adam> optimizer;
  int epochs_done = 0;

  static TrainState create(const HtanConfig& config, std::uint64_t seed);
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Training loop: collect, baselines, losses, Adam update per
// minibatch, significance-tested baseline refresh per epoch.
std::vector<EpochMetrics> train(TrainState& state, const TrainerConfig& cfg,
                                const EpochCallback& on_epoch = {});

// Instances for a seeded namespace: training uses stream 0, refresh
// evaluation stream 1, validation and tests their own.
std::vector<std::shared_ptr<const Instance>> make_instances(
    const ScaleConfig& scale, int count, std::uint64_t seed);

struct StageDelta {
  int robots_lo = 0, robots_hi = 0;
  int racks_lo = 0, racks_hi = 0;
  int storages_lo = 0, storages_hi = 0;
};

// N^- <- max(1, N^- - delta^-), N^+ <- N^+ + delta^+ for each parameter.
ScaleConfig widen(const ScaleConfig& scale, const StageDelta& delta);

struct CurriculumStage {
  StageDelta delta;
  int epochs = 10;
  int instances_per_epoch = 64;
  int minibatch = 64;
  std::string map_id;     // empty: keep the previous stage's map
  IntRange stations{2, 2};
};

struct CurriculumConfig {
  ScaleConfig initial = scale_preset("F2");
  std::vector<CurriculumStage> stages;
  TrainerConfig base;
  std::string validation_preset = "U3";
  int validation_instances = 256;

  // The three-stage schedule: fixed F2, a small random widening, then
  // U(1,5) robots, U(1,10) racks, U(1,20) storages.
  static CurriculumConfig standard();
};

struct StageResult {
  ScaleConfig scale;
  std::vector<EpochMetrics> epochs;
  double validation = 0.0;  // mean scaled greedy return
};

struct CurriculumResult {
  double initial_validation = 0.0;
  std::vector<StageResult> stages;
};

CurriculumResult run_curriculum(TrainState& state, const CurriculumConfig& cfg,
                                const EpochCallback& on_epoch = {});

// Mean scaled greedy return of the joint policy.
double validation_return(
    Htan& net, const std::vector<std::shared_ptr<const Instance>>& instances,
    const EnvOptions& env);

}  // namespace rmfs

#endif  // RMFS_TRAINING_HPP_
