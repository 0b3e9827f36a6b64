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

#include "rmfs/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rmfs/error.hpp"
#include "rmfs/heuristics.hpp"
#include "rmfs/rollout.hpp"

namespace rmfs {

using ad::NormMode;
using nlohmann::json;

void TrainerConfig::validate() const {
  scale.validate();
  net.validate();
  auto bad = [](const std::string& why) {
    throw Error(Errc::kInvalidConfig, "trainer: " + why);
  };
  if (epochs < 0) bad("epochs < 0");
  if (instances_per_epoch < 1 || minibatch < 1) bad("empty batches");
  if (!(eta > 0.0 && eta < 1.0)) bad("eta must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha must lie in (0, 1)");
  if (gamma != 1.0) bad("only gamma = 1 is supported");
  if (!(lr > 0.0) || !(lr_decay > 0.0)) bad("learning rate must be positive");
  if (c_robot < 0.0 || c_node < 0.0) bad("negative cloning coefficient");
  if (eval_instances < 2) bad("refresh test needs at least two instances");
}

namespace {

json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }
IntRange range_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

json TrainerConfig::to_json() const {
  return {{"scale",
           {{"id", scale.id},
            {"robots", range_json(scale.robots)},
            {"racks", range_json(scale.racks)},
            {"storages", range_json(scale.storages)},
            {"stations", range_json(scale.stations)},
            {"batch_size", scale.batch_size},
            {"map_id", scale.map_id}}},
          {"epochs", epochs},
          {"instances_per_epoch", instances_per_epoch},
          {"minibatch", minibatch},
          {"alpha", alpha},
          {"eta", eta},
          {"c_robot", c_robot},
          {"c_node", c_node},
          {"lr", lr},
          {"lr_decay", lr_decay},
          {"gamma", gamma},
          {"eval_instances", eval_instances},
          {"scale_rewards", scale_rewards},
          {"seed", seed},
          {"net",
           {{"dim", net.dim},
            {"heads", net.heads},
            {"layers", net.layers},
            {"ff_hidden", net.ff_hidden},
            {"logit_clip", net.logit_clip}}},
          {"dispatch", env.dispatch == DispatchRule::kIdleOnly ? "idle_only"
                                                               : "any_unfinished"}};
}

TrainerConfig TrainerConfig::from_json(const json& doc) {
  TrainerConfig c;
  try {
    if (doc.contains("scale")) {
      const json& s = doc.at("scale");
      c.scale.id = s.value("id", std::string("custom"));
      c.scale.robots = range_from(s.at("robots"));
      c.scale.racks = range_from(s.at("racks"));
      c.scale.storages = range_from(s.at("storages"));
      c.scale.stations = range_from(s.at("stations"));
      c.scale.batch_size = s.value("batch_size", 64);
      c.scale.map_id = s.value("map_id", std::string());
    }
    c.epochs = doc.value("epochs", c.epochs);
    c.instances_per_epoch = doc.value("instances_per_epoch", c.instances_per_epoch);
    c.minibatch = doc.value("minibatch", c.minibatch);
    c.alpha = doc.value("alpha", c.alpha);
    c.eta = doc.value("eta", c.eta);
    c.c_robot = doc.value("c_robot", c.c_robot);
    c.c_node = doc.value("c_node", c.c_node);
    c.lr = doc.value("lr", c.lr);
    c.lr_decay = doc.value("lr_decay", c.lr_decay);
    c.gamma = doc.value("gamma", c.gamma);
    c.eval_instances = doc.value("eval_instances", c.eval_instances);
    c.scale_rewards = doc.value("scale_rewards", c.scale_rewards);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("net")) {
      const json& n = doc.at("net");
      c.net.dim = n.value("dim", c.net.dim);
      c.net.heads = n.value("heads", c.net.heads);
      c.net.layers = n.value("layers", c.net.layers);
      c.net.ff_hidden = n.value("ff_hidden", c.net.ff_hidden);
      c.net.logit_clip = n.value("logit_clip", c.net.logit_clip);
    }
    if (doc.value("dispatch", std::string()) == "idle_only") {
      c.env.dispatch = DispatchRule::kIdleOnly;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kParse, std::string("trainer config: ") + e.what());
  }
  return c;
}

std::vector<double> Trajectory::returns() const {
  std::vector<double> g(steps.size(), 0.0);
  double acc = 0.0;
  for (std::size_t m = steps.size(); m-- > 0;) {
    acc += steps[m].reward;
    g[m] = acc;
  }
  return g;
}

std::vector<Trajectory> collect(
    Htan& net, const std::vector<std::shared_ptr<const Instance>>& batch,
    Rng& rng, const TrainerConfig& cfg, SelectMode mode) {
  std::vector<EnvState> states;
  states.reserve(batch.size());
  for (const auto& inst : batch) states.push_back(EnvState::reset(inst, cfg.env));
  std::vector<Trajectory> trajs(batch.size());

  for (;;) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (!states[i].terminal()) open.push_back(i);
    }
    if (open.empty()) break;

    std::vector<const EnvState*> view;
    for (std::size_t i : open) view.push_back(&states[i]);
    const auto robot_dists = robot_policy_batch(net.robot, view, NormMode::kTrain);
    std::vector<TrajectoryStep> steps(open.size());
    for (std::size_t j = 0; j < open.size(); ++j) {
      EnvState& s = states[open[j]];
      TrajectoryStep& st = steps[j];
      st.robot_state = s;
      st.robot_label = stnn_robot(s);
      st.robot_forced = forced_robot(s) >= 0;
      st.robot = sample_or_greedy(robot_dists[j], mode, rng);
      s.apply_robot_option(st.robot);
    }

    const auto node_dists = node_policy_batch(net.node, view, NormMode::kTrain);
    for (std::size_t j = 0; j < open.size(); ++j) {
      EnvState& s = states[open[j]];
      TrajectoryStep& st = steps[j];
      st.node_state = s;
      st.node_label = stnn_node(s, st.robot);
      st.node_forced = forced_node(s) >= 0;
      st.node = sample_or_greedy(node_dists[j], mode, rng);
      const double r = s.apply_node_option(st.node);
      st.reward = cfg.scale_rewards ? scaled_reward(r, s.instance()) : r;
      trajs[open[j]].steps.push_back(std::move(st));
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    trajs[i].makespan = states[i].makespan();
  }
  return trajs;
}

double counterfactual_baseline_robot(const EnvState& robot_state,
                                     NodeNet& node_baseline, bool scaled) {
  std::vector<EnvState> s{robot_state};
  Rng rng(0);
  return rollout(s, {nullptr, &node_baseline, SelectMode::kGreedy,
                     NormMode::kInference},
                 rng, scaled)
      .front();
}

double counterfactual_baseline_node(const EnvState& node_state,
                                    RobotNet& robot_baseline, bool scaled) {
  std::vector<EnvState> s{node_state};
  Rng rng(0);
  return rollout(s, {&robot_baseline, nullptr, SelectMode::kGreedy,
                     NormMode::kInference},
                 rng, scaled)
      .front();
}

Baselines counterfactual_baselines(const std::vector<Trajectory>& trajs,
                                   Htan& baseline, bool scaled) {
  Baselines out;
  out.robot.resize(trajs.size());
  out.node.resize(trajs.size());
  std::vector<EnvState> rs, ns;
  std::vector<std::pair<std::size_t, std::size_t>> ri, ni;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& steps = trajs[i].steps;
    out.robot[i].assign(steps.size(), 0.0);
    out.node[i].assign(steps.size(), 0.0);
    for (std::size_t m = 0; m < steps.size(); ++m) {
      if (!steps[m].robot_forced) {
        rs.push_back(steps[m].robot_state);
        ri.emplace_back(i, m);
      }
      if (!steps[m].node_forced) {
        ns.push_back(steps[m].node_state);
        ni.emplace_back(i, m);
      }
    }
  }
  Rng rng(0);
  if (!rs.empty()) {
    const auto v = rollout(rs, {nullptr, &baseline.node, SelectMode::kGreedy,
                                NormMode::kInference},
                           rng, scaled);
    for (std::size_t k = 0; k < v.size(); ++k) out.robot[ri[k].first][ri[k].second] = v[k];
  }
  if (!ns.empty()) {
    const auto v = rollout(ns, {&baseline.robot, nullptr, SelectMode::kGreedy,
                                NormMode::kInference},
                           rng, scaled);
    for (std::size_t k = 0; k < v.size(); ++k) out.node[ni[k].first][ni[k].second] = v[k];
  }
  return out;
}

LossValues accumulate_losses(Htan& net, const std::vector<Trajectory>& trajs,
                             const Baselines& baselines, int epoch,
                             const TrainerConfig& cfg, bool backprop) {
  const double w = std::pow(cfg.eta, epoch);
  const double inv_b = 1.0 / static_cast<double>(trajs.size());
  std::vector<std::vector<double>> returns;
  std::size_t horizon = 0;
  for (const Trajectory& t : trajs) {
    returns.push_back(t.returns());
    horizon = std::max(horizon, t.steps.size());
  }
  LossValues out;

  for (std::size_t m = 0; m < horizon; ++m) {
    for (int layer = 0; layer < 2; ++layer) {
      const bool robot_layer = layer == 0;
      std::vector<const EnvState*> view;
      std::vector<std::size_t> owner;
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        if (m >= trajs[i].steps.size()) continue;
        const TrajectoryStep& st = trajs[i].steps[m];
        if (robot_layer ? st.robot_forced : st.node_forced) continue;
        view.push_back(robot_layer ? &st.robot_state : &st.node_state);
        owner.push_back(i);
      }
      if (view.empty()) continue;

      ad::Tape tape(backprop);
      const PolicyOutput p =
          robot_layer
              ? robot_log_probs(net.robot, tape, view, NormMode::kTrainFrozen)
              : node_log_probs(net.node, tape, view, NormMode::kTrainFrozen);
      const ad::Matrix& lp = p.log_probs.value();
      const double c = robot_layer ? cfg.c_robot : cfg.c_node;
      std::vector<int> index;
      std::vector<double> weight;
      for (std::size_t j = 0; j < view.size(); ++j) {
        const std::size_t i = owner[j];
        const TrajectoryStep& st = trajs[i].steps[m];
        const Instance& inst = view[j]->instance();
        const int base = p.rows[j].begin;
        const int taken = base + (robot_layer ? st.robot : node_row(inst, st.node));
        const int label =
            base + (robot_layer ? st.robot_label : node_row(inst, st.node_label));
        const double b = robot_layer ? baselines.robot[i][m] : baselines.node[i][m];
        const double advantage = returns[i][m] - b;
        out.rl += -advantage * inv_b * lp(taken, 0);
        out.bc += -c * inv_b * lp(label, 0);
        index.push_back(taken);
        weight.push_back(-(1.0 - w) * advantage * inv_b);
        index.push_back(label);
        weight.push_back(-w * c * inv_b);
      }
      if (backprop) {
        ad::Var loss = ad::weighted_sum(ad::pick(p.log_probs, index), weight);
        if (!std::isfinite(loss.value()(0, 0))) {
          throw Error(Errc::kNonFiniteLoss, "non-finite loss at step " +
                                                std::to_string(m));
        }
        tape.backward(loss);
      }
    }
  }
  out.total = w * out.bc + (1.0 - w) * out.rl;
  if (!std::isfinite(out.total)) {
    throw Error(Errc::kNonFiniteLoss, "non-finite training loss");
  }
  return out;
}

Adam::Adam(std::vector<ad::Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (ad::Parameter* p : params_) {
    m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::rebind(std::vector<ad::Parameter*> params) {
  if (params.size() != params_.size()) {
    throw Error(Errc::kInvalidConfig, "adam: parameter set changed");
  }
  params_ = std::move(params);
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= options_.lr * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

bool refresh_decision(const std::vector<double>& current,
                      const std::vector<double>& baseline, double alpha,
                      TTestResult* test) {
  const TTestResult t = paired_t_test_greater(current, baseline);
  if (test != nullptr) *test = t;
  return t.p < alpha;
}

namespace {

std::vector<double> greedy_returns(
    const std::vector<std::shared_ptr<const Instance>>& instances,
    RobotNet* robot, NodeNet* node, const EnvOptions& env, bool scaled) {
  std::vector<EnvState> states;
  states.reserve(instances.size());
  for (const auto& inst : instances) states.push_back(EnvState::reset(inst, env));
  Rng rng(0);
  return rollout(states, {robot, node, SelectMode::kGreedy, NormMode::kInference},
                 rng, scaled);
}

}  // namespace

RefreshResult baseline_refresh(
    Htan& net, Htan& baseline,
    const std::vector<std::shared_ptr<const Instance>>& eval_batch,
    double alpha, const EnvOptions& env, bool scaled) {
  RefreshResult r;
  const auto cur = greedy_returns(eval_batch, &net.robot, &net.node, env, scaled);
  const auto rmix =
      greedy_returns(eval_batch, &baseline.robot, &net.node, env, scaled);
  const auto gmix =
      greedy_returns(eval_batch, &net.robot, &baseline.node, env, scaled);
  r.current = mean(cur);
  r.robot_mix = mean(rmix);
  r.node_mix = mean(gmix);
  r.robot_refreshed = refresh_decision(cur, rmix, alpha, &r.robot_test);
  r.node_refreshed = refresh_decision(cur, gmix, alpha, &r.node_test);
  if (r.robot_refreshed) baseline.robot = net.robot;
  if (r.node_refreshed) baseline.node = net.node;
  return r;
}

TrainState TrainState::create(const HtanConfig& config, std::uint64_t seed) {
  TrainState s{Htan::create(config, seed), {}, nullptr, 0};
  s.baseline = s.net;
  return s;
}

std::vector<std::shared_ptr<const Instance>> make_instances(
    const ScaleConfig& scale, int count, std::uint64_t seed) {
  const MapLayout layout = layout_for(scale);
  std::vector<std::shared_ptr<const Instance>> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    out.push_back(std::make_shared<const Instance>(
        sample_instance(scale, layout, Rng::mix(seed, static_cast<std::uint64_t>(k)))));
  }
  return out;
}

namespace {

void write_metrics_header(std::ostream& out) {
  out << "epoch,mean_return,mean_makespan,loss_rl,loss_bc,loss,lr,"
         "eval_current,eval_robot_mix,eval_node_mix,p_robot,p_node,"
         "robot_refreshed,node_refreshed,seconds\n";
}

void write_metrics_row(std::ostream& out, const EpochMetrics& e) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%.6f,%.6f,%.6g,%.6g,%.6g,%.6g,%.6f,%.6f,%.6f,%.6g,%.6g,%d,"
                "%d,%.3f\n",
                e.epoch, e.mean_return, e.mean_makespan, e.loss_rl, e.loss_bc,
                e.loss, e.lr, e.refresh.current, e.refresh.robot_mix,
                e.refresh.node_mix, e.refresh.robot_test.p,
                e.refresh.node_test.p, e.refresh.robot_refreshed ? 1 : 0,
                e.refresh.node_refreshed ? 1 : 0, e.seconds);
  out << buf;
}

}  // namespace

std::vector<EpochMetrics> train(TrainState& state, const TrainerConfig& cfg,
                                const EpochCallback& on_epoch) {
  cfg.validate();
  if (!(state.net.config == cfg.net)) {
    throw Error(Errc::kInvalidConfig, "trainer: network config mismatch");
  }
  if (!state.optimizer) {
    state.optimizer =
        std::make_unique<Adam>(state.net.parameters(), AdamOptions{cfg.lr});
  } else {
    state.optimizer->rebind(state.net.parameters());
  }

  std::ofstream metrics;
  if (!cfg.run_dir.empty()) {
    std::filesystem::create_directories(cfg.run_dir);
    std::ofstream(cfg.run_dir / "config.json") << cfg.to_json().dump(2) << '\n';
    metrics.open(cfg.run_dir / "metrics.csv");
    if (!metrics) throw Error(Errc::kIo, "cannot write metrics.csv");
    write_metrics_header(metrics);
  }

  const std::uint64_t train_ns = Rng::mix(cfg.seed, 0);
  const std::uint64_t eval_ns = Rng::mix(cfg.seed, 1);
  Rng sample_rng(Rng::mix(cfg.seed, 3));
  std::vector<EpochMetrics> history;

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const int k = state.epochs_done;
    EpochMetrics em;
    em.epoch = k;
    em.lr = cfg.lr * std::pow(cfg.lr_decay, k);
    state.optimizer->set_lr(em.lr);

    int done = 0;
    int batches = 0;
    double ret_sum = 0.0, mk_sum = 0.0;
    while (done < cfg.instances_per_epoch) {
      const int n = std::min(cfg.minibatch, cfg.instances_per_epoch - done);
      const auto batch = make_instances(
          cfg.scale, n,
          Rng::mix(train_ns, static_cast<std::uint64_t>(k) * 1000003u + batches));
      const auto trajs = collect(state.net, batch, sample_rng, cfg);
      const Baselines b =
          counterfactual_baselines(trajs, state.baseline, cfg.scale_rewards);
      state.net.zero_grad();
      const LossValues loss = accumulate_losses(state.net, trajs, b, k, cfg);
      state.optimizer->step();
      for (const Trajectory& t : trajs) {
        const auto g = t.returns();
        ret_sum += g.empty() ? 0.0 : g.front();
        mk_sum += t.makespan;
      }
      em.loss_rl += loss.rl;
      em.loss_bc += loss.bc;
      em.loss += loss.total;
      done += n;
      ++batches;
    }
    em.loss_rl /= batches;
    em.loss_bc /= batches;
    em.loss /= batches;
    em.mean_return = ret_sum / done;
    em.mean_makespan = mk_sum / done;

    const auto eval_batch = make_instances(
        cfg.scale, cfg.eval_instances,
        Rng::mix(eval_ns, static_cast<std::uint64_t>(k)));
    em.refresh = baseline_refresh(state.net, state.baseline, eval_batch,
                                  cfg.alpha, cfg.env, cfg.scale_rewards);
    em.seconds = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    ++state.epochs_done;
    history.push_back(em);

    if (!cfg.run_dir.empty()) {
      write_metrics_row(metrics, em);
      metrics.flush();
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.bin", k);
      save_checkpoint(cfg.run_dir / name, state.net);
      save_checkpoint(cfg.run_dir / "latest.bin", state.net);
      save_checkpoint(cfg.run_dir / "baseline.bin", state.baseline);
    }
    if (on_epoch) on_epoch(em);
  }
  return history;
}

ScaleConfig widen(const ScaleConfig& scale, const StageDelta& d) {
  ScaleConfig out = scale;
  auto apply = [](IntRange r, int lo, int hi) {
    return IntRange{std::max(1, r.lo - lo), r.hi + hi};
  };
  out.robots = apply(scale.robots, d.robots_lo, d.robots_hi);
  out.racks = apply(scale.racks, d.racks_lo, d.racks_hi);
  out.storages = apply(scale.storages, d.storages_lo, d.storages_hi);
  return out;
}

CurriculumConfig CurriculumConfig::standard() {
  CurriculumConfig c;
  c.base.scale_rewards = true;
  CurriculumStage s1;
  CurriculumStage s2;
  s2.delta = {1, 1, 2, 3, 4, 6};
  s2.map_id = "M3";
  s2.stations = {1, 6};
  CurriculumStage s3;
  s3.delta = {0, 2, 1, 3, 3, 6};
  s3.map_id = "M3";
  s3.stations = {1, 6};
  c.stages = {s1, s2, s3};
  return c;
}

double validation_return(
    Htan& net, const std::vector<std::shared_ptr<const Instance>>& instances,
    const EnvOptions& env) {
  return mean(greedy_returns(instances, &net.robot, &net.node, env, true));
}

CurriculumResult run_curriculum(TrainState& state, const CurriculumConfig& cfg,
                                const EpochCallback& on_epoch) {
  if (cfg.stages.empty()) {
    throw Error(Errc::kInvalidConfig, "curriculum: no stages");
  }
  const auto validation =
      make_instances(scale_preset(cfg.validation_preset),
                     cfg.validation_instances, Rng::mix(cfg.base.seed, 2));
  CurriculumResult result;
  result.initial_validation = validation_return(state.net, validation, cfg.base.env);

  std::ofstream summary;
  if (!cfg.base.run_dir.empty()) {
    std::filesystem::create_directories(cfg.base.run_dir);
    summary.open(cfg.base.run_dir / "curriculum.csv");
    summary << "stage,robots_lo,robots_hi,racks_lo,racks_hi,storages_lo,"
               "storages_hi,validation_return\n";
    summary << "0,,,,,,," << result.initial_validation << '\n';
  }

  ScaleConfig scale = cfg.initial;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const CurriculumStage& st = cfg.stages[i];
    scale = widen(scale, st.delta);
    if (!st.map_id.empty()) scale.map_id = st.map_id;
    scale.stations = st.stations;
    scale.id = "stage" + std::to_string(i + 1);

    TrainerConfig tc = cfg.base;
    tc.scale = scale;
    tc.epochs = st.epochs;
    tc.instances_per_epoch = st.instances_per_epoch;
    tc.minibatch = st.minibatch;
    tc.scale_rewards = true;
    tc.seed = Rng::mix(cfg.base.seed, 10 + i);
    if (!cfg.base.run_dir.empty()) tc.run_dir = cfg.base.run_dir / scale.id;

    StageResult sr;
    sr.scale = scale;
    sr.epochs = train(state, tc, on_epoch);
    sr.validation = validation_return(state.net, validation, cfg.base.env);
    if (summary.is_open()) {
      summary << i + 1 << ',' << scale.robots.lo << ',' << scale.robots.hi << ','
              << scale.racks.lo << ',' << scale.racks.hi << ','
              << scale.storages.lo << ',' << scale.storages.hi << ','
              << sr.validation << '\n';
      summary.flush();
    }
    result.stages.push_back(std::move(sr));
  }
  return result;
}

}  // namespace rmfs
