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

#include "rmfs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "rmfs/error.hpp"
#include "rmfs/heuristics.hpp"
#include "rmfs/instance.hpp"

namespace rmfs {

using ad::NormMode;

namespace {

struct Probe {
  std::vector<EnvState> robot_states;
  std::vector<EnvState> node_states;
  std::vector<std::vector<double>> robot_w;
  std::vector<std::vector<double>> node_w;
};

// A state awaiting a non-forced robot option whose chosen robot then faces
// a non-forced node option.
bool draw_state(Rng& rng, EnvState& rs, EnvState& ns) {
  ScaleConfig scale;
  scale.id = "gradcheck";
  scale.robots = {2, 3};
  scale.racks = {2, 4};
  scale.storages = {2, 5};
  scale.stations = {1, 2};
  auto inst = std::make_shared<const Instance>(
      sample_instance(scale, fixed_grid_layout(), rng.next()));
  EnvState s = EnvState::reset(inst, {});
  const int warmup = static_cast<int>(rng.uniform_int(0, 6));
  for (int k = 0; !s.terminal(); ++k) {
    const RobotId l = random_robot(s, rng);
    if (k >= warmup && forced_robot(s) < 0) {
      EnvState a = s;
      a.apply_robot_option(l);
      if (forced_node(a) < 0) {
        rs = s;
        ns = std::move(a);
        return true;
      }
    }
    s.apply_robot_option(l);
    s.apply_node_option(random_node(s, l, rng));
  }
  return false;
}

std::vector<double> random_weights(const ad::Matrix& lp, Rng& rng, ad::Range r) {
  std::vector<double> w(r.len, 0.0);
  for (int j = 0; j < r.len; ++j) {
    if (std::isfinite(lp(r.begin + j, 0))) w[j] = 2.0 * rng.uniform() - 1.0;
  }
  return w;
}

double weighted(const PolicyOutput& p, const std::vector<std::vector<double>>& w,
                ad::Var* loss) {
  std::vector<int> idx;
  std::vector<double> coef;
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    for (int j = 0; j < p.rows[i].len; ++j) {
      if (w[i][j] == 0.0) continue;
      idx.push_back(p.rows[i].begin + j);
      coef.push_back(w[i][j]);
    }
  }
  ad::Var v = ad::weighted_sum(ad::pick(p.log_probs, idx), coef);
  if (loss != nullptr) *loss = v;
  return v.value()(0, 0);
}

std::vector<const EnvState*> view(const std::vector<EnvState>& s) {
  std::vector<const EnvState*> v;
  for (const EnvState& x : s) v.push_back(&x);
  return v;
}

double robot_objective(RobotNet& net, const Probe& p, bool backprop) {
  ad::Tape tape(backprop);
  const PolicyOutput out =
      robot_log_probs(net, tape, view(p.robot_states), NormMode::kTrainFrozen);
  ad::Var loss;
  const double f = weighted(out, p.robot_w, &loss);
  if (backprop) tape.backward(loss);
  return f;
}

double node_objective(NodeNet& net, const Probe& p, bool backprop) {
  ad::Tape tape(backprop);
  const PolicyOutput out =
      node_log_probs(net, tape, view(p.node_states), NormMode::kTrainFrozen);
  ad::Var loss;
  const double f = weighted(out, p.node_w, &loss);
  if (backprop) tape.backward(loss);
  return f;
}

}  // namespace

GradcheckResult htan_gradcheck(const GradcheckOptions& opt) {
  opt.config.validate();
  if (opt.draws < 1 || opt.states < 1 || !(opt.step > 0.0)) {
    throw Error(Errc::kInvalidConfig, "gradcheck: bad options");
  }
  GradcheckResult result;
  for (int d = 0; d < opt.draws; ++d) {
    Rng rng(Rng::mix(opt.seed, static_cast<std::uint64_t>(d)));
    Htan net = Htan::create(opt.config, rng.next());
    Probe probe;
    while (static_cast<int>(probe.robot_states.size()) < opt.states) {
      EnvState rs, ns;
      if (!draw_state(rng, rs, ns)) continue;
      probe.robot_states.push_back(std::move(rs));
      probe.node_states.push_back(std::move(ns));
    }
    {
      ad::Tape tape(false);
      const PolicyOutput r = robot_log_probs(net.robot, tape,
                                             view(probe.robot_states),
                                             NormMode::kTrainFrozen);
      const PolicyOutput n = node_log_probs(net.node, tape,
                                            view(probe.node_states),
                                            NormMode::kTrainFrozen);
      for (const auto& range : r.rows) {
        probe.robot_w.push_back(random_weights(r.log_probs.value(), rng, range));
      }
      for (const auto& range : n.rows) {
        probe.node_w.push_back(random_weights(n.log_probs.value(), rng, range));
      }
    }

    net.zero_grad();
    robot_objective(net.robot, probe, true);
    node_objective(net.node, probe, true);

    struct Entry {
      ad::Parameter* p;
      Eigen::Index k;
      bool robot;
    };
    std::vector<Entry> entries;
    for (ad::Parameter* p : net.robot.parameters()) {
      for (Eigen::Index k = 0; k < p->value.size(); ++k) entries.push_back({p, k, true});
    }
    for (ad::Parameter* p : net.node.parameters()) {
      for (Eigen::Index k = 0; k < p->value.size(); ++k) entries.push_back({p, k, false});
    }
    if (opt.entries_per_draw > 0 &&
        static_cast<int>(entries.size()) > opt.entries_per_draw) {
      for (int i = 0; i < opt.entries_per_draw; ++i) {
        const auto j = rng.uniform_int(i, static_cast<std::int64_t>(entries.size()) - 1);
        std::swap(entries[i], entries[j]);
      }
      entries.resize(opt.entries_per_draw);
    }

    double diff2 = 0.0, a2 = 0.0, n2 = 0.0, max_abs = 0.0;
    int kinks = 0;
    for (const Entry& e : entries) {
      double& x = e.p->value.data()[e.k];
      const double saved = x;
      auto central = [&](double h) {
        auto f = [&] {
          return e.robot ? robot_objective(net.robot, probe, false)
                         : node_objective(net.node, probe, false);
        };
        x = saved + h;
        const double plus = f();
        x = saved - h;
        const double minus = f();
        x = saved;
        return (plus - minus) / (2.0 * h);
      };
      const double numeric = central(opt.step);
      const double half = central(0.5 * opt.step);
      // A ReLU input within the step of zero makes the differences disagree.
      if (std::abs(numeric - half) > 1e-7 + 1e-5 * std::abs(numeric)) {
        ++kinks;
        continue;
      }
      const double analytic = e.p->grad.data()[e.k];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(analytic - numeric));
    }
    GradcheckDraw gd;
    gd.entries = static_cast<int>(entries.size()) - kinks;
    gd.kinks = kinks;
    gd.max_abs_error = max_abs;
    gd.rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    result.worst_rel_error = std::max(result.worst_rel_error, gd.rel_error);
    result.draws.push_back(gd);
  }
  return result;
}

}  // namespace rmfs
