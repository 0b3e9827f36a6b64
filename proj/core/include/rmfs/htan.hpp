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

#ifndef RMFS_HTAN_HPP_
#define RMFS_HTAN_HPP_

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "rmfs/autodiff.hpp"
#include "rmfs/env.hpp"
#include "rmfs/heuristics.hpp"
#include "rmfs/random.hpp"

namespace rmfs {

struct HtanConfig {
  int dim = 128;
  int heads = 4;
  int layers = 2;
  int ff_hidden = 512;
  // Compatibilities are clip * tanh(.); 1 keeps the bare tanh.
  double logit_clip = 1.0;

  static HtanConfig toy() { return {8, 1, 2, 16}; }
  void validate() const;

  friend bool operator==(const HtanConfig&, const HtanConfig&) = default;
};

inline constexpr int kRobotFeatures = 5;
inline constexpr int kNodeFeatures = 4;
inline constexpr int kCycleCells = 3;

// Per-instance network inputs. Robot rows come first, then one row per rack
// and per storage node; stations have no row of their own.
struct FeatureRows {
  ad::Matrix robots;  // N_a x 5: r / (Phi + eps), position, home
  ad::Matrix nodes;   // (N_r + N_s) x 4: position, paired station position
};

FeatureRows build_inputs(const EnvState& s);

// Row of node v in an instance's embedding block; homes map to their
// robot's row. Stations have no row and return -1.
int node_row(const Instance& inst, NodeId v);
int num_rows(const Instance& inst);

struct EncoderLayer {
  ad::Parameter wq, wk, wv, wo;
  ad::Parameter norm1_gamma, norm1_beta;
  ad::BatchNormState norm1;
  ad::Parameter ff1_w, ff1_b, ff2_w, ff2_b;
  ad::Parameter norm2_gamma, norm2_beta;
  ad::BatchNormState norm2;
};

struct Encoder {
  ad::Parameter robot_w, robot_b, node_w, node_b;
  std::vector<EncoderLayer> layers;
};

struct GruCell {
  ad::Parameter wx, wh, bx, bh;
};

struct RobotNet {
  HtanConfig config;
  Encoder encoder;
  ad::Parameter lstm_w, lstm_b;
  ad::Parameter w_query, wq, wk, wv, wo, wq_hat, wk_hat;

  std::vector<ad::Parameter*> parameters();
  std::vector<std::pair<std::string, ad::BatchNormState*>> norm_states();
};

struct NodeNet {
  HtanConfig config;
  Encoder encoder;
  std::array<GruCell, kCycleCells> gru;
  ad::Parameter w_query, wq, wk, wv, wo, wq_hat, wk_hat;

  std::vector<ad::Parameter*> parameters();
  std::vector<std::pair<std::string, ad::BatchNormState*>> norm_states();
};

RobotNet make_robot_net(const HtanConfig& config, Rng& rng);
NodeNet make_node_net(const HtanConfig& config, Rng& rng);

struct Htan {
  HtanConfig config;
  RobotNet robot;
  NodeNet node;

  static Htan create(const HtanConfig& config, std::uint64_t seed);
  std::vector<ad::Parameter*> parameters();
  void zero_grad();
};

struct Encoded {
  ad::Var embeddings;               // all rows of all instances
  std::vector<ad::Range> rows;      // row block of each instance
  ad::Var mean;                     // one row per instance
};

// Batched encoder forward. Throws Error(kNonFiniteActivation) on NaN/inf.
Encoded encode(Encoder& enc, const HtanConfig& config, ad::Tape& tape,
               const std::vector<const EnvState*>& states, ad::NormMode mode);

// Robot decoder. The states must be awaiting a robot option. Returns a column
// of log-probabilities over every embedding row (-inf outside the eligible
// robots); instance i owns rows `rows[i]`, robot l sits at offset l.
struct PolicyOutput {
  ad::Var log_probs;
  std::vector<ad::Range> rows;
};

PolicyOutput robot_log_probs(RobotNet& net, ad::Tape& tape,
                             const std::vector<const EnvState*>& states,
                             ad::NormMode mode);

// Node decoder. The states must have a pending robot whose mask is not a
// singleton station or home choice; node v of instance i sits at
// rows[i].begin + node_row(inst, v).
PolicyOutput node_log_probs(NodeNet& net, ad::Tape& tape,
                            const std::vector<const EnvState*>& states,
                            ad::NormMode mode);

// Probability vectors: over robot ids and over node ids respectively. Forced
// decisions (single option) are resolved without evaluating the network.
std::vector<double> robot_policy(RobotNet& net, const EnvState& s,
                                 ad::NormMode mode = ad::NormMode::kInference);
std::vector<double> node_policy(NodeNet& net, const EnvState& s,
                                ad::NormMode mode = ad::NormMode::kInference);

std::vector<std::vector<double>> robot_policy_batch(
    RobotNet& net, const std::vector<const EnvState*>& states,
    ad::NormMode mode);
std::vector<std::vector<double>> node_policy_batch(
    NodeNet& net, const std::vector<const EnvState*>& states,
    ad::NormMode mode);

enum class SelectMode : std::uint8_t { kSample, kGreedy };

// Categorical draw or argmax (lowest id on ties).
int sample_or_greedy(const std::vector<double>& dist, SelectMode mode,
                     Rng& rng);

// The only valid robot / node when the decision is forced, else -1.
RobotId forced_robot(const EnvState& s);
NodeId forced_node(const EnvState& s);

class HtanPolicy : public Policy {
 public:
  HtanPolicy(Htan net, SelectMode mode) : net_(std::move(net)), mode_(mode) {}

  std::string name() const override { return "htan"; }
  RobotId select_robot(const EnvState& s, Rng& rng) override;
  NodeId select_node(const EnvState& s, RobotId l, Rng& rng) override;

  Htan& net() { return net_; }

 private:
  Htan net_;
  SelectMode mode_;
};

void save_checkpoint(const std::filesystem::path& path, Htan& net);
Htan load_checkpoint(const std::filesystem::path& path);

}  // namespace rmfs

#endif  // RMFS_HTAN_HPP_
