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

#include "rmfs/htan.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "rmfs/error.hpp"

namespace rmfs {

using ad::Matrix;
using ad::NormMode;
using ad::Parameter;
using ad::Range;
using ad::Segment;
using ad::Tape;
using ad::Var;

void HtanConfig::validate() const {
  if (dim < 1 || heads < 1 || layers < 1 || ff_hidden < 1 ||
      dim % heads != 0) {
    throw Error(Errc::kInvalidConfig,
                "htan: dim must be a positive multiple of heads");
  }
  if (!(logit_clip > 0.0) || !std::isfinite(logit_clip)) {
    throw Error(Errc::kInvalidConfig, "htan: logit_clip must be positive");
  }
}

int num_rows(const Instance& inst) {
  return inst.counts().robots + inst.counts().racks + inst.counts().storages;
}

int node_row(const Instance& inst, NodeId v) {
  if (v < inst.first_rack()) return v;
  if (v < inst.first_station()) return v;  // racks follow the robot rows
  if (v < inst.first_storage()) return -1;
  return v - inst.counts().stations;
}

FeatureRows build_inputs(const EnvState& s) {
  const Instance& inst = s.instance();
  const Bounds& b = inst.bounds();
  const double ex = b.extent_x() > 0 ? b.extent_x() : 1.0;
  const double ey = b.extent_y() > 0 ? b.extent_y() : 1.0;
  auto nx = [&](double x) { return (x - b.min_x) / ex; };
  auto ny = [&](double y) { return (y - b.min_y) / ey; };
  constexpr double kEps = 1e-6;

  FeatureRows rows;
  const int na = inst.counts().robots;
  rows.robots.resize(na, kRobotFeatures);
  for (RobotId l = 0; l < na; ++l) {
    const Point pos = s.robot_position(l);
    const Point home = inst.position(inst.home_of(l));
    rows.robots.row(l) << s.robot(l).travel / (s.phi() + kEps), nx(pos.x),
        ny(pos.y), nx(home.x), ny(home.y);
  }
  const int nr = inst.counts().racks;
  const int ns = inst.counts().storages;
  rows.nodes.resize(nr + ns, kNodeFeatures);
  for (int i = 0; i < nr; ++i) {
    const NodeId v = inst.first_rack() + i;
    const Point p = inst.position(v);
    Point q = p;
    if (s.global().feature(v).type == NodeType::kRack) {
      q = inst.position(inst.station_of(v));
    }
    rows.nodes.row(i) << nx(p.x), ny(p.y), nx(q.x), ny(q.y);
  }
  for (int i = 0; i < ns; ++i) {
    const Point p = inst.position(inst.first_storage() + i);
    rows.nodes.row(nr + i) << nx(p.x), ny(p.y), nx(p.x), ny(p.y);
  }
  return rows;
}

namespace {

Parameter uniform_param(std::string name, int rows, int cols, int fan_in,
                        Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return Parameter(std::move(name), std::move(m));
}

Parameter weight(const std::string& name, int in, int out, Rng& rng) {
  return uniform_param(name, in, out, in, rng);
}

Parameter bias(const std::string& name, int in, int out, Rng& rng) {
  return uniform_param(name, 1, out, in, rng);
}

Parameter constant_param(const std::string& name, int cols, double value) {
  return Parameter(name, Matrix::Constant(1, cols, value));
}

ad::BatchNormState norm_state(int d) {
  ad::BatchNormState s;
  s.running_mean = Matrix::Zero(1, d);
  s.running_var = Matrix::Ones(1, d);
  return s;
}

Encoder make_encoder(const std::string& prefix, const HtanConfig& c,
                     Rng& rng) {
  const int d = c.dim;
  Encoder enc;
  enc.robot_w = weight(prefix + "robot_w", kRobotFeatures, d, rng);
  enc.robot_b = bias(prefix + "robot_b", kRobotFeatures, d, rng);
  enc.node_w = weight(prefix + "node_w", kNodeFeatures, d, rng);
  enc.node_b = bias(prefix + "node_b", kNodeFeatures, d, rng);
  for (int i = 0; i < c.layers; ++i) {
    const std::string p = prefix + "layer" + std::to_string(i) + ".";
    EncoderLayer L;
    L.wq = weight(p + "wq", d, d, rng);
    L.wk = weight(p + "wk", d, d, rng);
    L.wv = weight(p + "wv", d, d, rng);
    L.wo = weight(p + "wo", d, d, rng);
    L.norm1_gamma = constant_param(p + "norm1_gamma", d, 1.0);
    L.norm1_beta = constant_param(p + "norm1_beta", d, 0.0);
    L.norm1 = norm_state(d);
    L.ff1_w = weight(p + "ff1_w", d, c.ff_hidden, rng);
    L.ff1_b = bias(p + "ff1_b", d, c.ff_hidden, rng);
    L.ff2_w = weight(p + "ff2_w", c.ff_hidden, d, rng);
    L.ff2_b = bias(p + "ff2_b", c.ff_hidden, d, rng);
    L.norm2_gamma = constant_param(p + "norm2_gamma", d, 1.0);
    L.norm2_beta = constant_param(p + "norm2_beta", d, 0.0);
    L.norm2 = norm_state(d);
    enc.layers.push_back(std::move(L));
  }
  return enc;
}

void encoder_parameters(Encoder& enc, std::vector<Parameter*>& out) {
  for (Parameter* p : {&enc.robot_w, &enc.robot_b, &enc.node_w, &enc.node_b}) {
    out.push_back(p);
  }
  for (EncoderLayer& L : enc.layers) {
    for (Parameter* p :
         {&L.wq, &L.wk, &L.wv, &L.wo, &L.norm1_gamma, &L.norm1_beta, &L.ff1_w,
          &L.ff1_b, &L.ff2_w, &L.ff2_b, &L.norm2_gamma, &L.norm2_beta}) {
      out.push_back(p);
    }
  }
}

void encoder_norms(Encoder& enc,
                   std::vector<std::pair<std::string, ad::BatchNormState*>>& out) {
  for (EncoderLayer& L : enc.layers) {
    const std::string base = L.norm1_gamma.name;
    const std::string p = base.substr(0, base.size() - std::strlen("norm1_gamma"));
    out.emplace_back(p + "norm1", &L.norm1);
    out.emplace_back(p + "norm2", &L.norm2);
  }
}

void check_finite(const Var& v, const char* where) {
  if (!v.value().allFinite()) {
    throw Error(Errc::kNonFiniteActivation,
                std::string("non-finite activation in ") + where);
  }
}

}  // namespace

RobotNet make_robot_net(const HtanConfig& c, Rng& rng) {
  c.validate();
  const int d = c.dim;
  RobotNet n;
  n.config = c;
  n.encoder = make_encoder("robot.encoder.", c, rng);
  n.lstm_w = weight("robot.lstm_w", 2 * d, 4 * d, rng);
  n.lstm_b = bias("robot.lstm_b", 2 * d, 4 * d, rng);
  n.w_query = weight("robot.w_query", 2 * d, d, rng);
  n.wq = weight("robot.wq", d, d, rng);
  n.wk = weight("robot.wk", d, d, rng);
  n.wv = weight("robot.wv", d, d, rng);
  n.wo = weight("robot.wo", d, d, rng);
  n.wq_hat = weight("robot.wq_hat", d, d, rng);
  n.wk_hat = weight("robot.wk_hat", d, d, rng);
  return n;
}

NodeNet make_node_net(const HtanConfig& c, Rng& rng) {
  c.validate();
  const int d = c.dim;
  NodeNet n;
  n.config = c;
  n.encoder = make_encoder("node.encoder.", c, rng);
  for (int k = 0; k < kCycleCells; ++k) {
    const std::string p = "node.gru" + std::to_string(k) + ".";
    n.gru[k].wx = weight(p + "wx", d, 3 * d, rng);
    n.gru[k].wh = weight(p + "wh", d, 3 * d, rng);
    n.gru[k].bx = bias(p + "bx", d, 3 * d, rng);
    n.gru[k].bh = bias(p + "bh", d, 3 * d, rng);
  }
  n.w_query = weight("node.w_query", 3 * d, d, rng);
  n.wq = weight("node.wq", d, d, rng);
  n.wk = weight("node.wk", d, d, rng);
  n.wv = weight("node.wv", d, d, rng);
  n.wo = weight("node.wo", d, d, rng);
  n.wq_hat = weight("node.wq_hat", d, d, rng);
  n.wk_hat = weight("node.wk_hat", d, d, rng);
  return n;
}

std::vector<Parameter*> RobotNet::parameters() {
  std::vector<Parameter*> out;
  encoder_parameters(encoder, out);
  for (Parameter* p : {&lstm_w, &lstm_b, &w_query, &wq, &wk, &wv, &wo, &wq_hat,
                       &wk_hat}) {
    out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, ad::BatchNormState*>> RobotNet::norm_states() {
  std::vector<std::pair<std::string, ad::BatchNormState*>> out;
  encoder_norms(encoder, out);
  return out;
}

std::vector<Parameter*> NodeNet::parameters() {
  std::vector<Parameter*> out;
  encoder_parameters(encoder, out);
  for (GruCell& g : gru) {
    for (Parameter* p : {&g.wx, &g.wh, &g.bx, &g.bh}) out.push_back(p);
  }
  for (Parameter* p : {&w_query, &wq, &wk, &wv, &wo, &wq_hat, &wk_hat}) {
    out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, ad::BatchNormState*>> NodeNet::norm_states() {
  std::vector<std::pair<std::string, ad::BatchNormState*>> out;
  encoder_norms(encoder, out);
  return out;
}

Htan Htan::create(const HtanConfig& config, std::uint64_t seed) {
  Rng robot_rng(Rng::mix(seed, 1));
  Rng node_rng(Rng::mix(seed, 2));
  return {config, make_robot_net(config, robot_rng),
          make_node_net(config, node_rng)};
}

std::vector<Parameter*> Htan::parameters() {
  std::vector<Parameter*> out = robot.parameters();
  for (Parameter* p : node.parameters()) out.push_back(p);
  return out;
}

void Htan::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Encoded encode(Encoder& enc, const HtanConfig& c, Tape& tape,
               const std::vector<const EnvState*>& states, NormMode mode) {
  if (states.empty()) throw Error(Errc::kInvalidConfig, "encode: empty batch");
  std::vector<FeatureRows> inputs;
  inputs.reserve(states.size());
  int robot_total = 0;
  int node_total = 0;
  for (const EnvState* s : states) {
    inputs.push_back(build_inputs(*s));
    robot_total += static_cast<int>(inputs.back().robots.rows());
    node_total += static_cast<int>(inputs.back().nodes.rows());
  }
  Matrix rx(robot_total, kRobotFeatures);
  Matrix nx(node_total, kNodeFeatures);
  Encoded out;
  std::vector<int> order;
  order.reserve(robot_total + node_total);
  int ri = 0, ni = 0, row = 0;
  for (const FeatureRows& f : inputs) {
    const int na = static_cast<int>(f.robots.rows());
    const int nn = static_cast<int>(f.nodes.rows());
    rx.middleRows(ri, na) = f.robots;
    if (nn > 0) nx.middleRows(ni, nn) = f.nodes;
    for (int k = 0; k < na; ++k) order.push_back(ri + k);
    for (int k = 0; k < nn; ++k) order.push_back(robot_total + ni + k);
    out.rows.push_back({row, na + nn});
    ri += na;
    ni += nn;
    row += na + nn;
  }

  Var er = ad::linear(tape.constant(std::move(rx)), tape.param(enc.robot_w),
                      tape.param(enc.robot_b));
  Var e = er;
  if (node_total > 0) {
    Var en = ad::linear(tape.constant(std::move(nx)), tape.param(enc.node_w),
                        tape.param(enc.node_b));
    e = ad::gather_rows(ad::concat_rows({er, en}), order);
  }

  std::vector<Segment> segs;
  segs.reserve(out.rows.size());
  for (const Range& r : out.rows) segs.push_back({r.begin, r.len, r.begin, r.len});

  for (EncoderLayer& L : enc.layers) {
    Var q = ad::matmul(e, tape.param(L.wq));
    Var k = ad::matmul(e, tape.param(L.wk));
    Var v = ad::matmul(e, tape.param(L.wv));
    Var a = ad::matmul(ad::attention(q, k, v, segs, c.heads), tape.param(L.wo));
    Var h = ad::batch_norm(ad::add(e, a), tape.param(L.norm1_gamma),
                           tape.param(L.norm1_beta), L.norm1, mode);
    Var f = ad::linear(
        ad::relu(ad::linear(h, tape.param(L.ff1_w), tape.param(L.ff1_b))),
        tape.param(L.ff2_w), tape.param(L.ff2_b));
    e = ad::batch_norm(ad::add(h, f), tape.param(L.norm2_gamma),
                       tape.param(L.norm2_beta), L.norm2, mode);
  }
  check_finite(e, "encoder");
  out.embeddings = e;
  out.mean = ad::segment_mean(e, out.rows);
  return out;
}

namespace {

// Final compatibility layer shared by both decoders: tanh-clipped scaled dot
// products between one query per instance and every row of that instance,
// followed by a masked log-softmax.
Var pointer_scores(Tape& tape, Var query, Var embeddings, Parameter& wq_hat,
                   Parameter& wk_hat, const std::vector<Range>& rows,
                   const std::vector<std::uint8_t>& mask, int dim, double clip) {
  Var qh = ad::matmul(query, tape.param(wq_hat));
  Var kh = ad::matmul(embeddings, tape.param(wk_hat));
  std::vector<Segment> segs;
  segs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    segs.push_back({static_cast<int>(i), 1, rows[i].begin, rows[i].len});
  }
  Var u = ad::tanh(ad::scale(ad::segment_dot(qh, kh, segs),
                             1.0 / std::sqrt(static_cast<double>(dim))));
  if (clip != 1.0) u = ad::scale(u, clip);
  return ad::masked_log_softmax(u, rows, mask);
}

Var glimpse(Tape& tape, Var query, Var keys, const std::vector<Segment>& segs,
            Parameter& wq, Parameter& wk, Parameter& wv, Parameter& wo,
            int heads) {
  Var q = ad::matmul(query, tape.param(wq));
  Var k = ad::matmul(keys, tape.param(wk));
  Var v = ad::matmul(keys, tape.param(wv));
  return ad::matmul(ad::attention(q, k, v, segs, heads), tape.param(wo));
}

Var gru_step(Tape& tape, GruCell& cell, Var x, Var h, int d) {
  Var gx = ad::linear(x, tape.param(cell.wx), tape.param(cell.bx));
  Var gh = ad::linear(h, tape.param(cell.wh), tape.param(cell.bh));
  Var r = ad::sigmoid(ad::add(ad::slice_cols(gx, 0, d), ad::slice_cols(gh, 0, d)));
  Var z = ad::sigmoid(ad::add(ad::slice_cols(gx, d, d), ad::slice_cols(gh, d, d)));
  Var n = ad::tanh(ad::add(ad::slice_cols(gx, 2 * d, d),
                           ad::mul(r, ad::slice_cols(gh, 2 * d, d))));
  // (1 - z) * n + z * h
  return ad::add(n, ad::mul(z, ad::sub(h, n)));
}

}  // namespace

PolicyOutput robot_log_probs(RobotNet& net, Tape& tape,
                             const std::vector<const EnvState*>& states,
                             NormMode mode) {
  const HtanConfig& c = net.config;
  const int d = c.dim;
  const int B = static_cast<int>(states.size());
  Encoded enc = encode(net.encoder, c, tape, states, mode);
  const int total = static_cast<int>(enc.embeddings.rows());

  std::vector<int> len(B);
  int T = 1;
  for (int i = 0; i < B; ++i) {
    len[i] = std::max<int>(1, static_cast<int>(states[i]->selected().size()));
    T = std::max(T, len[i]);
  }

  // Selected-robot embeddings, with a trailing zero row for cold starts and
  // left padding.
  Var table = ad::concat_rows({enc.embeddings, tape.constant(Matrix::Zero(1, d))});
  Var h = tape.constant(Matrix::Zero(B, d));
  Var cstate = tape.constant(Matrix::Zero(B, d));
  std::vector<Var> outputs;
  outputs.reserve(T);
  for (int t = 0; t < T; ++t) {
    std::vector<int> idx(B, total);
    std::vector<std::uint8_t> active(B, 0);
    bool all_active = true;
    for (int i = 0; i < B; ++i) {
      const int offset = t - (T - len[i]);
      if (offset < 0) {
        all_active = false;
        continue;
      }
      active[i] = 1;
      const auto& hist = states[i]->selected();
      if (!hist.empty()) idx[i] = enc.rows[i].begin + hist[offset];
    }
    Var x = ad::gather_rows(table, idx);
    Var gates = ad::linear(ad::concat_cols({x, h}), tape.param(net.lstm_w),
                           tape.param(net.lstm_b));
    Var ig = ad::sigmoid(ad::slice_cols(gates, 0, d));
    Var fg = ad::sigmoid(ad::slice_cols(gates, d, d));
    Var gg = ad::tanh(ad::slice_cols(gates, 2 * d, d));
    Var og = ad::sigmoid(ad::slice_cols(gates, 3 * d, d));
    Var c_new = ad::add(ad::mul(fg, cstate), ad::mul(ig, gg));
    Var h_new = ad::mul(og, ad::tanh(c_new));
    if (all_active) {
      h = h_new;
      cstate = c_new;
    } else {
      h = ad::blend_rows(h_new, h, active);
      cstate = ad::blend_rows(c_new, cstate, active);
    }
    outputs.push_back(h);
  }

  std::vector<int> seq_index;
  std::vector<Segment> segs;
  for (int i = 0; i < B; ++i) {
    segs.push_back({i, 1, static_cast<int>(seq_index.size()), len[i]});
    for (int t = T - len[i]; t < T; ++t) seq_index.push_back(t * B + i);
  }
  Var seq = ad::gather_rows(ad::concat_rows(outputs), seq_index);

  Var query = ad::matmul(ad::concat_cols({h, enc.mean}), tape.param(net.w_query));
  Var g = glimpse(tape, query, seq, segs, net.wq, net.wk, net.wv, net.wo,
                  c.heads);

  std::vector<std::uint8_t> mask(total, 0);
  for (int i = 0; i < B; ++i) {
    for (RobotId l : states[i]->eligible_robots()) {
      mask[enc.rows[i].begin + l] = 1;
    }
  }
  for (int i = 0; i < B; ++i) {
    bool any = false;
    for (int k = 0; k < enc.rows[i].len; ++k) any = any || mask[enc.rows[i].begin + k];
    if (!any) throw Error(Errc::kEmptyMask, "no eligible robot");
  }
  Var logp = pointer_scores(tape, g, enc.embeddings, net.wq_hat, net.wk_hat,
                            enc.rows, mask, d, c.logit_clip);
  return {logp, enc.rows};
}

namespace {

// Embedding rows of the last cycle of robot l's history, oldest first,
// padded at the front with the robot's own row.
std::array<int, kCycleCells> cycle_rows(const EnvState& s, RobotId l) {
  const Instance& inst = s.instance();
  const auto& entries = s.robot(l).history.entries();
  std::vector<int> mapped;
  mapped.reserve(entries.size());
  for (const HistoryEntry& e : entries) {
    int r = -1;
    switch (e.role) {
      case NodeType::kHome: r = l; break;
      case NodeType::kStation: r = mapped.empty() ? l : mapped.back(); break;
      default: r = node_row(inst, e.node); break;
    }
    mapped.push_back(r);
  }
  std::array<int, kCycleCells> out;
  out.fill(l);
  const int n = static_cast<int>(mapped.size());
  for (int k = 0; k < kCycleCells; ++k) {
    const int src = n - kCycleCells + k;
    if (src >= 0) out[k] = mapped[src];
  }
  return out;
}

}  // namespace

PolicyOutput node_log_probs(NodeNet& net, Tape& tape,
                            const std::vector<const EnvState*>& states,
                            NormMode mode) {
  const HtanConfig& c = net.config;
  const int d = c.dim;
  const int B = static_cast<int>(states.size());
  Encoded enc = encode(net.encoder, c, tape, states, mode);
  const int total = static_cast<int>(enc.embeddings.rows());

  std::vector<int> robot_idx(B);
  std::array<std::vector<int>, kCycleCells> hist_idx;
  for (auto& v : hist_idx) v.resize(B);
  std::vector<std::uint8_t> mask(total, 0);
  ArcMask arc;
  for (int i = 0; i < B; ++i) {
    const EnvState& s = *states[i];
    if (!s.pending_robot()) {
      throw Error(Errc::kInvalidNode, "node decoder: no pending robot");
    }
    const RobotId l = *s.pending_robot();
    const int base = enc.rows[i].begin;
    robot_idx[i] = base + l;
    const auto rows = cycle_rows(s, l);
    for (int k = 0; k < kCycleCells; ++k) hist_idx[k][i] = base + rows[k];
    s.node_mask(l, arc);
    bool any = false;
    for (NodeId v = 0; v < static_cast<NodeId>(arc.size()); ++v) {
      if (!arc[v]) continue;
      const int r = node_row(s.instance(), v);
      if (r < 0 || v < s.instance().first_rack()) continue;
      mask[base + r] = 1;
      any = true;
    }
    if (!any) throw Error(Errc::kEmptyMask, "no selectable node row");
  }

  Var z = tape.constant(Matrix::Zero(B, d));
  for (int k = 0; k < kCycleCells; ++k) {
    z = gru_step(tape, net.gru[k], ad::gather_rows(enc.embeddings, hist_idx[k]),
                 z, d);
  }
  Var e_robot = ad::gather_rows(enc.embeddings, robot_idx);
  Var query = ad::matmul(ad::concat_cols({e_robot, z, enc.mean}),
                         tape.param(net.w_query));
  std::vector<Segment> segs;
  for (int i = 0; i < B; ++i) {
    segs.push_back({i, 1, enc.rows[i].begin, enc.rows[i].len});
  }
  Var g = glimpse(tape, query, enc.embeddings, segs, net.wq, net.wk, net.wv,
                  net.wo, c.heads);
  Var logp = pointer_scores(tape, g, enc.embeddings, net.wq_hat, net.wk_hat,
                            enc.rows, mask, d, c.logit_clip);
  return {logp, enc.rows};
}

RobotId forced_robot(const EnvState& s) {
  const std::vector<RobotId> e = s.eligible_robots();
  if (e.empty()) throw Error(Errc::kEmptyMask, "no eligible robot");
  return e.size() == 1 ? e.front() : -1;
}

NodeId forced_node(const EnvState& s) {
  if (!s.pending_robot()) {
    throw Error(Errc::kInvalidNode, "no robot awaiting a node option");
  }
  const std::vector<NodeId> v = s.valid_nodes(*s.pending_robot());
  if (v.empty()) throw Error(Errc::kEmptyMask, "no valid node");
  return v.size() == 1 ? v.front() : -1;
}

std::vector<std::vector<double>> robot_policy_batch(
    RobotNet& net, const std::vector<const EnvState*>& states, NormMode mode) {
  std::vector<std::vector<double>> out(states.size());
  std::vector<const EnvState*> open;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i].assign(states[i]->num_robots(), 0.0);
    const RobotId f = forced_robot(*states[i]);
    if (f >= 0) {
      out[i][f] = 1.0;
    } else {
      open.push_back(states[i]);
      where.push_back(i);
    }
  }
  if (open.empty()) return out;
  Tape tape(false);
  const PolicyOutput p = robot_log_probs(net, tape, open, mode);
  const Matrix& lp = p.log_probs.value();
  for (std::size_t j = 0; j < open.size(); ++j) {
    auto& dist = out[where[j]];
    for (RobotId l = 0; l < static_cast<RobotId>(dist.size()); ++l) {
      dist[l] = std::exp(lp(p.rows[j].begin + l, 0));
    }
  }
  return out;
}

std::vector<std::vector<double>> node_policy_batch(
    NodeNet& net, const std::vector<const EnvState*>& states, NormMode mode) {
  std::vector<std::vector<double>> out(states.size());
  std::vector<const EnvState*> open;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i].assign(states[i]->instance().num_nodes(), 0.0);
    const NodeId f = forced_node(*states[i]);
    if (f >= 0) {
      out[i][f] = 1.0;
    } else {
      open.push_back(states[i]);
      where.push_back(i);
    }
  }
  if (open.empty()) return out;
  Tape tape(false);
  const PolicyOutput p = node_log_probs(net, tape, open, mode);
  const Matrix& lp = p.log_probs.value();
  for (std::size_t j = 0; j < open.size(); ++j) {
    const Instance& inst = open[j]->instance();
    auto& dist = out[where[j]];
    for (NodeId v = inst.first_rack(); v < inst.num_nodes(); ++v) {
      const int r = node_row(inst, v);
      if (r >= 0) dist[v] = std::exp(lp(p.rows[j].begin + r, 0));
    }
  }
  return out;
}

std::vector<double> robot_policy(RobotNet& net, const EnvState& s,
                                 NormMode mode) {
  return robot_policy_batch(net, {&s}, mode).front();
}

std::vector<double> node_policy(NodeNet& net, const EnvState& s,
                                NormMode mode) {
  return node_policy_batch(net, {&s}, mode).front();
}

int sample_or_greedy(const std::vector<double>& dist, SelectMode mode,
                     Rng& rng) {
  if (dist.empty()) throw Error(Errc::kEmptyMask, "empty distribution");
  if (mode == SelectMode::kGreedy) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(dist.size()); ++i) {
      if (dist[i] > dist[best]) best = i;
    }
    return best;
  }
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
    if (dist[i] <= 0.0) continue;
    acc += dist[i];
    last = i;
    if (u < acc) return i;
  }
  if (last < 0) throw Error(Errc::kEmptyMask, "distribution has no support");
  return last;
}

RobotId HtanPolicy::select_robot(const EnvState& s, Rng& rng) {
  return sample_or_greedy(robot_policy(net_.robot, s), mode_, rng);
}

NodeId HtanPolicy::select_node(const EnvState& s, RobotId, Rng& rng) {
  return sample_or_greedy(node_policy(net_.node, s), mode_, rng);
}

namespace {

constexpr char kMagic[8] = {'R', 'M', 'F', 'S', 'H', 'T', 'A', 'N'};
constexpr std::uint32_t kVersion = 2;

std::vector<std::pair<std::string, Matrix*>> named_tensors(Htan& net) {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (Parameter* p : net.parameters()) out.emplace_back(p->name, &p->value);
  auto add_norms = [&](auto states) {
    for (auto& [name, st] : states) {
      out.emplace_back(name + ".running_mean", &st->running_mean);
      out.emplace_back(name + ".running_var", &st->running_var);
    }
  };
  add_norms(net.robot.norm_states());
  add_norms(net.node.norm_states());
  return out;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(Errc::kParse, "checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Htan& net) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  for (int v : {net.config.dim, net.config.heads, net.config.layers,
                net.config.ff_hidden}) {
    put(out, static_cast<std::int32_t>(v));
  }
  put(out, net.config.logit_clip);
  const auto tensors = named_tensors(net);
  put(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, static_cast<std::int64_t>(m->rows()));
    put(out, static_cast<std::int64_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw Error(Errc::kIo, "failed writing " + path.string());
}

Htan load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::kParse, path.string() + ": not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw Error(Errc::kParse, path.string() + ": unsupported version " +
                                  std::to_string(version));
  }
  HtanConfig c;
  c.dim = get<std::int32_t>(in);
  c.heads = get<std::int32_t>(in);
  c.layers = get<std::int32_t>(in);
  c.ff_hidden = get<std::int32_t>(in);
  c.logit_clip = get<double>(in);
  c.validate();
  Htan net = Htan::create(c, 0);
  std::map<std::string, Matrix*> slots;
  for (auto& [name, m] : named_tensors(net)) slots[name] = m;

  const auto count = get<std::uint32_t>(in);
  if (count != slots.size()) {
    throw Error(Errc::kParse, path.string() + ": tensor count mismatch");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw Error(Errc::kParse, "checkpoint: bad tensor name");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw Error(Errc::kParse, "checkpoint: unknown tensor " + name);
    }
    Matrix& m = *it->second;
    if (rows != m.rows() || cols != m.cols()) {
      throw Error(Errc::kParse, "checkpoint: shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw Error(Errc::kParse, "checkpoint: truncated file");
    slots.erase(it);
  }
  for (Parameter* p : net.parameters()) p->zero_grad();
  return net;
}

}  // namespace rmfs
