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

#include "rmfs/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmfs::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Tape& tape_of(Var a) {
  require(a.valid(), "autodiff: uninitialized variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  require(a.tape() == b.tape(), "autodiff: variables from different tapes");
  return tape_of(a);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back({p.value, {}, {}, &p, record_});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

bool Tape::needs_grad(std::initializer_list<Var> vars) const {
  if (!record_) return false;
  for (Var v : vars) {
    if (nodes_[v.id()].needs_grad) return true;
  }
  return false;
}

Var Tape::push(Matrix value, bool needs_grad, Backward fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && record_;
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  ensure_grad(n);
  n.grad += g;
}

void Tape::backward(Var scalar, double seed) {
  require(scalar.tape() == this, "backward: variable from another tape");
  require(record_, "backward: tape is not recording");
  require(scalar.rows() == 1 && scalar.cols() == 1,
          "backward: target must be 1x1");
  if (!nodes_[scalar.id()].needs_grad) return;
  accumulate(scalar.id(), Matrix::Constant(1, 1, seed));
  for (int i = scalar.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      // The closure may touch other nodes, so keep the gradient alive.
      const Matrix g = std::move(n.grad);
      n.backward(*this, g);
    }
    n.grad.resize(0, 0);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.rows(), "matmul: shape mismatch");
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), t.needs_grad({a, b}),
                [ia, ib](Tape& t, const Matrix& g) {
                  if (t.needs_grad(ia)) {
                    t.accumulate(ia, g * t.value(ib).transpose());
                  }
                  if (t.needs_grad(ib)) {
                    t.accumulate(ib, t.value(ia).transpose() * g);
                  }
                });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), t.needs_grad({a, b}),
                [ia, ib](Tape& t, const Matrix& g) {
                  t.accumulate(ia, g);
                  t.accumulate(ib, g);
                });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), t.needs_grad({a, b}),
                [ia, ib](Tape& t, const Matrix& g) {
                  t.accumulate(ia, g);
                  t.accumulate(ib, -g);
                });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), t.needs_grad({a, b}),
                [ia, ib](Tape& t, const Matrix& g) {
                  if (t.needs_grad(ia)) {
                    t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                  }
                  if (t.needs_grad(ib)) {
                    t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                  }
                });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value() * s, t.needs_grad({a}),
                [ia, s](Tape& t, const Matrix& g) { t.accumulate(ia, g * s); });
}

Var add_bias(Var x, Var b) {
  Tape& t = tape_of(x, b);
  require(b.rows() == 1 && b.cols() == x.cols(), "add_bias: shape mismatch");
  const int ix = x.id(), ib = b.id();
  Matrix out = x.value().rowwise() + b.value().row(0);
  return t.push(std::move(out), t.needs_grad({x, b}),
                [ix, ib](Tape& t, const Matrix& g) {
                  t.accumulate(ix, g);
                  if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
                });
}

Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var relu(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), t.needs_grad({a}),
                [ia](Tape& t, const Matrix& g) {
                  const Matrix& x = t.value(ia);
                  t.accumulate(ia, (x.array() > 0.0).select(g, 0.0).matrix());
                });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  if (!t.needs_grad({a})) return t.push(std::move(out), false, nullptr);
  Matrix y = out;
  return t.push(std::move(out), true,
                [ia, y = std::move(y)](Tape& t, const Matrix& g) {
                  t.accumulate(
                      ia, g.cwiseProduct((1.0 - y.array().square()).matrix()));
                });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  if (!t.needs_grad({a})) return t.push(std::move(out), false, nullptr);
  Matrix y = out;
  return t.push(std::move(out), true,
                [ia, y = std::move(y)](Tape& t, const Matrix& g) {
                  t.accumulate(
                      ia, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
                });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool grad = false;
  for (Var p : parts) {
    require(p.tape() == &t && p.rows() == rows, "concat_cols: shape mismatch");
    cols += p.cols();
    grad = grad || t.needs_grad({p});
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.push(std::move(out), grad, [spans](Tape& t, const Matrix& g) {
    for (const auto& [id, c0] : spans) {
      if (t.needs_grad(id)) {
        t.accumulate(id, g.middleCols(c0, t.value(id).cols()));
      }
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool grad = false;
  for (Var p : parts) {
    require(p.tape() == &t && p.cols() == cols, "concat_rows: shape mismatch");
    rows += p.rows();
    grad = grad || t.needs_grad({p});
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.push(std::move(out), grad, [spans](Tape& t, const Matrix& g) {
    for (const auto& [id, r0] : spans) {
      if (t.needs_grad(id)) {
        t.accumulate(id, g.middleRows(r0, t.value(id).rows()));
      }
    }
  });
}

Var slice_cols(Var a, int begin, int len) {
  Tape& t = tape_of(a);
  require(begin >= 0 && len >= 0 && begin + len <= a.cols(),
          "slice_cols: out of range");
  const int ia = a.id();
  return t.push(a.value().middleCols(begin, len), t.needs_grad({a}),
                [ia, begin](Tape& t, const Matrix& g) {
                  t.accumulate_block(ia, 0, begin, g);
                });
}

Var slice_rows(Var a, int begin, int len) {
  Tape& t = tape_of(a);
  require(begin >= 0 && len >= 0 && begin + len <= a.rows(),
          "slice_rows: out of range");
  const int ia = a.id();
  return t.push(a.value().middleRows(begin, len), t.needs_grad({a}),
                [ia, begin](Tape& t, const Matrix& g) {
                  t.accumulate_block(ia, begin, 0, g);
                });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < x.rows(), "gather_rows: bad index");
    out.row(i) = x.row(index[i]);
  }
  const int ia = a.id();
  return t.push(std::move(out), t.needs_grad({a}),
                [ia, index](Tape& t, const Matrix& g) {
                  for (std::size_t i = 0; i < index.size(); ++i) {
                    t.accumulate_row(ia, index[i], g.row(i));
                  }
                });
}

Var blend_rows(Var a, Var b, const std::vector<std::uint8_t>& take_a) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols() &&
              static_cast<Eigen::Index>(take_a.size()) == a.rows(),
          "blend_rows: shape mismatch");
  Matrix out = b.value();
  for (std::size_t i = 0; i < take_a.size(); ++i) {
    if (take_a[i]) out.row(i) = a.value().row(i);
  }
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), t.needs_grad({a, b}),
                [ia, ib, take_a](Tape& t, const Matrix& g) {
                  for (std::size_t i = 0; i < take_a.size(); ++i) {
                    t.accumulate_row(take_a[i] ? ia : ib, i, g.row(i));
                  }
                });
}

Var segment_mean(Var a, const std::vector<Range>& ranges) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(ranges.size()), x.cols());
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    const Range r = ranges[s];
    require(r.len > 0 && r.begin >= 0 && r.begin + r.len <= x.rows(),
            "segment_mean: bad range");
    out.row(s) = x.middleRows(r.begin, r.len).colwise().mean();
  }
  const int ia = a.id();
  return t.push(std::move(out), t.needs_grad({a}),
                [ia, ranges](Tape& t, const Matrix& g) {
                  for (std::size_t s = 0; s < ranges.size(); ++s) {
                    const Range r = ranges[s];
                    const Eigen::RowVectorXd row = g.row(s) / double(r.len);
                    t.accumulate_block(ia, r.begin, 0,
                                       row.replicate(r.len, 1));
                  }
                });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state,
               NormMode mode) {
  Tape& t = tape_of(x, gamma);
  require(gamma.rows() == 1 && gamma.cols() == x.cols() &&
              beta.rows() == 1 && beta.cols() == x.cols(),
          "batch_norm: shape mismatch");
  const Matrix& in = x.value();
  const Eigen::Index n = in.rows();
  const Eigen::Index d = in.cols();
  Eigen::RowVectorXd mean, var;
  if (mode == NormMode::kInference) {
    mean = state.running_mean.row(0);
    var = state.running_var.row(0);
  } else {
    require(n > 0, "batch_norm: empty batch");
    mean = in.colwise().mean();
    var = (in.rowwise() - mean).array().square().colwise().mean().matrix();
    if (mode == NormMode::kTrain) {
      const double m = state.momentum;
      state.running_mean = m * state.running_mean + (1.0 - m) * Matrix(mean);
      state.running_var = m * state.running_var + (1.0 - m) * Matrix(var);
    }
  }
  const Eigen::RowVectorXd inv_std =
      (var.array() + state.eps).rsqrt().matrix();
  Matrix xhat = (in.rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array())
                   .rowwise() +
               beta.value().row(0).array();
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool batch_stats = mode != NormMode::kInference;
  if (!t.needs_grad({x, gamma, beta})) {
    return t.push(std::move(out), false, nullptr);
  }
  return t.push(
      std::move(out), true,
      [ix, ig, ib, n, d, batch_stats, inv_std,
       xhat = std::move(xhat)](Tape& t, const Matrix& g) {
        if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
        if (t.needs_grad(ig)) {
          t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        }
        if (!t.needs_grad(ix)) return;
        const Eigen::RowVectorXd gam = t.value(ig).row(0);
        Matrix gx = g.array().rowwise() * gam.array();  // dL/dxhat
        if (batch_stats) {
          const Eigen::RowVectorXd mean_g = gx.colwise().mean();
          const Eigen::RowVectorXd mean_gx =
              gx.cwiseProduct(xhat).colwise().mean();
          Matrix dx = gx.rowwise() - mean_g;
          dx -= (xhat.array().rowwise() * mean_gx.array()).matrix();
          dx = dx.array().rowwise() * inv_std.array();
          t.accumulate(ix, dx);
        } else {
          t.accumulate(ix, (gx.array().rowwise() * inv_std.array()).matrix());
        }
        (void)n;
        (void)d;
      });
}

Var attention(Var q, Var k, Var v, const std::vector<Segment>& segments,
              int heads) {
  Tape& t = tape_of(q, k);
  require(k.tape() == v.tape(), "attention: variables from different tapes");
  const Eigen::Index d = q.cols();
  require(k.cols() == d && v.cols() == d && heads > 0 && d % heads == 0,
          "attention: shape mismatch");
  require(k.rows() == v.rows(), "attention: key/value rows differ");
  const int dk = static_cast<int>(d / heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(Q.rows(), d);
  const bool grad = t.needs_grad({q, k, v});
  std::vector<Matrix> weights;
  if (grad) weights.reserve(segments.size() * heads);
  for (const Segment& s : segments) {
    require(s.q_len >= 0 && s.kv_len > 0 && s.q_begin + s.q_len <= Q.rows() &&
                s.kv_begin + s.kv_len <= K.rows(),
            "attention: bad segment");
    for (int h = 0; h < heads; ++h) {
      const auto qs = Q.block(s.q_begin, h * dk, s.q_len, dk);
      const auto ks = K.block(s.kv_begin, h * dk, s.kv_len, dk);
      const auto vs = V.block(s.kv_begin, h * dk, s.kv_len, dk);
      Matrix a = (qs * ks.transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double mx = a.row(r).maxCoeff();
        a.row(r) = (a.row(r).array() - mx).exp().matrix();
        a.row(r) /= a.row(r).sum();
      }
      out.block(s.q_begin, h * dk, s.q_len, dk).noalias() = a * vs;
      if (grad) weights.push_back(std::move(a));
    }
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return t.push(
      std::move(out), grad,
      [iq, ik, iv, segments, heads, dk, inv_sqrt,
       weights = std::move(weights)](Tape& t, const Matrix& g) {
        const Matrix& Q = t.value(iq);
        const Matrix& K = t.value(ik);
        const Matrix& V = t.value(iv);
        std::size_t w = 0;
        for (const Segment& s : segments) {
          for (int h = 0; h < heads; ++h, ++w) {
            const Matrix& a = weights[w];
            const auto qs = Q.block(s.q_begin, h * dk, s.q_len, dk);
            const auto ks = K.block(s.kv_begin, h * dk, s.kv_len, dk);
            const auto vs = V.block(s.kv_begin, h * dk, s.kv_len, dk);
            const auto go = g.block(s.q_begin, h * dk, s.q_len, dk);
            if (t.needs_grad(iv)) {
              t.accumulate_block(iv, s.kv_begin, h * dk,
                                 Matrix(a.transpose() * go));
            }
            Matrix da = go * vs.transpose();
            const Eigen::VectorXd dot = da.cwiseProduct(a).rowwise().sum();
            Matrix ds = a.cwiseProduct(Matrix(da.colwise() - dot)) * inv_sqrt;
            if (t.needs_grad(iq)) {
              t.accumulate_block(iq, s.q_begin, h * dk, Matrix(ds * ks));
            }
            if (t.needs_grad(ik)) {
              t.accumulate_block(ik, s.kv_begin, h * dk,
                                 Matrix(ds.transpose() * qs));
            }
          }
        }
      });
}

Var segment_dot(Var q, Var k, const std::vector<Segment>& segments) {
  Tape& t = tape_of(q, k);
  require(q.cols() == k.cols(), "segment_dot: shape mismatch");
  Eigen::Index total = 0;
  for (const Segment& s : segments) {
    require(s.q_len == 1 && s.kv_begin + s.kv_len <= k.rows() &&
                s.q_begin < q.rows(),
            "segment_dot: bad segment");
    total += s.kv_len;
  }
  Matrix out(total, 1);
  Eigen::Index r = 0;
  for (const Segment& s : segments) {
    out.middleRows(r, s.kv_len) =
        k.value().middleRows(s.kv_begin, s.kv_len) *
        q.value().row(s.q_begin).transpose();
    r += s.kv_len;
  }
  const int iq = q.id(), ik = k.id();
  return t.push(std::move(out), t.needs_grad({q, k}),
                [iq, ik, segments](Tape& t, const Matrix& g) {
                  Eigen::Index r = 0;
                  for (const Segment& s : segments) {
                    const auto gs = g.middleRows(r, s.kv_len);
                    if (t.needs_grad(iq)) {
                      t.accumulate_row(
                          iq, s.q_begin,
                          (gs.transpose() *
                           t.value(ik).middleRows(s.kv_begin, s.kv_len)));
                    }
                    if (t.needs_grad(ik)) {
                      t.accumulate_block(
                          ik, s.kv_begin, 0,
                          Matrix(gs * t.value(iq).row(s.q_begin)));
                    }
                    r += s.kv_len;
                  }
                });
}

Var masked_log_softmax(Var scores, const std::vector<Range>& ranges,
                       const std::vector<std::uint8_t>& mask) {
  Tape& t = tape_of(scores);
  require(scores.cols() == 1 &&
              static_cast<Eigen::Index>(mask.size()) == scores.rows(),
          "masked_log_softmax: shape mismatch");
  const Matrix& x = scores.value();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix out = Matrix::Constant(x.rows(), 1, kNegInf);
  for (const Range& r : ranges) {
    double mx = kNegInf;
    for (int i = r.begin; i < r.begin + r.len; ++i) {
      if (mask[i]) mx = std::max(mx, x(i, 0));
    }
    require(mx > kNegInf, "masked_log_softmax: empty mask");
    double z = 0.0;
    for (int i = r.begin; i < r.begin + r.len; ++i) {
      if (mask[i]) z += std::exp(x(i, 0) - mx);
    }
    const double lse = mx + std::log(z);
    for (int i = r.begin; i < r.begin + r.len; ++i) {
      if (mask[i]) out(i, 0) = x(i, 0) - lse;
    }
  }
  const int is = scores.id();
  if (!t.needs_grad({scores})) return t.push(std::move(out), false, nullptr);
  Matrix logp = out;
  return t.push(std::move(out), true,
                [is, ranges, mask, logp = std::move(logp)](Tape& t,
                                                           const Matrix& g) {
                  Matrix gx = Matrix::Zero(logp.rows(), 1);
                  for (const Range& r : ranges) {
                    double gsum = 0.0;
                    for (int i = r.begin; i < r.begin + r.len; ++i) {
                      if (mask[i]) gsum += g(i, 0);
                    }
                    for (int i = r.begin; i < r.begin + r.len; ++i) {
                      if (mask[i]) {
                        gx(i, 0) = g(i, 0) - std::exp(logp(i, 0)) * gsum;
                      }
                    }
                  }
                  t.accumulate(is, gx);
                });
}

Var pick(Var column, const std::vector<int>& index) {
  require(column.valid() && column.cols() == 1, "pick: expects a column");
  return gather_rows(column, index);
}

Var weighted_sum(Var column, const std::vector<double>& weights) {
  Tape& t = tape_of(column);
  require(column.cols() == 1 &&
              static_cast<Eigen::Index>(weights.size()) == column.rows(),
          "weighted_sum: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) s += weights[i] * column.value()(i, 0);
  }
  const int ic = column.id();
  return t.push(Matrix::Constant(1, 1, s), t.needs_grad({column}),
                [ic, weights](Tape& t, const Matrix& g) {
                  Matrix gc(weights.size(), 1);
                  for (std::size_t i = 0; i < weights.size(); ++i) {
                    gc(i, 0) = weights[i] * g(0, 0);
                  }
                  t.accumulate(ic, gc);
                });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), t.needs_grad({a}),
                [ia](Tape& t, const Matrix& g) {
                  const Matrix& x = t.value(ia);
                  t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(),
                                                    g(0, 0)));
                });
}

}  // namespace rmfs::ad
