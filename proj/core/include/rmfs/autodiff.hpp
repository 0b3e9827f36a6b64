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

#ifndef RMFS_AUTODIFF_HPP_
#define RMFS_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rmfs::ad {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  std::string name;
  Matrix value;
  Matrix grad;
};

// Running statistics of a batch-norm layer; not trained by gradients.
struct BatchNormState {
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d
  double momentum = 0.9;
  double eps = 1e-5;
};

enum class NormMode : std::uint8_t {
  kTrain,        // batch statistics, running averages updated
  kTrainFrozen,  // batch statistics, running averages untouched
  kInference,    // running averages
};

// Attention block: query rows [q_begin, q_begin+q_len) attend to key/value
// rows [kv_begin, kv_begin+kv_len).
struct Segment {
  int q_begin = 0;
  int q_len = 0;
  int kv_begin = 0;
  int kv_len = 0;
};

// Contiguous row range.
struct Range {
  int begin = 0;
  int len = 0;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  Var param(Parameter& p);

  // Reverse pass from a 1x1 node; parameter gradients are accumulated into
  // Parameter::grad.
  void backward(Var scalar, double seed = 1.0);
  void clear() { nodes_.clear(); }

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  bool needs_grad(std::initializer_list<Var> vars) const;

  // Creates an op node; `fn` is dropped when no input needs a gradient.
  Var push(Matrix value, bool needs_grad, Backward fn);
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_block(int id, Eigen::Index r, Eigen::Index c,
                        const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    ensure_grad(n);
    n.grad.block(r, c, g.rows(), g.cols()) += g;
  }
  template <typename Expr>
  void accumulate_row(int id, Eigen::Index r, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    ensure_grad(n);
    n.grad.row(r) += g;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  static void ensure_grad(Node& n) {
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  }

  bool record_;
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// x + b with b a 1 x cols row broadcast over rows.
Var add_bias(Var x, Var b);
Var linear(Var x, Var w, Var b);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, int begin, int len);
Var slice_rows(Var a, int begin, int len);
Var gather_rows(Var a, const std::vector<int>& index);
// Row i of the result is row i of a when take_a[i], else row i of b.
Var blend_rows(Var a, Var b, const std::vector<std::uint8_t>& take_a);
// One output row per range: the mean of its rows.
Var segment_mean(Var a, const std::vector<Range>& ranges);
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state,
               NormMode mode);
// Multi-head scaled dot-product attention over projected q, k, v.
Var attention(Var q, Var k, Var v, const std::vector<Segment>& segments,
              int heads);
// For segment s (q_len must be 1): score of key row j is q_s . k_j.
// Returns a column with one entry per key row covered by the segments, in
// segment order.
Var segment_dot(Var q, Var k, const std::vector<Segment>& segments);
// Log-softmax of a column within consecutive ranges, restricted to mask.
// Masked entries are -inf and receive no gradient.
Var masked_log_softmax(Var scores, const std::vector<Range>& ranges,
                       const std::vector<std::uint8_t>& mask);
Var pick(Var column, const std::vector<int>& index);
// sum_i w_i * a_i over a column; returns 1x1.
Var weighted_sum(Var column, const std::vector<double>& weights);
Var sum(Var a);

}  // namespace rmfs::ad

#endif  // RMFS_AUTODIFF_HPP_
