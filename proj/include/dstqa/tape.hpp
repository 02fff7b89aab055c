#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dstqa {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// A learned tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix value, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();
  /// Number of scalar entries over trainable parameters.
  size_t trainable_size() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode automatic differentiation over dense matrices. Vectors are
/// 1 x n rows. A tape built with `record_gradients = false` skips all backward
/// bookkeeping and is used for inference.
class Tape {
 public:
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  const Matrix& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  /// Gradient accumulated by backward(); zero-sized if none reached the node.
  const Matrix& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
  size_t size() const { return nodes_.size(); }

  /// Runs backpropagation from a 1 x 1 node, adding into Parameter::grad.
  void backward(Var scalar);

  // Leaves.
  Var constant(Matrix value);
  /// One leaf per parameter per tape; repeated calls return the same node.
  Var param(Parameter& p);
  /// Rows `ids` of `table` (embedding lookup); gradients scatter into the table.
  Var lookup(Parameter& table, std::span<const int> ids);

  // Elementwise and linear algebra.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax_rows(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var row(Var a, long i);
  /// Output row g is the mean of the rows of `a` listed in groups[g].
  Var gather_mean_rows(Var a, const std::vector<std::vector<int>>& groups);
  Var sum(std::span<const Var> scalars);

  /// Row r of the result is softmax_i([K_i; Q_r; K_i * Q_r] . beta), i over rows of K.
  /// K: m x n, Q: k x n, beta: 1 x 3n. Result: k x m.
  Var attention(Var keys, Var queries, Var beta);

  /// -log softmax(logits)[target] for a 1 x m row. Result is 1 x 1.
  Var cross_entropy(Var logits, long target);

  /// Single-direction GRU over the rows of `inputs` (L x in). Gates are packed
  /// [update, reset, candidate] in w_in (in x 3h), w_hidden (h x 3h), bias (1 x 3h).
  /// Output row i is the hidden state after reading input row i; when
  /// `reverse` is set the sequence is read from the last row to the first.
  Var gru(Var inputs, Var w_in, Var w_hidden, Var bias, bool reverse);

  /// Convolution of width kernel_width over each token's character
  /// embeddings followed by max-over-time pooling. Tokens shorter than the
  /// kernel are zero-padded on the right. Result: tokens x filters.
  Var char_cnn(const std::vector<std::vector<int>>& char_ids, Parameter& char_table, Var filters,
               Var bias, int kernel_width);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, int)> backward;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, int)> backward);
  bool needs(Var v) const { return record_ && nodes_[static_cast<size_t>(v.id)].needs_grad; }
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  /// Gradient buffer of `v`, zero-initialized on first use.
  Matrix& grad_buffer(Var v);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace dstqa
