#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A `Var` is a cheap handle onto a graph node. Operations build a fresh graph
// on every forward pass; `backward()` walks it in reverse topological order
// and accumulates gradients into every node that requires them. Parameters
// keep their accumulated gradient until `zero_grad()`.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace mmkd::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Mutable access for optimizers and checkpoint loading; only meaningful on
  // leaf parameters.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  void zero_grad();
  // Seeds d(self)/d(self) = 1; self must be 1x1.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

// Training-time context: dropout draws from `rng` only when `training`.
struct ForwardMode {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

Var matmul(const Var& a, const Var& b);
Var spmm(std::shared_ptr<const SparseMatrix> a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
Var transpose(const Var& a);

Var relu(const Var& a);
// max(a, floor) element-wise; no gradient flows through clamped entries.
Var clamp_min(const Var& a, double floor);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias,
                    double eps = 1e-5);
Var dropout(const Var& a, double p, const ForwardMode& mode);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& table, std::span<const std::size_t> rows);
Var mean_rows(const Var& a);  // r x c -> 1 x c

Var sum(const Var& a);   // -> 1 x 1
Var mean(const Var& a);  // -> 1 x 1
Var pick(const Var& a, Eigen::Index row, Eigen::Index col);  // -> 1 x 1

// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets,
// computed in the numerically stable log-sum-exp form.
Var bce_with_logits(const Var& logits, const Matrix& targets);

enum class Activation { kRelu, kGelu };
Var activate(const Var& a, Activation act);

}  // namespace mmkd::nn
