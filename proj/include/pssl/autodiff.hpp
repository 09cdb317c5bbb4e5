#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pssl/matrix.hpp"

// Small reverse-mode autodiff over dense matrices. Graphs are built eagerly
// by the op functions below and freed when the last Var handle goes away.
// Leaves persist across steps: backward() clears stale gradients of every
// node it reaches before accumulating fresh ones.
namespace pssl::ad {

struct Node {
  Matrix value;
  Matrix grad;  // empty until backward() reaches this node
  bool requires_grad = false;
  std::uint64_t order = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> pull;  // scatters this->grad into parents
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  const Matrix& value() const { return node_->value; }
  double scalar() const { return node_->value(0, 0); }

  // Gradient accumulated by the last backward(); zero if the node was never
  // reached (e.g. a leaf behind a stopgrad).
  Matrix grad() const {
    if (node_->grad.size() == 0)
      return Matrix::Zero(node_->value.rows(), node_->value.cols());
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

Var leaf(Matrix v);      // trainable input
Var constant(Matrix v);  // no gradient
Var stopgrad(const Var& v);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var matmul(const Var& a, const Var& b);     // A B
Var matmul_tn(const Var& a, const Var& b);  // A^T B
Var matmul_nt(const Var& a, const Var& b);  // A B^T
Var linear(const Var& x, const Var& w, const Var& b);  // x W + 1 b
Var relu(const Var& a);
Var concat_rows(const Var& a, const Var& b);
Var sum_all(const Var& a);  // 1x1
Var center_columns(const Var& a);
Var standardize_columns(const Var& a, double var_floor);
Var l2_normalize_rows(const Var& a);
Var cholesky(const Var& a);                      // SPD -> lower-triangular factor
Var solve_right_lt(const Var& x, const Var& l);  // x L^{-T}, L lower-triangular

// Fused reductions with hand-derived gradients.
Var ntxent_pair_loss(const Var& sims, int batch, double tau);
Var softmax_xent(const Var& logits, std::vector<int> labels);
Var barlow_penalty(const Var& cross, double lambda);

// Accumulates d(root)/d(node) into every reachable node that requires grad.
// root must be 1x1.
void backward(const Var& root);

}  // namespace pssl::ad
