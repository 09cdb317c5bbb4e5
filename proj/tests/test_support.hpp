#pragma once

#include <functional>
#include <vector>

#include "pssl/matrix.hpp"
#include "pssl/numerics.hpp"
#include "pssl/rng.hpp"

namespace test_support {

using pssl::Matrix;
using pssl::Vector;

inline Matrix random_matrix(pssl::RngStream& stream, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * stream.normal();
  return m;
}

inline Vector pack_pair(const Matrix& a, const Matrix& b) {
  Vector x(a.size() + b.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) x(k++) = a(i, j);
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) x(k++) = b(i, j);
  return x;
}

inline std::pair<Matrix, Matrix> unpack_pair(const Vector& x, int rows, int cols) {
  Matrix a(rows, cols), b(rows, cols);
  Eigen::Index k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = x(k++);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) b(i, j) = x(k++);
  return {a, b};
}

// Wraps a two-batch loss builder as a differentiable function of the
// flattened [z1; z2] vector, for grad_check.
inline pssl::numerics::DiffFn pair_loss_fn(
    std::function<pssl::ad::Var(const pssl::ad::Var&, const pssl::ad::Var&)> build, int rows,
    int cols) {
  return [build = std::move(build), rows, cols](const Vector& x) {
    auto [m1, m2] = unpack_pair(x, rows, cols);
    pssl::ad::Var z1 = pssl::ad::leaf(m1);
    pssl::ad::Var z2 = pssl::ad::leaf(m2);
    pssl::ad::Var loss = build(z1, z2);
    pssl::ad::backward(loss);
    return pssl::numerics::ValueGrad{loss.scalar(), pack_pair(z1.grad(), z2.grad())};
  };
}

}  // namespace test_support
