#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pssl/losses.hpp"
#include "pssl/numerics.hpp"
#include "test_support.hpp"

using namespace pssl;
using test_support::random_matrix;

namespace {

// Orthogonal standardized columns (biased variance exactly 1, zero mean).
Matrix hadamard8(int cols) {
  Matrix h(8, 8);
  h << 1, 1, 1, 1, 1, 1, 1, 1,
       1, -1, 1, -1, 1, -1, 1, -1,
       1, 1, -1, -1, 1, 1, -1, -1,
       1, -1, -1, 1, 1, -1, -1, 1,
       1, 1, 1, 1, -1, -1, -1, -1,
       1, -1, 1, -1, -1, 1, -1, 1,
       1, 1, -1, -1, -1, -1, 1, 1,
       1, -1, -1, 1, -1, 1, 1, -1;
  return h.block(0, 1, 8, cols);  // drop the all-ones column
}

Matrix permuted_rows(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(perm[i]);
  return out;
}

}  // namespace

TEST_CASE("nt_xent: identical views give uniform softmax over three candidates") {
  Matrix z(2, 3);
  z << 1.0, 2.0, 3.0, 1.0, 2.0, 3.0;  // both samples identical as well
  CHECK(losses::nt_xent(z, z, 0.5) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("nt_xent: perfect positives against opposite negatives vanish") {
  Matrix z1(2, 2), z2(2, 2);
  z1 << 1.0, 0.0, -1.0, 0.0;
  z2 << 1.0, 0.0, -1.0, 0.0;  // positives at cosine 1, all negatives at cosine -1
  CHECK(losses::nt_xent(z1, z2, 0.1) < 1e-8);
}

TEST_CASE("nt_xent: invariant to an identical row permutation") {
  RngStream stream(41, 1);
  const Matrix z1 = random_matrix(stream, 6, 4);
  const Matrix z2 = random_matrix(stream, 6, 4);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  const double base = losses::nt_xent(z1, z2, 0.1);
  const double shuffled = losses::nt_xent(permuted_rows(z1, perm), permuted_rows(z2, perm), 0.1);
  CHECK(std::abs(base - shuffled) < 1e-12);
}

TEST_CASE("nt_xent: fewer than two samples is an error") {
  Matrix z(1, 4);
  z.setOnes();
  CHECK_THROWS_AS(losses::nt_xent(z, z, 0.1), std::invalid_argument);
}

TEST_CASE("byol: aligned, orthogonal, anti-aligned") {
  Matrix a(2, 2), b(2, 2), anti(2, 2);
  a << 1.0, 0.0, 0.0, 1.0;
  b << 0.0, 1.0, 1.0, 0.0;
  anti << -1.0, 0.0, 0.0, -1.0;
  CHECK(losses::byol_loss(a, a, a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(losses::byol_loss(a, b, a, b) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(losses::byol_loss(a, anti, a, anti) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("byol: no gradient reaches the target inputs") {
  RngStream stream(42, 2);
  ad::Var p1 = ad::leaf(random_matrix(stream, 4, 3));
  ad::Var p2 = ad::leaf(random_matrix(stream, 4, 3));
  ad::Var t1 = ad::leaf(random_matrix(stream, 4, 3));
  ad::Var t2 = ad::leaf(random_matrix(stream, 4, 3));
  ad::Var loss = losses::byol_loss(p1, t2, p2, t1);
  ad::backward(loss);
  CHECK(t1.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(t2.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p1.grad().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("wmse: identical views, anti-aligned views") {
  RngStream stream(43, 3);
  const Matrix z = random_matrix(stream, 12, 3);
  CHECK(losses::wmse_loss(z, z, 1e-6) == doctest::Approx(0.0).epsilon(1e-12));
  // Negating the batch flips every whitened, normalized row.
  CHECK(losses::wmse_loss(z, Matrix(-z), 1e-6) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("wmse: matches an independent step-by-step evaluation") {
  RngStream stream(44, 4);
  const Matrix z1 = random_matrix(stream, 16, 4);
  const Matrix z2 = random_matrix(stream, 16, 4);
  // Oracle path: explicit centering, covariance, factor inversion, row
  // normalization, mean squared row distance.
  auto process = [](const Matrix& z) {
    Matrix c = z.rowwise() - z.colwise().mean();
    Matrix cov = (c.transpose() * c) / static_cast<double>(z.rows() - 1);
    cov.diagonal().array() += 1e-6;
    Eigen::LLT<Matrix> llt(cov);
    Matrix l = llt.matrixL();
    Matrix inv_lt = l.transpose().inverse();
    Matrix y = c * inv_lt;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double n = y.row(i).norm();
      if (n > 0.0) y.row(i) /= n;
    }
    return y;
  };
  const Matrix y1 = process(z1), y2 = process(z2);
  double oracle = 0.0;
  for (Eigen::Index i = 0; i < y1.rows(); ++i) oracle += (y1.row(i) - y2.row(i)).squaredNorm();
  oracle /= static_cast<double>(y1.rows());
  CHECK(std::abs(losses::wmse_loss(z1, z2, 1e-6) - oracle) < 1e-9);
}

TEST_CASE("wmse: batch too small for whitening is an error") {
  Matrix z(4, 4);
  z.setRandom();
  CHECK_THROWS_AS(losses::wmse_loss(z, z, 1e-6), std::invalid_argument);
}

TEST_CASE("barlow: identity cross-correlation vanishes") {
  const Matrix z = hadamard8(3);
  CHECK(losses::barlow_loss(z, z, 5e-3) < 1e-9);
}

TEST_CASE("barlow: cross-correlation [[1,.5],[.5,1]] gives 0.0025") {
  const Matrix h = hadamard8(2);
  Matrix z(8, 2);
  z.col(0) = h.col(0);
  z.col(1) = 0.5 * h.col(0) + (std::sqrt(3.0) / 2.0) * h.col(1);
  CHECK(losses::barlow_loss(z, z, 5e-3) == doctest::Approx(0.0025).epsilon(1e-9));
}

TEST_CASE("barlow: cross-correlation diag(0.5) gives 0.5") {
  const Matrix h = hadamard8(4);
  Matrix z1(8, 2), z2(8, 2);
  z1.col(0) = h.col(0);
  z1.col(1) = h.col(1);
  z2.col(0) = 0.5 * h.col(0) + (std::sqrt(3.0) / 2.0) * h.col(2);
  z2.col(1) = 0.5 * h.col(1) + (std::sqrt(3.0) / 2.0) * h.col(3);
  CHECK(losses::barlow_loss(z1, z2, 5e-3) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("barlow: zero-variance column survives via the floor") {
  Matrix z1(4, 2), z2(4, 2);
  z1 << 1, 7, -1, 7, 1, 7, -1, 7;  // second column constant
  z2 = z1;
  const double loss = losses::barlow_loss(z1, z2, 5e-3);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);  // the dead column cannot reach correlation 1
}

TEST_CASE("barlow: self-pair equals the off-diagonal penalty alone") {
  RngStream stream(45, 5);
  Matrix z = random_matrix(stream, 32, 4);
  // standardize columns first so the diagonal term vanishes exactly
  z.rowwise() -= z.colwise().mean();
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    z.col(j) /= std::sqrt(z.col(j).squaredNorm() / static_cast<double>(z.rows()));
  const Matrix c = (z.transpose() * z) / static_cast<double>(z.rows());
  double offdiag = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      if (i != j) offdiag += c(i, j) * c(i, j);
  CHECK(losses::barlow_loss(z, z, 5e-3) == doctest::Approx(5e-3 * offdiag).epsilon(1e-7));
}

TEST_CASE("barlow: invariant to an identical row permutation") {
  RngStream stream(46, 6);
  const Matrix z1 = random_matrix(stream, 6, 3);
  const Matrix z2 = random_matrix(stream, 6, 3);
  const std::vector<int> perm{5, 2, 0, 4, 1, 3};
  CHECK(std::abs(losses::barlow_loss(z1, z2, 5e-3) -
                 losses::barlow_loss(permuted_rows(z1, perm), permuted_rows(z2, perm), 5e-3)) <
        1e-12);
}

TEST_CASE("pseudo-label cross entropy: uniform, saturated, hand value") {
  Matrix uniform = Matrix::Zero(4, 10);
  std::vector<int> labels{0, 3, 7, 9};
  CHECK(losses::pseudo_label_ce(uniform, labels) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Matrix saturated = Matrix::Zero(2, 5);
  saturated(0, 1) = 45.0;
  saturated(1, 4) = 50.0;
  CHECK(losses::pseudo_label_ce(saturated, {1, 4}) < 1e-9);

  Matrix two(1, 2);
  two << 1.0, 0.0;
  CHECK(losses::pseudo_label_ce(two, {0}) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("pseudo-label cross entropy: out-of-range label rejected") {
  Matrix logits = Matrix::Zero(2, 3);
  CHECK_THROWS_AS(losses::pseudo_label_ce(logits, {0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(losses::pseudo_label_ce(logits, {-1, 0}), std::invalid_argument);
}

TEST_CASE("total loss arithmetic") {
  CHECK(losses::total_loss(0.7, 123.0, 456.0, 0.0) == 0.7);
  CHECK(losses::total_loss(0.5, 0.3, 0.1, 0.1) == doctest::Approx(0.54).epsilon(1e-12));
  CHECK(losses::total_loss(0.9, 0.0, 0.0, 0.1) == 0.9);
  CHECK_THROWS_AS(losses::total_loss(1.0, 1.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("every loss is non-negative on random inputs") {
  RngStream stream(47, 7);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix z1 = random_matrix(stream, 10, 4, 2.0);
    const Matrix z2 = random_matrix(stream, 10, 4, 2.0);
    CHECK(losses::nt_xent(z1, z2, 0.1) >= 0.0);
    CHECK(losses::byol_loss(z1, z2, z2, z1) >= 0.0);
    const double w = losses::wmse_loss(z1, z2, 1e-6);
    CHECK(w >= 0.0);
    CHECK(w <= 4.0 + 1e-9);
    CHECK(losses::barlow_loss(z1, z2, 5e-3) >= 0.0);
    std::vector<int> labels(10);
    for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
    CHECK(losses::pseudo_label_ce(z1, labels) >= 0.0);
  }
}
