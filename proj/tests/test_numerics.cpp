#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pssl/losses.hpp"
#include "pssl/numerics.hpp"
#include "test_support.hpp"

using namespace pssl;
using test_support::pair_loss_fn;
using test_support::random_matrix;

namespace {

// 4x3 batch with exactly zero column means and exactly identity sample
// covariance (scaled Hadamard columns).
Matrix hadamard_batch() {
  Matrix h(4, 3);
  h << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  return h * (std::sqrt(3.0) / 2.0);
}

Matrix sample_covariance(const Matrix& m) {
  Matrix c = m.rowwise() - m.colwise().mean();
  return Matrix((c.transpose() * c) / static_cast<double>(m.rows() - 1));
}

}  // namespace

TEST_CASE("whitening: identity-covariance batch passes through") {
  const Matrix batch = hadamard_batch();
  const Matrix white = numerics::cholesky_whiten(batch, 1e-8);
  CHECK((white - batch).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("whitening: single column with sample variance 4 halves") {
  Matrix batch(3, 1);
  batch << -2.0, 0.0, 2.0;  // mean 0, sample variance 4
  const Matrix white = numerics::cholesky_whiten(batch, 1e-12);
  CHECK(white(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(white(1, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(white(2, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("whitening: output covariance is identity within 1e-4") {
  RngStream stream(31, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix batch = random_matrix(stream, 32, 8);
    const Matrix white = numerics::cholesky_whiten(batch, 1e-6);
    const Matrix cov = sample_covariance(white);
    CHECK((cov - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(white.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("whitening: idempotent up to epsilon") {
  RngStream stream(32, 2);
  const Matrix batch = random_matrix(stream, 24, 6);
  const Matrix once = numerics::cholesky_whiten(batch, 1e-6);
  const Matrix twice = numerics::cholesky_whiten(once, 1e-6);
  CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("whitening: validation errors") {
  Matrix one_row(1, 3);
  one_row << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(numerics::cholesky_whiten(one_row, 1e-6), std::invalid_argument);
  Matrix ok(4, 2);
  ok.setZero();
  CHECK_THROWS_AS(numerics::cholesky_whiten(ok, 0.0), std::invalid_argument);
  ok(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(numerics::cholesky_whiten(ok, 1e-6), std::invalid_argument);
}

TEST_CASE("l2 normalization: 3-4-5 row, unit row, zero row") {
  Matrix m(3, 2);
  m << 3.0, 4.0, 1.0, 0.0, 0.0, 0.0;
  const Matrix n = numerics::l2_normalize_rows(m);
  CHECK(n(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(n(1, 0) == 1.0);
  CHECK(n(2, 0) == 0.0);
  CHECK(n(2, 1) == 0.0);
}

TEST_CASE("l2 normalization is exactly idempotent") {
  RngStream stream(33, 3);
  const Matrix m = random_matrix(stream, 16, 5, 3.0);
  const Matrix once = numerics::l2_normalize_rows(m);
  const Matrix twice = numerics::l2_normalize_rows(once);
  for (Eigen::Index i = 0; i < once.rows(); ++i)
    for (Eigen::Index j = 0; j < once.cols(); ++j)
      CHECK(once(i, j) == twice(i, j));  // bitwise
}

TEST_CASE("grad_check: quadratic and linear functions") {
  numerics::DiffFn square = [](const Vector& x) {
    Vector g(1);
    g(0) = 2.0 * x(0);
    return numerics::ValueGrad{x(0) * x(0), g};
  };
  Vector at(1);
  at << 3.0;
  CHECK(numerics::grad_check(square, at, 1e-5) < 1e-9);

  numerics::DiffFn sum = [](const Vector& x) {
    return numerics::ValueGrad{x.sum(), Vector::Ones(x.size())};
  };
  RngStream stream(34, 4);
  Vector point(6);
  for (int i = 0; i < 6; ++i) point(i) = stream.normal();
  CHECK(numerics::grad_check(sum, point, 1e-5) < 1e-10);
}

TEST_CASE("grad_check rejects non-finite functions") {
  numerics::DiffFn bad = [](const Vector& x) {
    return numerics::ValueGrad{std::log(x(0)), Vector::Ones(1)};
  };
  Vector at(1);
  at << -1.0;
  CHECK_THROWS_AS(numerics::grad_check(bad, at, 1e-5), std::runtime_error);
}

TEST_CASE("whitening gradients flow through the full chain") {
  RngStream stream(35, 5);
  const Matrix probe = random_matrix(stream, 8, 4);
  numerics::DiffFn fn = [&probe](const Vector& x) {
    Matrix m(8, 4);
    Eigen::Index k = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 4; ++j) m(i, j) = x(k++);
    ad::Var batch = ad::leaf(m);
    ad::Var white = numerics::cholesky_whiten(batch, 1e-6);
    ad::Var loss = ad::sum_all(ad::hadamard(white, ad::constant(probe)));
    ad::backward(loss);
    Vector g(32);
    k = 0;
    const Matrix gm = batch.grad();
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 4; ++j) g(k++) = gm(i, j);
    return numerics::ValueGrad{loss.scalar(), g};
  };
  Vector point(32);
  for (int i = 0; i < 32; ++i) point(i) = stream.normal();
  CHECK(numerics::grad_check(fn, point, 1e-5) < 1e-5);
}

TEST_CASE("every ssl loss passes grad_check on random 8x4 batches") {
  RngStream stream(36, 6);
  const Vector point = test_support::pack_pair(random_matrix(stream, 8, 4),
                                               random_matrix(stream, 8, 4));
  auto check = [&point](const char* name,
                        std::function<ad::Var(const ad::Var&, const ad::Var&)> build) {
    INFO(name);
    CHECK(numerics::grad_check(pair_loss_fn(std::move(build), 8, 4), point, 1e-5) < 1e-5);
  };
  check("nt_xent", [](const ad::Var& a, const ad::Var& b) { return losses::nt_xent(a, b, 0.1); });
  check("wmse", [](const ad::Var& a, const ad::Var& b) { return losses::wmse_loss(a, b, 1e-6); });
  check("barlow",
        [](const ad::Var& a, const ad::Var& b) { return losses::barlow_loss(a, b, 5e-3); });
  RngStream tstream(37, 7);
  const Matrix t1 = random_matrix(tstream, 8, 4);
  const Matrix t2 = random_matrix(tstream, 8, 4);
  check("byol", [&t1, &t2](const ad::Var& a, const ad::Var& b) {
    return losses::byol_loss(a, ad::constant(t2), b, ad::constant(t1));
  });
  std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  check("pseudo_label_ce", [&labels](const ad::Var& a, const ad::Var& b) {
    return ad::add(losses::pseudo_label_ce(a, labels), losses::pseudo_label_ce(b, labels));
  });
  check("total_loss", [&labels](const ad::Var& a, const ad::Var& b) {
    ad::Var ssl = losses::barlow_loss(a, b, 5e-3);
    ad::Var ce1 = losses::pseudo_label_ce(a, labels);
    ad::Var ce2 = losses::pseudo_label_ce(b, labels);
    return losses::total_loss(ssl, ce1, ce2, 0.1);
  });
}
