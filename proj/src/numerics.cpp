#include "pssl/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace pssl::numerics {

Matrix cholesky_whiten(const Matrix& batch, double eps) {
  check_arg(batch.rows() >= 2, "cholesky_whiten: need at least two rows");
  check_arg(eps > 0.0, "cholesky_whiten: eps must be positive");
  check_finite(batch, "cholesky_whiten");
  Matrix centered = batch;
  centered.rowwise() -= batch.colwise().mean();
  const double denom = static_cast<double>(batch.rows() - 1);
  Matrix cov = (centered.transpose() * centered) / denom;
  cov.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cholesky_whiten: ridged covariance not positive definite");
  Matrix l = llt.matrixL();
  // y = centered * L^{-T}
  Matrix yt = l.triangularView<Eigen::Lower>().solve(Matrix(centered.transpose()));
  return yt.transpose();
}

ad::Var cholesky_whiten(const ad::Var& batch, double eps) {
  check_arg(batch.value().rows() >= 2, "cholesky_whiten: need at least two rows");
  check_arg(eps > 0.0, "cholesky_whiten: eps must be positive");
  const auto d = batch.value().cols();
  const double denom = static_cast<double>(batch.value().rows() - 1);
  ad::Var centered = ad::center_columns(batch);
  ad::Var cov = ad::scale(ad::matmul_tn(centered, centered), 1.0 / denom);
  Matrix ridge = Matrix::Zero(d, d);
  ridge.diagonal().array() = eps;
  cov = ad::add(cov, ad::constant(std::move(ridge)));
  ad::Var l = ad::cholesky(cov);
  return ad::solve_right_lt(centered, l);
}

Matrix l2_normalize_rows(const Matrix& batch) {
  Matrix y = batch;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double sq = y.row(i).squaredNorm();
    if (sq == 0.0 || std::abs(sq - 1.0) < 1e-12) continue;
    y.row(i) /= std::sqrt(sq);
  }
  return y;
}

double grad_check(const DiffFn& f, const Vector& point, double h) {
  check_arg(h > 0.0, "grad_check: step must be positive");
  const ValueGrad at_point = f(point);
  if (!std::isfinite(at_point.value))
    throw std::runtime_error("grad_check: function value not finite");
  check_arg(at_point.grad.size() == point.size(),
            "grad_check: gradient size does not match point");
  double worst = 0.0;
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    x(i) = point(i) + h;
    const double fp = f(x).value;
    x(i) = point(i) - h;
    const double fm = f(x).value;
    x(i) = point(i);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: function value not finite");
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = at_point.grad(i);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace pssl::numerics
