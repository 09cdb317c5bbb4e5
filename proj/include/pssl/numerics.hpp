#pragma once

#include <functional>

#include "pssl/autodiff.hpp"
#include "pssl/matrix.hpp"

namespace pssl::numerics {

// Centers the batch per column, then applies the inverse Cholesky factor of
// the ridged sample covariance to every row, so the output has (near-)zero
// column means and sample covariance within O(eps) of the identity.
Matrix cholesky_whiten(const Matrix& batch, double eps);

// Differentiable version; gradients flow through the centering, covariance
// and triangular-solve chain.
ad::Var cholesky_whiten(const ad::Var& batch, double eps);

// Scales every nonzero row to unit Euclidean norm. Zero rows (and rows whose
// squared norm is already within 1e-12 of one) pass through unchanged, which
// makes the operation exactly idempotent.
Matrix l2_normalize_rows(const Matrix& batch);

struct ValueGrad {
  double value;
  Vector grad;
};

// A scalar function together with its analytic gradient.
using DiffFn = std::function<ValueGrad(const Vector&)>;

// Central-difference check of the analytic gradient at `point`. Returns the
// max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const DiffFn& f, const Vector& point, double h = 1e-5);

}  // namespace pssl::numerics
