#pragma once

#include <string>
#include <vector>

#include "pssl/autodiff.hpp"
#include "pssl/matrix.hpp"

namespace pssl::losses {

enum class LossKind { NtXent, Byol, Wmse2, Barlow };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct LossParams {
  LossKind kind = LossKind::Barlow;
  double temperature = 0.1;  // nt_xent
  double lambda = 5e-3;      // barlow
  double epsilon = 1e-6;     // whitening ridge
  void validate() const;
};

// Normalized-temperature cross entropy over the 2B stacked views; the
// positive of anchor i is the other view of the same sample, the denominator
// runs over every candidate except the anchor itself. Natural log.
ad::Var nt_xent(const ad::Var& z1, const ad::Var& z2, double tau);
double nt_xent(const Matrix& z1, const Matrix& z2, double tau);

// Symmetric BYOL regression loss: mean over rows of 2 - 2 cos(p1, sg(t2))
// plus the mirrored term. Target inputs are stop-gradiented internally.
ad::Var byol_loss(const ad::Var& online_pred_1, const ad::Var& target_proj_2,
                  const ad::Var& online_pred_2, const ad::Var& target_proj_1);
double byol_loss(const Matrix& p1, const Matrix& t2, const Matrix& p2, const Matrix& t1);

// Whitened-MSE: each view's batch is Cholesky-whitened, rows normalized, and
// the loss is the mean squared row distance between the processed views.
ad::Var wmse_loss(const ad::Var& z1, const ad::Var& z2, double eps);
double wmse_loss(const Matrix& z1, const Matrix& z2, double eps);

// Cross-correlation (Barlow-style) loss on per-column standardized views.
ad::Var barlow_loss(const ad::Var& z1, const ad::Var& z2, double lambda);
double barlow_loss(const Matrix& z1, const Matrix& z2, double lambda);

// Mean negative log softmax probability of the assigned pseudo-label.
ad::Var pseudo_label_ce(const ad::Var& logits, const std::vector<int>& labels);
double pseudo_label_ce(const Matrix& logits, const std::vector<int>& labels);

// l_ssl + alpha * (l_ps_1 + l_ps_2)
ad::Var total_loss(const ad::Var& l_ssl, const ad::Var& l_ps_1, const ad::Var& l_ps_2,
                   double alpha);
double total_loss(double l_ssl, double l_ps_1, double l_ps_2, double alpha);

}  // namespace pssl::losses
