#include "pssl/losses.hpp"

#include "pssl/numerics.hpp"

namespace pssl::losses {

namespace {

void check_pair(const Matrix& z1, const Matrix& z2, const char* op) {
  check_arg(z1.rows() == z2.rows() && z1.cols() == z2.cols(),
            std::string(op) + ": view shapes differ");
  check_finite(z1, op);
  check_finite(z2, op);
}

// mean over rows of (2 - 2 cos(a_i, b_i)); b carries no gradient
ad::Var byol_half(const ad::Var& online, const ad::Var& target) {
  const double b = static_cast<double>(online.value().rows());
  ad::Var a = ad::l2_normalize_rows(online);
  ad::Var t = ad::l2_normalize_rows(ad::stopgrad(target));
  ad::Var cos_sum = ad::sum_all(ad::hadamard(a, t));
  return ad::add_scalar(ad::scale(cos_sum, -2.0 / b), 2.0);
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "ntxent") return LossKind::NtXent;
  if (name == "byol") return LossKind::Byol;
  if (name == "wmse2") return LossKind::Wmse2;
  if (name == "barlow") return LossKind::Barlow;
  throw std::invalid_argument("unknown loss kind: " + name +
                              " (expected ntxent|byol|wmse2|barlow)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::NtXent: return "ntxent";
    case LossKind::Byol: return "byol";
    case LossKind::Wmse2: return "wmse2";
    default: return "barlow";
  }
}

void LossParams::validate() const {
  check_arg(temperature > 0.0, "temperature must be positive");
  check_arg(lambda > 0.0, "lambda must be positive");
  check_arg(epsilon > 0.0, "whitening epsilon must be positive");
}

ad::Var nt_xent(const ad::Var& z1, const ad::Var& z2, double tau) {
  check_pair(z1.value(), z2.value(), "nt_xent");
  check_arg(z1.value().rows() >= 2, "nt_xent: need at least two samples (no negatives exist)");
  check_arg(tau > 0.0, "nt_xent: temperature must be positive");
  const int b = static_cast<int>(z1.value().rows());
  ad::Var n1 = ad::l2_normalize_rows(z1);
  ad::Var n2 = ad::l2_normalize_rows(z2);
  ad::Var stacked = ad::concat_rows(n1, n2);
  ad::Var sims = ad::matmul_nt(stacked, stacked);
  return ad::ntxent_pair_loss(sims, b, tau);
}

double nt_xent(const Matrix& z1, const Matrix& z2, double tau) {
  return nt_xent(ad::constant(z1), ad::constant(z2), tau).scalar();
}

ad::Var byol_loss(const ad::Var& online_pred_1, const ad::Var& target_proj_2,
                  const ad::Var& online_pred_2, const ad::Var& target_proj_1) {
  check_pair(online_pred_1.value(), target_proj_2.value(), "byol_loss");
  check_pair(online_pred_2.value(), target_proj_1.value(), "byol_loss");
  check_arg(online_pred_1.value().rows() == online_pred_2.value().rows(),
            "byol_loss: view shapes differ");
  return ad::add(byol_half(online_pred_1, target_proj_2),
                 byol_half(online_pred_2, target_proj_1));
}

double byol_loss(const Matrix& p1, const Matrix& t2, const Matrix& p2, const Matrix& t1) {
  return byol_loss(ad::constant(p1), ad::constant(t2), ad::constant(p2), ad::constant(t1))
      .scalar();
}

ad::Var wmse_loss(const ad::Var& z1, const ad::Var& z2, double eps) {
  check_pair(z1.value(), z2.value(), "wmse_loss");
  check_arg(z1.value().rows() >= z1.value().cols() + 1,
            "wmse_loss: batch must have at least D+1 rows for whitening");
  const double b = static_cast<double>(z1.value().rows());
  ad::Var y1 = ad::l2_normalize_rows(numerics::cholesky_whiten(z1, eps));
  ad::Var y2 = ad::l2_normalize_rows(numerics::cholesky_whiten(z2, eps));
  ad::Var d = ad::sub(y1, y2);
  return ad::scale(ad::sum_all(ad::hadamard(d, d)), 1.0 / b);
}

double wmse_loss(const Matrix& z1, const Matrix& z2, double eps) {
  return wmse_loss(ad::constant(z1), ad::constant(z2), eps).scalar();
}

ad::Var barlow_loss(const ad::Var& z1, const ad::Var& z2, double lambda) {
  check_pair(z1.value(), z2.value(), "barlow_loss");
  check_arg(z1.value().rows() >= 2, "barlow_loss: need at least two samples");
  check_arg(lambda > 0.0, "barlow_loss: lambda must be positive");
  const double b = static_cast<double>(z1.value().rows());
  ad::Var s1 = ad::standardize_columns(z1, 1e-12);
  ad::Var s2 = ad::standardize_columns(z2, 1e-12);
  ad::Var cross = ad::scale(ad::matmul_tn(s1, s2), 1.0 / b);
  return ad::barlow_penalty(cross, lambda);
}

double barlow_loss(const Matrix& z1, const Matrix& z2, double lambda) {
  return barlow_loss(ad::constant(z1), ad::constant(z2), lambda).scalar();
}

ad::Var pseudo_label_ce(const ad::Var& logits, const std::vector<int>& labels) {
  return ad::softmax_xent(logits, labels);
}

double pseudo_label_ce(const Matrix& logits, const std::vector<int>& labels) {
  return ad::softmax_xent(ad::constant(logits), labels).scalar();
}

ad::Var total_loss(const ad::Var& l_ssl, const ad::Var& l_ps_1, const ad::Var& l_ps_2,
                   double alpha) {
  check_arg(alpha >= 0.0, "total_loss: alpha must be non-negative");
  return ad::add(l_ssl, ad::scale(ad::add(l_ps_1, l_ps_2), alpha));
}

double total_loss(double l_ssl, double l_ps_1, double l_ps_2, double alpha) {
  check_arg(alpha >= 0.0, "total_loss: alpha must be non-negative");
  return l_ssl + alpha * (l_ps_1 + l_ps_2);
}

}  // namespace pssl::losses
