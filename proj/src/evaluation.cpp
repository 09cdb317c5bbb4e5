#include "pssl/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "pssl/losses.hpp"
#include "pssl/numerics.hpp"
#include "pssl/rng.hpp"

namespace pssl::eval {

void EvalConfig::validate() const {
  check_arg(knn_k >= 1, "knn k must be at least 1");
  check_arg(probe_epochs >= 1, "probe epochs must be at least 1");
  check_arg(probe_lr > 0.0, "probe lr must be positive");
  check_arg(probe_batch >= 1, "probe batch must be at least 1");
  check_arg(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must be in (0, 1)");
  check_arg(bins >= 1 && bins <= pid::kMaxAlphabet, "bins must be in [1, 64]");
}

double knn_eval(const Matrix& train_embeddings, const std::vector<int>& train_labels,
                const Matrix& test_embeddings, const std::vector<int>& test_labels, int k) {
  check_arg(train_embeddings.rows() > 0 && test_embeddings.rows() > 0,
            "knn_eval: empty train or test set");
  check_arg(static_cast<Eigen::Index>(train_labels.size()) == train_embeddings.rows() &&
                static_cast<Eigen::Index>(test_labels.size()) == test_embeddings.rows(),
            "knn_eval: label counts do not match embeddings");
  check_arg(k >= 1 && static_cast<Eigen::Index>(k) <= train_embeddings.rows(),
            "knn_eval: k must be in [1, train size]");
  const Matrix train = numerics::l2_normalize_rows(train_embeddings);
  const Matrix test = numerics::l2_normalize_rows(test_embeddings);
  int classes = 1;
  for (int y : train_labels) classes = std::max(classes, y + 1);

  std::size_t correct = 0;
  std::vector<std::pair<double, int>> order(train_labels.size());  // (distance, train index)
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    Vector sims = train * test.row(i).transpose();
    for (std::size_t j = 0; j < train_labels.size(); ++j)
      order[j] = {1.0 - sims(static_cast<Eigen::Index>(j)), static_cast<int>(j)};
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    std::vector<double> nearest(static_cast<std::size_t>(classes),
                                std::numeric_limits<double>::infinity());
    for (int j = 0; j < k; ++j) {
      const int cls = train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)].second)];
      ++votes[static_cast<std::size_t>(cls)];
      nearest[static_cast<std::size_t>(cls)] =
          std::min(nearest[static_cast<std::size_t>(cls)], order[static_cast<std::size_t>(j)].first);
    }
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      const auto cc = static_cast<std::size_t>(c), bb = static_cast<std::size_t>(best);
      if (votes[cc] > votes[bb] || (votes[cc] == votes[bb] && nearest[cc] < nearest[bb]))
        best = c;  // equal distance keeps the lower class id
    }
    if (best == test_labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

double linear_probe(const models::ParameterSet& encoder, const Matrix& train_features,
                    const std::vector<int>& train_labels, const Matrix& test_features,
                    const std::vector<int>& test_labels, int class_count,
                    const EvalConfig& config, std::uint64_t seed) {
  config.validate();
  check_arg(class_count >= 2, "linear_probe: need at least two classes");
  const Matrix train_emb = models::forward_embed(encoder, train_features, models::Stage::Encoder);
  const Matrix test_emb = models::forward_embed(encoder, test_features, models::Stage::Encoder);

  RngStream init_stream(seed, stream_purpose::kProbe, 0);
  models::LayerParams head =
      models::init_classifier(static_cast<int>(train_emb.cols()), class_count, init_stream);
  models::ParameterSet head_set;
  head_set.classifier = head;
  models::AdamState opt = models::AdamState::init(head_set, config.probe_lr, 0.0);

  std::vector<int> indices(train_labels.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
  const int batch = std::min<int>(config.probe_batch, static_cast<int>(indices.size()));

  for (int epoch = 1; epoch <= config.probe_epochs; ++epoch) {
    RngStream shuffle_stream(seed, stream_purpose::kProbe, static_cast<std::uint64_t>(epoch));
    shuffle_stream.shuffle(indices);
    for (std::size_t start = 0; start + batch <= indices.size(); start += batch) {
      Matrix xb(batch, train_emb.cols());
      std::vector<int> yb(static_cast<std::size_t>(batch));
      for (int j = 0; j < batch; ++j) {
        xb.row(j) = train_emb.row(indices[start + static_cast<std::size_t>(j)]);
        yb[static_cast<std::size_t>(j)] =
            train_labels[static_cast<std::size_t>(indices[start + static_cast<std::size_t>(j)])];
      }
      ad::Var w = ad::leaf(head_set.classifier->weight);
      ad::Var b = ad::leaf(head_set.classifier->bias);
      ad::Var loss = losses::pseudo_label_ce(ad::linear(ad::constant(xb), w, b), yb);
      ad::backward(loss);
      models::ParameterSet grads;
      grads.classifier = models::LayerParams{w.grad(), b.grad()};
      models::adam_step(head_set, grads, opt);
    }
  }

  Matrix logits =
      (test_emb * head_set.classifier->weight).rowwise() + head_set.classifier->bias.row(0);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index argmax = 0;
    logits.row(i).maxCoeff(&argmax);
    if (static_cast<int>(argmax) == test_labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

RedundancyProxy redundancy_proxy(const Matrix& z1, const Matrix& z2) {
  check_arg(z1.rows() == z2.rows() && z1.cols() == z2.cols(),
            "redundancy_proxy: view shapes differ");
  check_arg(z1.rows() >= 2, "redundancy_proxy: need at least two samples");
  const double b = static_cast<double>(z1.rows());
  auto standardize = [b](const Matrix& z) {
    Matrix c = z.rowwise() - z.colwise().mean();
    RowVector sigma = (c.array().square().colwise().sum() / b + 1e-12).sqrt().matrix();
    return Matrix((c.array().rowwise() / sigma.array()).matrix());
  };
  RedundancyProxy out;
  out.correlation = (standardize(z1).transpose() * standardize(z2)) / b;
  const Eigen::Index d = out.correlation.rows();
  double off = 0.0, diag = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      (i == j ? diag : off) += (i == j ? out.correlation(i, j) : std::abs(out.correlation(i, j)));
  out.mean_diag = diag / static_cast<double>(d);
  out.mean_abs_offdiag = d > 1 ? off / static_cast<double>(d * (d - 1)) : 0.0;
  return out;
}

pid::PidResult pid_diagnostic(const Vector& z1_column, const Vector& z2_column,
                              const std::vector<int>& labels, int bins) {
  check_arg(z1_column.size() == z2_column.size() &&
                static_cast<std::size_t>(z1_column.size()) == labels.size(),
            "pid_diagnostic: length mismatch");
  const std::vector<int> s1 = pid::discretize(z1_column, bins);
  const std::vector<int> s2 = pid::discretize(z2_column, bins);
  return pid::decompose(pid::empirical_pmf(s1, s2, labels));
}

pid::PidResult pid_diagnostic_mean(const Matrix& z1, const Matrix& z2,
                                   const std::vector<int>& labels, int bins) {
  check_arg(z1.cols() == z2.cols() && z1.cols() >= 1, "pid_diagnostic_mean: shape mismatch");
  pid::PidResult mean;
  for (Eigen::Index j = 0; j < z1.cols(); ++j) {
    const pid::PidResult r = pid_diagnostic(z1.col(j), z2.col(j), labels, bins);
    mean.joint_mi += r.joint_mi;
    mean.redundancy += r.redundancy;
    mean.unique1 += r.unique1;
    mean.unique2 += r.unique2;
    mean.synergy += r.synergy;
  }
  const double d = static_cast<double>(z1.cols());
  mean.joint_mi /= d;
  mean.redundancy /= d;
  mean.unique1 /= d;
  mean.unique2 /= d;
  mean.synergy /= d;
  return mean;
}

}  // namespace pssl::eval
