#pragma once

#include <cstdint>
#include <vector>

#include "pssl/matrix.hpp"
#include "pssl/models.hpp"
#include "pssl/pid.hpp"

namespace pssl::eval {

struct EvalConfig {
  int knn_k = 5;
  int probe_epochs = 100;
  double probe_lr = 1e-3;
  int probe_batch = 64;
  double train_fraction = 0.8;
  int bins = 8;  // discretization for the PID diagnostic
  void validate() const;
};

// Majority vote among the k nearest training embeddings under cosine
// distance (rows are normalized internally). Vote ties go to the tied class
// whose nearest member is closest, then to the lowest class id.
double knn_eval(const Matrix& train_embeddings, const std::vector<int>& train_labels,
                const Matrix& test_embeddings, const std::vector<int>& test_labels, int k);

// Trains a fresh linear classifier on frozen encoder outputs with Adam and
// reports test accuracy. The encoder parameters are never touched.
double linear_probe(const models::ParameterSet& encoder, const Matrix& train_features,
                    const std::vector<int>& train_labels, const Matrix& test_features,
                    const std::vector<int>& test_labels, int class_count,
                    const EvalConfig& config, std::uint64_t seed);

struct RedundancyProxy {
  Matrix correlation;  // standardized cross-correlation between view features
  double mean_abs_offdiag = 0.0;
  double mean_diag = 0.0;
};

RedundancyProxy redundancy_proxy(const Matrix& z1, const Matrix& z2);

// Discretizes one embedding column from each view, uses the class labels as
// the target variable, and decomposes the empirical joint pmf.
pid::PidResult pid_diagnostic(const Vector& z1_column, const Vector& z2_column,
                              const std::vector<int>& labels, int bins);

// Per-dimension mean of pid_diagnostic over all column pairs.
pid::PidResult pid_diagnostic_mean(const Matrix& z1, const Matrix& z2,
                                   const std::vector<int>& labels, int bins);

}  // namespace pssl::eval
