#pragma once

#include <vector>

#include "pssl/matrix.hpp"
#include "pssl/rng.hpp"

namespace pssl::clustering {

struct PseudoLabelSet {
  std::vector<int> labels;  // one cluster id per sample, each in [0, K)
  int k = 0;
  int round = 0;
  Matrix centroids;  // K x D
};

struct LloydResult {
  Matrix centroids;
  std::vector<int> labels;
  std::vector<double> objective_trace;  // sum of squared distances, per iteration
};

// k-means++ seeding: first centroid uniform over points, each next one
// sampled with probability proportional to the squared distance to the
// nearest centroid chosen so far. Deterministic given the stream.
Matrix kmeanspp_seed(const Matrix& points, int k, RngStream& stream);

// Lloyd refinement. Assignment ties go to the lowest centroid index; empty
// clusters are refilled with the point farthest from its assigned centroid.
// Stops when the relative objective change drops below tol or after max_iter
// iterations; the objective trace is non-increasing.
LloydResult lloyd_iterate(const Matrix& points, Matrix centroids, int max_iter, double tol);

// L2-normalizes the embeddings, seeds with k-means++, refines with Lloyd
// (max_iter 300, tol 1e-6) and returns hard labels.
PseudoLabelSet assign_pseudo_labels(const Matrix& embeddings, int k, RngStream& stream);

// Permutes `next`'s cluster ids by maximum-weight matching of the K x K
// contingency table against `prev` (Hungarian method), so ids stay stable
// across re-clustering rounds. Throws std::invalid_argument on K mismatch;
// the caller re-initializes the classifier head in that case.
PseudoLabelSet align_labels(const PseudoLabelSet& prev, const PseudoLabelSet& next);

// (1/N) * sum_k max_c |cluster k intersect class c|
double purity(const PseudoLabelSet& labels, const std::vector<int>& truth);

// Max-weight perfect matching on a square non-negative weight matrix;
// returns perm with perm[column] = row. Exposed for tests.
std::vector<int> max_weight_assignment(const Matrix& weights);

}  // namespace pssl::clustering
