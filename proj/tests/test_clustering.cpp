#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pssl/clustering.hpp"
#include "test_support.hpp"

using namespace pssl;
using test_support::random_matrix;

namespace {

Matrix two_blobs(RngStream& stream, int per_blob, int d, double sep, double sigma,
                 std::vector<int>* truth = nullptr) {
  Matrix points(2 * per_blob, d);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const int blob = i < per_blob ? 0 : 1;
    for (int j = 0; j < d; ++j)
      points(i, j) = (j == 0 ? (blob == 0 ? -sep : sep) : 0.0) + sigma * stream.normal();
    if (truth) truth->push_back(blob);
  }
  return points;
}

double wcss(const Matrix& points, const std::vector<int>& labels, int k) {
  Matrix sums = Matrix::Zero(k, points.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  }
  double obj = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    obj += (points.row(i) - sums.row(c) / counts[static_cast<std::size_t>(c)]).squaredNorm();
  }
  return obj;
}

// Exhaustive search over all k^n assignments.
double brute_force_best_objective(const Matrix& points, int k) {
  const int n = static_cast<int>(points.rows());
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  const long total = static_cast<long>(std::pow(k, n));
  for (long code = 0; code < total; ++code) {
    long x = code;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = static_cast<int>(x % k);
      x /= k;
    }
    best = std::min(best, wcss(points, labels, k));
  }
  return best;
}

double matching_weight(const Matrix& w, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j)
    total += w(perm[j], static_cast<Eigen::Index>(j));
  return total;
}

double brute_force_matching(const Matrix& w) {
  const int k = static_cast<int>(w.rows());
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    best = std::max(best, matching_weight(w, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("kmeans++: choosing every point when K = N") {
  RngStream data_stream(60, 1);
  const Matrix points = random_matrix(data_stream, 6, 3);
  for (int trial = 0; trial < 20; ++trial) {
    RngStream stream(60, 2, static_cast<std::uint64_t>(trial));
    const Matrix centroids = clustering::kmeanspp_seed(points, 6, stream);
    // every point appears exactly once
    std::vector<bool> seen(6, false);
    for (int c = 0; c < 6; ++c) {
      for (int i = 0; i < 6; ++i) {
        if ((centroids.row(c) - points.row(i)).norm() == 0.0 && !seen[static_cast<std::size_t>(i)]) {
          seen[static_cast<std::size_t>(i)] = true;
          break;
        }
      }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("kmeans++: coinciding points have zero selection probability") {
  Matrix points(3, 1);
  points << 0.0, 0.0, 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    RngStream stream(61, 3, static_cast<std::uint64_t>(trial));
    const Matrix centroids = clustering::kmeanspp_seed(points, 2, stream);
    // whichever point went first, the second centroid must be the other value
    CHECK(std::abs(centroids(0, 0) - centroids(1, 0)) == 1.0);
  }
}

TEST_CASE("kmeans++: two far blobs get one centroid each in >99% of seedings") {
  RngStream data_stream(62, 4);
  const Matrix points = two_blobs(data_stream, 50, 4, 20.0, 0.5);
  int split = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    RngStream stream(62, 5, static_cast<std::uint64_t>(trial));
    const Matrix centroids = clustering::kmeanspp_seed(points, 2, stream);
    if ((centroids(0, 0) < 0.0) != (centroids(1, 0) < 0.0)) ++split;
  }
  CHECK(split > 990);
}

TEST_CASE("kmeans++: more clusters than points is an error") {
  RngStream stream(63, 6);
  const Matrix points = random_matrix(stream, 3, 2);
  CHECK_THROWS_AS(clustering::kmeanspp_seed(points, 4, stream), std::invalid_argument);
}

TEST_CASE("lloyd: fixed point stops after one iteration with objective zero") {
  Matrix points(3, 2);
  points << 0, 0, 5, 5, -5, 5;
  const clustering::LloydResult result = clustering::lloyd_iterate(points, points, 100, 1e-9);
  REQUIRE(result.objective_trace.size() == 1);
  CHECK(result.objective_trace[0] == 0.0);
  CHECK(result.labels == std::vector<int>{0, 1, 2});
}

TEST_CASE("lloyd: K = 1 converges to the mean") {
  RngStream stream(64, 7);
  const Matrix points = random_matrix(stream, 40, 3);
  Matrix init = points.row(0);
  const clustering::LloydResult result = clustering::lloyd_iterate(points, init, 100, 1e-12);
  const RowVector mean = points.colwise().mean();
  CHECK((result.centroids.row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lloyd: objective never increases and ends above the global optimum") {
  RngStream stream(65, 8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 8, k = 2 + static_cast<int>(stream.uniform_index(2));  // k in {2,3}
    const Matrix points = random_matrix(stream, n, 2, 2.0);
    RngStream seed_stream(65, 9, static_cast<std::uint64_t>(trial));
    const Matrix init = clustering::kmeanspp_seed(points, k, seed_stream);
    const clustering::LloydResult result = clustering::lloyd_iterate(points, init, 100, 1e-10);
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
      CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] + 1e-12);
    CHECK(result.objective_trace.back() >= brute_force_best_objective(points, k) - 1e-9);
  }
}

TEST_CASE("lloyd: objective trace non-increasing on 1000 random instances") {
  RngStream stream(66, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 5 + static_cast<int>(stream.uniform_index(20));
    const int k = 1 + static_cast<int>(stream.uniform_index(std::min(n, 5)));
    const Matrix points = random_matrix(stream, n, 3, 3.0);
    RngStream seed_stream(66, 11, static_cast<std::uint64_t>(trial));
    const Matrix init = clustering::kmeanspp_seed(points, k, seed_stream);
    const clustering::LloydResult result = clustering::lloyd_iterate(points, init, 50, 1e-8);
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
      CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("lloyd: empty clusters are repaired") {
  // Two centroids both sitting on the left blob: the right blob pulls one
  // away only through the empty-cluster repair or mean updates; either way
  // every returned cluster must own at least one point.
  Matrix points(6, 1);
  points << 0.0, 0.1, -0.1, 10.0, 10.1, 9.9;
  Matrix init(2, 1);
  init << 0.0, 0.05;  // second centroid never wins a point at first assignment
  const clustering::LloydResult result = clustering::lloyd_iterate(points, init, 50, 1e-10);
  std::vector<int> counts(2, 0);
  for (int l : result.labels) ++counts[static_cast<std::size_t>(l)];
  CHECK(counts[0] > 0);
  CHECK(counts[1] > 0);
}

TEST_CASE("assign_pseudo_labels: separated blobs reach purity 1") {
  RngStream data_stream(67, 12);
  std::vector<int> truth;
  const Matrix points = two_blobs(data_stream, 60, 6, 10.0, 0.3, &truth);
  RngStream stream(67, 13);
  const clustering::PseudoLabelSet labels = clustering::assign_pseudo_labels(points, 2, stream);
  CHECK(clustering::purity(labels, truth) == doctest::Approx(1.0));
  for (int l : labels.labels) CHECK((l == 0 || l == 1));
}

TEST_CASE("assign_pseudo_labels: K = N gives objective zero and distinct labels") {
  RngStream data_stream(68, 14);
  const Matrix points = random_matrix(data_stream, 8, 3);
  RngStream stream(68, 15);
  const clustering::PseudoLabelSet labels = clustering::assign_pseudo_labels(points, 8, stream);
  std::vector<int> sorted = labels.labels;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 8; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("assign_pseudo_labels is deterministic under a fixed stream") {
  RngStream data_stream(69, 16);
  const Matrix points = random_matrix(data_stream, 50, 4);
  RngStream s1(69, 17), s2(69, 17);
  const clustering::PseudoLabelSet a = clustering::assign_pseudo_labels(points, 5, s1);
  const clustering::PseudoLabelSet b = clustering::assign_pseudo_labels(points, 5, s2);
  CHECK(a.labels == b.labels);
  CHECK((a.centroids - b.centroids).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("align_labels: identity and swap") {
  clustering::PseudoLabelSet prev;
  prev.labels = {0, 0, 1, 1, 2, 2};
  prev.k = 3;
  prev.centroids = Matrix::Identity(3, 3);

  clustering::PseudoLabelSet same = prev;
  same.round = 1;
  const clustering::PseudoLabelSet aligned = clustering::align_labels(prev, same);
  CHECK(aligned.labels == prev.labels);
  CHECK(aligned.round == 1);

  clustering::PseudoLabelSet swapped = prev;
  for (int& l : swapped.labels) l = l == 0 ? 1 : l == 1 ? 0 : l;  // swap ids 0 and 1
  swapped.centroids.row(0) = prev.centroids.row(1);
  swapped.centroids.row(1) = prev.centroids.row(0);
  const clustering::PseudoLabelSet undone = clustering::align_labels(prev, swapped);
  CHECK(undone.labels == prev.labels);
  CHECK((undone.centroids - prev.centroids).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("align_labels: matching weight equals the factorial brute force") {
  RngStream stream(70, 18);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(stream.uniform_index(4));  // K in [2,5]
    const int n = k + static_cast<int>(stream.uniform_index(26));
    clustering::PseudoLabelSet prev, next;
    prev.k = next.k = k;
    prev.centroids = next.centroids = Matrix::Zero(k, 2);
    for (int i = 0; i < n; ++i) {
      prev.labels.push_back(static_cast<int>(stream.uniform_index(static_cast<std::size_t>(k))));
      next.labels.push_back(static_cast<int>(stream.uniform_index(static_cast<std::size_t>(k))));
    }
    // make sure every id is present so the contingency is well-formed
    for (int c = 0; c < k; ++c) {
      prev.labels[static_cast<std::size_t>(c)] = c;
      next.labels[static_cast<std::size_t>(c)] = c;
    }
    Matrix contingency = Matrix::Zero(k, k);
    for (std::size_t i = 0; i < prev.labels.size(); ++i)
      contingency(prev.labels[i], next.labels[i]) += 1.0;
    const std::vector<int> perm = clustering::max_weight_assignment(contingency);
    CHECK(matching_weight(contingency, perm) ==
          doctest::Approx(brute_force_matching(contingency)));
    // alignment only relabels: co-clustering relation is unchanged
    const clustering::PseudoLabelSet aligned = clustering::align_labels(prev, next);
    for (std::size_t i = 0; i < next.labels.size(); ++i)
      for (std::size_t j = i + 1; j < next.labels.size(); ++j)
        CHECK((next.labels[i] == next.labels[j]) == (aligned.labels[i] == aligned.labels[j]));
  }
}

TEST_CASE("align_labels: K mismatch is signalled") {
  clustering::PseudoLabelSet a, b;
  a.k = 2;
  a.labels = {0, 1};
  b.k = 3;
  b.labels = {0, 1};
  CHECK_THROWS_AS(clustering::align_labels(a, b), std::invalid_argument);
}

TEST_CASE("purity: renaming, single cluster, hand-counted case") {
  clustering::PseudoLabelSet renamed;
  renamed.labels = {2, 2, 0, 0, 1, 1};
  renamed.k = 3;
  CHECK(clustering::purity(renamed, {0, 0, 1, 1, 2, 2}) == doctest::Approx(1.0));

  clustering::PseudoLabelSet single;
  single.labels.assign(10, 0);
  single.k = 1;
  std::vector<int> ten_classes(10);
  std::iota(ten_classes.begin(), ten_classes.end(), 0);
  CHECK(clustering::purity(single, ten_classes) == doctest::Approx(0.1));

  // cluster 0: {a,a,b}; cluster 1: {b,b}; cluster 2: {c} -> (2+2+1)/6
  clustering::PseudoLabelSet mixed;
  mixed.labels = {0, 0, 0, 1, 1, 2};
  mixed.k = 3;
  CHECK(clustering::purity(mixed, {0, 0, 1, 1, 1, 2}) == doctest::Approx(5.0 / 6.0));

  CHECK_THROWS_AS(clustering::purity(mixed, {0, 0}), std::invalid_argument);
}
