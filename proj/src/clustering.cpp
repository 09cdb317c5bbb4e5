#include "pssl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pssl/numerics.hpp"

namespace pssl::clustering {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest-centroid assignment; ties go to the lowest centroid index.
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    Vector& dist2) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  labels.assign(static_cast<std::size_t>(n), 0);
  dist2 = Vector::Constant(n, kInf);
  for (Eigen::Index c = 0; c < k; ++c) {
    Vector d = (points.rowwise() - centroids.row(c)).rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d(i) < dist2(i)) {
        dist2(i) = d(i);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
      }
    }
  }
}

}  // namespace

Matrix kmeanspp_seed(const Matrix& points, int k, RngStream& stream) {
  const Eigen::Index n = points.rows();
  check_arg(k >= 1, "kmeanspp_seed: need at least one cluster");
  check_arg(static_cast<Eigen::Index>(k) <= n, "kmeanspp_seed: more clusters than points");
  check_finite(points, "kmeanspp_seed");
  Matrix centroids(k, points.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  std::size_t first = stream.uniform_index(static_cast<std::size_t>(n));
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  chosen[first] = 1;

  Vector dist2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double r = stream.uniform() * total;
      double cum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += dist2(i);
        if (cum > r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // r landed on the last sliver of accumulated rounding
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (dist2(i) > 0.0) {
            pick = i;
            break;
          }
      }
    }
    if (pick < 0) {  // every point coincides with a chosen centroid
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      if (pick < 0) pick = 0;
    }
    centroids.row(c) = points.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    Vector d = (points.rowwise() - centroids.row(c)).rowwise().squaredNorm();
    dist2 = dist2.cwiseMin(d);
  }
  return centroids;
}

LloydResult lloyd_iterate(const Matrix& points, Matrix centroids, int max_iter, double tol) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  check_arg(k >= 1 && centroids.cols() == points.cols(), "lloyd_iterate: invalid centroids");
  check_arg(max_iter >= 1, "lloyd_iterate: max_iter must be positive");
  check_finite(points, "lloyd_iterate");
  check_finite(centroids, "lloyd_iterate");

  LloydResult result;
  result.centroids = std::move(centroids);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  Vector dist2;
  double prev_obj = kInf;

  for (int iter = 0; iter < max_iter; ++iter) {
    assign_nearest(points, result.centroids, result.labels, dist2);
    std::fill(counts.begin(), counts.end(), 0);
    for (int lbl : result.labels) ++counts[static_cast<std::size_t>(lbl)];

    // Refill empty clusters with the farthest point from its centroid,
    // restricted to clusters that keep at least one member.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto owner = static_cast<std::size_t>(result.labels[static_cast<std::size_t>(i)]);
        if (counts[owner] < 2) continue;
        if (dist2(i) > far_d) {
          far_d = dist2(i);
          far = i;
        }
      }
      check_arg(far >= 0, "lloyd_iterate: cannot repair empty cluster");
      --counts[static_cast<std::size_t>(result.labels[static_cast<std::size_t>(far)])];
      result.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      counts[static_cast<std::size_t>(c)] = 1;
      result.centroids.row(c) = points.row(far);
      dist2(far) = 0.0;
    }

    const double obj = dist2.sum();
    result.objective_trace.push_back(obj);
    if (obj == 0.0) break;
    if (std::isfinite(prev_obj) && (prev_obj - obj) < tol * prev_obj) break;
    prev_obj = obj;

    Matrix sums = Matrix::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      sums.row(result.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (Eigen::Index c = 0; c < k; ++c)
      result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  return result;
}

PseudoLabelSet assign_pseudo_labels(const Matrix& embeddings, int k, RngStream& stream) {
  check_arg(static_cast<Eigen::Index>(k) <= embeddings.rows(),
            "assign_pseudo_labels: more clusters than samples");
  const Matrix normalized = numerics::l2_normalize_rows(embeddings);
  Matrix seeds = kmeanspp_seed(normalized, k, stream);
  LloydResult lloyd = lloyd_iterate(normalized, std::move(seeds), 300, 1e-6);
  PseudoLabelSet out;
  out.labels = std::move(lloyd.labels);
  out.k = k;
  out.round = 0;
  out.centroids = std::move(lloyd.centroids);
  return out;
}

std::vector<int> max_weight_assignment(const Matrix& weights) {
  const int n = static_cast<int>(weights.rows());
  check_arg(weights.cols() == n && n >= 1, "max_weight_assignment: matrix must be square");
  // Potential-based Hungarian method on negated weights (min-cost form),
  // 1-indexed with a dummy row/column 0.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n), 0);
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
  return perm;
}

PseudoLabelSet align_labels(const PseudoLabelSet& prev, const PseudoLabelSet& next) {
  check_arg(prev.k == next.k, "align_labels: cluster counts differ");
  check_arg(prev.labels.size() == next.labels.size(), "align_labels: sample counts differ");
  const int k = next.k;
  Matrix contingency = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < next.labels.size(); ++i)
    contingency(prev.labels[i], next.labels[i]) += 1.0;
  const std::vector<int> perm = max_weight_assignment(contingency);  // perm[next id] = prev id
  PseudoLabelSet out;
  out.k = k;
  out.round = next.round;
  out.labels.resize(next.labels.size());
  for (std::size_t i = 0; i < next.labels.size(); ++i)
    out.labels[i] = perm[static_cast<std::size_t>(next.labels[i])];
  out.centroids = Matrix(k, next.centroids.cols());
  for (int j = 0; j < k; ++j) out.centroids.row(perm[static_cast<std::size_t>(j)]) = next.centroids.row(j);
  return out;
}

double purity(const PseudoLabelSet& labels, const std::vector<int>& truth) {
  check_arg(labels.labels.size() == truth.size(), "purity: length mismatch");
  check_arg(!truth.empty(), "purity: empty inputs");
  int classes = 0;
  for (int c : truth) {
    check_arg(c >= 0, "purity: negative class id");
    classes = std::max(classes, c + 1);
  }
  Matrix contingency = Matrix::Zero(labels.k, classes);
  for (std::size_t i = 0; i < truth.size(); ++i)
    contingency(labels.labels[i], truth[i]) += 1.0;
  double agree = 0.0;
  for (int c = 0; c < labels.k; ++c) agree += contingency.row(c).maxCoeff();
  return agree / static_cast<double>(truth.size());
}

}  // namespace pssl::clustering
