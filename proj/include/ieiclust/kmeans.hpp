#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"
#include "ieiclust/rng.hpp"

namespace ieiclust {

struct KMeansResult {
  ClusterAssignment assignment;
  Eigen::MatrixXd centroids;  // k x dims, ordered to match the final labels
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // inertia after each assignment step
};

namespace detail {

inline int nearest_centroid(const Eigen::MatrixXd& points, int row,
                            const Eigen::MatrixXd& centroids,
                            double* sq_dist_out = nullptr) {
  int best = 0;
  double best_sq = (points.row(row) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < centroids.rows(); ++c) {
    const double sq = (points.row(row) - centroids.row(c)).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best = c;
    }
  }
  if (sq_dist_out) *sq_dist_out = best_sq;
  return best;
}

// k-means++: first centroid uniform, the rest sampled proportionally to the
// squared distance to the nearest chosen centroid.
inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k,
                                     Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) =
      points.row(static_cast<int>(rng.uniform_index(
          static_cast<std::uint64_t>(n))));
  Eigen::VectorXd sq_dist(n);
  for (int i = 0; i < n; ++i)
    sq_dist(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = sq_dist.sum();
    int chosen;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += sq_dist(i);
        if (cum >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      // All remaining mass on duplicates of chosen centroids.
      chosen = static_cast<int>(
          rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(chosen);
    for (int i = 0; i < n; ++i)
      sq_dist(i) = std::min(
          sq_dist(i), (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Stops when the largest centroid
// shift drops below tol or after max_iter rounds. Empty clusters are repaired
// by stealing the point farthest from its assigned centroid.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k,
                           std::uint64_t seed, int max_iter = 300,
                           double tol = 1e-6) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > n)
    throw std::invalid_argument("kmeans: k (" + std::to_string(k) +
                                ") exceeds point count (" + std::to_string(n) +
                                ")");
  Rng rng(seed);
  Eigen::MatrixXd centroids = detail::kmeanspp_init(points, k, rng);

  KMeansResult result;
  result.assignment.algorithm = Algorithm::KMEANS;
  std::vector<int>& labels = result.assignment.labels;
  labels.assign(n, 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      double sq = 0.0;
      labels[i] = detail::nearest_centroid(points, i, centroids, &sq);
      inertia += sq;
    }

    std::vector<int> counts(k, 0);
    for (int l : labels) ++counts[l];
    std::vector<bool> stolen(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Move the point currently farthest from its centroid.
      int farthest = -1;
      double farthest_sq = -1.0;
      for (int i = 0; i < n; ++i) {
        if (stolen[i] || counts[labels[i]] <= 1) continue;
        const double sq = (points.row(i) - centroids.row(labels[i])).squaredNorm();
        if (sq > farthest_sq) {
          farthest_sq = sq;
          farthest = i;
        }
      }
      if (farthest < 0) break;
      --counts[labels[farthest]];
      labels[farthest] = c;
      ++counts[c];
      stolen[farthest] = true;
      inertia = 0.0;  // recomputed below once centroids settle
      for (int i = 0; i < n; ++i)
        inertia += (points.row(i) - centroids.row(labels[i])).squaredNorm();
    }
    result.inertia_trace.push_back(inertia);
    result.iterations = iter + 1;

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(k, points.cols());
    for (int i = 0; i < n; ++i) updated.row(labels[i]) += points.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) updated.row(c) /= double(counts[c]);
      else updated.row(c) = centroids.row(c);

    double max_shift = 0.0;
    for (int c = 0; c < k; ++c)
      max_shift = std::max(max_shift,
                           (updated.row(c) - centroids.row(c)).norm());
    centroids = updated;
    if (max_shift < tol) break;
  }

  // Final assignment against the settled centroids.
  double inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    labels[i] = detail::nearest_centroid(points, i, centroids, &sq);
    inertia += sq;
  }
  result.inertia = inertia;

  // Renumber clusters by lowest member index and reorder centroids to match.
  std::vector<int> old_labels = labels;
  relabel_by_lowest_member(labels);
  result.assignment.n_clusters = count_clusters(labels);
  result.centroids.resize(result.assignment.n_clusters, points.cols());
  for (int i = 0; i < n; ++i)
    result.centroids.row(labels[i]) = centroids.row(old_labels[i]);
  return result;
}

}  // namespace ieiclust
