#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"

namespace ieiclust {

// One Ward merge. Cluster ids are the minimum member row index, so the id of
// the merged cluster is min(a, b).
struct WardMerge {
  int a = 0;
  int b = 0;       // a < b
  double cost = 0;  // Lance-Williams value (2x the Ward SSE increase)
};

// Greedy Ward linkage. Each step merges the active pair with minimal
// Lance-Williams distance; ties pick the lexicographically smallest index
// pair. A per-cluster nearest-neighbor cache keeps the scan near O(n^2)
// (Ward is reducible, so cached neighbors stay valid until invalidated).
inline std::vector<WardMerge> ward_dendrogram(const Eigen::MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  std::vector<WardMerge> merges;
  if (n <= 1) return merges;
  merges.reserve(n - 1);

  Eigen::MatrixXd dist(n, n);  // squared Euclidean between active clusters
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double sq = (points.row(i) - points.row(j)).squaredNorm();
      dist(i, j) = sq;
      dist(j, i) = sq;
    }
  }

  std::vector<bool> active(n, true);
  std::vector<double> size(n, 1.0);
  std::vector<int> neighbor(n, -1);
  std::vector<double> neighbor_dist(n, 0.0);

  auto recompute_neighbor = [&](int i) {
    neighbor[i] = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (dist(i, j) < best) {
        best = dist(i, j);
        neighbor[i] = j;
      }
    }
    neighbor_dist[i] = best;
  };
  for (int i = 0; i < n; ++i) recompute_neighbor(i);

  for (int step = 0; step < n - 1; ++step) {
    int best_i = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i] || neighbor[i] < 0) continue;
      if (neighbor_dist[i] < best) {
        best = neighbor_dist[i];
        best_i = i;
      }
    }
    const int a = std::min(best_i, neighbor[best_i]);
    const int b = std::max(best_i, neighbor[best_i]);
    merges.push_back({a, b, dist(a, b)});

    // Lance-Williams update for Ward into slot a.
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double t = size[a] + size[b] + size[c];
      const double updated = ((size[a] + size[c]) / t) * dist(a, c) +
                             ((size[b] + size[c]) / t) * dist(b, c) -
                             (size[c] / t) * dist(a, b);
      dist(a, c) = updated;
      dist(c, a) = updated;
    }
    size[a] += size[b];
    active[b] = false;

    recompute_neighbor(a);
    for (int i = 0; i < n; ++i) {
      if (!active[i] || i == a) continue;
      if (neighbor[i] == a || neighbor[i] == b) {
        recompute_neighbor(i);
      } else if (dist(i, a) < neighbor_dist[i] ||
                 (dist(i, a) == neighbor_dist[i] && a < neighbor[i])) {
        neighbor[i] = a;
        neighbor_dist[i] = dist(i, a);
      }
    }
  }
  return merges;
}

// Labels for a k-cluster cut: apply the first n-k merges, renumber by lowest
// member index.
inline ClusterAssignment cut_dendrogram(const std::vector<WardMerge>& merges,
                                        int n, int k) {
  if (k < 1 || k > n)
    throw std::invalid_argument("agglomerative: k must be in [1, n]");
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (int m = 0; m < n - k; ++m) {
    const int ra = find(merges[m].a);
    const int rb = find(merges[m].b);
    // Root at the smaller index so cluster ids track the lowest member.
    if (ra < rb)
      parent[rb] = ra;
    else
      parent[ra] = rb;
  }
  ClusterAssignment result;
  result.algorithm = Algorithm::AGGLOM;
  result.labels.resize(n);
  for (int i = 0; i < n; ++i) result.labels[i] = find(i);
  relabel_by_lowest_member(result.labels);
  result.n_clusters = count_clusters(result.labels);
  return result;
}

inline ClusterAssignment agglomerative(const Eigen::MatrixXd& points, int k) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n)
    throw std::invalid_argument("agglomerative: k must be in [1, n]");
  return cut_dendrogram(ward_dendrogram(points), n, k);
}

}  // namespace ieiclust
