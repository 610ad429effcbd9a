#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"

namespace ieiclust {

// Density clustering with Euclidean distance. A point is core iff it has at
// least min_samples neighbors within epsilon, counting itself. Clusters are
// the connected components of core points under epsilon-reachability; border
// points join the cluster of their first core neighbor in index order;
// everything else is noise.
inline ClusterAssignment dbscan_with_distances(const Eigen::MatrixXd& dist,
                                               double epsilon,
                                               int min_samples) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("dbscan: epsilon must be > 0");
  if (min_samples < 1)
    throw std::invalid_argument("dbscan: min_samples must be >= 1");
  const int n = static_cast<int>(dist.rows());

  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) {
    int neighbors = 0;
    for (int j = 0; j < n; ++j)
      if (dist(i, j) <= epsilon) ++neighbors;  // includes self
    core[i] = neighbors >= min_samples;
  }

  ClusterAssignment result;
  result.algorithm = Algorithm::DBSCAN;
  result.labels.assign(n, -1);

  // Connected components of core points, seeds in index order.
  int next_cluster = 0;
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || result.labels[i] != -1) continue;
    const int cluster = next_cluster++;
    result.labels[i] = cluster;
    stack.assign(1, i);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (!core[v] || result.labels[v] != -1 || dist(u, v) > epsilon)
          continue;
        result.labels[v] = cluster;
        stack.push_back(v);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (core[i] || result.labels[i] != -1) continue;
    for (int j = 0; j < n; ++j) {
      if (core[j] && dist(i, j) <= epsilon) {
        result.labels[i] = result.labels[j];
        break;
      }
    }
  }

  relabel_by_lowest_member(result.labels);
  result.n_clusters = count_clusters(result.labels);
  return result;
}

inline ClusterAssignment dbscan(const Eigen::MatrixXd& points, double epsilon,
                                int min_samples) {
  return dbscan_with_distances(pairwise_distances(points), epsilon,
                               min_samples);
}

}  // namespace ieiclust
