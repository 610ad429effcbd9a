#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ieiclust {

enum class Algorithm : int {
  DBSCAN = 0,
  HDBSCAN = 1,
  KMEANS = 2,
  AGGLOM = 3,
  KMODES = 4,
};

inline constexpr int kNumAlgorithms = 5;

inline constexpr std::array<const char*, kNumAlgorithms> kAlgorithmNames = {
    "dbscan", "hdbscan", "kmeans", "agglomerative", "kmodes"};

inline const char* to_string(Algorithm a) {
  return kAlgorithmNames[static_cast<int>(a)];
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  for (int i = 0; i < kNumAlgorithms; ++i)
    if (s == kAlgorithmNames[i]) return static_cast<Algorithm>(i);
  if (s == "agglom") return Algorithm::AGGLOM;
  return std::nullopt;
}

// Flat clustering over n points. Label -1 marks noise (density algorithms
// only); the remaining labels form {0..n_clusters-1}.
struct ClusterAssignment {
  std::vector<int> labels;
  int n_clusters = 0;
  Algorithm algorithm = Algorithm::KMEANS;
};

// Renumbers clusters so that cluster IDs increase with the lowest member
// index; noise stays -1.
inline void relabel_by_lowest_member(std::vector<int>& labels) {
  std::map<int, int> first_seen;  // old label -> new label
  int next = 0;
  for (int l : labels) {
    if (l < 0) continue;
    if (first_seen.emplace(l, next).second) ++next;
  }
  for (int& l : labels)
    if (l >= 0) l = first_seen.at(l);
}

inline int count_clusters(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  return max_label + 1;
}

// Canonical form for comparing clusterings up to relabeling: clusters are
// renamed in order of first occurrence.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> out(labels.size());
  std::map<int, int> rename;
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      out[i] = -1;
      continue;
    }
    auto [it, inserted] = rename.emplace(labels[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

// Full symmetric pairwise Euclidean distance matrix.
inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double dist = (points.row(i) - points.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

}  // namespace ieiclust
