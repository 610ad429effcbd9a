#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"

namespace ieiclust {

// Rows are true classes, columns are predicted clusters. Noise points enter
// as one extra predicted cluster so the external metrics account for every
// point.
struct ContingencyTable {
  std::vector<std::vector<long long>> counts;  // r x c
  std::vector<long long> row_sums;
  std::vector<long long> col_sums;
  long long n = 0;
};

inline ContingencyTable build_contingency(const std::vector<int>& truth,
                                          const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("contingency: label lengths differ");
  std::map<int, int> row_index, col_index;
  for (int t : truth) row_index.emplace(t, 0);
  for (int p : predicted) col_index.emplace(p, 0);
  int r = 0, c = 0;
  for (auto& [_, idx] : row_index) idx = r++;
  for (auto& [_, idx] : col_index) idx = c++;

  ContingencyTable table;
  table.counts.assign(r, std::vector<long long>(c, 0));
  table.row_sums.assign(r, 0);
  table.col_sums.assign(c, 0);
  table.n = static_cast<long long>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int ri = row_index.at(truth[i]);
    const int ci = col_index.at(predicted[i]);
    ++table.counts[ri][ci];
    ++table.row_sums[ri];
    ++table.col_sums[ci];
  }
  return table;
}

struct ExternalMetrics {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
  double ari = 0.0;
  double ami = 0.0;
};

namespace detail {

inline double entropy(const std::vector<long long>& sums, long long n) {
  double h = 0.0;
  for (long long s : sums) {
    if (s <= 0) continue;
    const double p = double(s) / double(n);
    h -= p * std::log(p);
  }
  return h;
}

inline double pairs(long long x) { return 0.5 * double(x) * double(x - 1); }

// Expected mutual information under the hypergeometric model with fixed
// margins (natural log).
inline double expected_mutual_information(const ContingencyTable& t) {
  const long long n = t.n;
  double emi = 0.0;
  for (long long a : t.row_sums) {
    for (long long b : t.col_sums) {
      const long long lo = std::max<long long>(1, a + b - n);
      const long long hi = std::min(a, b);
      for (long long nij = lo; nij <= hi; ++nij) {
        const double log_term =
            std::log(double(n) * double(nij) / (double(a) * double(b)));
        const double log_prob =
            std::lgamma(double(a + 1)) + std::lgamma(double(b + 1)) +
            std::lgamma(double(n - a + 1)) + std::lgamma(double(n - b + 1)) -
            std::lgamma(double(n + 1)) - std::lgamma(double(nij + 1)) -
            std::lgamma(double(a - nij + 1)) -
            std::lgamma(double(b - nij + 1)) -
            std::lgamma(double(n - a - b + nij + 1));
        emi += (double(nij) / double(n)) * log_term * std::exp(log_prob);
      }
    }
  }
  return emi;
}

}  // namespace detail

// Homogeneity, completeness, V-measure, adjusted Rand index and adjusted
// mutual information of a predicted clustering against the true labels.
// Noise labels (-1) count as one extra predicted cluster.
inline ExternalMetrics external_metrics(const std::vector<int>& truth,
                                        const std::vector<int>& predicted) {
  if (truth.empty())
    throw std::invalid_argument("external_metrics: empty labels");
  const ContingencyTable t = build_contingency(truth, predicted);
  const long long n = t.n;

  const double h_true = detail::entropy(t.row_sums, n);
  const double h_pred = detail::entropy(t.col_sums, n);
  double h_true_given_pred = 0.0;
  double h_pred_given_true = 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < t.counts.size(); ++i) {
    for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
      const long long nij = t.counts[i][j];
      if (nij <= 0) continue;
      const double pij = double(nij) / double(n);
      h_true_given_pred -= pij * std::log(double(nij) / double(t.col_sums[j]));
      h_pred_given_true -= pij * std::log(double(nij) / double(t.row_sums[i]));
      mi += pij * std::log(double(n) * double(nij) /
                           (double(t.row_sums[i]) * double(t.col_sums[j])));
    }
  }

  ExternalMetrics m;
  m.homogeneity = h_true <= 0.0 ? 1.0 : 1.0 - h_true_given_pred / h_true;
  m.completeness = h_pred <= 0.0 ? 1.0 : 1.0 - h_pred_given_true / h_pred;
  m.homogeneity = std::clamp(m.homogeneity, 0.0, 1.0);
  m.completeness = std::clamp(m.completeness, 0.0, 1.0);
  const double hc = m.homogeneity + m.completeness;
  m.v_measure = hc <= 0.0 ? 0.0 : 2.0 * m.homogeneity * m.completeness / hc;

  // ARI via pair counting on the contingency table.
  double sum_nij = 0.0;
  for (const auto& row : t.counts)
    for (long long v : row) sum_nij += detail::pairs(v);
  double sum_a = 0.0, sum_b = 0.0;
  for (long long v : t.row_sums) sum_a += detail::pairs(v);
  for (long long v : t.col_sums) sum_b += detail::pairs(v);
  const double total_pairs = detail::pairs(n);
  if (total_pairs <= 0.0) {
    m.ari = 1.0;
  } else {
    const double expected = sum_a * sum_b / total_pairs;
    const double denom = 0.5 * (sum_a + sum_b) - expected;
    m.ari = denom == 0.0 ? 1.0 : (sum_nij - expected) / denom;
  }

  const double emi = detail::expected_mutual_information(t);
  const double denom = 0.5 * (h_true + h_pred) - emi;
  if (std::abs(denom) < 1e-15)
    m.ami = 1.0;
  else
    m.ami = (mi - emi) / denom;
  return m;
}

// Mean silhouette over non-noise points; singleton-cluster points score 0.
// Undefined (nullopt) with fewer than two non-noise clusters.
inline std::optional<double> silhouette_with_distances(
    const Eigen::MatrixXd& dist, const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  int n_clusters = count_clusters(labels);
  if (n_clusters < 2) return std::nullopt;
  std::vector<int> cluster_size(n_clusters, 0);
  for (int l : labels)
    if (l >= 0) ++cluster_size[l];

  double total = 0.0;
  long long counted = 0;
  std::vector<double> sum_to_cluster(n_clusters);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    ++counted;
    if (cluster_size[labels[i]] <= 1) continue;  // singleton scores 0
    std::fill(sum_to_cluster.begin(), sum_to_cluster.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (labels[j] < 0 || j == i) continue;
      sum_to_cluster[labels[j]] += dist(i, j);
    }
    const double a =
        sum_to_cluster[labels[i]] / double(cluster_size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_clusters; ++c) {
      if (c == labels[i] || cluster_size[c] == 0) continue;
      b = std::min(b, sum_to_cluster[c] / double(cluster_size[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  if (counted == 0) return std::nullopt;
  return total / double(counted);
}

inline std::optional<double> silhouette(const Eigen::MatrixXd& points,
                                        const std::vector<int>& labels) {
  return silhouette_with_distances(pairwise_distances(points), labels);
}

// Davies-Bouldin index; noise excluded. Coincident centroids push the pair
// ratio to infinity.
inline std::optional<double> davies_bouldin(const Eigen::MatrixXd& points,
                                            const std::vector<int>& labels) {
  const int n_clusters = count_clusters(labels);
  if (n_clusters < 2) return std::nullopt;
  const int n = static_cast<int>(labels.size());
  const int dims = static_cast<int>(points.cols());

  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(n_clusters, dims);
  std::vector<int> size(n_clusters, 0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    centroids.row(labels[i]) += points.row(i);
    ++size[labels[i]];
  }
  for (int c = 0; c < n_clusters; ++c)
    if (size[c] > 0) centroids.row(c) /= double(size[c]);

  std::vector<double> scatter(n_clusters, 0.0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    scatter[labels[i]] += (points.row(i) - centroids.row(labels[i])).norm();
  }
  for (int c = 0; c < n_clusters; ++c)
    if (size[c] > 0) scatter[c] /= double(size[c]);

  double db = 0.0;
  for (int i = 0; i < n_clusters; ++i) {
    double worst = 0.0;
    for (int j = 0; j < n_clusters; ++j) {
      if (i == j) continue;
      const double sep = (centroids.row(i) - centroids.row(j)).norm();
      const double ratio =
          sep > 0.0 ? (scatter[i] + scatter[j]) / sep
                    : std::numeric_limits<double>::infinity();
      worst = std::max(worst, ratio);
    }
    db += worst;
  }
  return db / double(n_clusters);
}

inline double composite_score(double homogeneity, double completeness,
                              double v_measure, double ari, double ami,
                              double silhouette_value, double davies_bouldin_value) {
  return 1.0 / (1.0 + davies_bouldin_value) + homogeneity + completeness +
         v_measure + ari + ami + silhouette_value;
}

struct MetricsBundle {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
  double ari = 0.0;
  double ami = 0.0;
  double silhouette = std::numeric_limits<double>::quiet_NaN();
  double davies_bouldin = std::numeric_limits<double>::quiet_NaN();
  double composite = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

// Scores an assignment in the space the clustering ran in. The bundle is
// invalid (and excluded from ranking) when the internal metrics are
// undefined, i.e. with fewer than two non-noise clusters.
inline MetricsBundle evaluate_assignment(const Eigen::MatrixXd& points,
                                         const Eigen::MatrixXd& dist,
                                         const std::vector<int>& truth,
                                         const ClusterAssignment& assignment) {
  MetricsBundle bundle;
  const auto ext = external_metrics(truth, assignment.labels);
  bundle.homogeneity = ext.homogeneity;
  bundle.completeness = ext.completeness;
  bundle.v_measure = ext.v_measure;
  bundle.ari = ext.ari;
  bundle.ami = ext.ami;
  const auto sil = silhouette_with_distances(dist, assignment.labels);
  const auto db = davies_bouldin(points, assignment.labels);
  if (sil && db) {
    bundle.silhouette = *sil;
    bundle.davies_bouldin = *db;
    bundle.composite =
        composite_score(bundle.homogeneity, bundle.completeness,
                        bundle.v_measure, bundle.ari, bundle.ami, *sil, *db);
    bundle.valid = true;
  }
  return bundle;
}

}  // namespace ieiclust
