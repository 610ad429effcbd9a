#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"
#include "ieiclust/rng.hpp"

namespace ieiclust {

using CategoricalMatrix = std::vector<std::vector<int>>;

inline constexpr int kCategoryLow = 0;
inline constexpr int kCategoryNormal = 1;
inline constexpr int kCategoryHigh = 2;

// Reference-range categories for normalized lab values: below the range is
// LOW, inside [0,1] is NORMAL, above is HIGH.
inline CategoricalMatrix discretize_for_kmodes(const Eigen::MatrixXd& points) {
  CategoricalMatrix out(points.rows(), std::vector<int>(points.cols()));
  for (int i = 0; i < points.rows(); ++i)
    for (int j = 0; j < points.cols(); ++j) {
      const double v = points(i, j);
      out[i][j] = v < 0.0 ? kCategoryLow : (v > 1.0 ? kCategoryHigh : kCategoryNormal);
    }
  return out;
}

// Per-dimension tercile binning (empirical 1/3 and 2/3 quantiles, linear
// interpolation). Used to give K-modes categorical input in PCA space, where
// the reference-range categories have no meaning.
inline CategoricalMatrix discretize_terciles(const Eigen::MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  const int p = static_cast<int>(points.cols());
  CategoricalMatrix out(n, std::vector<int>(p));
  if (n == 0) return out;
  for (int j = 0; j < p; ++j) {
    std::vector<double> sorted(n);
    for (int i = 0; i < n; ++i) sorted[i] = points(i, j);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
      const double pos = q * double(n - 1);
      const int lo = static_cast<int>(pos);
      const int hi = std::min(lo + 1, n - 1);
      const double frac = pos - lo;
      return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    };
    const double q1 = quantile(1.0 / 3.0);
    const double q2 = quantile(2.0 / 3.0);
    for (int i = 0; i < n; ++i) {
      const double v = points(i, j);
      out[i][j] = v <= q1 ? 0 : (v <= q2 ? 1 : 2);
    }
  }
  return out;
}

struct KModesResult {
  ClusterAssignment assignment;
  CategoricalMatrix modes;
  int cost = 0;  // total attribute mismatches
  int iterations = 0;
  std::vector<int> cost_trace;  // cost after each assignment step
};

namespace detail {

inline int hamming(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace detail

// K-modes over categorical rows: matching dissimilarity, mode update with
// ties toward the smallest category value. Initial modes are k distinct rows
// drawn with the seeded RNG.
inline KModesResult kmodes(const CategoricalMatrix& points, int k,
                           std::uint64_t seed, int max_iter = 100) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw std::invalid_argument("kmodes: k must be >= 1");
  if (k > n)
    throw std::invalid_argument("kmodes: k exceeds point count");
  std::set<std::vector<int>> distinct(points.begin(), points.end());
  if (static_cast<int>(distinct.size()) < k)
    throw std::invalid_argument("kmodes: k (" + std::to_string(k) +
                                ") exceeds distinct row count (" +
                                std::to_string(distinct.size()) + ")");
  const int p = static_cast<int>(points[0].size());

  Rng rng(seed);
  CategoricalMatrix modes;
  std::set<std::vector<int>> chosen;
  while (static_cast<int>(modes.size()) < k) {
    const int row = static_cast<int>(rng.uniform_index(n));
    if (chosen.insert(points[row]).second) modes.push_back(points[row]);
  }

  KModesResult result;
  std::vector<int>& labels = result.assignment.labels;
  result.assignment.algorithm = Algorithm::KMODES;
  labels.assign(n, 0);

  std::vector<int> previous(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    int cost = 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      int best_d = detail::hamming(points[i], modes[0]);
      for (int c = 1; c < k; ++c) {
        const int d = detail::hamming(points[i], modes[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      labels[i] = best;
      cost += best_d;
    }
    result.cost_trace.push_back(cost);
    result.iterations = iter + 1;
    if (labels == previous) break;
    previous = labels;

    for (int c = 0; c < k; ++c) {
      // Frequency table per attribute; empty clusters keep their mode.
      std::vector<std::map<int, int>> freq(p);
      int members = 0;
      for (int i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        ++members;
        for (int j = 0; j < p; ++j) ++freq[j][points[i][j]];
      }
      if (members == 0) continue;
      for (int j = 0; j < p; ++j) {
        int best_cat = 0, best_count = -1;
        for (const auto& [cat, count] : freq[j]) {
          if (count > best_count) {  // map iterates ascending: ties keep min
            best_count = count;
            best_cat = cat;
          }
        }
        modes[c][j] = best_cat;
      }
    }
  }

  result.cost = result.cost_trace.back();
  result.modes = modes;

  std::vector<int> old_labels = labels;
  relabel_by_lowest_member(labels);
  result.assignment.n_clusters = count_clusters(labels);
  // Reorder modes to the final label numbering; drop empty clusters.
  CategoricalMatrix reordered(result.assignment.n_clusters);
  for (int i = 0; i < n; ++i) reordered[labels[i]] = modes[old_labels[i]];
  result.modes = reordered;
  return result;
}

}  // namespace ieiclust
