// Test-only reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracles {

// Adjusted Rand index by direct pair counting over all index pairs.
inline double ari_pair_counting(const std::vector<int>& truth,
                                const std::vector<int>& predicted) {
  const std::size_t n = truth.size();
  double both = 0, same_true = 0, same_pred = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool st = truth[i] == truth[j];
      const bool sp = predicted[i] == predicted[j];
      both += st && sp;
      same_true += st;
      same_pred += sp;
    }
  }
  const double total = 0.5 * double(n) * double(n - 1);
  if (total <= 0.0) return 1.0;
  const double expected = same_true * same_pred / total;
  const double denom = 0.5 * (same_true + same_pred) - expected;
  if (denom == 0.0) return 1.0;
  return (both - expected) / denom;
}

inline double entropy_of(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = double(c) / double(labels.size());
    h -= p * std::log(p);
  }
  return h;
}

inline double conditional_entropy(const std::vector<int>& target,
                                  const std::vector<int>& given) {
  std::map<std::pair<int, int>, int> joint;
  std::map<int, int> marginal;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ++joint[{given[i], target[i]}];
    ++marginal[given[i]];
  }
  double h = 0.0;
  for (const auto& [key, c] : joint) {
    const double p = double(c) / double(target.size());
    h -= p * std::log(double(c) / double(marginal[key.first]));
  }
  return h;
}

struct HCV {
  double h, c, v;
};

inline HCV hcv_entropy(const std::vector<int>& truth,
                       const std::vector<int>& predicted) {
  const double h_true = entropy_of(truth);
  const double h_pred = entropy_of(predicted);
  const double h =
      h_true <= 0.0 ? 1.0 : 1.0 - conditional_entropy(truth, predicted) / h_true;
  const double c =
      h_pred <= 0.0 ? 1.0 : 1.0 - conditional_entropy(predicted, truth) / h_pred;
  const double v = h + c <= 0.0 ? 0.0 : 2.0 * h * c / (h + c);
  return {h, c, v};
}

inline double mutual_information(const std::vector<int>& truth,
                                 const std::vector<int>& predicted) {
  std::map<std::pair<int, int>, int> joint;
  std::map<int, int> a, b;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++joint[{truth[i], predicted[i]}];
    ++a[truth[i]];
    ++b[predicted[i]];
  }
  const double n = double(truth.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint)
    mi += (c / n) * std::log(n * c / (double(a[key.first]) * b[key.second]));
  return mi;
}

// Expected MI under the permutation model: average MI over every permutation
// of the predicted labels. Exact but factorial; n <= 8 only.
inline double emi_exhaustive_permutations(const std::vector<int>& truth,
                                          std::vector<int> predicted) {
  std::sort(predicted.begin(), predicted.end());
  double total = 0.0;
  long long count = 0;
  do {
    total += mutual_information(truth, predicted);
    ++count;
  } while (std::next_permutation(predicted.begin(), predicted.end()));
  return total / double(count);
}

// Expected MI under the hypergeometric model with exact factorials in long
// double; independent of the lgamma-based production formula. n <= 20.
inline double emi_exact_factorials(const std::vector<int>& truth,
                                   const std::vector<int>& predicted) {
  std::map<int, long long> a_map, b_map;
  for (int t : truth) ++a_map[t];
  for (int p : predicted) ++b_map[p];
  const long long n = static_cast<long long>(truth.size());
  std::vector<long double> fact(n + 1, 1.0L);
  for (long long i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;

  long double emi = 0.0L;
  for (const auto& [_, a] : a_map) {
    for (const auto& [__, b] : b_map) {
      const long long lo = std::max<long long>(1, a + b - n);
      const long long hi = std::min(a, b);
      for (long long nij = lo; nij <= hi; ++nij) {
        const long double prob =
            (fact[a] / fact[nij]) * (fact[b] / fact[a - nij]) *
            (fact[n - a] / fact[b - nij]) *
            (fact[n - b] / fact[n - a - b + nij]) / fact[n];
        const long double term =
            (static_cast<long double>(nij) / n) *
            std::log(static_cast<long double>(n) * nij /
                     (static_cast<long double>(a) * b));
        emi += term * prob;
      }
    }
  }
  return static_cast<double>(emi);
}

// Reference density clustering written directly from the definition: core
// set, epsilon-graph components over cores, border attachment by first core
// neighbor in index order.
inline std::vector<int> dbscan_reference(const Eigen::MatrixXd& points,
                                         double epsilon, int min_samples) {
  const int n = static_cast<int>(points.rows());
  auto dist = [&](int i, int j) {
    return (points.row(i) - points.row(j)).norm();
  };
  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) {
    int neighbors = 0;
    for (int j = 0; j < n; ++j)
      if (dist(i, j) <= epsilon) ++neighbors;
    core[i] = neighbors >= min_samples;
  }
  std::vector<int> labels(n, -1);
  int next = 0;
  for (int seed = 0; seed < n; ++seed) {
    if (!core[seed] || labels[seed] != -1) continue;
    // Flood fill over core points.
    std::vector<int> frontier{seed};
    labels[seed] = next;
    while (!frontier.empty()) {
      const int u = frontier.back();
      frontier.pop_back();
      for (int v = 0; v < n; ++v)
        if (core[v] && labels[v] == -1 && dist(u, v) <= epsilon) {
          labels[v] = next;
          frontier.push_back(v);
        }
    }
    ++next;
  }
  for (int i = 0; i < n; ++i) {
    if (core[i] || labels[i] != -1) continue;
    for (int j = 0; j < n; ++j)
      if (core[j] && dist(i, j) <= epsilon) {
        labels[i] = labels[j];
        break;
      }
  }
  return labels;
}

// True iff the two labelings are the same partition, treating -1 as a fixed
// "noise" class that must match exactly.
inline bool same_partition(const std::vector<int>& a,
                           const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> a_to_b, b_to_a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it1, fresh1] = a_to_b.emplace(a[i], b[i]);
    if (!fresh1 && it1->second != b[i]) return false;
    auto [it2, fresh2] = b_to_a.emplace(b[i], a[i]);
    if (!fresh2 && it2->second != a[i]) return false;
  }
  return true;
}

// Cohort rule applied directly: per disease, at least two codes spanning
// >= 90 days; exclusion when any other disease matches a single code.
inline std::map<std::string, int> cohort_reference(
    const std::vector<std::tuple<std::string, std::string, long long>>& events,
    const std::map<int, std::set<std::string>>& codes_by_disease) {
  std::set<std::string> patients;
  for (const auto& [p, code, day] : events) patients.insert(p);
  std::map<std::string, int> cohort;
  for (const auto& p : patients) {
    int matched = 0, qualified = 0, winner = -1;
    for (const auto& [disease, codes] : codes_by_disease) {
      std::vector<long long> days;
      for (const auto& [q, code, day] : events)
        if (q == p && codes.count(code)) days.push_back(day);
      if (days.empty()) continue;
      ++matched;
      bool pair_found = false;
      for (std::size_t i = 0; i < days.size(); ++i)
        for (std::size_t j = i + 1; j < days.size(); ++j)
          if (std::llabs(days[i] - days[j]) >= 90) pair_found = true;
      if (pair_found) {
        ++qualified;
        winner = disease;
      }
    }
    if (matched == 1 && qualified == 1) cohort[p] = winner;
  }
  return cohort;
}

}  // namespace oracles
