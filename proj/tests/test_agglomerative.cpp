#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <random>

#include "ieiclust/agglomerative.hpp"
#include "oracles.hpp"

using namespace ieiclust;

namespace {

// Plain O(n^3) Ward reference: full scan for the minimum Lance-Williams
// distance each step, lexicographic ties.
std::vector<int> ward_reference(const Eigen::MatrixXd& points, int k) {
  const int n = static_cast<int>(points.rows());
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      dist[i][j] = (points.row(i) - points.row(j)).squaredNorm();
  std::vector<bool> active(n, true);
  std::vector<double> size(n, 1.0);
  std::vector<int> member(n);
  std::iota(member.begin(), member.end(), 0);

  for (int step = 0; step < n - k; ++step) {
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!active[b]) continue;
        if (dist[a][b] < best) {
          best = dist[a][b];
          best_a = a;
          best_b = b;
        }
      }
    }
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      const double t = size[best_a] + size[best_b] + size[c];
      dist[best_a][c] = dist[c][best_a] =
          ((size[best_a] + size[c]) / t) * dist[best_a][c] +
          ((size[best_b] + size[c]) / t) * dist[best_b][c] -
          (size[c] / t) * dist[best_a][best_b];
    }
    size[best_a] += size[best_b];
    active[best_b] = false;
    for (int i = 0; i < n; ++i)
      if (member[i] == best_b) member[i] = best_a;
  }
  return member;
}

}  // namespace

TEST_CASE("agglomerative: extreme cuts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(8, 2);
  for (int i = 0; i < 8; ++i) points.row(i) << unit(rng), unit(rng);
  const auto singletons = agglomerative(points, 8);
  CHECK(singletons.n_clusters == 8);
  const auto one = agglomerative(points, 1);
  CHECK(one.n_clusters == 1);
  for (int l : one.labels) CHECK(l == 0);
}

TEST_CASE("agglomerative: two far pairs group together") {
  Eigen::MatrixXd points(4, 1);
  points << 0.0, 0.1, 10.0, 10.1;
  const auto result = agglomerative(points, 2);
  CHECK(result.labels[0] == result.labels[1]);
  CHECK(result.labels[2] == result.labels[3]);
  CHECK(result.labels[0] != result.labels[2]);
  CHECK(result.labels[0] == 0);
  CHECK(result.labels[2] == 1);
}

TEST_CASE("agglomerative: hand-checked 1-D merge order") {
  // 0 and 1 merge first (cost 0.5), then 10 stays separate at k=2.
  Eigen::MatrixXd points(3, 1);
  points << 0.0, 1.0, 10.0;
  const auto merges = ward_dendrogram(points);
  REQUIRE(merges.size() == 2);
  CHECK(merges[0].a == 0);
  CHECK(merges[0].b == 1);
  CHECK(merges[0].cost == Catch::Approx(1.0));  // stored as 2x Ward increase
  const auto cut = cut_dendrogram(merges, 3, 2);
  CHECK(cut.labels == std::vector<int>{0, 0, 1});
}

TEST_CASE("agglomerative matches the full-scan reference") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 10 + int(rng() % 30);
    Eigen::MatrixXd points(n, 3);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) points(i, d) = unit(rng);
    for (int k : {1, 2, 3, 5}) {
      if (k > n) continue;
      const auto fast = agglomerative(points, k);
      const auto reference = ward_reference(points, k);
      CHECK(oracles::same_partition(fast.labels, reference));
    }
  }
}

TEST_CASE("agglomerative: permutation equivariance up to relabeling") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 30;
  Eigen::MatrixXd points(n, 2);
  for (int i = 0; i < n; ++i) points.row(i) << unit(rng), unit(rng);
  const auto base = agglomerative(points, 4);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd shuffled(n, 2);
    for (int i = 0; i < n; ++i) shuffled.row(i) = points.row(perm[i]);
    const auto permuted = agglomerative(shuffled, 4);
    std::vector<int> unshuffled(n);
    for (int i = 0; i < n; ++i) unshuffled[perm[i]] = permuted.labels[i];
    CHECK(oracles::same_partition(base.labels, unshuffled));
  }
}

TEST_CASE("agglomerative: k out of range") {
  Eigen::MatrixXd points(3, 2);
  points.setZero();
  CHECK_THROWS_AS(agglomerative(points, 0), std::invalid_argument);
  CHECK_THROWS_AS(agglomerative(points, 4), std::invalid_argument);
}
