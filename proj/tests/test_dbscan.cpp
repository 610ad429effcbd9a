#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "ieiclust/dbscan.hpp"
#include "oracles.hpp"

using namespace ieiclust;

TEST_CASE("dbscan: two groups of duplicates, far apart") {
  Eigen::MatrixXd points(20, 2);
  for (int i = 0; i < 10; ++i) points.row(i) << 0.0, 0.0;
  for (int i = 10; i < 20; ++i) points.row(i) << 1.0, 0.0;
  const auto result = dbscan(points, 0.1, 3);
  CHECK(result.n_clusters == 2);
  for (int i = 0; i < 20; ++i) {
    CHECK(result.labels[i] >= 0);
    CHECK(result.labels[i] == (i < 10 ? 0 : 1));
  }
}

TEST_CASE("dbscan: isolated point becomes noise") {
  Eigen::MatrixXd points(21, 2);
  for (int i = 0; i < 10; ++i) points.row(i) << 0.0, 0.0;
  for (int i = 10; i < 20; ++i) points.row(i) << 1.0, 0.0;
  points.row(20) << 0.5, 5.0;
  const auto result = dbscan(points, 0.1, 3);
  CHECK(result.n_clusters == 2);
  CHECK(result.labels[20] == -1);
}

TEST_CASE("dbscan matches the reference implementation on random data") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 10 + int(rng() % 90);
    const int dims = 1 + int(rng() % 3);
    Eigen::MatrixXd points(n, dims);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dims; ++d) points(i, d) = unit(rng);
    const double epsilon = 0.05 + 0.2 * unit(rng);
    const int min_samples = 2 + int(rng() % 5);
    const auto result = dbscan(points, epsilon, min_samples);
    const auto expected = oracles::dbscan_reference(points, epsilon,
                                                    min_samples);
    CHECK(oracles::same_partition(result.labels, expected));
  }
}

TEST_CASE("dbscan: core set is independent of row order") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 60;
  Eigen::MatrixXd points(n, 2);
  for (int i = 0; i < n; ++i) points.row(i) << unit(rng), unit(rng);
  const double epsilon = 0.15;
  const int min_samples = 4;

  auto core_set = [&](const Eigen::MatrixXd& pts,
                      const std::vector<int>& origin) {
    std::set<int> cores;
    for (int i = 0; i < pts.rows(); ++i) {
      int neighbors = 0;
      for (int j = 0; j < pts.rows(); ++j)
        if ((pts.row(i) - pts.row(j)).norm() <= epsilon) ++neighbors;
      if (neighbors >= min_samples) cores.insert(origin[i]);
    }
    return cores;
  };

  std::vector<int> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  const auto base_cores = core_set(points, identity);

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> perm = identity;
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd shuffled(n, 2);
    for (int i = 0; i < n; ++i) shuffled.row(i) = points.row(perm[i]);
    CHECK(core_set(shuffled, perm) == base_cores);

    // Labels are permutation-equivariant up to relabeling.
    const auto a = dbscan(points, epsilon, min_samples);
    const auto b = dbscan(shuffled, epsilon, min_samples);
    std::vector<int> b_unshuffled(n);
    for (int i = 0; i < n; ++i) b_unshuffled[perm[i]] = b.labels[i];
    CHECK(oracles::same_partition(a.labels, b_unshuffled));
  }
}

TEST_CASE("dbscan: parameter validation") {
  Eigen::MatrixXd points(3, 2);
  points.setZero();
  CHECK_THROWS_AS(dbscan(points, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(dbscan(points, 0.5, 0), std::invalid_argument);
}
