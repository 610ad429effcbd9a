#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ieiclust/grid.hpp"

using namespace ieiclust;

namespace {

SubgroupDataset blob_dataset(int per_blob, int blobs, double sigma,
                             unsigned seed, AgeGroup group = AgeGroup::Y0_1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  SubgroupDataset dataset;
  dataset.age_group = group;
  const int n = per_blob * blobs;
  dataset.rows.resize(n, kNumLabs);
  dataset.labels.resize(n);
  dataset.ids.resize(n);
  dataset.imputed_mask.assign(n, {});
  const double centers[4][kNumLabs] = {{0, 0, 0, 0, 0},
                                       {1, 0, 0.5, 0, 0},
                                       {0, 1, 0, 0.5, 0},
                                       {0.5, 0.5, 1, 0, 0.5}};
  for (int b = 0; b < blobs; ++b)
    for (int i = 0; i < per_blob; ++i) {
      const int r = b * per_blob + i;
      for (int c = 0; c < kNumLabs; ++c)
        dataset.rows(r, c) = centers[b][c] + gauss(rng);
      dataset.labels[r] = static_cast<DiseaseLabel>(b);
      dataset.ids[r] = {"P" + std::to_string(r), "E" + std::to_string(r)};
    }
  return dataset;
}

}  // namespace

TEST_CASE("grid cardinalities match the published counts") {
  const auto dbscan_combos = enumerate_grid(Algorithm::DBSCAN);
  const auto hdbscan_combos = enumerate_grid(Algorithm::HDBSCAN);
  const auto kmeans_combos = enumerate_grid(Algorithm::KMEANS);
  const auto agglom_combos = enumerate_grid(Algorithm::AGGLOM);
  const auto kmodes_combos = enumerate_grid(Algorithm::KMODES);
  CHECK(dbscan_combos.size() == 160);
  CHECK(hdbscan_combos.size() == 160);
  CHECK(kmeans_combos.size() == 68);
  CHECK(agglom_combos.size() == 68);
  CHECK(kmodes_combos.size() == 68);
  const std::size_t total = dbscan_combos.size() + hdbscan_combos.size() +
                            kmeans_combos.size() + agglom_combos.size() +
                            kmodes_combos.size();
  CHECK(total == 524);
  CHECK(total * kNumAgeGroups == 3144);

  CHECK(*dbscan_combos.front().epsilon == Catch::Approx(0.005).margin(1e-12));
  CHECK(*dbscan_combos.back().epsilon == Catch::Approx(0.2).margin(1e-12));
  CHECK(dbscan_combos.front().pca_components == 2);
  CHECK(dbscan_combos.back().pca_components == 5);
  CHECK(*kmeans_combos.front().n_clusters == 2);
  CHECK(*kmeans_combos.back().n_clusters == 18);

  // Enumeration order: pca ascending, then the knob ascending.
  for (std::size_t i = 1; i < kmeans_combos.size(); ++i) {
    const auto& a = kmeans_combos[i - 1];
    const auto& b = kmeans_combos[i];
    CHECK((a.pca_components < b.pca_components ||
           (a.pca_components == b.pca_components &&
            *a.n_clusters < *b.n_clusters)));
  }
}

TEST_CASE("run_experiment: single-disease dataset scores homogeneity 1") {
  auto dataset = blob_dataset(30, 2, 0.05, 3);
  for (auto& l : dataset.labels) l = DiseaseLabel::DGS;
  HyperparamCombo combo;
  combo.algorithm = Algorithm::KMEANS;
  combo.pca_components = 2;
  combo.n_clusters = 2;
  combo.seed = 4;
  const auto result = run_experiment(dataset, combo);
  REQUIRE(result.error.empty());
  REQUIRE(result.bundle.valid);
  CHECK(result.bundle.homogeneity == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("run_experiment: k above n is recorded, not thrown") {
  auto dataset = blob_dataset(3, 2, 0.05, 5);  // n = 6
  HyperparamCombo combo;
  combo.algorithm = Algorithm::KMEANS;
  combo.pca_components = 2;
  combo.n_clusters = 18;
  const auto result = run_experiment(dataset, combo);
  CHECK_FALSE(result.error.empty());
  CHECK_FALSE(result.bundle.valid);
}

TEST_CASE("run_experiment: blob recovery with kmeans on pca 2") {
  const auto dataset = blob_dataset(50, 3, 0.05, 7);
  HyperparamCombo combo;
  combo.algorithm = Algorithm::KMEANS;
  combo.pca_components = 2;
  combo.n_clusters = 3;
  combo.seed = 11;
  const auto result = run_experiment(dataset, combo);
  REQUIRE(result.bundle.valid);
  CHECK(result.bundle.ari >= 0.9);
}

TEST_CASE("internal metrics are computed in PCA space") {
  // Strong variance in the first two dimensions, cluster structure visible
  // there; the remaining dimensions are noise that would change silhouette
  // if it were computed on the raw 5-D rows.
  auto dataset = blob_dataset(40, 2, 0.02, 13);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-0.4, 0.4);
  for (int r = 0; r < int(dataset.size()); ++r)
    for (int c = 3; c < kNumLabs; ++c) dataset.rows(r, c) += unit(rng);

  HyperparamCombo combo;
  combo.algorithm = Algorithm::AGGLOM;
  combo.pca_components = 2;
  combo.n_clusters = 2;
  const auto result = run_experiment(dataset, combo);
  REQUIRE(result.bundle.valid);

  const auto [model, scores] = pca_fit_transform(dataset.rows, 2);
  const auto sil_pca = silhouette(scores, result.assignment.labels);
  const auto sil_raw = silhouette(dataset.rows, result.assignment.labels);
  REQUIRE(sil_pca.has_value());
  REQUIRE(sil_raw.has_value());
  CHECK(result.bundle.silhouette == Catch::Approx(*sil_pca).margin(1e-12));
  CHECK(result.bundle.silhouette != Catch::Approx(*sil_raw).margin(1e-6));
  const auto db_pca = davies_bouldin(scores, result.assignment.labels);
  CHECK(result.bundle.davies_bouldin == Catch::Approx(*db_pca).margin(1e-12));
}

TEST_CASE("rank_results orders by composite with the tie rules") {
  std::vector<ExperimentResult> results(4);
  auto set = [&](int i, double cs, int pca, double eps, bool valid) {
    results[i].combo.algorithm = Algorithm::DBSCAN;
    results[i].combo.pca_components = pca;
    results[i].combo.epsilon = eps;
    results[i].bundle.valid = valid;
    results[i].bundle.composite = cs;
  };
  set(0, 2.3, 3, 0.01, true);
  set(1, 2.5, 2, 0.02, true);
  set(2, 2.5, 2, 0.01, true);
  set(3, 0.0, 2, 0.03, false);
  const auto ranking = rank_results(results);
  REQUIRE(ranking.size() == 4);
  CHECK(ranking[0] == 2);  // tie on CS=2.5 -> lower epsilon first
  CHECK(ranking[1] == 1);
  CHECK(ranking[2] == 0);
  CHECK(ranking[3] == 3);  // invalid at the tail
}

TEST_CASE("select_hyperparameters medians and ceilings") {
  auto make = [](Algorithm alg, int pca, double eps, int k, double cs) {
    ExperimentResult r;
    r.combo.algorithm = alg;
    r.combo.pca_components = pca;
    if (alg == Algorithm::DBSCAN)
      r.combo.epsilon = eps;
    else
      r.combo.n_clusters = k;
    r.bundle.valid = true;
    r.bundle.composite = cs;
    return r;
  };

  SECTION("odd median of n_clusters") {
    std::vector<ExperimentResult> results;
    const int ks[5] = {7, 7, 5, 8, 5};
    for (int i = 0; i < 5; ++i)
      results.push_back(make(Algorithm::KMEANS, 3, 0, ks[i], 5.0 - i * 0.1));
    const auto selected =
        select_hyperparameters(results, rank_results(results));
    CHECK(*selected.n_clusters == 7);
    CHECK(selected.pca_components == 3);
  }

  SECTION("even medians of pca take the ceiling") {
    std::vector<ExperimentResult> results;
    const int pcas[4] = {2, 3, 3, 4};
    for (int i = 0; i < 4; ++i)
      results.push_back(make(Algorithm::KMEANS, pcas[i], 0, 4, 5.0 - i * 0.1));
    auto selected = select_hyperparameters(results, rank_results(results));
    CHECK(selected.pca_components == 3);

    results.clear();
    const int pcas2[4] = {2, 2, 3, 3};
    for (int i = 0; i < 4; ++i)
      results.push_back(make(Algorithm::KMEANS, pcas2[i], 0, 4, 5.0 - i * 0.1));
    selected = select_hyperparameters(results, rank_results(results));
    CHECK(selected.pca_components == 3);  // ceil(2.5)
  }

  SECTION("epsilon keeps the real median") {
    std::vector<ExperimentResult> results;
    const double eps[5] = {0.18, 0.185, 0.185, 0.19, 0.175};
    for (int i = 0; i < 5; ++i)
      results.push_back(make(Algorithm::DBSCAN, 2, eps[i], 0, 5.0 - i * 0.1));
    const auto selected =
        select_hyperparameters(results, rank_results(results));
    CHECK(*selected.epsilon == Catch::Approx(0.185).margin(1e-15));
  }

  SECTION("zero valid results throws") {
    std::vector<ExperimentResult> results(2);
    CHECK_THROWS_AS(select_hyperparameters(results, rank_results(results)),
                    std::runtime_error);
  }
}

TEST_CASE("run_grid is deterministic and independent of job count") {
  const auto dataset = blob_dataset(25, 3, 0.1, 23);
  GridConfig grid;
  grid.k_min = 2;
  grid.k_max = 6;
  grid.epsilon_start = 0.05;
  grid.epsilon_stop = 0.3;
  grid.epsilon_step = 0.05;
  const std::vector<Algorithm> algorithms = {Algorithm::DBSCAN,
                                             Algorithm::KMEANS,
                                             Algorithm::KMODES};
  const auto a = run_grid(dataset, algorithms, grid, 99, 1);
  const auto b = run_grid(dataset, algorithms, grid, 99, 4);
  REQUIRE(a.per_algorithm.size() == b.per_algorithm.size());
  for (std::size_t alg = 0; alg < a.per_algorithm.size(); ++alg) {
    const auto& ra = a.per_algorithm[alg];
    const auto& rb = b.per_algorithm[alg];
    REQUIRE(ra.results.size() == rb.results.size());
    for (std::size_t i = 0; i < ra.results.size(); ++i) {
      CHECK(ra.results[i].assignment.labels == rb.results[i].assignment.labels);
      if (ra.results[i].bundle.valid)
        CHECK(ra.results[i].bundle.composite == rb.results[i].bundle.composite);
    }
    CHECK(ra.ranking == rb.ranking);
    CHECK(ra.selected.available == rb.selected.available);
    if (ra.selected.available)
      CHECK(ra.selected.final_run.assignment.labels ==
            rb.selected.final_run.assignment.labels);
  }
}

TEST_CASE("selected hyperparameters stay within the grid ranges") {
  const auto dataset = blob_dataset(30, 3, 0.08, 29);
  GridConfig grid;
  const auto outcome = run_grid(dataset, {Algorithm::KMEANS}, grid, 7, 1);
  REQUIRE(outcome.per_algorithm.size() == 1);
  const auto& selected = outcome.per_algorithm[0].selected;
  REQUIRE(selected.available);
  CHECK(selected.combo.pca_components >= grid.pca_min);
  CHECK(selected.combo.pca_components <= grid.pca_max);
  CHECK(*selected.combo.n_clusters >= grid.k_min);
  CHECK(*selected.combo.n_clusters <= grid.k_max);
}

TEST_CASE("paper-mode grid validation") {
  GridConfig grid;
  CHECK(is_default_grid(grid));
  grid.k_max = 10;
  CHECK_FALSE(is_default_grid(grid));
  GridConfig bad;
  bad.epsilon_step = -1.0;
  CHECK_THROWS_AS(validate_grid(bad), std::invalid_argument);
  GridConfig bad_pca;
  bad_pca.pca_max = 7;
  CHECK_THROWS_AS(validate_grid(bad_pca), std::invalid_argument);
}
