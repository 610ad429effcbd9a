#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ieiclust/agglomerative.hpp"
#include "ieiclust/assignment.hpp"
#include "ieiclust/csv.hpp"
#include "ieiclust/dbscan.hpp"
#include "ieiclust/hdbscan.hpp"
#include "ieiclust/impute.hpp"
#include "ieiclust/kmeans.hpp"
#include "ieiclust/kmodes.hpp"
#include "ieiclust/metrics.hpp"
#include "ieiclust/parallel.hpp"
#include "ieiclust/pca.hpp"
#include "ieiclust/rng.hpp"

namespace ieiclust {

// Grid dimensions. The defaults reproduce the published search: 40 epsilon
// steps x 4 PCA settings for the density algorithms (160 combos each) and
// k in 2..18 x 4 PCA settings for the fixed-k algorithms (68 combos each),
// 524 in total.
struct GridConfig {
  double epsilon_start = 0.005;
  double epsilon_stop = 0.2;
  double epsilon_step = 0.005;
  int k_min = 2;
  int k_max = 18;
  int pca_min = 2;
  int pca_max = 5;
  int min_samples = 5;       // DBSCAN / HDBSCAN density parameter
  int min_cluster_size = 5;  // HDBSCAN
};

inline void validate_grid(const GridConfig& g) {
  if (!(g.epsilon_step > 0.0) || !(g.epsilon_start > 0.0) ||
      g.epsilon_stop < g.epsilon_start)
    throw std::invalid_argument("grid: bad epsilon range");
  if (g.k_min < 2 || g.k_max < g.k_min)
    throw std::invalid_argument("grid: bad n_clusters range");
  if (g.pca_min < 2 || g.pca_max > 5 || g.pca_max < g.pca_min)
    throw std::invalid_argument("grid: pca range must stay within 2..5");
  if (g.min_samples < 1 || g.min_cluster_size < 2)
    throw std::invalid_argument("grid: bad density parameters");
}

inline bool is_default_grid(const GridConfig& g) {
  const GridConfig d;
  return g.epsilon_start == d.epsilon_start && g.epsilon_stop == d.epsilon_stop &&
         g.epsilon_step == d.epsilon_step && g.k_min == d.k_min &&
         g.k_max == d.k_max && g.pca_min == d.pca_min && g.pca_max == d.pca_max;
}

struct HyperparamCombo {
  Algorithm algorithm = Algorithm::KMEANS;
  int pca_components = 2;
  std::optional<double> epsilon;   // density algorithms
  std::optional<int> n_clusters;   // fixed-k algorithms
  std::uint64_t seed = 0;
};

inline bool is_density(Algorithm a) {
  return a == Algorithm::DBSCAN || a == Algorithm::HDBSCAN;
}

// Enumeration order: pca ascending, then epsilon / n_clusters ascending.
inline std::vector<HyperparamCombo> enumerate_grid(Algorithm algorithm,
                                                   const GridConfig& grid = {}) {
  validate_grid(grid);
  std::vector<HyperparamCombo> combos;
  const int n_eps = static_cast<int>(std::floor(
                        (grid.epsilon_stop - grid.epsilon_start) /
                            grid.epsilon_step +
                        0.5)) +
                    1;
  for (int pca = grid.pca_min; pca <= grid.pca_max; ++pca) {
    if (is_density(algorithm)) {
      for (int i = 0; i < n_eps; ++i) {
        HyperparamCombo c;
        c.algorithm = algorithm;
        c.pca_components = pca;
        c.epsilon = grid.epsilon_start + i * grid.epsilon_step;
        combos.push_back(c);
      }
    } else {
      for (int k = grid.k_min; k <= grid.k_max; ++k) {
        HyperparamCombo c;
        c.algorithm = algorithm;
        c.pca_components = pca;
        c.n_clusters = k;
        combos.push_back(c);
      }
    }
  }
  return combos;
}

// Deterministic per-experiment seed stream.
inline std::uint64_t experiment_seed(std::uint64_t master_seed, AgeGroup group,
                                     Algorithm algorithm,
                                     std::uint64_t combo_index) {
  std::uint64_t s = master_seed;
  s = mix_seed(s, static_cast<std::uint64_t>(group) + 1);
  s = mix_seed(s, static_cast<std::uint64_t>(algorithm) + 101);
  s = mix_seed(s, combo_index + 1001);
  return s;
}

// combo_index used for the post-selection re-run of the median combo.
inline constexpr std::uint64_t kFinalRunIndex = 0xFFFFFFFFull;

struct ExperimentResult {
  AgeGroup age_group = AgeGroup::Y0_1;
  HyperparamCombo combo;
  ClusterAssignment assignment;
  MetricsBundle bundle;
  std::string error;  // non-empty when preconditions kept the combo from running
};

// Per-PCA-setting caches shared by every combo of one dataset: scores and
// pairwise distances always, plus the HDBSCAN tree / Ward dendrogram /
// tercile categories when the corresponding algorithm will run.
class ExperimentContext {
 public:
  ExperimentContext(const SubgroupDataset& dataset, const GridConfig& grid,
                    const std::vector<Algorithm>& algorithms)
      : dataset_(dataset), grid_(grid) {
    validate_grid(grid);
    const int n = static_cast<int>(dataset.size());
    const bool want_hdbscan =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::HDBSCAN) !=
        algorithms.end();
    const bool want_agglom =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::AGGLOM) !=
        algorithms.end();
    const bool want_kmodes =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::KMODES) !=
        algorithms.end();
    for (int pca = grid.pca_min; pca <= grid.pca_max; ++pca) {
      if (n < pca) break;
      PcaCache cache;
      auto [model, scores] = pca_fit_transform(dataset.rows, pca);
      cache.scores = std::move(scores);
      cache.dist = pairwise_distances(cache.scores);
      if (want_hdbscan && n >= grid.min_cluster_size)
        cache.tree = hdbscan_build_with_distances(cache.dist,
                                                  grid.min_cluster_size,
                                                  grid.min_samples);
      if (want_agglom) cache.merges = ward_dendrogram(cache.scores);
      if (want_kmodes) cache.categories = discretize_terciles(cache.scores);
      caches_[pca - grid.pca_min] = std::move(cache);
    }
    truth_.reserve(dataset.labels.size());
    for (const auto l : dataset.labels) truth_.push_back(static_cast<int>(l));
  }

  const SubgroupDataset& dataset() const { return dataset_; }
  const GridConfig& grid() const { return grid_; }
  const std::vector<int>& truth() const { return truth_; }

  struct PcaCache {
    Eigen::MatrixXd scores;
    Eigen::MatrixXd dist;
    std::optional<HdbscanTree> tree;
    std::optional<std::vector<WardMerge>> merges;
    std::optional<CategoricalMatrix> categories;
  };

  const PcaCache* cache_for(int pca_components) const {
    const int idx = pca_components - grid_.pca_min;
    if (idx < 0 || idx >= static_cast<int>(caches_.size())) return nullptr;
    if (!caches_[idx]) return nullptr;
    return &*caches_[idx];
  }

 private:
  const SubgroupDataset& dataset_;
  GridConfig grid_;
  std::vector<int> truth_;
  std::array<std::optional<PcaCache>, 4> caches_;
};

// Runs one grid point: PCA projection, the combo's algorithm, then the
// metric bundle against the revealed disease labels, all in PCA space.
// Precondition violations (k > n, n < min_cluster_size, ...) yield a result
// flagged with an error instead of aborting the grid.
inline ExperimentResult run_experiment_cached(const ExperimentContext& ctx,
                                              const HyperparamCombo& combo) {
  ExperimentResult result;
  result.age_group = ctx.dataset().age_group;
  result.combo = combo;
  const auto* cache = ctx.cache_for(combo.pca_components);
  if (cache == nullptr) {
    result.error = "dataset too small for pca=" +
                   std::to_string(combo.pca_components);
    return result;
  }
  try {
    switch (combo.algorithm) {
      case Algorithm::DBSCAN:
        result.assignment = dbscan_with_distances(
            cache->dist, combo.epsilon.value(), ctx.grid().min_samples);
        break;
      case Algorithm::HDBSCAN: {
        if (!cache->tree) throw std::invalid_argument(
            "hdbscan: dataset smaller than min_cluster_size");
        result.assignment = hdbscan_select(*cache->tree, combo.epsilon.value());
        result.assignment.algorithm = Algorithm::HDBSCAN;
        break;
      }
      case Algorithm::KMEANS:
        result.assignment =
            kmeans(cache->scores, combo.n_clusters.value(), combo.seed)
                .assignment;
        break;
      case Algorithm::AGGLOM:
        result.assignment = cut_dendrogram(
            cache->merges.value(), static_cast<int>(ctx.dataset().size()),
            combo.n_clusters.value());
        break;
      case Algorithm::KMODES:
        result.assignment =
            kmodes(cache->categories.value(), combo.n_clusters.value(),
                   combo.seed)
                .assignment;
        break;
    }
  } catch (const std::invalid_argument& e) {
    result.error = e.what();
    return result;
  }
  result.bundle = evaluate_assignment(cache->scores, cache->dist, ctx.truth(),
                                      result.assignment);
  return result;
}

inline ExperimentResult run_experiment(const SubgroupDataset& dataset,
                                       const HyperparamCombo& combo,
                                       const GridConfig& grid = {}) {
  // Limit the caches to the one PCA setting this combo needs.
  GridConfig narrowed = grid;
  narrowed.pca_min = narrowed.pca_max = combo.pca_components;
  try {
    ExperimentContext ctx(dataset, narrowed, {combo.algorithm});
    return run_experiment_cached(ctx, combo);
  } catch (const std::invalid_argument& e) {
    ExperimentResult result;
    result.age_group = dataset.age_group;
    result.combo = combo;
    result.error = e.what();
    return result;
  }
}

// Valid results by composite score descending (ties: lower pca, then lower
// epsilon / n_clusters); invalid results keep their enumeration order at the
// tail.
inline std::vector<std::size_t> rank_results(
    const std::vector<ExperimentResult>& results) {
  std::vector<std::size_t> valid, invalid;
  for (std::size_t i = 0; i < results.size(); ++i)
    (results[i].bundle.valid ? valid : invalid).push_back(i);
  std::stable_sort(valid.begin(), valid.end(),
                   [&](std::size_t a, std::size_t b) {
                     const auto& ra = results[a];
                     const auto& rb = results[b];
                     if (ra.bundle.composite != rb.bundle.composite)
                       return ra.bundle.composite > rb.bundle.composite;
                     if (ra.combo.pca_components != rb.combo.pca_components)
                       return ra.combo.pca_components < rb.combo.pca_components;
                     const double ka = ra.combo.epsilon
                                           ? *ra.combo.epsilon
                                           : double(*ra.combo.n_clusters);
                     const double kb = rb.combo.epsilon
                                           ? *rb.combo.epsilon
                                           : double(*rb.combo.n_clusters);
                     return ka < kb;
                   });
  valid.insert(valid.end(), invalid.begin(), invalid.end());
  return valid;
}

inline std::size_t count_valid(const std::vector<ExperimentResult>& results) {
  std::size_t n = 0;
  for (const auto& r : results) n += r.bundle.valid;
  return n;
}

namespace detail {

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

// Median hyperparameters of the top-5 ranked combos (integral parameters are
// rounded up). Throws when no valid result exists.
inline HyperparamCombo select_hyperparameters(
    const std::vector<ExperimentResult>& results,
    const std::vector<std::size_t>& ranking) {
  const std::size_t n_valid = count_valid(results);
  if (n_valid == 0)
    throw std::runtime_error(
        "no valid hyperparameter combination; widen the grid or check the "
        "dataset");
  const std::size_t take = std::min<std::size_t>(5, n_valid);
  std::vector<double> pcas, knobs;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& r = results[ranking[i]];
    pcas.push_back(double(r.combo.pca_components));
    knobs.push_back(r.combo.epsilon ? *r.combo.epsilon
                                    : double(*r.combo.n_clusters));
  }
  HyperparamCombo selected;
  selected.algorithm = results[ranking[0]].combo.algorithm;
  selected.pca_components =
      static_cast<int>(std::ceil(detail::median(pcas)));
  if (is_density(selected.algorithm))
    selected.epsilon = detail::median(knobs);
  else
    selected.n_clusters = static_cast<int>(std::ceil(detail::median(knobs)));
  return selected;
}

inline constexpr const char* kResultsCsvHeader =
    "pca,epsilon_or_nc,homogeneity,completeness,v_measure,ari,ami,silhouette,"
    "davies_bouldin,composite,n_clusters_found,valid";

inline void write_results_csv(std::ostream& out,
                              const std::vector<ExperimentResult>& results,
                              const std::vector<std::size_t>& ranking) {
  out << kResultsCsvHeader << "\n";
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (std::size_t idx : ranking) {
    const auto& r = results[idx];
    out << r.combo.pca_components << ','
        << (r.combo.epsilon ? format_double(*r.combo.epsilon)
                            : std::to_string(*r.combo.n_clusters))
        << ',' << field(r.bundle.homogeneity) << ','
        << field(r.bundle.completeness) << ',' << field(r.bundle.v_measure)
        << ',' << field(r.bundle.ari) << ',' << field(r.bundle.ami) << ','
        << field(r.bundle.silhouette) << ',' << field(r.bundle.davies_bouldin)
        << ',' << field(r.bundle.composite) << ','
        << r.assignment.n_clusters << ',' << (r.bundle.valid ? 1 : 0) << "\n";
  }
}

// Outcome of tuning one (age group, algorithm) cell.
struct SelectedOutcome {
  AgeGroup age_group = AgeGroup::Y0_1;
  Algorithm algorithm = Algorithm::KMEANS;
  bool available = false;
  HyperparamCombo combo;         // median-of-top-5 selection
  ExperimentResult final_run;    // the selected combo, re-run
};

struct AlgorithmGridOutcome {
  Algorithm algorithm = Algorithm::KMEANS;
  std::vector<ExperimentResult> results;
  std::vector<std::size_t> ranking;
  SelectedOutcome selected;
};

struct SubgroupGridOutcome {
  AgeGroup age_group = AgeGroup::Y0_1;
  std::vector<AlgorithmGridOutcome> per_algorithm;
  std::size_t experiments = 0;  // combos registered, valid or not
};

// Full grid over one imputed subgroup. Combos are independent tasks; results
// land in preassigned slots so the outcome is identical for any job count.
inline SubgroupGridOutcome run_grid(const SubgroupDataset& dataset,
                                    const std::vector<Algorithm>& algorithms,
                                    const GridConfig& grid,
                                    std::uint64_t master_seed,
                                    unsigned jobs = 1) {
  SubgroupGridOutcome outcome;
  outcome.age_group = dataset.age_group;
  ExperimentContext ctx(dataset, grid, algorithms);
  for (const Algorithm algorithm : algorithms) {
    AlgorithmGridOutcome cell;
    cell.algorithm = algorithm;
    auto combos = enumerate_grid(algorithm, grid);
    for (std::size_t i = 0; i < combos.size(); ++i)
      combos[i].seed =
          experiment_seed(master_seed, dataset.age_group, algorithm, i);
    cell.results.resize(combos.size());
    parallel_for(combos.size(), jobs, [&](std::size_t i) {
      cell.results[i] = run_experiment_cached(ctx, combos[i]);
    });
    outcome.experiments += combos.size();
    cell.ranking = rank_results(cell.results);
    cell.selected.age_group = dataset.age_group;
    cell.selected.algorithm = algorithm;
    if (count_valid(cell.results) > 0) {
      HyperparamCombo selected = select_hyperparameters(cell.results,
                                                        cell.ranking);
      selected.seed = experiment_seed(master_seed, dataset.age_group,
                                      algorithm, kFinalRunIndex);
      cell.selected.combo = selected;
      cell.selected.final_run = run_experiment_cached(ctx, selected);
      cell.selected.available = cell.selected.final_run.error.empty();
    }
    outcome.per_algorithm.push_back(std::move(cell));
  }
  return outcome;
}

}  // namespace ieiclust
