#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ieiclust/csv.hpp"
#include "ieiclust/normalize.hpp"
#include "ieiclust/rng.hpp"
#include "ieiclust/types.hpp"

namespace ieiclust {

struct ImputeConfig {
  int chains = 5;
  int iterations = 10;
  int pmm_donors = 5;
  std::uint64_t seed = 0;
};

// Complete per-age-group matrix with blinded-label bookkeeping.
struct SubgroupDataset {
  AgeGroup age_group = AgeGroup::Y0_1;
  Eigen::MatrixXd rows;  // n x 5, complete after imputation
  std::vector<DiseaseLabel> labels;
  std::vector<std::pair<std::string, std::string>> ids;  // (patient, encounter)
  std::vector<std::array<bool, kNumLabs>> imputed_mask;

  std::size_t size() const { return labels.size(); }
};

class MiceError : public std::runtime_error {
 public:
  MiceError(int column, const std::string& message)
      : std::runtime_error(message), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

namespace detail {

// Least-squares fit of `target` on the remaining columns plus an intercept,
// over the given rows. Rank deficiency (e.g. a constant predictor) is handled
// by the column-pivoted QR.
inline Eigen::VectorXd fit_column_regression(const Eigen::MatrixXd& data,
                                             int target,
                                             const std::vector<int>& fit_rows) {
  const int p = static_cast<int>(data.cols());
  Eigen::MatrixXd design(fit_rows.size(), p);  // intercept + p-1 predictors
  Eigen::VectorXd response(fit_rows.size());
  for (std::size_t r = 0; r < fit_rows.size(); ++r) {
    design(r, 0) = 1.0;
    int k = 1;
    for (int c = 0; c < p; ++c) {
      if (c == target) continue;
      design(r, k++) = data(fit_rows[r], c);
    }
    response(r) = data(fit_rows[r], target);
  }
  return design.colPivHouseholderQr().solve(response);
}

inline double predict_column(const Eigen::MatrixXd& data, int target, int row,
                             const Eigen::VectorXd& coef) {
  double y = coef(0);
  int k = 1;
  for (int c = 0; c < static_cast<int>(data.cols()); ++c) {
    if (c == target) continue;
    y += coef(k++) * data(row, c);
  }
  return y;
}

}  // namespace detail

// Chained-equation imputation with predictive mean matching.
//
// Per chain: missing cells start at the column mean; each sweep visits the
// columns in index order, regresses the column on the other columns over the
// rows where it is observed, predicts the missing cells, and replaces each
// prediction with the observed value of a donor drawn uniformly from the
// `pmm_donors` donors whose predictions are closest (ties toward lower row
// index). Chain c uses seed + c; the returned matrix is the per-cell mean of
// the chains. Observed cells pass through bit-identical.
inline Eigen::MatrixXd mice_impute(const Eigen::MatrixXd& input,
                                   const ImputeConfig& config = {}) {
  if (config.chains < 1 || config.iterations < 1 || config.pmm_donors < 1)
    throw std::invalid_argument("mice_impute: config values must be >= 1");
  const int n = static_cast<int>(input.rows());
  const int p = static_cast<int>(input.cols());
  if (n < p + 1)
    throw MiceError(-1, "mice_impute: need at least " + std::to_string(p + 1) +
                            " rows, got " + std::to_string(n));

  std::vector<std::vector<int>> observed_rows(p), missing_rows(p);
  for (int c = 0; c < p; ++c) {
    for (int r = 0; r < n; ++r) {
      if (std::isnan(input(r, c)))
        missing_rows[c].push_back(r);
      else
        observed_rows[c].push_back(r);
    }
    if (observed_rows[c].size() < 2)
      throw MiceError(c, "mice_impute: column " + std::to_string(c) +
                             " has fewer than 2 observed values");
  }

  Eigen::VectorXd column_means(p);
  for (int c = 0; c < p; ++c) {
    double sum = 0.0;
    for (int r : observed_rows[c]) sum += input(r, c);
    column_means(c) = sum / static_cast<double>(observed_rows[c].size());
  }

  Eigen::MatrixXd result = input;
  Eigen::MatrixXd missing_sum = Eigen::MatrixXd::Zero(n, p);

  for (int chain = 0; chain < config.chains; ++chain) {
    Rng rng(config.seed + static_cast<std::uint64_t>(chain));
    Eigen::MatrixXd work = input;
    for (int c = 0; c < p; ++c)
      for (int r : missing_rows[c]) work(r, c) = column_means(c);

    for (int sweep = 0; sweep < config.iterations; ++sweep) {
      for (int c = 0; c < p; ++c) {
        if (missing_rows[c].empty()) continue;
        const auto coef = detail::fit_column_regression(work, c,
                                                        observed_rows[c]);
        std::vector<double> donor_pred(observed_rows[c].size());
        for (std::size_t d = 0; d < observed_rows[c].size(); ++d)
          donor_pred[d] =
              detail::predict_column(work, c, observed_rows[c][d], coef);
        std::vector<std::size_t> donor_order(observed_rows[c].size());
        for (int r : missing_rows[c]) {
          const double pred = detail::predict_column(work, c, r, coef);
          std::iota(donor_order.begin(), donor_order.end(), std::size_t{0});
          const std::size_t k = std::min<std::size_t>(
              static_cast<std::size_t>(config.pmm_donors), donor_order.size());
          std::partial_sort(
              donor_order.begin(), donor_order.begin() + k, donor_order.end(),
              [&](std::size_t a, std::size_t b) {
                const double da = std::abs(donor_pred[a] - pred);
                const double db = std::abs(donor_pred[b] - pred);
                if (da != db) return da < db;
                return observed_rows[c][a] < observed_rows[c][b];
              });
          const std::size_t pick = rng.uniform_index(k);
          work(r, c) = input(observed_rows[c][donor_order[pick]], c);
        }
      }
    }
    for (int c = 0; c < p; ++c)
      for (int r : missing_rows[c]) missing_sum(r, c) += work(r, c);
  }

  for (int c = 0; c < p; ++c)
    for (int r : missing_rows[c])
      result(r, c) = missing_sum(r, c) / static_cast<double>(config.chains);
  return result;
}

struct ImputeOutcome {
  std::vector<SubgroupDataset> datasets;  // one per age group, index order
  std::vector<std::string> warnings;      // degenerate-stratum fallbacks
};

// Imputes each (disease, age-group) stratum independently and re-assembles
// one complete dataset per age group in the original row order.
//
// Degenerate strata fall back instead of aborting:
//   - fewer than 3 rows: missing cells become 0.5 (mid-normal)
//   - a column with < 2 observed values: its missing cells take the age
//     group's cross-disease column mean (0.5 if the whole group lacks data)
//   - 3..5 rows (too few for the regression): per-column observed means
inline ImputeOutcome impute_subgroups(const AgePartition& by_age,
                                      const ImputeConfig& config = {}) {
  ImputeOutcome outcome;
  outcome.datasets.resize(kNumAgeGroups);

  for (int g = 0; g < kNumAgeGroups; ++g) {
    const auto& vectors = by_age.groups[g];
    SubgroupDataset& dataset = outcome.datasets[g];
    dataset.age_group = static_cast<AgeGroup>(g);
    const int n = static_cast<int>(vectors.size());
    dataset.rows.resize(n, kNumLabs);
    dataset.labels.resize(n);
    dataset.ids.resize(n);
    dataset.imputed_mask.assign(n, {false, false, false, false, false});
    for (int r = 0; r < n; ++r) {
      dataset.labels[r] = vectors[r].disease;
      dataset.ids[r] = {vectors[r].patient_id, vectors[r].encounter_id};
      for (int c = 0; c < kNumLabs; ++c) {
        if (vectors[r].components[c]) {
          dataset.rows(r, c) = *vectors[r].components[c];
        } else {
          dataset.rows(r, c) = std::numeric_limits<double>::quiet_NaN();
          dataset.imputed_mask[r][c] = true;
        }
      }
    }
    if (n == 0) continue;

    // Cross-disease column means for the whole age group.
    std::array<double, kNumLabs> group_mean;
    for (int c = 0; c < kNumLabs; ++c) {
      double sum = 0.0;
      int count = 0;
      for (int r = 0; r < n; ++r) {
        if (!std::isnan(dataset.rows(r, c))) {
          sum += dataset.rows(r, c);
          ++count;
        }
      }
      group_mean[c] = count > 0 ? sum / count : 0.5;
    }

    for (int d = 0; d < kNumDiseases; ++d) {
      std::vector<int> stratum_rows;
      for (int r = 0; r < n; ++r)
        if (dataset.labels[r] == static_cast<DiseaseLabel>(d))
          stratum_rows.push_back(r);
      if (stratum_rows.empty()) continue;
      const int sn = static_cast<int>(stratum_rows.size());
      const std::string stratum_name =
          std::string(to_string(static_cast<DiseaseLabel>(d))) + "/" +
          to_string(static_cast<AgeGroup>(g));

      Eigen::MatrixXd stratum(sn, kNumLabs);
      for (int r = 0; r < sn; ++r)
        stratum.row(r) = dataset.rows.row(stratum_rows[r]);

      auto fill_missing = [&](int c, double value) {
        for (int r = 0; r < sn; ++r)
          if (std::isnan(stratum(r, c))) stratum(r, c) = value;
      };

      if (sn < 3) {
        bool any = false;
        for (int c = 0; c < kNumLabs; ++c)
          for (int r = 0; r < sn; ++r)
            if (std::isnan(stratum(r, c))) {
              stratum(r, c) = 0.5;
              any = true;
            }
        if (any)
          outcome.warnings.push_back("stratum " + stratum_name +
                                     ": fewer than 3 rows, missing set to 0.5");
      } else {
        // Columns too sparse for the chained regressions take the age
        // group's cross-disease mean first.
        for (int c = 0; c < kNumLabs; ++c) {
          int observed = 0;
          for (int r = 0; r < sn; ++r)
            if (!std::isnan(stratum(r, c))) ++observed;
          if (observed < 2) {
            fill_missing(c, group_mean[c]);
            outcome.warnings.push_back(
                "stratum " + stratum_name + ": column " +
                kTestCodeNames[c] +
                " has <2 observed values, filled with age-group mean");
          }
        }
        if (sn < kNumLabs + 1) {
          const bool had_missing = stratum.hasNaN();
          for (int c = 0; c < kNumLabs; ++c) {
            double sum = 0.0;
            int count = 0;
            for (int r = 0; r < sn; ++r)
              if (!std::isnan(stratum(r, c))) {
                sum += stratum(r, c);
                ++count;
              }
            fill_missing(c, count > 0 ? sum / count : group_mean[c]);
          }
          if (had_missing)
            outcome.warnings.push_back(
                "stratum " + stratum_name +
                ": fewer than 6 rows, used column-mean imputation");
        } else if (stratum.hasNaN()) {
          ImputeConfig stratum_config = config;
          stratum_config.seed = mix_seed(
              config.seed, static_cast<std::uint64_t>(g) * kNumDiseases + d);
          stratum = mice_impute(stratum, stratum_config);
        }
      }

      for (int r = 0; r < sn; ++r)
        dataset.rows.row(stratum_rows[r]) = stratum.row(r);
    }
  }
  return outcome;
}

inline constexpr const char* kImputedCsvHeader =
    "patient_id,encounter_id,disease,age_group,cd3,cd3cd8,cd3cd4,cd19,"
    "cd16cd56,cd3_imputed,cd3cd8_imputed,cd3cd4_imputed,cd19_imputed,"
    "cd16cd56_imputed";

inline void write_imputed_csv(std::ostream& out,
                              const std::vector<SubgroupDataset>& datasets) {
  out << kImputedCsvHeader << "\n";
  for (const auto& dataset : datasets) {
    for (std::size_t r = 0; r < dataset.size(); ++r) {
      out << dataset.ids[r].first << ',' << dataset.ids[r].second << ','
          << to_string(dataset.labels[r]) << ',' << to_string(dataset.age_group);
      for (int c = 0; c < kNumLabs; ++c)
        out << ',' << format_double(dataset.rows(r, c));
      for (int c = 0; c < kNumLabs; ++c)
        out << ',' << (dataset.imputed_mask[r][c] ? '1' : '0');
      out << "\n";
    }
  }
}

inline std::vector<SubgroupDataset> read_imputed_csv(std::istream& in) {
  std::vector<SubgroupDataset> datasets(kNumAgeGroups);
  for (int g = 0; g < kNumAgeGroups; ++g)
    datasets[g].age_group = static_cast<AgeGroup>(g);
  struct Row {
    std::string patient, encounter;
    DiseaseLabel disease;
    std::array<double, kNumLabs> values;
    std::array<bool, kNumLabs> imputed;
  };
  std::array<std::vector<Row>, kNumAgeGroups> rows;

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("imputed csv: empty stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kImputedCsvHeader)
    throw std::runtime_error("imputed csv: unexpected header: " + line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4 + 2 * kNumLabs)
      throw std::runtime_error("imputed csv line " + std::to_string(lineno) +
                               ": wrong field count");
    const auto disease = parse_disease_label(fields[2]);
    const auto group = parse_age_group(fields[3]);
    if (!disease || !group)
      throw std::runtime_error("imputed csv line " + std::to_string(lineno) +
                               ": bad disease or age_group");
    Row row;
    row.patient = std::string(fields[0]);
    row.encounter = std::string(fields[1]);
    row.disease = *disease;
    for (int c = 0; c < kNumLabs; ++c) {
      const auto value = parse_double(fields[4 + c]);
      if (!value)
        throw std::runtime_error("imputed csv line " + std::to_string(lineno) +
                                 ": bad component");
      row.values[c] = *value;
      row.imputed[c] = fields[4 + kNumLabs + c] == "1";
    }
    rows[static_cast<int>(*group)].push_back(std::move(row));
  }

  for (int g = 0; g < kNumAgeGroups; ++g) {
    auto& dataset = datasets[g];
    const int n = static_cast<int>(rows[g].size());
    dataset.rows.resize(n, kNumLabs);
    dataset.labels.resize(n);
    dataset.ids.resize(n);
    dataset.imputed_mask.resize(n);
    for (int r = 0; r < n; ++r) {
      const Row& row = rows[g][r];
      dataset.labels[r] = row.disease;
      dataset.ids[r] = {row.patient, row.encounter};
      for (int c = 0; c < kNumLabs; ++c) dataset.rows(r, c) = row.values[c];
      dataset.imputed_mask[r] = row.imputed;
    }
  }
  return datasets;
}

}  // namespace ieiclust
