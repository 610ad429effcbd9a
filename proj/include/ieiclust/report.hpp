#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ieiclust/csv.hpp"
#include "ieiclust/grid.hpp"
#include "ieiclust/impute.hpp"
#include "ieiclust/ingest.hpp"
#include "ieiclust/types.hpp"

namespace ieiclust {

struct CompositionRow {
  int cluster = 0;  // -1 is the noise row
  DiseaseLabel dominant = DiseaseLabel::CGD;
  double fraction = 0.0;
  int count = 0;
};

// Per-cluster dominant disease and fraction; modal ties resolve in enum
// order. Noise points, when present, form their own row with cluster -1.
inline std::vector<CompositionRow> cluster_composition(
    const std::vector<int>& labels, const std::vector<DiseaseLabel>& diseases) {
  if (labels.size() != diseases.size())
    throw std::invalid_argument("cluster_composition: length mismatch");
  std::map<int, std::array<int, kNumDiseases>> tally;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = tally.try_emplace(labels[i]);
    if (inserted) it->second.fill(0);
    ++it->second[static_cast<int>(diseases[i])];
  }
  std::vector<CompositionRow> rows;
  for (const auto& [cluster, counts] : tally) {
    CompositionRow row;
    row.cluster = cluster;
    int best = 0;
    for (int d = 0; d < kNumDiseases; ++d) {
      row.count += counts[d];
      if (counts[d] > counts[best]) best = d;
    }
    row.dominant = static_cast<DiseaseLabel>(best);
    row.fraction = double(counts[best]) / double(row.count);
    rows.push_back(row);
  }
  // Noise row (cluster -1) reads better last.
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompositionRow& a, const CompositionRow& b) {
                     const int ka = a.cluster < 0 ? 1 << 30 : a.cluster;
                     const int kb = b.cluster < 0 ? 1 << 30 : b.cluster;
                     return ka < kb;
                   });
  return rows;
}

struct IcdEntry {
  std::string code;
  int patients = 0;
};

inline constexpr int kIcdTableSize = 20;

// Top-20 ICD codes by distinct-patient count over the given patients,
// skipping the excluded (disease-defining) codes. With repeat_filter a
// patient counts toward a code only when the code recurs in their chart at
// least 90 days apart. Ties break lexicographically.
inline std::vector<IcdEntry> icd_frequency_table(
    const std::set<std::string>& patient_ids,
    const std::vector<DiagnosisEvent>& diagnoses,
    const std::set<std::string>& exclude, bool repeat_filter) {
  std::map<std::string, std::map<std::string, std::pair<std::int64_t, std::int64_t>>>
      span;  // code -> patient -> (min day, max day)
  for (const auto& ev : diagnoses) {
    if (!patient_ids.count(ev.patient_id)) continue;
    if (exclude.count(ev.icd_code)) continue;
    auto& by_patient = span[ev.icd_code];
    auto [it, inserted] =
        by_patient.try_emplace(ev.patient_id, ev.recorded_day, ev.recorded_day);
    if (!inserted) {
      it->second.first = std::min(it->second.first, ev.recorded_day);
      it->second.second = std::max(it->second.second, ev.recorded_day);
    }
  }
  std::vector<IcdEntry> entries;
  for (const auto& [code, by_patient] : span) {
    int count = 0;
    for (const auto& [patient, days] : by_patient) {
      if (repeat_filter && days.second - days.first < kMinCodeGapDays) continue;
      ++count;
    }
    if (count > 0) entries.push_back({code, count});
  }
  std::sort(entries.begin(), entries.end(),
            [](const IcdEntry& a, const IcdEntry& b) {
              if (a.patients != b.patients) return a.patients > b.patients;
              return a.code < b.code;
            });
  if (entries.size() > kIcdTableSize) entries.resize(kIcdTableSize);
  return entries;
}

struct ClusterReportEntry {
  CompositionRow composition;
  Eigen::RowVectorXd mean_vector;  // in the imputed lab space
  std::vector<IcdEntry> icd_all;
  std::vector<IcdEntry> icd_repeat;
};

struct ClusterReport {
  AgeGroup age_group = AgeGroup::Y0_1;
  Algorithm algorithm = Algorithm::KMEANS;
  HyperparamCombo combo;
  std::vector<ClusterReportEntry> clusters;
};

// Composition plus ICD profiles for one selected assignment. ICD tables are
// computed over the dominant-disease members of each non-noise cluster.
inline ClusterReport build_cluster_report(
    const SubgroupDataset& dataset, const SelectedOutcome& selected,
    const std::vector<DiagnosisEvent>& diagnoses,
    const std::set<std::string>& exclude) {
  ClusterReport report;
  report.age_group = dataset.age_group;
  report.algorithm = selected.algorithm;
  report.combo = selected.combo;
  const auto& labels = selected.final_run.assignment.labels;
  const auto rows = cluster_composition(labels, dataset.labels);
  for (const auto& row : rows) {
    ClusterReportEntry entry;
    entry.composition = row;
    entry.mean_vector = Eigen::RowVectorXd::Zero(kNumLabs);
    std::set<std::string> dominant_patients;
    int members = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != row.cluster) continue;
      entry.mean_vector += dataset.rows.row(i);
      ++members;
      if (dataset.labels[i] == row.dominant)
        dominant_patients.insert(dataset.ids[i].first);
    }
    if (members > 0) entry.mean_vector /= double(members);
    if (row.cluster >= 0) {
      entry.icd_all =
          icd_frequency_table(dominant_patients, diagnoses, exclude, false);
      entry.icd_repeat =
          icd_frequency_table(dominant_patients, diagnoses, exclude, true);
    }
    report.clusters.push_back(std::move(entry));
  }
  return report;
}

struct SummaryRow {
  AgeGroup age_group = AgeGroup::Y0_1;
  Algorithm algorithm = Algorithm::KMEANS;
  bool available = false;
  int pca = 0;
  std::optional<double> epsilon;
  std::optional<int> n_clusters;
  double composite = 0.0;
  double silhouette = 0.0;
  bool metrics_valid = false;
};

// One row per (age group, algorithm) with the selected combo's PCA, grid
// knob, composite score and silhouette. Cells without a usable selection are
// marked UNAVAILABLE in the CSV.
inline std::vector<SummaryRow> summary_table(
    const std::vector<SelectedOutcome>& selected) {
  std::vector<SummaryRow> rows;
  for (const auto& s : selected) {
    SummaryRow row;
    row.age_group = s.age_group;
    row.algorithm = s.algorithm;
    row.available = s.available;
    if (s.available) {
      row.pca = s.combo.pca_components;
      row.epsilon = s.combo.epsilon;
      row.n_clusters = s.combo.n_clusters;
      row.metrics_valid = s.final_run.bundle.valid;
      if (row.metrics_valid) {
        row.composite = s.final_run.bundle.composite;
        row.silhouette = s.final_run.bundle.silhouette;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kSummaryCsvHeader =
    "age_group,algorithm,pca,ed_or_nc,cs,sc";

inline void write_summary_csv(std::ostream& out,
                              const std::vector<SummaryRow>& rows) {
  out << kSummaryCsvHeader << "\n";
  for (const auto& row : rows) {
    out << to_string(row.age_group) << ',' << to_string(row.algorithm) << ',';
    if (!row.available) {
      out << "UNAVAILABLE,UNAVAILABLE,UNAVAILABLE,UNAVAILABLE\n";
      continue;
    }
    out << row.pca << ','
        << (row.epsilon ? format_double(*row.epsilon)
                        : std::to_string(*row.n_clusters))
        << ',';
    if (row.metrics_valid)
      out << format_double(row.composite) << ','
          << format_double(row.silhouette);
    else
      out << "UNAVAILABLE,UNAVAILABLE";
    out << "\n";
  }
}

inline nlohmann::ordered_json icd_entries_to_json(
    const std::vector<IcdEntry>& entries) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries)
    arr.push_back({{"code", e.code}, {"patients", e.patients}});
  return arr;
}

inline nlohmann::ordered_json cluster_report_to_json(const ClusterReport& report) {
  nlohmann::ordered_json j;
  j["age_group"] = to_string(report.age_group);
  j["algorithm"] = to_string(report.algorithm);
  j["pca"] = report.combo.pca_components;
  if (report.combo.epsilon) j["epsilon"] = *report.combo.epsilon;
  if (report.combo.n_clusters) j["n_clusters"] = *report.combo.n_clusters;
  nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
  for (const auto& entry : report.clusters) {
    nlohmann::ordered_json c;
    c["cluster"] = entry.composition.cluster < 0
                       ? nlohmann::ordered_json("NOISE")
                       : nlohmann::ordered_json(entry.composition.cluster);
    c["dominant_disease"] = to_string(entry.composition.dominant);
    c["fraction"] = entry.composition.fraction;
    c["count"] = entry.composition.count;
    nlohmann::ordered_json mean = nlohmann::ordered_json::array();
    for (int i = 0; i < entry.mean_vector.size(); ++i)
      mean.push_back(entry.mean_vector(i));
    c["mean_vector"] = mean;
    if (entry.composition.cluster >= 0) {
      c["icd_top20_all"] = icd_entries_to_json(entry.icd_all);
      c["icd_top20_repeat90"] = icd_entries_to_json(entry.icd_repeat);
    }
    clusters.push_back(std::move(c));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

inline nlohmann::ordered_json summary_to_json(
    const std::vector<SummaryRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["age_group"] = to_string(row.age_group);
    r["algorithm"] = to_string(row.algorithm);
    r["available"] = row.available;
    if (row.available) {
      r["pca"] = row.pca;
      if (row.epsilon) r["epsilon"] = *row.epsilon;
      if (row.n_clusters) r["n_clusters"] = *row.n_clusters;
      if (row.metrics_valid) {
        r["composite"] = row.composite;
        r["silhouette"] = row.silhouette;
      }
    }
    arr.push_back(std::move(r));
  }
  return arr;
}

inline void write_summary_markdown(std::ostream& out,
                                   const std::vector<SummaryRow>& rows) {
  out << "| Age group | Algorithm | PCA | ED/NC | CS | SC |\n"
      << "|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    out << "| " << to_string(row.age_group) << " | "
        << to_string(row.algorithm) << " | ";
    if (!row.available) {
      out << "- | - | - | - |\n";
      continue;
    }
    out << row.pca << " | "
        << (row.epsilon ? format_double(*row.epsilon)
                        : std::to_string(*row.n_clusters))
        << " | ";
    if (row.metrics_valid)
      out << format_double(row.composite) << " | "
          << format_double(row.silhouette) << " |\n";
    else
      out << "- | - |\n";
  }
}

inline void write_cluster_report_markdown(std::ostream& out,
                                          const ClusterReport& report) {
  out << "### " << to_string(report.age_group) << " / "
      << to_string(report.algorithm) << " (PCA " << report.combo.pca_components;
  if (report.combo.epsilon)
    out << ", epsilon " << format_double(*report.combo.epsilon);
  if (report.combo.n_clusters) out << ", k " << *report.combo.n_clusters;
  out << ")\n\n";
  out << "| Cluster | Dominant | Fraction | Count |\n|---|---|---|---|\n";
  for (const auto& entry : report.clusters) {
    if (entry.composition.cluster < 0)
      out << "| NOISE | ";
    else
      out << "| " << entry.composition.cluster << " | ";
    out << to_string(entry.composition.dominant) << " | "
        << format_double(entry.composition.fraction) << " | "
        << entry.composition.count << " |\n";
  }
  out << "\n";
  for (const auto& entry : report.clusters) {
    if (entry.composition.cluster < 0 || entry.icd_repeat.empty()) continue;
    out << "Top codes (>=90-day repeats), cluster "
        << entry.composition.cluster << ", "
        << to_string(entry.composition.dominant) << ":";
    const std::size_t show = std::min<std::size_t>(5, entry.icd_repeat.size());
    for (std::size_t i = 0; i < show; ++i)
      out << ' ' << entry.icd_repeat[i].code << " ("
          << entry.icd_repeat[i].patients << ")";
    out << "\n\n";
  }
}

}  // namespace ieiclust
