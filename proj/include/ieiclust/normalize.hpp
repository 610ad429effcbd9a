#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ieiclust/csv.hpp"
#include "ieiclust/types.hpp"

namespace ieiclust {

// (value - ref_low) / (ref_high - ref_low). Deliberately not clamped:
// values outside the reference range land outside [0,1].
inline double normalize_lab(double value_abs, double ref_low,
                            double ref_high) {
  if (!(ref_high > ref_low))
    throw std::domain_error("normalize_lab: ref_high (" +
                            format_double(ref_high) +
                            ") must exceed ref_low (" + format_double(ref_low) +
                            ")");
  return (value_abs - ref_low) / (ref_high - ref_low);
}

inline double invert_normalized_lab(double normalized, double ref_low,
                                    double ref_high) {
  if (!(ref_high > ref_low))
    throw std::domain_error("invert_normalized_lab: ref_high must exceed ref_low");
  return ref_low + normalized * (ref_high - ref_low);
}

inline LabVector assemble_vector(const EncounterSample& sample,
                                 const VectorAssemblyConfig& config = {}) {
  for (double w : config.weights)
    if (!(w > 0.0))
      throw std::invalid_argument("assembly weights must be positive");
  LabVector v;
  v.disease = sample.disease;
  v.age_group = age_group_for_days(sample.age_days);
  v.patient_id = sample.patient_id;
  v.encounter_id = sample.encounter_id;
  bool all_present = true;
  for (int c = 0; c < kNumLabs; ++c) {
    if (sample.labs[c]) {
      const auto& lab = *sample.labs[c];
      v.components[c] = config.weights[c] *
                        normalize_lab(lab.value_abs, lab.ref_low, lab.ref_high);
    } else {
      all_present = false;
    }
  }
  if (config.unit_normalize && all_present) {
    double sq = 0.0;
    for (int c = 0; c < kNumLabs; ++c) sq += *v.components[c] * *v.components[c];
    const double mag = std::sqrt(sq);
    if (mag > 0.0)
      for (int c = 0; c < kNumLabs; ++c) *v.components[c] /= mag;
  }
  return v;
}

struct AgePartition {
  std::array<std::vector<LabVector>, kNumAgeGroups> groups;

  const std::vector<LabVector>& operator[](AgeGroup g) const {
    return groups[static_cast<int>(g)];
  }
  std::vector<LabVector>& operator[](AgeGroup g) {
    return groups[static_cast<int>(g)];
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

// Buckets vectors into the six age groups, preserving input order within
// each bucket. Every vector lands in exactly one bucket.
inline AgePartition partition_by_age(const std::vector<LabVector>& vectors) {
  AgePartition partition;
  for (const auto& v : vectors)
    partition.groups[static_cast<int>(v.age_group)].push_back(v);
  return partition;
}

inline constexpr const char* kVectorsCsvHeader =
    "patient_id,encounter_id,disease,age_group,cd3,cd3cd8,cd3cd4,cd19,"
    "cd16cd56";

inline void write_vectors_csv(std::ostream& out,
                              const std::vector<LabVector>& vectors) {
  out << kVectorsCsvHeader << "\n";
  for (const auto& v : vectors) {
    out << v.patient_id << ',' << v.encounter_id << ',' << to_string(v.disease)
        << ',' << to_string(v.age_group);
    for (int c = 0; c < kNumLabs; ++c) {
      out << ',';
      if (v.components[c]) out << format_double(*v.components[c]);
    }
    out << "\n";
  }
}

inline std::vector<LabVector> read_vectors_csv(std::istream& in) {
  std::vector<LabVector> vectors;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("vectors csv: empty stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kVectorsCsvHeader)
    throw std::runtime_error("vectors csv: unexpected header: " + line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4 + kNumLabs)
      throw std::runtime_error("vectors csv line " + std::to_string(lineno) +
                               ": wrong field count");
    LabVector v;
    v.patient_id = std::string(fields[0]);
    v.encounter_id = std::string(fields[1]);
    const auto disease = parse_disease_label(fields[2]);
    const auto group = parse_age_group(fields[3]);
    if (!disease || !group)
      throw std::runtime_error("vectors csv line " + std::to_string(lineno) +
                               ": bad disease or age_group");
    v.disease = *disease;
    v.age_group = *group;
    for (int c = 0; c < kNumLabs; ++c) {
      if (fields[4 + c].empty()) continue;
      const auto value = parse_double(fields[4 + c]);
      if (!value)
        throw std::runtime_error("vectors csv line " + std::to_string(lineno) +
                                 ": bad component");
      v.components[c] = *value;
    }
    vectors.push_back(std::move(v));
  }
  return vectors;
}

}  // namespace ieiclust
