#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ieiclust {

// The five lymphocyte panel tests, in the fixed vector-component order
// (CD3, CD3CD8, CD3CD4, CD19, CD16CD56). All per-test arrays in the code
// are indexed by this order.
enum class TestCode : int {
  CD3 = 0,
  CD3CD8 = 1,
  CD3CD4 = 2,
  CD19 = 3,
  CD16CD56 = 4,
};

inline constexpr int kNumLabs = 5;

inline constexpr std::array<const char*, kNumLabs> kTestCodeNames = {
    "CD3", "CD3CD8", "CD3CD4", "CD19", "CD16CD56"};

inline const char* to_string(TestCode t) {
  return kTestCodeNames[static_cast<int>(t)];
}

inline std::optional<TestCode> parse_test_code(std::string_view s) {
  for (int i = 0; i < kNumLabs; ++i)
    if (s == kTestCodeNames[i]) return static_cast<TestCode>(i);
  return std::nullopt;
}

// The seven IEI cohort labels. Declaration order is the canonical tie-break
// order used by modal-disease reporting.
enum class DiseaseLabel : int {
  CGD = 0,
  COMB = 1,
  CVID = 2,
  DGS = 3,
  LAD = 4,
  AGAMMA = 5,
  WAS = 6,
};

inline constexpr int kNumDiseases = 7;

inline constexpr std::array<const char*, kNumDiseases> kDiseaseNames = {
    "CGD", "COMB", "CVID", "DGS", "LAD", "AGAMMA", "WAS"};

inline const char* to_string(DiseaseLabel d) {
  return kDiseaseNames[static_cast<int>(d)];
}

inline std::optional<DiseaseLabel> parse_disease_label(std::string_view s) {
  for (int i = 0; i < kNumDiseases; ++i)
    if (s == kDiseaseNames[i]) return static_cast<DiseaseLabel>(i);
  return std::nullopt;
}

// Age buckets in days: [0,365) [365,730) [730,1825) [1825,3650) [3650,5840)
// [5840,inf). Upper bound is exclusive.
enum class AgeGroup : int {
  Y0_1 = 0,
  Y1_2 = 1,
  Y2_5 = 2,
  Y5_10 = 3,
  Y10_16 = 4,
  Y16_PLUS = 5,
};

inline constexpr int kNumAgeGroups = 6;

inline constexpr std::array<std::int64_t, kNumAgeGroups> kAgeGroupLowerDays = {
    0, 365, 730, 1825, 3650, 5840};

inline constexpr std::array<const char*, kNumAgeGroups> kAgeGroupNames = {
    "0-1y", "1-2y", "2-5y", "5-10y", "10-16y", "16plus"};

// Filesystem-safe variant used in output file names.
inline constexpr std::array<const char*, kNumAgeGroups> kAgeGroupFileTags = {
    "0_1y", "1_2y", "2_5y", "5_10y", "10_16y", "16plus"};

inline const char* to_string(AgeGroup g) {
  return kAgeGroupNames[static_cast<int>(g)];
}

inline const char* file_tag(AgeGroup g) {
  return kAgeGroupFileTags[static_cast<int>(g)];
}

inline std::optional<AgeGroup> parse_age_group(std::string_view s) {
  for (int i = 0; i < kNumAgeGroups; ++i)
    if (s == kAgeGroupNames[i]) return static_cast<AgeGroup>(i);
  return std::nullopt;
}

inline AgeGroup age_group_for_days(std::int64_t age_days) {
  if (age_days < 0) throw std::invalid_argument("age_days must be >= 0");
  for (int i = kNumAgeGroups - 1; i >= 0; --i)
    if (age_days >= kAgeGroupLowerDays[i]) return static_cast<AgeGroup>(i);
  return AgeGroup::Y0_1;
}

// One timestamped lab measurement with the collecting site's reference range.
struct LabObservation {
  std::string patient_id;
  std::string encounter_id;
  std::int64_t collection_time = 0;  // seconds since Unix epoch, UTC
  TestCode test_code = TestCode::CD3;
  double value_abs = 0.0;  // cells/uL
  double ref_low = 0.0;
  double ref_high = 0.0;
  std::string site_id;
  std::int64_t age_at_collection_days = 0;
};

struct DiagnosisEvent {
  std::string patient_id;
  std::string icd_code;
  std::int64_t recorded_day = 0;  // days since Unix epoch
};

// Raw lab payload kept per test inside an encounter sample.
struct LabValue {
  double value_abs = 0.0;
  double ref_low = 0.0;
  double ref_high = 0.0;
};

// One hospital visit flattened to the first occurrence of each test.
struct EncounterSample {
  std::string patient_id;
  std::string encounter_id;
  DiseaseLabel disease = DiseaseLabel::CGD;
  std::int64_t age_days = 0;  // min age over the kept observations
  std::array<std::optional<LabValue>, kNumLabs> labs;
};

// Normalized 5-dimensional representation of one encounter sample.
struct LabVector {
  std::array<std::optional<double>, kNumLabs> components;
  DiseaseLabel disease = DiseaseLabel::CGD;
  AgeGroup age_group = AgeGroup::Y0_1;
  std::string patient_id;
  std::string encounter_id;
};

struct VectorAssemblyConfig {
  std::array<double, kNumLabs> weights = {1.0, 1.0, 1.0, 1.0, 1.0};
  bool unit_normalize = false;
};

}  // namespace ieiclust
