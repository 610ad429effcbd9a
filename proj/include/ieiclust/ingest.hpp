#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ieiclust/csv.hpp"
#include "ieiclust/isotime.hpp"
#include "ieiclust/types.hpp"

#include <nlohmann/json.hpp>

namespace ieiclust {

struct ParseError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct ParseMode {
  bool strict = false;
};

struct LabParseResult {
  std::vector<LabObservation> observations;
  std::vector<ParseError> errors;
};

struct DiagnosisParseResult {
  std::vector<DiagnosisEvent> events;
  std::vector<ParseError> errors;
};

// Thrown in strict mode on the first malformed row.
class ParseException : public std::runtime_error {
 public:
  ParseException(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline void report(std::vector<ParseError>& errors, const ParseMode& mode,
                   std::size_t line, std::string message) {
  if (mode.strict) throw ParseException(line, message);
  errors.push_back({line, std::move(message)});
}

}  // namespace detail

inline constexpr const char* kLabsCsvHeader =
    "patient_id,encounter_id,collection_time,test_code,value_abs,ref_low,"
    "ref_high,site_id,age_at_collection_days";

inline constexpr const char* kDiagnosesCsvHeader =
    "patient_id,icd_code,recorded_date";

// Parses labs.csv. Malformed rows are collected as record-level errors in
// lenient mode and thrown in strict mode. Row order is preserved.
inline LabParseResult parse_lab_records(std::istream& in,
                                        ParseMode mode = {}) {
  LabParseResult result;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!saw_header) {
      saw_header = true;
      std::string want = kLabsCsvHeader;
      std::string got = line;
      if (!got.empty() && got.back() == '\r') got.pop_back();
      if (got != want)
        detail::report(result.errors, mode, lineno,
                       "unexpected labs.csv header: " + got);
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 9) {
      detail::report(result.errors, mode, lineno,
                     "expected 9 fields, got " + std::to_string(fields.size()));
      continue;
    }
    LabObservation obs;
    obs.patient_id = std::string(fields[0]);
    obs.encounter_id = std::string(fields[1]);
    if (obs.patient_id.empty() || obs.encounter_id.empty()) {
      detail::report(result.errors, mode, lineno,
                     "patient_id and encounter_id must be non-empty");
      continue;
    }
    const auto ts = parse_iso_timestamp(fields[2]);
    if (!ts) {
      detail::report(result.errors, mode, lineno,
                     "bad collection_time: " + std::string(fields[2]));
      continue;
    }
    obs.collection_time = *ts;
    const auto code = parse_test_code(fields[3]);
    if (!code) {
      detail::report(result.errors, mode, lineno,
                     "unknown test_code: " + std::string(fields[3]));
      continue;
    }
    obs.test_code = *code;
    const auto value = parse_double(fields[4]);
    const auto lo = parse_double(fields[5]);
    const auto hi = parse_double(fields[6]);
    if (!value || !lo || !hi) {
      detail::report(result.errors, mode, lineno, "bad numeric field");
      continue;
    }
    if (*value < 0.0) {
      detail::report(result.errors, mode, lineno,
                     "value_abs must be >= 0, got " + format_double(*value));
      continue;
    }
    if (!(*hi > *lo)) {
      detail::report(result.errors, mode, lineno,
                     "ref_high must exceed ref_low (ref_low=" +
                         format_double(*lo) +
                         ", ref_high=" + format_double(*hi) + ")");
      continue;
    }
    obs.value_abs = *value;
    obs.ref_low = *lo;
    obs.ref_high = *hi;
    obs.site_id = std::string(fields[7]);
    const auto age = parse_int(fields[8]);
    if (!age || *age < 0) {
      detail::report(result.errors, mode, lineno,
                     "bad age_at_collection_days: " + std::string(fields[8]));
      continue;
    }
    obs.age_at_collection_days = *age;
    result.observations.push_back(std::move(obs));
  }
  return result;
}

// Parses diagnoses.csv (patient_id,icd_code,recorded_date).
inline DiagnosisParseResult parse_diagnosis_records(std::istream& in,
                                                    ParseMode mode = {}) {
  DiagnosisParseResult result;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!saw_header) {
      saw_header = true;
      std::string got = line;
      if (!got.empty() && got.back() == '\r') got.pop_back();
      if (got != kDiagnosesCsvHeader)
        detail::report(result.errors, mode, lineno,
                       "unexpected diagnoses.csv header: " + got);
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      detail::report(result.errors, mode, lineno,
                     "expected 3 fields, got " + std::to_string(fields.size()));
      continue;
    }
    DiagnosisEvent ev;
    ev.patient_id = std::string(fields[0]);
    ev.icd_code = std::string(fields[1]);
    if (ev.patient_id.empty() || ev.icd_code.empty()) {
      detail::report(result.errors, mode, lineno,
                     "patient_id and icd_code must be non-empty");
      continue;
    }
    const auto day = parse_iso_date(fields[2]);
    if (!day) {
      detail::report(result.errors, mode, lineno,
                     "bad recorded_date: " + std::string(fields[2]));
      continue;
    }
    ev.recorded_day = *day;
    result.events.push_back(std::move(ev));
  }
  return result;
}

using DiseaseCodeMap = std::map<DiseaseLabel, std::set<std::string>>;

// disease_codes.json: object mapping each of the seven labels to an array of
// ICD code strings.
inline DiseaseCodeMap parse_disease_codes(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_object())
    throw std::runtime_error("disease_codes: expected a JSON object");
  DiseaseCodeMap map;
  for (const auto& [key, value] : j.items()) {
    const auto label = parse_disease_label(key);
    if (!label)
      throw std::runtime_error("disease_codes: unknown disease label: " + key);
    std::set<std::string>& codes = map[*label];
    if (!value.is_array())
      throw std::runtime_error("disease_codes: value for " + key +
                               " must be an array");
    for (const auto& c : value) codes.insert(c.get<std::string>());
  }
  for (int i = 0; i < kNumDiseases; ++i) {
    const auto d = static_cast<DiseaseLabel>(i);
    if (!map.count(d) || map.at(d).empty())
      throw std::runtime_error(std::string("disease_codes: missing codes for ") +
                               to_string(d));
  }
  return map;
}

inline std::set<std::string> all_defining_codes(const DiseaseCodeMap& map) {
  std::set<std::string> all;
  for (const auto& [label, codes] : map) all.insert(codes.begin(), codes.end());
  return all;
}

inline constexpr std::int64_t kMinCodeGapDays = 90;

// Cohort rule: a patient is selected iff exactly one disease has two codes
// recorded >= 90 days apart (inclusive) and no competing disease matches even
// a single code. Result is keyed by patient_id, so it is independent of the
// order of the diagnosis events.
inline std::map<std::string, DiseaseLabel> select_cohort(
    const std::vector<DiagnosisEvent>& diagnoses,
    const DiseaseCodeMap& disease_codes) {
  std::unordered_map<std::string, DiseaseLabel> code_to_disease;
  for (const auto& [label, codes] : disease_codes)
    for (const auto& c : codes) code_to_disease.emplace(c, label);

  struct PerDisease {
    std::int64_t min_day = 0;
    std::int64_t max_day = 0;
    bool any = false;
  };
  std::map<std::string, std::array<PerDisease, kNumDiseases>> per_patient;
  for (const auto& ev : diagnoses) {
    const auto it = code_to_disease.find(ev.icd_code);
    if (it == code_to_disease.end()) continue;
    auto& slot = per_patient[ev.patient_id][static_cast<int>(it->second)];
    if (!slot.any) {
      slot.min_day = slot.max_day = ev.recorded_day;
      slot.any = true;
    } else {
      slot.min_day = std::min(slot.min_day, ev.recorded_day);
      slot.max_day = std::max(slot.max_day, ev.recorded_day);
    }
  }

  std::map<std::string, DiseaseLabel> cohort;
  for (const auto& [patient, slots] : per_patient) {
    int matched = 0;
    int qualified = 0;
    DiseaseLabel qualifying = DiseaseLabel::CGD;
    for (int i = 0; i < kNumDiseases; ++i) {
      if (!slots[i].any) continue;
      ++matched;
      if (slots[i].max_day - slots[i].min_day >= kMinCodeGapDays) {
        ++qualified;
        qualifying = static_cast<DiseaseLabel>(i);
      }
    }
    if (qualified == 1 && matched == 1) cohort.emplace(patient, qualifying);
  }
  return cohort;
}

// Flattens observations into one sample per (patient, encounter), keeping for
// each test the observation with the earliest collection_time (ties broken by
// input row index). Patients outside the cohort are dropped. Sample order
// follows the first appearance of each encounter in the input.
inline std::vector<EncounterSample> flatten_encounters(
    const std::vector<LabObservation>& observations,
    const std::map<std::string, DiseaseLabel>& cohort) {
  struct Kept {
    const LabObservation* obs[kNumLabs] = {nullptr, nullptr, nullptr, nullptr,
                                           nullptr};
    std::size_t row[kNumLabs] = {0, 0, 0, 0, 0};
    DiseaseLabel disease = DiseaseLabel::CGD;
  };
  std::map<std::pair<std::string, std::string>, Kept> by_encounter;
  std::vector<const std::pair<const std::pair<std::string, std::string>, Kept>*>
      order;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    const auto cohort_it = cohort.find(obs.patient_id);
    if (cohort_it == cohort.end()) continue;
    const auto key = std::make_pair(obs.patient_id, obs.encounter_id);
    auto [it, inserted] = by_encounter.try_emplace(key);
    if (inserted) {
      it->second.disease = cohort_it->second;
      order.push_back(&*it);
    }
    const int c = static_cast<int>(obs.test_code);
    Kept& kept = it->second;
    if (kept.obs[c] == nullptr ||
        obs.collection_time < kept.obs[c]->collection_time ||
        (obs.collection_time == kept.obs[c]->collection_time &&
         i < kept.row[c])) {
      kept.obs[c] = &obs;
      kept.row[c] = i;
    }
  }

  std::vector<EncounterSample> samples;
  samples.reserve(order.size());
  for (const auto* entry : order) {
    const Kept& kept = entry->second;
    EncounterSample s;
    s.patient_id = entry->first.first;
    s.encounter_id = entry->first.second;
    s.disease = kept.disease;
    bool any = false;
    std::int64_t min_age = 0;
    for (int c = 0; c < kNumLabs; ++c) {
      if (kept.obs[c] == nullptr) continue;
      const auto& o = *kept.obs[c];
      s.labs[c] = LabValue{o.value_abs, o.ref_low, o.ref_high};
      if (!any || o.age_at_collection_days < min_age)
        min_age = o.age_at_collection_days;
      any = true;
    }
    s.age_days = min_age;
    if (any) samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace ieiclust
