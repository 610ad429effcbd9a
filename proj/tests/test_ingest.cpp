#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "ieiclust/ingest.hpp"
#include "oracles.hpp"

using namespace ieiclust;

namespace {

DiseaseCodeMap demo_codes() {
  DiseaseCodeMap map;
  map[DiseaseLabel::CGD] = {"D71"};
  map[DiseaseLabel::COMB] = {"D81.9"};
  map[DiseaseLabel::CVID] = {"D83.9"};
  map[DiseaseLabel::DGS] = {"D82.1"};
  map[DiseaseLabel::LAD] = {"D72.0"};
  map[DiseaseLabel::AGAMMA] = {"D80.0"};
  map[DiseaseLabel::WAS] = {"D82.0"};
  return map;
}

DiagnosisEvent ev(const std::string& p, const std::string& code,
                  const std::string& date) {
  return {p, code, *parse_iso_date(date)};
}

}  // namespace

TEST_CASE("labs csv: well-formed row parses") {
  std::istringstream in(
      "patient_id,encounter_id,collection_time,test_code,value_abs,ref_low,"
      "ref_high,site_id,age_at_collection_days\n"
      "P1,E1,2020-05-01T10:30:00Z,CD3,1250.5,1000,3000,S1,400\n");
  const auto result = parse_lab_records(in);
  REQUIRE(result.errors.empty());
  REQUIRE(result.observations.size() == 1);
  const auto& o = result.observations[0];
  CHECK(o.patient_id == "P1");
  CHECK(o.encounter_id == "E1");
  CHECK(o.test_code == TestCode::CD3);
  CHECK(o.value_abs == 1250.5);
  CHECK(o.ref_low == 1000.0);
  CHECK(o.ref_high == 3000.0);
  CHECK(o.site_id == "S1");
  CHECK(o.age_at_collection_days == 400);
  CHECK(o.collection_time == *parse_iso_timestamp("2020-05-01T10:30:00Z"));
}

TEST_CASE("labs csv: inverted reference range rejected with both bounds") {
  std::istringstream in(
      "patient_id,encounter_id,collection_time,test_code,value_abs,ref_low,"
      "ref_high,site_id,age_at_collection_days\n"
      "P1,E1,2020-05-01T10:30:00Z,CD3,1250,3000,1000,S1,400\n");
  const auto result = parse_lab_records(in);
  REQUIRE(result.observations.empty());
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].line == 2);
  CHECK(result.errors[0].message.find("ref_high") != std::string::npos);
  CHECK(result.errors[0].message.find("3000") != std::string::npos);
  CHECK(result.errors[0].message.find("1000") != std::string::npos);
}

TEST_CASE("labs csv: lenient collects, strict throws") {
  const std::string text =
      "patient_id,encounter_id,collection_time,test_code,value_abs,ref_low,"
      "ref_high,site_id,age_at_collection_days\n"
      "P1,E1,2020-05-01T10:30:00Z,CD3,1250,1000,3000,S1,400\n"
      "P1,E1,2020-05-01T10:31:00Z,CD99,900,300,1300,S1,400\n"
      "P1,E1,2020-05-01T10:32:00Z,CD19,800,200,1400,S1,400\n";
  {
    std::istringstream in(text);
    const auto result = parse_lab_records(in);
    CHECK(result.observations.size() == 2);
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].message.find("CD99") != std::string::npos);
  }
  {
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_lab_records(in, ParseMode{true}), ParseException);
  }
}

TEST_CASE("diagnoses csv parses and rejects bad dates") {
  std::istringstream in(
      "patient_id,icd_code,recorded_date\n"
      "P1,D82.1,2020-01-01\n"
      "P1,D82.1,not-a-date\n");
  const auto result = parse_diagnosis_records(in);
  REQUIRE(result.events.size() == 1);
  REQUIRE(result.errors.size() == 1);
  CHECK(result.events[0].icd_code == "D82.1");
}

TEST_CASE("cohort: 90-day pair included, 89-day pair excluded") {
  const auto codes = demo_codes();
  {
    const std::vector<DiagnosisEvent> d = {ev("P1", "D82.1", "2020-01-01"),
                                           ev("P1", "D82.1", "2020-03-31")};
    const auto cohort = select_cohort(d, codes);
    REQUIRE(cohort.size() == 1);
    CHECK(cohort.at("P1") == DiseaseLabel::DGS);
  }
  {
    const std::vector<DiagnosisEvent> d = {ev("P1", "D82.1", "2020-01-01"),
                                           ev("P1", "D82.1", "2020-03-30")};
    CHECK(select_cohort(d, codes).empty());
  }
}

TEST_CASE("cohort: single competing code excludes the patient") {
  const auto codes = demo_codes();
  const std::vector<DiagnosisEvent> d = {ev("P1", "D83.9", "2020-01-01"),
                                         ev("P1", "D83.9", "2020-06-01"),
                                         ev("P1", "D71", "2020-02-15")};
  CHECK(select_cohort(d, codes).empty());
}

TEST_CASE("cohort: empty diagnosis list yields empty cohort") {
  CHECK(select_cohort({}, demo_codes()).empty());
}

TEST_CASE("cohort selection is order independent and matches the oracle") {
  const auto codes = demo_codes();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<DiagnosisEvent> events;
    const int n_patients = 1 + int(rng() % 8);
    for (int p = 0; p < n_patients; ++p) {
      const int n_events = 1 + int(rng() % 6);
      for (int e = 0; e < n_events; ++e) {
        DiagnosisEvent d;
        d.patient_id = "P" + std::to_string(p);
        const int disease = int(rng() % kNumDiseases);
        d.icd_code = *codes.at(static_cast<DiseaseLabel>(disease)).begin();
        d.recorded_day = 18000 + int(rng() % 250);
        events.push_back(d);
      }
    }
    const auto cohort = select_cohort(events, codes);

    std::vector<std::tuple<std::string, std::string, long long>> tuples;
    for (const auto& d : events)
      tuples.emplace_back(d.patient_id, d.icd_code, d.recorded_day);
    std::map<int, std::set<std::string>> by_disease;
    for (const auto& [label, cs] : codes)
      by_disease[static_cast<int>(label)] = cs;
    const auto expected = oracles::cohort_reference(tuples, by_disease);

    REQUIRE(cohort.size() == expected.size());
    for (const auto& [p, label] : cohort)
      CHECK(static_cast<int>(label) == expected.at(p));

    std::shuffle(events.begin(), events.end(), rng);
    const auto shuffled = select_cohort(events, codes);
    CHECK(shuffled == cohort);
  }
}

namespace {

LabObservation obs(const std::string& p, const std::string& e, TestCode code,
                   std::int64_t t, double value, std::int64_t age = 100) {
  LabObservation o;
  o.patient_id = p;
  o.encounter_id = e;
  o.test_code = code;
  o.collection_time = t;
  o.value_abs = value;
  o.ref_low = 100.0;
  o.ref_high = 900.0;
  o.site_id = "S1";
  o.age_at_collection_days = age;
  return o;
}

}  // namespace

TEST_CASE("flatten: first occurrence per test wins") {
  std::map<std::string, DiseaseLabel> cohort{{"P1", DiseaseLabel::DGS}};
  const std::vector<LabObservation> observations = {
      obs("P1", "E1", TestCode::CD3, 200, 500.0, 120),
      obs("P1", "E1", TestCode::CD3, 100, 400.0, 110),
      obs("P1", "E1", TestCode::CD3, 100, 300.0, 105),  // tie: earlier row? no, later row index
  };
  const auto samples = flatten_encounters(observations, cohort);
  REQUIRE(samples.size() == 1);
  // t=100 beats t=200; among the two t=100 rows the earlier input row wins.
  CHECK(samples[0].labs[int(TestCode::CD3)]->value_abs == 400.0);
  // Encounter age is the minimum over kept observations only.
  CHECK(samples[0].age_days == 110);
}

TEST_CASE("flatten: single present lab leaves the others missing") {
  std::map<std::string, DiseaseLabel> cohort{{"P1", DiseaseLabel::CVID}};
  const std::vector<LabObservation> observations = {
      obs("P1", "E1", TestCode::CD19, 50, 700.0)};
  const auto samples = flatten_encounters(observations, cohort);
  REQUIRE(samples.size() == 1);
  int present = 0;
  for (int c = 0; c < kNumLabs; ++c) present += samples[0].labs[c].has_value();
  CHECK(present == 1);
  CHECK(samples[0].labs[int(TestCode::CD19)].has_value());
}

TEST_CASE("flatten: two encounters produce two samples; non-cohort dropped") {
  std::map<std::string, DiseaseLabel> cohort{{"P1", DiseaseLabel::WAS}};
  const std::vector<LabObservation> observations = {
      obs("P1", "E1", TestCode::CD3, 10, 500.0),
      obs("P1", "E2", TestCode::CD3, 20, 600.0),
      obs("P2", "E9", TestCode::CD3, 30, 700.0),
  };
  const auto samples = flatten_encounters(observations, cohort);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].encounter_id == "E1");
  CHECK(samples[1].encounter_id == "E2");
  for (const auto& s : samples) CHECK(s.disease == DiseaseLabel::WAS);
}

TEST_CASE("flatten is idempotent under duplication of kept rows") {
  std::map<std::string, DiseaseLabel> cohort{{"P1", DiseaseLabel::DGS}};
  std::vector<LabObservation> observations = {
      obs("P1", "E1", TestCode::CD3, 100, 400.0),
      obs("P1", "E1", TestCode::CD19, 150, 800.0),
  };
  const auto before = flatten_encounters(observations, cohort);
  observations.push_back(observations[0]);
  observations.push_back(observations[1]);
  const auto after = flatten_encounters(observations, cohort);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].encounter_id == after[i].encounter_id);
    CHECK(before[i].age_days == after[i].age_days);
    for (int c = 0; c < kNumLabs; ++c) {
      REQUIRE(before[i].labs[c].has_value() == after[i].labs[c].has_value());
      if (before[i].labs[c])
        CHECK(before[i].labs[c]->value_abs == after[i].labs[c]->value_abs);
    }
  }
}

TEST_CASE("flatten: sample count equals distinct cohort encounters") {
  std::map<std::string, DiseaseLabel> cohort{{"A", DiseaseLabel::CGD},
                                             {"B", DiseaseLabel::LAD}};
  std::mt19937_64 rng(11);
  std::vector<LabObservation> observations;
  std::set<std::pair<std::string, std::string>> expected;
  for (int i = 0; i < 200; ++i) {
    const std::string p = rng() % 3 == 0 ? "C" : (rng() % 2 ? "A" : "B");
    const std::string e = "E" + std::to_string(rng() % 7);
    observations.push_back(obs(p, e, static_cast<TestCode>(rng() % kNumLabs),
                               int64_t(rng() % 1000), 500.0));
    if (p != "C") expected.insert({p, e});
  }
  CHECK(flatten_encounters(observations, cohort).size() == expected.size());
}

TEST_CASE("disease codes json parses and demands all seven diseases") {
  const std::string good = R"({
    "CGD": ["D71"], "COMB": ["D81.9"], "CVID": ["D83.9"], "DGS": ["D82.1"],
    "LAD": ["D72.0"], "AGAMMA": ["D80.0"], "WAS": ["D82.0"]
  })";
  const auto map = parse_disease_codes(good);
  CHECK(map.at(DiseaseLabel::DGS).count("D82.1") == 1);
  CHECK(all_defining_codes(map).size() == 7);
  CHECK_THROWS(parse_disease_codes(R"({"CGD": ["D71"]})"));
  CHECK_THROWS(parse_disease_codes(R"({"BAD": ["X"]})"));
}
