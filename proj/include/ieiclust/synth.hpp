#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ieiclust/csv.hpp"
#include "ieiclust/ingest.hpp"
#include "ieiclust/isotime.hpp"
#include "ieiclust/normalize.hpp"
#include "ieiclust/rng.hpp"
#include "ieiclust/types.hpp"

namespace ieiclust {

struct SubphenotypeSpec {
  std::string name;
  std::array<double, kNumLabs> mean{};
  std::vector<std::string> icd_signature;
  double weight = 1.0;
};

struct DiseaseSpec {
  int patients = 0;
  int encounters = 0;  // total across patients; each patient gets >= 1
  std::array<double, kNumLabs> mean{};
  Eigen::MatrixXd covariance;  // 5x5 PSD; defaults to sigma^2 I
  std::vector<SubphenotypeSpec> subphenotypes;
  std::vector<std::string> defining_codes;
  int negative_controls = 0;  // planted patients failing the 90-day rule
};

struct SiteSpec {
  std::string site_id;
  std::array<std::pair<double, double>, kNumLabs> ranges;  // (low, high)
};

struct CohortSpec {
  std::array<DiseaseSpec, kNumDiseases> diseases;
  std::array<double, kNumLabs> missingness{};  // per-lab drop probability
  std::array<double, kNumAgeGroups> age_weights{};
  std::vector<SiteSpec> sites;
  std::vector<std::string> noise_codes;
  double duplicate_lab_rate = 0.1;  // later repeat of a test in an encounter
  double signature_rate = 0.95;     // chance a signature code is charted
  std::uint64_t seed = 0;
};

inline void validate_spec(const CohortSpec& spec) {
  for (int d = 0; d < kNumDiseases; ++d) {
    const auto& ds = spec.diseases[d];
    if (ds.patients < 0 || ds.encounters < 0 || ds.negative_controls < 0)
      throw std::invalid_argument("cohort spec: negative counts");
    if (ds.patients > 0 && ds.encounters < ds.patients)
      throw std::invalid_argument(
          "cohort spec: encounters must be >= patients for " +
          std::string(kDiseaseNames[d]));
    if (ds.patients > 0 && ds.defining_codes.empty())
      throw std::invalid_argument("cohort spec: no defining codes for " +
                                  std::string(kDiseaseNames[d]));
    if (ds.covariance.rows() != kNumLabs || ds.covariance.cols() != kNumLabs)
      throw std::invalid_argument("cohort spec: covariance must be 5x5");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ds.covariance);
    if (es.eigenvalues().minCoeff() < -1e-9)
      throw std::invalid_argument(
          "cohort spec: covariance must be positive semidefinite");
  }
  for (double m : spec.missingness)
    if (m < 0.0 || m >= 1.0)
      throw std::invalid_argument("cohort spec: missingness must be in [0,1)");
  double age_total = 0.0;
  for (double w : spec.age_weights) {
    if (w < 0.0) throw std::invalid_argument("cohort spec: negative age weight");
    age_total += w;
  }
  if (age_total <= 0.0)
    throw std::invalid_argument("cohort spec: age weights sum to zero");
  if (spec.sites.empty())
    throw std::invalid_argument("cohort spec: at least one site required");
  for (const auto& site : spec.sites)
    for (const auto& [lo, hi] : site.ranges)
      if (!(hi > lo))
        throw std::invalid_argument("cohort spec: ref_high must exceed ref_low");
}

struct GeneratedCohort {
  std::string labs_csv;
  std::string diagnoses_csv;
  std::string ground_truth_csv;
  DiseaseCodeMap disease_codes;
  int total_patients = 0;   // intended cohort members (excl. controls)
  int total_encounters = 0; // encounters generated for cohort members
};

namespace detail {

class GaussianSampler {
 public:
  GaussianSampler(const std::array<double, kNumLabs>& mean,
                  const Eigen::MatrixXd& covariance) {
    for (int i = 0; i < kNumLabs; ++i) mean_(i) = mean[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    transform_ = es.eigenvectors() * scale.asDiagonal();
  }

  Eigen::Matrix<double, kNumLabs, 1> sample(Rng& rng) const {
    Eigen::Matrix<double, kNumLabs, 1> z;
    for (int i = 0; i < kNumLabs; ++i) z(i) = rng.normal();
    return mean_ + transform_ * z;
  }

 private:
  Eigen::Matrix<double, kNumLabs, 1> mean_;
  Eigen::MatrixXd transform_;
};

inline int pick_weighted(const double* weights, int count, Rng& rng) {
  double total = 0.0;
  for (int i = 0; i < count; ++i) total += weights[i];
  const double target = rng.uniform() * total;
  double cum = 0.0;
  for (int i = 0; i < count; ++i) {
    cum += weights[i];
    if (cum >= target) return i;
  }
  return count - 1;
}

inline std::int64_t age_days_for_group(int group, Rng& rng) {
  const std::int64_t lo = kAgeGroupLowerDays[group];
  const std::int64_t hi = group + 1 < kNumAgeGroups
                              ? kAgeGroupLowerDays[group + 1]
                              : kAgeGroupLowerDays[group] + 20 * 365;
  return lo + static_cast<std::int64_t>(rng.uniform_index(hi - lo));
}

}  // namespace detail

// Generates labs.csv / diagnoses.csv / ground_truth.csv with planted disease
// archetypes. Lab values are drawn in normalized space and mapped to absolute
// values through each site's reference range, so ingestion + normalization
// recovers the planted distributions. Cohort members get two defining codes
// at least 90 days apart; negative controls get a pair under 90 days.
inline GeneratedCohort generate_cohort(const CohortSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);

  std::ostringstream labs, diagnoses, truth;
  labs << kLabsCsvHeader << "\n";
  diagnoses << kDiagnosesCsvHeader << "\n";
  truth << "patient_id,encounter_id,disease,subphenotype\n";

  GeneratedCohort out;
  for (int d = 0; d < kNumDiseases; ++d)
    for (const auto& code : spec.diseases[d].defining_codes)
      out.disease_codes[static_cast<DiseaseLabel>(d)].insert(code);

  const std::int64_t epoch_day = days_from_civil(2018, 1, 1);
  int global_patient = 0;

  for (int d = 0; d < kNumDiseases; ++d) {
    const auto& ds = spec.diseases[d];
    if (ds.patients == 0 && ds.negative_controls == 0) continue;
    const char* disease_name = kDiseaseNames[d];

    detail::GaussianSampler archetype(ds.mean, ds.covariance);
    std::vector<detail::GaussianSampler> subtype_samplers;
    std::vector<double> subtype_weights;
    for (const auto& sub : ds.subphenotypes) {
      subtype_samplers.emplace_back(sub.mean, ds.covariance);
      subtype_weights.push_back(sub.weight);
    }

    const int total_patients = ds.patients + ds.negative_controls;
    for (int p = 0; p < total_patients; ++p) {
      const bool control = p >= ds.patients;
      ++global_patient;
      char pid[64];
      std::snprintf(pid, sizeof(pid), "P%s%04d%s", disease_name, p,
                    control ? "X" : "");

      int subtype = -1;
      if (!subtype_samplers.empty())
        subtype = detail::pick_weighted(subtype_weights.data(),
                                        static_cast<int>(subtype_weights.size()),
                                        rng);
      const detail::GaussianSampler& sampler =
          subtype >= 0 ? subtype_samplers[subtype] : archetype;

      // Encounter count: spread the disease total evenly, remainder first.
      int n_encounters = 1;
      if (!control && ds.patients > 0) {
        const int base = ds.encounters / ds.patients;
        const int rem = ds.encounters % ds.patients;
        n_encounters = base + (p < rem ? 1 : 0);
      }
      if (n_encounters < 1) n_encounters = 1;

      const int age_group = detail::pick_weighted(spec.age_weights.data(),
                                                  kNumAgeGroups, rng);
      const std::int64_t age_base = detail::age_days_for_group(age_group, rng);
      const std::int64_t base_day =
          epoch_day + static_cast<std::int64_t>(rng.uniform_index(300));

      // Defining codes.
      const auto& codes = ds.defining_codes;
      const std::string& code_a =
          codes[rng.uniform_index(codes.size())];
      const std::string& code_b =
          codes[rng.uniform_index(codes.size())];
      const std::int64_t day1 =
          base_day + static_cast<std::int64_t>(rng.uniform_index(30));
      const std::int64_t gap =
          control ? 10 + static_cast<std::int64_t>(rng.uniform_index(80))
                  : kMinCodeGapDays +
                        static_cast<std::int64_t>(rng.uniform_index(120));
      diagnoses << pid << ',' << code_a << ',' << format_iso_date(day1) << "\n";
      diagnoses << pid << ',' << code_b << ',' << format_iso_date(day1 + gap)
                << "\n";

      // Subphenotype ICD signature, charted as >=90-day repeats.
      if (subtype >= 0 && !control) {
        for (const auto& code : ds.subphenotypes[subtype].icd_signature) {
          if (rng.uniform() >= spec.signature_rate) continue;
          const std::int64_t s1 =
              base_day + static_cast<std::int64_t>(rng.uniform_index(60));
          const std::int64_t s2 =
              s1 + kMinCodeGapDays +
              static_cast<std::int64_t>(rng.uniform_index(60));
          diagnoses << pid << ',' << code << ',' << format_iso_date(s1) << "\n";
          diagnoses << pid << ',' << code << ',' << format_iso_date(s2) << "\n";
        }
      }

      // Background noise codes.
      if (!spec.noise_codes.empty()) {
        const int n_noise = 2 + static_cast<int>(rng.uniform_index(5));
        for (int k = 0; k < n_noise; ++k) {
          const auto& code =
              spec.noise_codes[rng.uniform_index(spec.noise_codes.size())];
          const int events = 1 + static_cast<int>(rng.uniform_index(2));
          std::int64_t day =
              base_day + static_cast<std::int64_t>(rng.uniform_index(200));
          for (int e = 0; e < events; ++e) {
            diagnoses << pid << ',' << code << ',' << format_iso_date(day)
                      << "\n";
            day += 20 + static_cast<std::int64_t>(rng.uniform_index(100));
          }
        }
      }

      for (int e = 0; e < n_encounters; ++e) {
        char eid[80];
        std::snprintf(eid, sizeof(eid), "%s-E%02d", pid, e);
        const std::int64_t offset =
            e * 45 + static_cast<std::int64_t>(rng.uniform_index(10));
        const std::int64_t day = base_day + offset;
        const std::int64_t age_days = age_base + offset;
        const std::int64_t second_of_day = 8 * 3600 +
            static_cast<std::int64_t>(rng.uniform_index(8 * 3600));
        const auto& site = spec.sites[rng.uniform_index(spec.sites.size())];

        const auto normalized = sampler.sample(rng);
        bool any_lab = false;
        for (int c = 0; c < kNumLabs; ++c) {
          if (rng.uniform() < spec.missingness[c]) continue;
          any_lab = true;
          const auto [lo, hi] = site.ranges[c];
          const double value =
              std::max(0.0, invert_normalized_lab(normalized(c), lo, hi));
          const std::int64_t ts = day * 86400 + second_of_day + c * 60;
          labs << pid << ',' << eid << ',' << format_iso_timestamp(ts) << ','
               << kTestCodeNames[c] << ',' << format_double(value) << ','
               << format_double(lo) << ',' << format_double(hi) << ','
               << site.site_id << ',' << age_days << "\n";
          // Occasional later repeat of the same test; first-occurrence
          // flattening must ignore it.
          if (rng.uniform() < spec.duplicate_lab_rate) {
            const double repeat_value = std::max(
                0.0,
                invert_normalized_lab(normalized(c) + 0.05 * rng.normal(), lo,
                                      hi));
            labs << pid << ',' << eid << ','
                 << format_iso_timestamp(ts + 86400) << ','
                 << kTestCodeNames[c] << ',' << format_double(repeat_value)
                 << ',' << format_double(lo) << ',' << format_double(hi) << ','
                 << site.site_id << ',' << age_days + 1 << "\n";
          }
        }
        if (any_lab && !control) ++out.total_encounters;
        truth << pid << ',' << eid << ',' << disease_name << ','
              << (subtype >= 0 && !control
                      ? ds.subphenotypes[subtype].name
                      : (control ? "NEGATIVE_CONTROL" : ""))
              << "\n";
      }
      if (!control) ++out.total_patients;
    }
  }

  out.labs_csv = labs.str();
  out.diagnoses_csv = diagnoses.str();
  out.ground_truth_csv = truth.str();
  return out;
}

inline Eigen::MatrixXd isotropic_covariance(double sigma) {
  return Eigen::MatrixXd::Identity(kNumLabs, kNumLabs) * (sigma * sigma);
}

// Demo population: patient and encounter counts follow the relative sizes of
// the seven diseases in the source registry, scaled by `scale`. DGS carries
// three planted subphenotypes with distinct ICD signatures.
inline CohortSpec demo_spec(double scale = 1.0, std::uint64_t seed = 42) {
  if (scale <= 0.0) throw std::invalid_argument("demo spec: scale must be > 0");
  CohortSpec spec;
  spec.seed = seed;
  spec.missingness = {0.10, 0.18, 0.15, 0.20, 0.25};
  spec.age_weights = {0.18, 0.16, 0.22, 0.18, 0.14, 0.12};
  spec.noise_codes = {"J06.9",   "R50.9", "Z00.129", "B34.9", "R05",
                      "H66.90", "L20.9", "K59.00",  "R11.2", "J45.909"};

  const std::array<std::array<double, 2>, 3> site_jitter = {
      {{1.0, 1.0}, {0.92, 1.05}, {1.08, 0.97}}};
  const std::array<std::pair<double, double>, kNumLabs> base_ranges = {
      {{1000.0, 3000.0},
       {300.0, 1300.0},
       {500.0, 1700.0},
       {200.0, 1400.0},
       {100.0, 800.0}}};
  for (int s = 0; s < 3; ++s) {
    SiteSpec site;
    site.site_id = "S" + std::to_string(s + 1);
    for (int c = 0; c < kNumLabs; ++c) {
      const double lo = base_ranges[c].first * site_jitter[s][0];
      const double hi = base_ranges[c].second * site_jitter[s][1];
      site.ranges[c] = {lo, hi};
    }
    spec.sites.push_back(site);
  }

  struct Row {
    DiseaseLabel label;
    int patients;
    int encounters;
    std::array<double, kNumLabs> mean;
    std::string code_stem;
  };
  const std::vector<Row> rows = {
      {DiseaseLabel::CGD, 102, 314, {0.55, 0.50, 0.55, 0.50, 0.50}, "D71"},
      {DiseaseLabel::COMB, 157, 664, {0.15, 0.15, 0.20, 0.30, 0.45}, "D81"},
      {DiseaseLabel::CVID, 189, 305, {0.50, 0.45, 0.50, 0.35, 0.40}, "D83"},
      {DiseaseLabel::DGS, 753, 1237, {0.25, 0.30, 0.25, 0.60, 0.55}, "D82.1"},
      {DiseaseLabel::LAD, 9, 30, {0.80, 0.70, 0.75, 0.70, 0.60}, "D72.0"},
      {DiseaseLabel::AGAMMA, 930, 3256, {0.60, 0.55, 0.60, 0.02, 0.55},
       "D80"},
      {DiseaseLabel::WAS, 34, 138, {0.35, 0.30, 0.40, 0.45, 0.50}, "D82.0"},
  };
  for (const auto& row : rows) {
    auto& ds = spec.diseases[static_cast<int>(row.label)];
    ds.patients = std::max(1, static_cast<int>(std::lround(row.patients * scale)));
    ds.encounters =
        std::max(ds.patients,
                 static_cast<int>(std::lround(row.encounters * scale)));
    ds.mean = row.mean;
    ds.covariance = isotropic_covariance(0.08);
    ds.defining_codes = {row.code_stem, row.code_stem + ".9x"};
    ds.negative_controls = ds.patients >= 50 ? ds.patients / 50 : 0;
  }

  auto& dgs = spec.diseases[static_cast<int>(DiseaseLabel::DGS)];
  dgs.subphenotypes = {
      {"dgs_gi",
       {0.18, 0.25, 0.18, 0.62, 0.50},
       {"R63.3", "K21.9", "R13.10"},
       1.0},
      {"dgs_airway",
       {0.30, 0.36, 0.30, 0.52, 0.62},
       {"J35.3", "J06.9x", "J39.2"},
       1.0},
      {"dgs_cardiac",
       {0.34, 0.26, 0.38, 0.68, 0.46},
       {"Q21.0", "Q25.0", "I51.9"},
       1.0},
  };
  return spec;
}

// JSON form of the spec; see the README for the schema. Unset fields take
// the demo defaults for plumbing (sites, noise codes) but disease rows are
// required.
inline CohortSpec parse_cohort_spec(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  CohortSpec spec;
  spec.seed = j.value("seed", 0ull);
  spec.duplicate_lab_rate = j.value("duplicate_lab_rate", 0.1);
  spec.signature_rate = j.value("signature_rate", 0.95);

  spec.missingness.fill(0.0);
  if (j.contains("missingness")) {
    const auto& m = j.at("missingness");
    if (m.is_number()) {
      spec.missingness.fill(m.get<double>());
    } else {
      if (m.size() != kNumLabs)
        throw std::runtime_error("cohort spec: missingness needs 5 entries");
      for (int c = 0; c < kNumLabs; ++c) spec.missingness[c] = m[c];
    }
  }

  spec.age_weights.fill(1.0);
  if (j.contains("age_weights")) {
    const auto& w = j.at("age_weights");
    if (w.size() != kNumAgeGroups)
      throw std::runtime_error("cohort spec: age_weights needs 6 entries");
    for (int g = 0; g < kNumAgeGroups; ++g) spec.age_weights[g] = w[g];
  }

  if (j.contains("sites")) {
    for (const auto& sj : j.at("sites")) {
      SiteSpec site;
      site.site_id = sj.at("site_id").get<std::string>();
      const auto& ranges = sj.at("ranges");
      if (ranges.size() != kNumLabs)
        throw std::runtime_error("cohort spec: site ranges need 5 pairs");
      for (int c = 0; c < kNumLabs; ++c)
        site.ranges[c] = {ranges[c][0].get<double>(),
                          ranges[c][1].get<double>()};
      spec.sites.push_back(site);
    }
  } else {
    spec.sites = demo_spec().sites;
  }

  if (j.contains("noise_codes"))
    for (const auto& c : j.at("noise_codes"))
      spec.noise_codes.push_back(c.get<std::string>());
  else
    spec.noise_codes = demo_spec().noise_codes;

  if (!j.contains("diseases"))
    throw std::runtime_error("cohort spec: missing diseases object");
  for (const auto& [name, dj] : j.at("diseases").items()) {
    const auto label = parse_disease_label(name);
    if (!label) throw std::runtime_error("cohort spec: unknown disease " + name);
    auto& ds = spec.diseases[static_cast<int>(*label)];
    ds.patients = dj.at("patients").get<int>();
    ds.encounters = dj.value("encounters", ds.patients);
    ds.negative_controls = dj.value("negative_controls", 0);
    const auto& mean = dj.at("mean");
    if (mean.size() != kNumLabs)
      throw std::runtime_error("cohort spec: mean needs 5 entries");
    for (int c = 0; c < kNumLabs; ++c) ds.mean[c] = mean[c];
    if (dj.contains("covariance")) {
      ds.covariance.resize(kNumLabs, kNumLabs);
      const auto& cov = dj.at("covariance");
      for (int r = 0; r < kNumLabs; ++r)
        for (int c = 0; c < kNumLabs; ++c)
          ds.covariance(r, c) = cov[r][c].get<double>();
    } else {
      ds.covariance = isotropic_covariance(dj.value("sigma", 0.08));
    }
    for (const auto& code : dj.at("defining_codes"))
      ds.defining_codes.push_back(code.get<std::string>());
    if (dj.contains("subphenotypes")) {
      for (const auto& sj : dj.at("subphenotypes")) {
        SubphenotypeSpec sub;
        sub.name = sj.at("name").get<std::string>();
        const auto& smean = sj.at("mean");
        for (int c = 0; c < kNumLabs; ++c) sub.mean[c] = smean[c];
        for (const auto& code : sj.at("icd_signature"))
          sub.icd_signature.push_back(code.get<std::string>());
        sub.weight = sj.value("weight", 1.0);
        ds.subphenotypes.push_back(std::move(sub));
      }
    }
  }
  // Fill covariance for diseases absent from the file so validation passes.
  for (auto& ds : spec.diseases)
    if (ds.covariance.size() == 0) ds.covariance = isotropic_covariance(0.08);
  return spec;
}

inline nlohmann::ordered_json disease_codes_to_json(const DiseaseCodeMap& map) {
  nlohmann::ordered_json j;
  for (int d = 0; d < kNumDiseases; ++d) {
    const auto it = map.find(static_cast<DiseaseLabel>(d));
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    if (it != map.end())
      for (const auto& code : it->second) arr.push_back(code);
    j[kDiseaseNames[d]] = std::move(arr);
  }
  return j;
}

}  // namespace ieiclust
