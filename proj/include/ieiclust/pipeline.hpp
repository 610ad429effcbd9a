#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ieiclust/grid.hpp"
#include "ieiclust/impute.hpp"
#include "ieiclust/ingest.hpp"
#include "ieiclust/normalize.hpp"
#include "ieiclust/report.hpp"
#include "ieiclust/scatter_svg.hpp"
#include "ieiclust/synth.hpp"
#include "ieiclust/tsne.hpp"
#include "ieiclust/version.hpp"

namespace ieiclust {

// Documented exit codes for the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingInput = 3,
  kExitEmptyCohort = 4,
};

class PipelineError : public std::runtime_error {
 public:
  PipelineError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  int max_points = 2000;  // larger embeddings are subsampled (stratified)
};

struct PipelineConfig {
  std::string labs_path;
  std::string diagnoses_path;
  std::string disease_codes_path;
  std::string synth_spec_path;  // generate inputs when set (or demo_scale > 0)
  double demo_scale = 0.0;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  unsigned jobs = 1;  // scheduling only; never affects artifact bytes
  std::vector<Algorithm> algorithms = {Algorithm::DBSCAN, Algorithm::HDBSCAN,
                                       Algorithm::KMEANS, Algorithm::AGGLOM,
                                       Algorithm::KMODES};
  GridConfig grid;
  ImputeConfig impute;
  TsneConfig tsne;
  VectorAssemblyConfig assembly;
  bool strict_parse = false;
  bool paper_mode = false;
  std::string exclude_codes_path;  // empty: exclude the defining-code union
};

inline PipelineConfig parse_pipeline_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw PipelineError(kExitConfig,
                        std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig config;
  try {
    config.labs_path = j.value("labs", "");
    config.diagnoses_path = j.value("diagnoses", "");
    config.disease_codes_path = j.value("disease_codes", "");
    config.synth_spec_path = j.value("synth_spec", "");
    config.demo_scale = j.value("demo_scale", 0.0);
    config.out_dir = j.value("out_dir", "out");
    config.seed = j.value("seed", 42ull);
    config.jobs = j.value("jobs", 1u);
    config.strict_parse = j.value("strict_parse", false);
    config.paper_mode = j.value("paper_mode", false);
    config.exclude_codes_path = j.value("exclude_codes", "");
    if (j.contains("algorithms")) {
      config.algorithms.clear();
      for (const auto& a : j.at("algorithms")) {
        const auto alg = parse_algorithm(a.get<std::string>());
        if (!alg)
          throw std::runtime_error("unknown algorithm: " +
                                   a.get<std::string>());
        config.algorithms.push_back(*alg);
      }
      if (config.algorithms.empty())
        throw std::runtime_error("algorithms list is empty");
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      config.grid.epsilon_start = g.value("epsilon_start", 0.005);
      config.grid.epsilon_stop = g.value("epsilon_stop", 0.2);
      config.grid.epsilon_step = g.value("epsilon_step", 0.005);
      config.grid.k_min = g.value("k_min", 2);
      config.grid.k_max = g.value("k_max", 18);
      config.grid.pca_min = g.value("pca_min", 2);
      config.grid.pca_max = g.value("pca_max", 5);
      config.grid.min_samples = g.value("min_samples", 5);
      config.grid.min_cluster_size = g.value("min_cluster_size", 5);
    }
    if (j.contains("impute")) {
      const auto& m = j.at("impute");
      config.impute.chains = m.value("chains", 5);
      config.impute.iterations = m.value("iterations", 10);
      config.impute.pmm_donors = m.value("pmm_donors", 5);
    }
    if (j.contains("tsne")) {
      const auto& t = j.at("tsne");
      config.tsne.perplexity = t.value("perplexity", 30.0);
      config.tsne.iterations = t.value("iterations", 1000);
      config.tsne.max_points = t.value("max_points", 2000);
    }
    if (j.contains("assembly")) {
      const auto& a = j.at("assembly");
      if (a.contains("weights")) {
        const auto& w = a.at("weights");
        if (w.size() != kNumLabs)
          throw std::runtime_error("assembly weights need 5 entries");
        for (int c = 0; c < kNumLabs; ++c) config.assembly.weights[c] = w[c];
      }
      config.assembly.unit_normalize = a.value("unit_normalize", false);
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(kExitConfig, std::string("config: ") + e.what());
  }
  try {
    validate_grid(config.grid);
  } catch (const std::exception& e) {
    throw PipelineError(kExitConfig, std::string("config: ") + e.what());
  }
  if (config.paper_mode && !is_default_grid(config.grid))
    throw PipelineError(kExitConfig,
                        "config: paper_mode locks the grid to its defaults");
  return config;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw PipelineError(kExitMissingInput, "cannot open input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string digest_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace detail

// Records every artifact written under the output directory so the manifest
// can list paths and content digests.
class OutputWriter {
 public:
  explicit OutputWriter(const std::string& out_dir) : out_dir_(out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec)
      throw PipelineError(kExitFailure,
                          "cannot create output directory: " + out_dir);
  }

  std::string write(const std::string& name, const std::string& bytes) {
    const std::filesystem::path path = std::filesystem::path(out_dir_) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw PipelineError(kExitFailure, "cannot write " + path.string());
    out << bytes;
    out.close();
    digests_[name] = detail::digest_hex(bytes);
    return path.string();
  }

  const std::map<std::string, std::string>& digests() const { return digests_; }
  const std::string& dir() const { return out_dir_; }

 private:
  std::string out_dir_;
  std::map<std::string, std::string> digests_;
};

// config echo for the manifest; jobs is intentionally omitted so artifact
// bytes match across job counts.
inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["labs"] = c.labs_path;
  j["diagnoses"] = c.diagnoses_path;
  j["disease_codes"] = c.disease_codes_path;
  j["synth_spec"] = c.synth_spec_path;
  j["demo_scale"] = c.demo_scale;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  nlohmann::ordered_json algs = nlohmann::ordered_json::array();
  for (const auto a : c.algorithms) algs.push_back(to_string(a));
  j["algorithms"] = std::move(algs);
  j["grid"] = {{"epsilon_start", c.grid.epsilon_start},
               {"epsilon_stop", c.grid.epsilon_stop},
               {"epsilon_step", c.grid.epsilon_step},
               {"k_min", c.grid.k_min},
               {"k_max", c.grid.k_max},
               {"pca_min", c.grid.pca_min},
               {"pca_max", c.grid.pca_max},
               {"min_samples", c.grid.min_samples},
               {"min_cluster_size", c.grid.min_cluster_size}};
  j["impute"] = {{"chains", c.impute.chains},
                 {"iterations", c.impute.iterations},
                 {"pmm_donors", c.impute.pmm_donors}};
  j["tsne"] = {{"perplexity", c.tsne.perplexity},
               {"iterations", c.tsne.iterations},
               {"max_points", c.tsne.max_points}};
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (double w : c.assembly.weights) weights.push_back(w);
  j["assembly"] = {{"weights", std::move(weights)},
                   {"unit_normalize", c.assembly.unit_normalize}};
  j["strict_parse"] = c.strict_parse;
  j["paper_mode"] = c.paper_mode;
  j["exclude_codes"] = c.exclude_codes_path;
  return j;
}

inline void write_manifest(OutputWriter& writer, const PipelineConfig& config,
                           const std::string& command) {
  nlohmann::ordered_json manifest;
  manifest["tool"] = "ieiclust";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["seed"] = config.seed;
  manifest["config"] = config_to_json(config);
  nlohmann::ordered_json outputs;
  for (const auto& [name, digest] : writer.digests()) outputs[name] = digest;
  manifest["outputs"] = std::move(outputs);
  writer.write("run_manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// synth

struct SynthSummary {
  int patients = 0;
  int encounters = 0;
};

inline SynthSummary run_synth(const CohortSpec& spec, OutputWriter& writer) {
  const GeneratedCohort cohort = generate_cohort(spec);
  writer.write("labs.csv", cohort.labs_csv);
  writer.write("diagnoses.csv", cohort.diagnoses_csv);
  writer.write("ground_truth.csv", cohort.ground_truth_csv);
  writer.write("disease_codes.json",
               disease_codes_to_json(cohort.disease_codes).dump(2) + "\n");
  return {cohort.total_patients, cohort.total_encounters};
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOutcome {
  std::vector<LabVector> vectors;
  std::map<std::string, DiseaseLabel> cohort;
  std::size_t lab_errors = 0;
  std::size_t diagnosis_errors = 0;
  std::vector<DiagnosisEvent> diagnoses;
};

inline IngestOutcome ingest_files(const std::string& labs_path,
                                  const std::string& diagnoses_path,
                                  const std::string& codes_path,
                                  bool strict_parse,
                                  const VectorAssemblyConfig& assembly) {
  IngestOutcome outcome;
  const ParseMode mode{strict_parse};
  DiseaseCodeMap codes;
  try {
    codes = parse_disease_codes(detail::read_file(codes_path));
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(kExitConfig, std::string("disease codes: ") + e.what());
  }

  std::istringstream labs_stream(detail::read_file(labs_path));
  std::istringstream diag_stream(detail::read_file(diagnoses_path));
  LabParseResult labs;
  DiagnosisParseResult diags;
  try {
    labs = parse_lab_records(labs_stream, mode);
    diags = parse_diagnosis_records(diag_stream, mode);
  } catch (const ParseException& e) {
    throw PipelineError(kExitFailure, std::string("strict parse: ") + e.what());
  }
  outcome.lab_errors = labs.errors.size();
  outcome.diagnosis_errors = diags.errors.size();
  outcome.diagnoses = std::move(diags.events);

  outcome.cohort = select_cohort(outcome.diagnoses, codes);
  if (outcome.cohort.empty())
    throw PipelineError(kExitEmptyCohort,
                        "cohort selection produced zero patients");
  const auto samples = flatten_encounters(labs.observations, outcome.cohort);
  outcome.vectors.reserve(samples.size());
  for (const auto& s : samples)
    outcome.vectors.push_back(assemble_vector(s, assembly));
  return outcome;
}

inline void write_ingest_outputs(OutputWriter& writer,
                                 const IngestOutcome& outcome) {
  std::ostringstream vectors;
  write_vectors_csv(vectors, outcome.vectors);
  writer.write("vectors.csv", vectors.str());

  std::array<int, kNumDiseases> patients{};
  std::array<int, kNumDiseases> samples{};
  for (const auto& [patient, disease] : outcome.cohort)
    ++patients[static_cast<int>(disease)];
  for (const auto& v : outcome.vectors) ++samples[static_cast<int>(v.disease)];
  nlohmann::ordered_json j;
  j["patients"] = outcome.cohort.size();
  j["samples"] = outcome.vectors.size();
  nlohmann::ordered_json per;
  for (int d = 0; d < kNumDiseases; ++d)
    per[kDiseaseNames[d]] = {{"patients", patients[d]},
                             {"samples", samples[d]}};
  j["per_disease"] = std::move(per);
  j["lab_parse_errors"] = outcome.lab_errors;
  j["diagnosis_parse_errors"] = outcome.diagnosis_errors;
  writer.write("cohort.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// impute

inline ImputeOutcome impute_vectors(const std::vector<LabVector>& vectors,
                                    ImputeConfig config, std::uint64_t seed) {
  config.seed = seed;
  return impute_subgroups(partition_by_age(vectors), config);
}

inline void write_impute_outputs(OutputWriter& writer,
                                 const ImputeOutcome& outcome) {
  std::ostringstream imputed;
  write_imputed_csv(imputed, outcome.datasets);
  writer.write("imputed.csv", imputed.str());
  nlohmann::ordered_json j;
  nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
  for (const auto& w : outcome.warnings) warnings.push_back(w);
  j["warnings"] = std::move(warnings);
  writer.write("impute_log.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// tune

struct TuneOutcome {
  std::vector<SubgroupGridOutcome> groups;
  std::vector<SelectedOutcome> selected;  // age-major, algorithm order
  std::size_t experiments = 0;
};

inline TuneOutcome run_tune(const std::vector<SubgroupDataset>& datasets,
                            const PipelineConfig& config) {
  TuneOutcome outcome;
  for (const auto& dataset : datasets) {
    SubgroupGridOutcome group = run_grid(dataset, config.algorithms,
                                         config.grid, config.seed,
                                         config.jobs);
    outcome.experiments += group.experiments;
    for (const auto& cell : group.per_algorithm)
      outcome.selected.push_back(cell.selected);
    outcome.groups.push_back(std::move(group));
  }
  return outcome;
}

inline nlohmann::ordered_json selected_to_json(const TuneOutcome& outcome,
                                               std::uint64_t master_seed) {
  nlohmann::ordered_json j;
  j["master_seed"] = master_seed;
  j["experiments"] = outcome.experiments;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& s : outcome.selected) {
    nlohmann::ordered_json c;
    c["age_group"] = to_string(s.age_group);
    c["algorithm"] = to_string(s.algorithm);
    c["available"] = s.available;
    if (s.available) {
      c["pca"] = s.combo.pca_components;
      if (s.combo.epsilon) c["epsilon"] = *s.combo.epsilon;
      if (s.combo.n_clusters) c["n_clusters"] = *s.combo.n_clusters;
      c["seed"] = s.combo.seed;
      if (s.final_run.bundle.valid) {
        c["composite"] = s.final_run.bundle.composite;
        c["silhouette"] = s.final_run.bundle.silhouette;
      }
    }
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return j;
}

struct SelectedCell {
  AgeGroup age_group = AgeGroup::Y0_1;
  Algorithm algorithm = Algorithm::KMEANS;
  bool available = false;
  HyperparamCombo combo;
};

inline std::vector<SelectedCell> parse_selected_json(
    const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw PipelineError(kExitConfig,
                        std::string("selected.json: invalid JSON: ") + e.what());
  }
  std::vector<SelectedCell> cells;
  for (const auto& c : j.at("cells")) {
    SelectedCell cell;
    const auto group = parse_age_group(c.at("age_group").get<std::string>());
    const auto alg = parse_algorithm(c.at("algorithm").get<std::string>());
    if (!group || !alg)
      throw PipelineError(kExitConfig, "selected.json: bad cell identifiers");
    cell.age_group = *group;
    cell.algorithm = *alg;
    cell.available = c.value("available", false);
    if (cell.available) {
      cell.combo.algorithm = *alg;
      cell.combo.pca_components = c.at("pca").get<int>();
      if (c.contains("epsilon")) cell.combo.epsilon = c.at("epsilon").get<double>();
      if (c.contains("n_clusters"))
        cell.combo.n_clusters = c.at("n_clusters").get<int>();
      cell.combo.seed = c.value("seed", 0ull);
    }
    cells.push_back(cell);
  }
  return cells;
}

inline void write_tune_outputs(OutputWriter& writer, const TuneOutcome& outcome,
                               const PipelineConfig& config) {
  for (const auto& group : outcome.groups) {
    for (const auto& cell : group.per_algorithm) {
      std::ostringstream csv;
      write_results_csv(csv, cell.results, cell.ranking);
      writer.write(std::string("results_") + file_tag(group.age_group) + "_" +
                       to_string(cell.algorithm) + ".csv",
                   csv.str());
    }
  }
  std::ostringstream summary;
  write_summary_csv(summary, summary_table(outcome.selected));
  writer.write("summary.csv", summary.str());
  writer.write("selected.json",
               selected_to_json(outcome, config.seed).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// report

struct ReportInputs {
  const std::vector<SubgroupDataset>& datasets;
  const std::vector<SelectedCell>& cells;
  const std::vector<DiagnosisEvent>& diagnoses;
  std::set<std::string> exclude_codes;
};

// Re-runs each selected combo (deterministic via the stored seed), builds
// composition + ICD reports, and emits one t-SNE projection per age group
// for its best-scoring algorithm.
inline void run_report(OutputWriter& writer, const ReportInputs& inputs,
                       const PipelineConfig& config) {
  nlohmann::ordered_json age_groups = nlohmann::ordered_json::array();
  std::ostringstream md;
  md << "# Cluster report\n\n";

  std::vector<SummaryRow> summary_rows;
  std::vector<SelectedOutcome> rerun;
  rerun.reserve(inputs.cells.size());  // `best` points into this vector

  for (int g = 0; g < kNumAgeGroups; ++g) {
    const auto group = static_cast<AgeGroup>(g);
    const SubgroupDataset* dataset = nullptr;
    for (const auto& d : inputs.datasets)
      if (d.age_group == group) dataset = &d;
    if (dataset == nullptr) continue;

    nlohmann::ordered_json age_json;
    age_json["age_group"] = to_string(group);
    age_json["n_samples"] = dataset->size();
    nlohmann::ordered_json algorithms = nlohmann::ordered_json::array();
    md << "## Age group " << to_string(group) << " (" << dataset->size()
       << " samples)\n\n";

    const SelectedOutcome* best = nullptr;
    for (const auto& cell : inputs.cells) {
      if (cell.age_group != group) continue;
      SelectedOutcome outcome;
      outcome.age_group = group;
      outcome.algorithm = cell.algorithm;
      outcome.available = cell.available;
      outcome.combo = cell.combo;
      if (cell.available && dataset->size() > 0) {
        outcome.final_run =
            run_experiment(*dataset, cell.combo, config.grid);
        outcome.available = outcome.final_run.error.empty();
      } else {
        outcome.available = false;
      }
      rerun.push_back(std::move(outcome));
      const SelectedOutcome& stored = rerun.back();
      if (stored.available) {
        const ClusterReport report = build_cluster_report(
            *dataset, stored, inputs.diagnoses, inputs.exclude_codes);
        algorithms.push_back(cluster_report_to_json(report));
        write_cluster_report_markdown(md, report);
        if (stored.final_run.bundle.valid &&
            (best == nullptr ||
             stored.final_run.bundle.composite >
                 best->final_run.bundle.composite))
          best = &stored;
      } else {
        nlohmann::ordered_json unavailable;
        unavailable["age_group"] = to_string(group);
        unavailable["algorithm"] = to_string(cell.algorithm);
        unavailable["available"] = false;
        algorithms.push_back(std::move(unavailable));
      }
    }
    age_json["algorithms"] = std::move(algorithms);

    // Projection for the age group's best algorithm.
    if (best != nullptr && dataset->size() >= 4) {
      const auto [model, scores] =
          pca_fit_transform(dataset->rows, best->combo.pca_components);
      std::vector<int> keep(dataset->size());
      for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = int(i);
      if (static_cast<int>(keep.size()) > config.tsne.max_points) {
        // Deterministic stratified subsample by disease.
        Rng rng(mix_seed(config.seed, 7700 + g));
        std::vector<int> chosen;
        for (int d = 0; d < kNumDiseases; ++d) {
          std::vector<int> rows;
          for (std::size_t i = 0; i < dataset->size(); ++i)
            if (dataset->labels[i] == static_cast<DiseaseLabel>(d))
              rows.push_back(int(i));
          if (rows.empty()) continue;
          std::size_t quota = static_cast<std::size_t>(
              std::llround(double(rows.size()) * config.tsne.max_points /
                           double(dataset->size())));
          quota = std::max<std::size_t>(1, std::min(quota, rows.size()));
          for (std::size_t i = rows.size(); i > 1; --i)
            std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
          chosen.insert(chosen.end(), rows.begin(), rows.begin() + quota);
        }
        std::sort(chosen.begin(), chosen.end());
        keep = std::move(chosen);
      }
      Eigen::MatrixXd subset(keep.size(), scores.cols());
      std::vector<int> sub_labels(keep.size());
      std::vector<DiseaseLabel> sub_diseases(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        subset.row(i) = scores.row(keep[i]);
        sub_labels[i] = best->final_run.assignment.labels[keep[i]];
        sub_diseases[i] = dataset->labels[keep[i]];
      }
      if (subset.rows() >= 4) {
        const Embedding2D embedding =
            tsne_embed(subset, config.tsne.perplexity, config.tsne.iterations,
                       mix_seed(config.seed, 8800 + g));
        std::ostringstream svg, csv;
        emit_scatter(embedding, sub_labels, sub_diseases, svg, csv,
                     std::string(to_string(group)) + " / " +
                         to_string(best->algorithm));
        writer.write(std::string("projection_") + file_tag(group) + ".svg",
                     svg.str());
        writer.write(std::string("projection_") + file_tag(group) + ".csv",
                     csv.str());
        age_json["projection"] = {
            {"svg", std::string("projection_") + file_tag(group) + ".svg"},
            {"csv", std::string("projection_") + file_tag(group) + ".csv"},
            {"algorithm", to_string(best->algorithm)},
            {"tsne_perplexity", embedding.perplexity},
            {"tsne_iterations", embedding.iterations},
            {"tsne_seed", embedding.seed}};
      }
    }
    age_groups.push_back(std::move(age_json));
  }

  summary_rows = summary_table(rerun);
  nlohmann::ordered_json report;
  report["tool"] = "ieiclust";
  report["version"] = kVersion;
  report["age_groups"] = std::move(age_groups);
  report["summary"] = summary_to_json(summary_rows);
  writer.write("report.json", report.dump(2) + "\n");

  std::ostringstream summary_md;
  summary_md << "# Summary\n\n";
  write_summary_markdown(summary_md, summary_rows);
  summary_md << "\n" << md.str();
  writer.write("report.md", summary_md.str());
}

// ---------------------------------------------------------------------------
// full pipeline

struct PipelineRunSummary {
  std::size_t experiments = 0;
  std::size_t samples = 0;
  std::size_t patients = 0;
};

// synth (optional) -> ingest -> impute -> tune -> report, writing every
// artifact under config.out_dir plus a closing run_manifest.json.
inline PipelineRunSummary run_pipeline(PipelineConfig config) {
  OutputWriter writer(config.out_dir);
  PipelineRunSummary summary;

  if (!config.synth_spec_path.empty() || config.demo_scale > 0.0) {
    CohortSpec spec;
    if (!config.synth_spec_path.empty()) {
      try {
        spec = parse_cohort_spec(detail::read_file(config.synth_spec_path));
      } catch (const PipelineError&) {
        throw;
      } catch (const std::exception& e) {
        throw PipelineError(kExitConfig, std::string("synth spec: ") + e.what());
      }
      if (spec.seed == 0) spec.seed = config.seed;
    } else {
      spec = demo_spec(config.demo_scale, config.seed);
    }
    run_synth(spec, writer);
    const auto out = std::filesystem::path(config.out_dir);
    config.labs_path = (out / "labs.csv").string();
    config.diagnoses_path = (out / "diagnoses.csv").string();
    config.disease_codes_path = (out / "disease_codes.json").string();
  }
  if (config.labs_path.empty() || config.diagnoses_path.empty() ||
      config.disease_codes_path.empty())
    throw PipelineError(kExitConfig,
                        "config: labs, diagnoses and disease_codes are "
                        "required (or a synth spec)");

  IngestOutcome ingest = ingest_files(config.labs_path, config.diagnoses_path,
                                      config.disease_codes_path,
                                      config.strict_parse, config.assembly);
  write_ingest_outputs(writer, ingest);
  summary.samples = ingest.vectors.size();
  summary.patients = ingest.cohort.size();

  ImputeOutcome imputed =
      impute_vectors(ingest.vectors, config.impute, config.seed);
  write_impute_outputs(writer, imputed);

  TuneOutcome tuned = run_tune(imputed.datasets, config);
  write_tune_outputs(writer, tuned, config);
  summary.experiments = tuned.experiments;

  std::set<std::string> exclude;
  if (config.exclude_codes_path.empty()) {
    const auto codes =
        parse_disease_codes(detail::read_file(config.disease_codes_path));
    exclude = all_defining_codes(codes);
  } else {
    const auto j =
        nlohmann::json::parse(detail::read_file(config.exclude_codes_path));
    for (const auto& c : j) exclude.insert(c.get<std::string>());
  }
  std::vector<SelectedCell> cells;
  for (const auto& s : tuned.selected) {
    SelectedCell cell;
    cell.age_group = s.age_group;
    cell.algorithm = s.algorithm;
    cell.available = s.available;
    cell.combo = s.combo;
    cells.push_back(cell);
  }
  ReportInputs inputs{imputed.datasets, cells, ingest.diagnoses,
                      std::move(exclude)};
  run_report(writer, inputs, config);

  write_manifest(writer, config, "pipeline");
  return summary;
}

}  // namespace ieiclust
