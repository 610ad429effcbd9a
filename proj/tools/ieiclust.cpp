// ieiclust command-line front end. Subcommands mirror the pipeline stages:
//   synth | ingest | impute | tune | report | pipeline
// Every run writes its artifacts plus a run_manifest.json under --out.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ieiclust/pipeline.hpp"

namespace {

using namespace ieiclust;

void print_error(int code, const std::string& message) {
  std::ostringstream line;
  line << "error code=" << code << " msg=\"";
  for (char c : message) {
    if (c == '"' || c == '\\') line << '\\';
    if (c == '\n') {
      line << ' ';
      continue;
    }
    line << c;
  }
  line << "\"";
  std::cerr << line.str() << std::endl;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const PipelineError& e) {
    print_error(e.exit_code(), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    print_error(kExitFailure, e.what());
    return kExitFailure;
  }
}

struct CommonArgs {
  std::string out = "out";
  std::string config_path;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  bool strict_parse = false;
  bool paper_mode = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_jobs = true) {
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--config", args.config_path, "Pipeline config JSON");
  cmd->add_option("--seed", args.seed, "Master seed");
  if (with_jobs)
    cmd->add_option("--jobs", args.jobs, "Worker threads for the grid");
  cmd->add_flag("--strict-parse", args.strict_parse,
                "Abort on the first malformed input row");
  cmd->add_flag("--paper-mode", args.paper_mode,
                "Lock the hyperparameter grid to its defaults");
}

PipelineConfig load_config(const CommonArgs& args) {
  PipelineConfig config;
  if (!args.config_path.empty())
    config = parse_pipeline_config(detail::read_file(args.config_path));
  config.out_dir = args.out;
  config.seed = args.seed;
  config.jobs = args.jobs;
  config.strict_parse = config.strict_parse || args.strict_parse;
  config.paper_mode = config.paper_mode || args.paper_mode;
  if (config.paper_mode && !is_default_grid(config.grid))
    throw PipelineError(kExitConfig,
                        "config: paper_mode locks the grid to its defaults");
  return config;
}

std::vector<SubgroupDataset> load_imputed(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  return read_imputed_csv(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering pipeline for multi-site immune-lab encounter data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ieiclust::kVersion);

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic cohort (labs, diagnoses, ground truth)");
  CommonArgs synth_args;
  std::string synth_spec;
  double demo_scale = 0.0;
  synth->add_option("--spec", synth_spec, "Cohort spec JSON");
  synth->add_option("--demo-scale", demo_scale,
                    "Use the built-in demo population at this scale");
  add_common(synth, synth_args, false);

  // ingest --------------------------------------------------------------
  auto* ingest = app.add_subcommand(
      "ingest", "Parse labs/diagnoses, select the cohort, emit vectors.csv");
  CommonArgs ingest_args;
  std::string labs_path, diagnoses_path, codes_path;
  ingest->add_option("--labs", labs_path, "labs.csv")->required();
  ingest->add_option("--diagnoses", diagnoses_path, "diagnoses.csv")
      ->required();
  ingest->add_option("--codes", codes_path, "disease_codes.json")->required();
  add_common(ingest, ingest_args, false);

  // impute --------------------------------------------------------------
  auto* impute =
      app.add_subcommand("impute", "MICE-impute vectors.csv per stratum");
  CommonArgs impute_args;
  std::string vectors_path;
  impute->add_option("--vectors", vectors_path, "vectors.csv")->required();
  add_common(impute, impute_args, false);

  // tune ----------------------------------------------------------------
  auto* tune = app.add_subcommand(
      "tune", "Run the hyperparameter grid and select combos per age group");
  CommonArgs tune_args;
  std::string imputed_path;
  std::vector<std::string> algorithm_names;
  tune->add_option("--imputed", imputed_path, "imputed.csv")->required();
  tune->add_option("--algorithms", algorithm_names,
                   "Subset of: dbscan hdbscan kmeans agglomerative kmodes")
      ->delimiter(',');
  add_common(tune, tune_args);

  // report --------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "Cluster composition, ICD tables and t-SNE projections");
  CommonArgs report_args;
  std::string report_imputed, selected_path, report_diagnoses, report_codes;
  report->add_option("--imputed", report_imputed, "imputed.csv")->required();
  report->add_option("--selected", selected_path, "selected.json from tune")
      ->required();
  report->add_option("--diagnoses", report_diagnoses, "diagnoses.csv")
      ->required();
  report->add_option("--codes", report_codes, "disease_codes.json")
      ->required();
  add_common(report, report_args);

  // pipeline --------------------------------------------------------------
  auto* pipeline = app.add_subcommand(
      "pipeline", "Run synth/ingest/impute/tune/report end to end");
  CommonArgs pipeline_args;
  double pipeline_demo_scale = 0.0;
  pipeline->add_option("--demo-scale", pipeline_demo_scale,
                       "Generate the demo cohort at this scale first");
  add_common(pipeline, pipeline_args);

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    return guarded([&] {
      CohortSpec spec;
      if (!synth_spec.empty()) {
        spec = parse_cohort_spec(detail::read_file(synth_spec));
        if (spec.seed == 0) spec.seed = synth_args.seed;
      } else if (demo_scale > 0.0) {
        spec = demo_spec(demo_scale, synth_args.seed);
      } else {
        throw PipelineError(kExitConfig, "synth: give --spec or --demo-scale");
      }
      PipelineConfig config = load_config(synth_args);
      OutputWriter writer(config.out_dir);
      const SynthSummary summary = run_synth(spec, writer);
      write_manifest(writer, config, "synth");
      std::cout << "synth: " << summary.patients << " patients, "
                << summary.encounters << " encounters -> " << writer.dir()
                << std::endl;
    });
  }

  if (ingest->parsed()) {
    return guarded([&] {
      PipelineConfig config = load_config(ingest_args);
      IngestOutcome outcome =
          ingest_files(labs_path, diagnoses_path, codes_path,
                       config.strict_parse, config.assembly);
      OutputWriter writer(config.out_dir);
      write_ingest_outputs(writer, outcome);
      config.labs_path = labs_path;
      config.diagnoses_path = diagnoses_path;
      config.disease_codes_path = codes_path;
      write_manifest(writer, config, "ingest");
      std::cout << "ingest: " << outcome.cohort.size() << " patients, "
                << outcome.vectors.size() << " samples, "
                << outcome.lab_errors + outcome.diagnosis_errors
                << " parse errors -> " << writer.dir() << std::endl;
    });
  }

  if (impute->parsed()) {
    return guarded([&] {
      PipelineConfig config = load_config(impute_args);
      std::istringstream in(detail::read_file(vectors_path));
      const auto vectors = read_vectors_csv(in);
      ImputeOutcome outcome =
          impute_vectors(vectors, config.impute, config.seed);
      OutputWriter writer(config.out_dir);
      write_impute_outputs(writer, outcome);
      write_manifest(writer, config, "impute");
      std::cout << "impute: " << vectors.size() << " vectors, "
                << outcome.warnings.size() << " fallback warnings -> "
                << writer.dir() << std::endl;
    });
  }

  if (tune->parsed()) {
    return guarded([&] {
      PipelineConfig config = load_config(tune_args);
      if (!algorithm_names.empty()) {
        config.algorithms.clear();
        for (const auto& name : algorithm_names) {
          const auto alg = parse_algorithm(name);
          if (!alg)
            throw PipelineError(kExitConfig, "unknown algorithm: " + name);
          config.algorithms.push_back(*alg);
        }
      }
      const auto datasets = load_imputed(imputed_path);
      TuneOutcome outcome = run_tune(datasets, config);
      OutputWriter writer(config.out_dir);
      write_tune_outputs(writer, outcome, config);
      write_manifest(writer, config, "tune");
      std::cout << "tune: " << outcome.experiments << " experiments -> "
                << writer.dir() << std::endl;
    });
  }

  if (report->parsed()) {
    return guarded([&] {
      PipelineConfig config = load_config(report_args);
      const auto datasets = load_imputed(report_imputed);
      const auto cells =
          parse_selected_json(detail::read_file(selected_path));
      std::istringstream diag_stream(detail::read_file(report_diagnoses));
      const auto diags = parse_diagnosis_records(
          diag_stream, ParseMode{config.strict_parse});
      const auto codes =
          parse_disease_codes(detail::read_file(report_codes));
      ReportInputs inputs{datasets, cells, diags.events,
                          all_defining_codes(codes)};
      OutputWriter writer(config.out_dir);
      run_report(writer, inputs, config);
      write_manifest(writer, config, "report");
      std::cout << "report -> " << writer.dir() << std::endl;
    });
  }

  if (pipeline->parsed()) {
    return guarded([&] {
      PipelineConfig config = load_config(pipeline_args);
      if (pipeline_demo_scale > 0.0) config.demo_scale = pipeline_demo_scale;
      const PipelineRunSummary summary = run_pipeline(config);
      std::cout << "pipeline: " << summary.patients << " patients, "
                << summary.samples << " samples, " << summary.experiments
                << " experiments -> " << config.out_dir << std::endl;
    });
  }

  return kExitOk;
}
