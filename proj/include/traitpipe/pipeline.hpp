#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traitpipe/evaluation.hpp"
#include "traitpipe/featureset.hpp"
#include "traitpipe/learners.hpp"
#include "traitpipe/psychometrics.hpp"
#include "traitpipe/selection.hpp"
#include "traitpipe/synthetic.hpp"

namespace traitpipe::pipeline {

struct PipelineConfig {
  // Exactly one of: responses_csv (scored with the key), profiles_csv
  // (pre-scored), or synthetic.
  std::string responses_csv;
  std::string profiles_csv;
  std::optional<synth::SyntheticCohortSpec> synthetic;

  std::string scoring_key_json;  // empty = built-in default instrument
  std::string snapshots_dir;     // empty = demographics-only matrix (warning)
  std::string demographics_csv;
  std::string catalog_json;      // empty = build from the cohort

  std::string output_dir;

  select::SelectionParams selection;
  bool refine = false;

  std::int64_t catalog_min_followers = ingest::kPopularFollowerThreshold;
  std::size_t catalog_min_participants = 6;

  double split_ratio = 0.8;
  bool stratified_split = false;

  std::vector<psych::Scheme> schemes = {psych::Scheme::kTwo, psych::Scheme::kThree};
  std::vector<learn::ModelFamily> families = {
      learn::ModelFamily::kDecisionTree, learn::ModelFamily::kLogisticRegression,
      learn::ModelFamily::kGlm, learn::ModelFamily::kRandomForest,
      learn::ModelFamily::kMlp};
  std::vector<psych::TraitId> traits;  // empty = all 21

  learn::TreeParams tree;
  learn::LinearParams linear;
  learn::ForestParams forest;
  learn::MlpParams mlp;

  std::optional<std::uint64_t> base_seed;  // mandatory
  std::size_t threads = 0;                 // 0 = hardware concurrency
};

[[nodiscard]] PipelineConfig config_from_json(const std::string& text);
[[nodiscard]] std::string config_to_json(const PipelineConfig& config);
[[nodiscard]] PipelineConfig load_config_file(const std::string& path);

struct RunResult {
  std::string run_dir;
  std::size_t models_trained = 0;
  std::size_t jobs_skipped = 0;
  std::vector<std::string> warnings;
  eval::EvaluationReport report;
};

/// Executes every stage (score, norms, bin, ingest, catalog, matrix,
/// select, train, evaluate, report) and writes models, reports and a
/// manifest into config.output_dir. Rerunning an identical config yields
/// byte-identical outputs. Stage failures raise StageError after marking
/// the manifest incomplete.
RunResult run_pipeline(const PipelineConfig& config);

struct CandidateScore {
  std::string trait;
  psych::TraitLabel label;
  std::vector<psych::LabelValue> classes;
  std::vector<double> scores;
};

struct CandidateReport {
  std::string participant_id;
  bool low_coverage = false;  // private profile or no snapshot
  std::vector<CandidateScore> traits;
  std::map<std::string, std::string> provenance;
};

/// Scores one new profile with the models of a finished run. Refuses when
/// the run's catalog version does not match the models' stored version.
[[nodiscard]] CandidateReport score_candidate(const std::string& run_dir,
                                              const std::string& snapshot_dir,
                                              const std::string& demographics_csv,
                                              psych::Scheme scheme,
                                              learn::ModelFamily family);

[[nodiscard]] std::string candidate_report_to_json(const CandidateReport& report);

}  // namespace traitpipe::pipeline
