// traitpipe CLI: trait prediction pipeline over social-profile features.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/evaluation.hpp"
#include "traitpipe/featureset.hpp"
#include "traitpipe/ingestion.hpp"
#include "traitpipe/learners.hpp"
#include "traitpipe/pipeline.hpp"
#include "traitpipe/psychometrics.hpp"
#include "traitpipe/selection.hpp"
#include "traitpipe/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace traitpipe;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStageFailure = 3;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path);
  out << text;
}

psych::NormTable load_norms(const std::string& path) {
  return psych::norm_table_from_json(read_text(path));
}

std::vector<psych::TraitLabel> make_labels(
    const std::vector<psych::TraitProfile>& profiles, const psych::NormTable& norms,
    psych::TraitId trait, psych::Scheme scheme, std::vector<std::size_t>& rows) {
  std::vector<psych::TraitLabel> labels;
  const auto& norm = norms.entry_for(trait);
  for (std::size_t r = 0; r < profiles.size(); ++r) {
    const auto it = profiles[r].scores.find(trait);
    if (it == profiles[r].scores.end()) continue;
    rows.push_back(r);
    labels.push_back(psych::bin_score(it->second, norm, scheme));
  }
  return labels;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"trait prediction pipeline over social-profile features"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config_path;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "base random seed")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--config", config_path, "pipeline config JSON");

  // --- score-questionnaire ---------------------------------------------
  auto* cmd_score = app.add_subcommand(
      "score-questionnaire", "score responses into trait profiles and cohort norms");
  std::string responses_path, key_path;
  cmd_score->add_option("--responses", responses_path, "responses CSV")->required();
  cmd_score->add_option("--key", key_path, "scoring key JSON (default built-in)");

  // --- ingest -------------------------------------------------------------
  auto* cmd_ingest =
      app.add_subcommand("ingest", "parse snapshot exports and derive post features");
  std::string snapshots_dir;
  cmd_ingest->add_option("--snapshots", snapshots_dir, "snapshot directory")->required();

  // --- catalog -------------------------------------------------------------
  auto* cmd_catalog =
      app.add_subcommand("catalog", "build the popular-account catalog");
  std::string catalog_snapshots;
  std::int64_t min_followers = ingest::kPopularFollowerThreshold;
  std::size_t min_participants = 6;
  cmd_catalog->add_option("--snapshots", catalog_snapshots, "snapshot directory")
      ->required();
  cmd_catalog->add_option("--min-followers", min_followers)->capture_default_str();
  cmd_catalog->add_option("--min-participants", min_participants)->capture_default_str();

  // --- features -------------------------------------------------------------
  auto* cmd_features = app.add_subcommand("features", "assemble the feature matrix");
  std::string profiles_path, features_snapshots, catalog_path, demographics_path;
  cmd_features->add_option("--profiles", profiles_path, "profiles CSV")->required();
  cmd_features->add_option("--snapshots", features_snapshots, "snapshot directory");
  cmd_features->add_option("--catalog", catalog_path, "catalog JSON")->required();
  cmd_features->add_option("--demographics", demographics_path, "demographics CSV");

  // --- select -------------------------------------------------------------
  auto* cmd_select = app.add_subcommand("select", "correlation-based feature selection");
  std::string sel_features, sel_sidecar, sel_profiles, sel_norms, sel_trait,
      sel_scheme = "two";
  double r_min = 0.01, p_max = 0.05;
  cmd_select->add_option("--features", sel_features, "features CSV")->required();
  cmd_select->add_option("--sidecar", sel_sidecar, "features sidecar JSON")->required();
  cmd_select->add_option("--profiles", sel_profiles, "profiles CSV")->required();
  cmd_select->add_option("--norms", sel_norms, "norms JSON")->required();
  cmd_select->add_option("--trait", sel_trait, "trait slug")->required();
  cmd_select->add_option("--scheme", sel_scheme, "two|three")->capture_default_str();
  cmd_select->add_option("--r-min", r_min)->capture_default_str();
  cmd_select->add_option("--p-max", p_max)->capture_default_str();

  // --- train -------------------------------------------------------------
  auto* cmd_train = app.add_subcommand("train", "train one model");
  std::string tr_features, tr_sidecar, tr_profiles, tr_norms, tr_selected, tr_trait,
      tr_scheme = "two", tr_family = "glm";
  cmd_train->add_option("--features", tr_features)->required();
  cmd_train->add_option("--sidecar", tr_sidecar)->required();
  cmd_train->add_option("--profiles", tr_profiles)->required();
  cmd_train->add_option("--norms", tr_norms)->required();
  cmd_train->add_option("--selected", tr_selected, "selected feature set JSON")
      ->required();
  cmd_train->add_option("--trait", tr_trait)->required();
  cmd_train->add_option("--scheme", tr_scheme)->capture_default_str();
  cmd_train->add_option("--family", tr_family, "dt|lr|glm|rf|mlp")->capture_default_str();

  // --- evaluate -------------------------------------------------------------
  auto* cmd_evaluate =
      app.add_subcommand("evaluate", "evaluate a model on a labeled matrix");
  std::string ev_model, ev_features, ev_sidecar, ev_profiles, ev_norms;
  cmd_evaluate->add_option("--model", ev_model)->required();
  cmd_evaluate->add_option("--features", ev_features)->required();
  cmd_evaluate->add_option("--sidecar", ev_sidecar)->required();
  cmd_evaluate->add_option("--profiles", ev_profiles)->required();
  cmd_evaluate->add_option("--norms", ev_norms)->required();

  // --- report -------------------------------------------------------------
  auto* cmd_report = app.add_subcommand("report", "re-render tables from a run");
  std::string report_run;
  cmd_report->add_option("--run", report_run, "run directory")->required();

  // --- synth -------------------------------------------------------------
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth::SyntheticCohortSpec synth_spec;
  cmd_synth->add_option("--participants", synth_spec.n_participants)
      ->capture_default_str();
  cmd_synth->add_option("--catalog-width", synth_spec.catalog_width)
      ->capture_default_str();
  cmd_synth->add_option("--planted", synth_spec.planted_per_trait)
      ->capture_default_str();
  cmd_synth->add_option("--effect", synth_spec.effect_size)->capture_default_str();
  cmd_synth->add_option("--label-noise", synth_spec.label_noise)->capture_default_str();
  cmd_synth->add_option("--private-rate", synth_spec.private_rate)
      ->capture_default_str();
  cmd_synth->add_option("--disengaged-rate", synth_spec.disengaged_rate)
      ->capture_default_str();

  // --- run -------------------------------------------------------------
  auto* cmd_run = app.add_subcommand("run", "execute the full pipeline from a config");

  // --- score-candidate ------------------------------------------------------
  auto* cmd_candidate =
      app.add_subcommand("score-candidate", "score a new profile with a finished run");
  std::string cand_run, cand_snapshot, cand_demographics, cand_scheme = "two",
              cand_family = "glm";
  cmd_candidate->add_option("--run", cand_run, "run directory")->required();
  cmd_candidate->add_option("--snapshot", cand_snapshot, "candidate snapshot directory");
  cmd_candidate->add_option("--demographics", cand_demographics,
                            "single-row demographics CSV");
  cmd_candidate->add_option("--scheme", cand_scheme)->capture_default_str();
  cmd_candidate->add_option("--family", cand_family)->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  const fs::path out(out_dir);

  if (cmd_score->parsed()) {
    const auto key = key_path.empty() ? psych::default_scoring_key()
                                      : psych::scoring_key_from_json(read_text(key_path));
    std::vector<psych::TraitProfile> profiles;
    for (const auto& row : psych::read_responses_csv(responses_path)) {
      profiles.push_back(psych::score_questionnaire(row, key));
    }
    fs::create_directories(out);
    synth::write_profiles_csv(profiles, (out / "profiles.csv").string());
    const auto norms = psych::compute_norms(profiles, "v1");
    write_text((out / "norms.json").string(), psych::norm_table_to_json(norms));
    std::cout << "scored " << profiles.size() << " participants -> "
              << (out / "profiles.csv").string() << "\n";
    return kExitOk;
  }

  if (cmd_ingest->parsed()) {
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(snapshots_dir)) {
      if (entry.is_directory()) dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<ingest::ParseIssue> issues;
    std::ostringstream csv_out;
    csv::Row header = {"participant_id"};
    for (const auto& name : ingest::PostFeatureSet::feature_names()) {
      header.push_back(name);
    }
    csv::write_row(csv_out, header);
    std::size_t count = 0;
    for (const auto& dir : dirs) {
      const auto snapshot = ingest::parse_snapshot(dir, issues);
      const auto features = ingest::derive_post_features(snapshot);
      csv::Row row = {snapshot.participant_id};
      for (const auto& value : features.values()) {
        row.push_back(value.has_value() ? csv::format_double(*value) : std::string());
      }
      csv::write_row(csv_out, row);
      ++count;
    }
    fs::create_directories(out);
    write_text((out / "post_features.csv").string(), csv_out.str());
    nlohmann::json issue_log = nlohmann::json::array();
    for (const auto& issue : issues) {
      issue_log.push_back(
          {{"file", issue.file}, {"line", issue.line}, {"message", issue.message}});
    }
    write_text((out / "ingest_issues.json").string(), issue_log.dump(2) + "\n");
    std::cout << "ingested " << count << " snapshots, " << issues.size()
              << " parse issues\n";
    return kExitOk;
  }

  if (cmd_catalog->parsed()) {
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(catalog_snapshots)) {
      if (entry.is_directory()) dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<ingest::ParseIssue> issues;
    std::vector<ingest::ProfileSnapshot> snapshots;
    for (const auto& dir : dirs) snapshots.push_back(ingest::parse_snapshot(dir, issues));
    const auto catalog = features::build_popular_catalog(snapshots, min_followers,
                                                         min_participants, "v1");
    fs::create_directories(out);
    write_text((out / "catalog.json").string(), features::catalog_to_json(catalog));
    std::cout << "catalog holds " << catalog.handles.size() << " accounts\n";
    return kExitOk;
  }

  if (cmd_features->parsed()) {
    const auto profiles = synth::read_profiles_csv(profiles_path);
    std::vector<ingest::ProfileSnapshot> snapshots;
    if (!features_snapshots.empty()) {
      std::vector<std::string> dirs;
      for (const auto& entry : fs::directory_iterator(features_snapshots)) {
        if (entry.is_directory()) dirs.push_back(entry.path().string());
      }
      std::sort(dirs.begin(), dirs.end());
      std::vector<ingest::ParseIssue> issues;
      for (const auto& dir : dirs) {
        snapshots.push_back(ingest::parse_snapshot(dir, issues));
      }
    }
    const auto catalog = features::catalog_from_json(read_text(catalog_path));
    std::vector<features::Demographics> demographics;
    if (!demographics_path.empty()) {
      demographics = features::read_demographics_csv(demographics_path);
    }
    std::vector<std::string> ids;
    for (const auto& p : profiles) ids.push_back(p.participant_id);
    const auto matrix = features::assemble_matrix(ids, snapshots, catalog, demographics);
    fs::create_directories(out);
    features::write_matrix_csv(matrix, (out / "features.csv").string());
    write_text((out / "features_catalog.json").string(),
               features::matrix_sidecar_json(matrix, catalog));
    std::cout << "matrix: " << matrix.n_rows() << " x " << matrix.n_cols() << "\n";
    return kExitOk;
  }

  if (cmd_select->parsed()) {
    const auto matrix = features::read_matrix_csv(
        sel_features, sel_sidecar);
    const auto profiles = synth::read_profiles_csv(sel_profiles);
    const auto norms = load_norms(sel_norms);
    const auto trait = psych::trait_from_slug(sel_trait);
    const auto scheme = psych::scheme_from_slug(sel_scheme);
    std::vector<std::size_t> rows;
    const auto labels = make_labels(profiles, norms, trait, scheme, rows);
    const auto sub = matrix.select_rows(rows);
    select::SelectionParams params{r_min, p_max};
    const auto selected = select::select_features(sub, labels, sel_trait, params);
    const auto target = select::target_indicator(labels);
    const auto correlations = select::correlate_features(sub, target.values);
    fs::create_directories(out);
    const std::string tag = sel_trait + "_" + sel_scheme;
    write_text((out / ("selected_" + tag + ".json")).string(),
               select::selected_set_to_json(selected));
    select::write_correlation_csv(correlations, sel_trait,
                                  (out / ("correlations_" + tag + ".csv")).string());
    std::cout << "selected " << selected.feature_names.size() << " features for "
              << tag << "\n";
    return kExitOk;
  }

  if (cmd_train->parsed()) {
    const auto matrix = features::read_matrix_csv(tr_features, tr_sidecar);
    const auto profiles = synth::read_profiles_csv(tr_profiles);
    const auto norms = load_norms(tr_norms);
    const auto selected = select::selected_set_from_json(read_text(tr_selected));
    const auto trait = psych::trait_from_slug(tr_trait);
    const auto scheme = psych::scheme_from_slug(tr_scheme);
    std::vector<std::size_t> rows;
    const auto labels = make_labels(profiles, norms, trait, scheme, rows);
    const auto sub =
        matrix.select_rows(rows).select_columns(selected.feature_names);
    learn::ModelSpec spec;
    spec.family = learn::family_from_slug(tr_family);
    spec.scheme = scheme;
    spec.seed = seed_given ? seed : learn::kDefaultMlpSeed;
    auto model = learn::fit_model(sub, labels, spec);
    model.provenance["trait"] = tr_trait;
    model.provenance["scheme"] = tr_scheme;
    model.provenance["family"] = tr_family;
    fs::create_directories(out);
    const std::string file =
        "model_" + tr_trait + "_" + tr_scheme + "_" + tr_family + ".json";
    write_text((out / file).string(), learn::model_to_json(model));
    std::cout << "trained " << file << "\n";
    return kExitOk;
  }

  if (cmd_evaluate->parsed()) {
    const auto model = learn::model_from_json(read_text(ev_model));
    const auto matrix = features::read_matrix_csv(ev_features, ev_sidecar);
    const auto profiles = synth::read_profiles_csv(ev_profiles);
    const auto norms = load_norms(ev_norms);
    const auto trait = psych::trait_from_slug(model.provenance.at("trait"));
    std::vector<std::size_t> rows;
    const auto labels = make_labels(profiles, norms, trait, model.spec.scheme, rows);
    const auto sub =
        matrix.select_rows(rows).select_columns(model.feature_names);
    const auto cell = eval::evaluate_model(model, sub, labels,
                                           model.provenance.at("trait"), seed);
    eval::EvaluationReport report;
    report.cells.push_back(cell);
    std::cout << eval::report_to_json(report);
    return kExitOk;
  }

  if (cmd_report->parsed()) {
    const auto report =
        eval::report_from_json(read_text((fs::path(report_run) / "evaluation.json").string()));
    const std::vector<std::string> family_order = {"dt", "lr", "glm", "mlp", "rf"};
    for (const auto scheme : {psych::Scheme::kTwo, psych::Scheme::kThree}) {
      bool any = false;
      for (const auto& cell : report.cells) any = any || cell.scheme == scheme;
      if (!any) continue;
      const auto rendered = eval::render_report(report, scheme, family_order);
      std::cout << rendered.text << "\n";
    }
    return kExitOk;
  }

  if (cmd_synth->parsed()) {
    synth_spec.seed = seed_given ? seed : synth_spec.seed;
    const auto cohort = synth::generate_synthetic_cohort(synth_spec);
    synth::write_cohort(cohort, out.string());
    std::cout << "cohort of " << cohort.profiles.size() << " participants -> "
              << out.string() << "\n";
    return kExitOk;
  }

  if (cmd_run->parsed()) {
    if (config_path.empty()) {
      throw ConfigError("run requires --config");
    }
    auto config = pipeline::load_config_file(config_path);
    if (seed_given) config.base_seed = seed;
    if (out_dir != ".") config.output_dir = out_dir;
    if (config.output_dir.empty()) {
      throw ConfigError("run requires an output directory (--out or config)");
    }
    const auto result = pipeline::run_pipeline(config);
    std::cout << "run complete: " << result.models_trained << " models in "
              << result.run_dir << "\n";
    for (const auto& warning : result.warnings) {
      std::cout << "warning: " << warning << "\n";
    }
    return kExitOk;
  }

  if (cmd_candidate->parsed()) {
    const auto report = pipeline::score_candidate(
        cand_run, cand_snapshot, cand_demographics,
        psych::scheme_from_slug(cand_scheme), learn::family_from_slug(cand_family));
    std::cout << pipeline::candidate_report_to_json(report);
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InsufficientDataError& e) {
    std::cerr << "insufficient data: " << e.what() << "\n";
    return kExitValidation;
  } catch (const UndefinedStatError& e) {
    std::cerr << "undefined statistic: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
}
