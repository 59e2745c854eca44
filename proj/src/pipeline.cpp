#include "traitpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/rng.hpp"

namespace traitpipe::pipeline {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(std::string("cannot open ") + what + ": " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw StageError("write", "cannot write " + path.string());
  }
  out << text;
}

json synthetic_to_json(const synth::SyntheticCohortSpec& spec) {
  json j;
  j["n_participants"] = spec.n_participants;
  j["catalog_width"] = spec.catalog_width;
  j["planted_per_trait"] = spec.planted_per_trait;
  j["effect_size"] = spec.effect_size;
  json overrides;
  for (const auto& [trait, e] : spec.effect_overrides) {
    overrides[psych::trait_slug(trait)] = e;
  }
  j["effect_overrides"] = std::move(overrides);
  j["label_noise"] = spec.label_noise;
  j["private_rate"] = spec.private_rate;
  j["disengaged_rate"] = spec.disengaged_rate;
  j["age_missing_rate"] = spec.age_missing_rate;
  j["occupation_missing_rate"] = spec.occupation_missing_rate;
  j["seed"] = spec.seed;
  return j;
}

synth::SyntheticCohortSpec synthetic_from_json(const json& j) {
  synth::SyntheticCohortSpec spec;
  spec.n_participants = j.value("n_participants", spec.n_participants);
  spec.catalog_width = j.value("catalog_width", spec.catalog_width);
  spec.planted_per_trait = j.value("planted_per_trait", spec.planted_per_trait);
  spec.effect_size = j.value("effect_size", spec.effect_size);
  if (j.contains("effect_overrides")) {
    for (const auto& [slug, e] : j.at("effect_overrides").items()) {
      spec.effect_overrides[psych::trait_from_slug(slug)] = e.get<double>();
    }
  }
  spec.label_noise = j.value("label_noise", spec.label_noise);
  spec.private_rate = j.value("private_rate", spec.private_rate);
  spec.disengaged_rate = j.value("disengaged_rate", spec.disengaged_rate);
  spec.age_missing_rate = j.value("age_missing_rate", spec.age_missing_rate);
  spec.occupation_missing_rate =
      j.value("occupation_missing_rate", spec.occupation_missing_rate);
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) {
  json j;
  json inputs;
  if (!config.responses_csv.empty()) inputs["responses_csv"] = config.responses_csv;
  if (!config.profiles_csv.empty()) inputs["profiles_csv"] = config.profiles_csv;
  if (config.synthetic.has_value()) inputs["synthetic"] = synthetic_to_json(*config.synthetic);
  if (!config.scoring_key_json.empty()) inputs["scoring_key"] = config.scoring_key_json;
  if (!config.snapshots_dir.empty()) inputs["snapshots_dir"] = config.snapshots_dir;
  if (!config.demographics_csv.empty()) inputs["demographics_csv"] = config.demographics_csv;
  if (!config.catalog_json.empty()) inputs["catalog_json"] = config.catalog_json;
  j["inputs"] = std::move(inputs);
  j["selection"] = {{"r_min", config.selection.r_min},
                    {"p_max", config.selection.p_max},
                    {"refine", config.refine}};
  j["catalog"] = {{"min_followers", config.catalog_min_followers},
                  {"min_participants", config.catalog_min_participants}};
  j["split"] = {{"ratio", config.split_ratio}, {"stratified", config.stratified_split}};
  json schemes = json::array();
  for (const auto s : config.schemes) schemes.push_back(psych::scheme_slug(s));
  j["schemes"] = std::move(schemes);
  json families = json::array();
  for (const auto f : config.families) families.push_back(learn::family_slug(f));
  j["families"] = std::move(families);
  if (!config.traits.empty()) {
    json traits = json::array();
    for (const auto t : config.traits) traits.push_back(psych::trait_slug(t));
    j["traits"] = std::move(traits);
  }
  j["models"] = {
      {"tree", {{"max_depth", config.tree.max_depth}, {"min_leaf", config.tree.min_leaf}}},
      {"linear",
       {{"lambda", config.linear.lambda},
        {"tolerance", config.linear.tolerance},
        {"max_iterations", config.linear.max_iterations}}},
      {"forest",
       {{"tree_grid", config.forest.tree_grid},
        {"depth_grid", config.forest.depth_grid},
        {"min_leaf", config.forest.min_leaf},
        {"cv_folds", config.forest.cv_folds}}},
      {"mlp",
       {{"hidden", config.mlp.hidden},
        {"epochs", config.mlp.epochs},
        {"batch_size", config.mlp.batch_size},
        {"learning_rate", config.mlp.learning_rate}}}};
  if (config.base_seed.has_value()) j["base_seed"] = *config.base_seed;
  j["threads"] = config.threads;
  return j.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config JSON parse error: ") + e.what());
  }
  try {
    PipelineConfig config;
    if (j.contains("inputs")) {
      const auto& inputs = j.at("inputs");
      config.responses_csv = inputs.value("responses_csv", "");
      config.profiles_csv = inputs.value("profiles_csv", "");
      if (inputs.contains("synthetic")) {
        config.synthetic = synthetic_from_json(inputs.at("synthetic"));
      }
      config.scoring_key_json = inputs.value("scoring_key", "");
      config.snapshots_dir = inputs.value("snapshots_dir", "");
      config.demographics_csv = inputs.value("demographics_csv", "");
      config.catalog_json = inputs.value("catalog_json", "");
    }
    if (j.contains("selection")) {
      config.selection.r_min = j.at("selection").value("r_min", config.selection.r_min);
      config.selection.p_max = j.at("selection").value("p_max", config.selection.p_max);
      config.refine = j.at("selection").value("refine", false);
    }
    if (j.contains("catalog")) {
      config.catalog_min_followers =
          j.at("catalog").value("min_followers", config.catalog_min_followers);
      config.catalog_min_participants =
          j.at("catalog").value("min_participants", config.catalog_min_participants);
    }
    if (j.contains("split")) {
      config.split_ratio = j.at("split").value("ratio", config.split_ratio);
      config.stratified_split = j.at("split").value("stratified", false);
    }
    if (j.contains("schemes")) {
      config.schemes.clear();
      for (const auto& s : j.at("schemes")) {
        config.schemes.push_back(psych::scheme_from_slug(s.get<std::string>()));
      }
    }
    if (j.contains("families")) {
      config.families.clear();
      for (const auto& f : j.at("families")) {
        config.families.push_back(learn::family_from_slug(f.get<std::string>()));
      }
    }
    if (j.contains("traits")) {
      for (const auto& t : j.at("traits")) {
        config.traits.push_back(psych::trait_from_slug(t.get<std::string>()));
      }
    }
    if (j.contains("models")) {
      const auto& models = j.at("models");
      if (models.contains("tree")) {
        config.tree.max_depth = models.at("tree").value("max_depth", config.tree.max_depth);
        config.tree.min_leaf = models.at("tree").value("min_leaf", config.tree.min_leaf);
      }
      if (models.contains("linear")) {
        config.linear.lambda = models.at("linear").value("lambda", config.linear.lambda);
        config.linear.tolerance =
            models.at("linear").value("tolerance", config.linear.tolerance);
        config.linear.max_iterations =
            models.at("linear").value("max_iterations", config.linear.max_iterations);
      }
      if (models.contains("forest")) {
        const auto& forest = models.at("forest");
        if (forest.contains("tree_grid")) {
          config.forest.tree_grid = forest.at("tree_grid").get<std::vector<std::size_t>>();
        }
        if (forest.contains("depth_grid")) {
          config.forest.depth_grid =
              forest.at("depth_grid").get<std::vector<std::size_t>>();
        }
        config.forest.min_leaf = forest.value("min_leaf", config.forest.min_leaf);
        config.forest.cv_folds = forest.value("cv_folds", config.forest.cv_folds);
      }
      if (models.contains("mlp")) {
        const auto& mlp = models.at("mlp");
        if (mlp.contains("hidden")) {
          config.mlp.hidden = mlp.at("hidden").get<std::vector<std::size_t>>();
        }
        config.mlp.epochs = mlp.value("epochs", config.mlp.epochs);
        config.mlp.batch_size = mlp.value("batch_size", config.mlp.batch_size);
        config.mlp.learning_rate = mlp.value("learning_rate", config.mlp.learning_rate);
      }
    }
    if (j.contains("base_seed")) config.base_seed = j.at("base_seed").get<std::uint64_t>();
    config.threads = j.value("threads", std::size_t{0});
    return config;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config JSON field error: ") + e.what());
  }
}

PipelineConfig load_config_file(const std::string& path) {
  const auto text = read_text_file(path, "config");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config JSON parse error: ") + e.what());
  }
  // A run manifest embeds the config it was produced from; accept either
  // form so a manifest can reproduce its run directly.
  if (j.contains("config") && j.contains("status")) {
    return config_from_json(j.at("config").dump());
  }
  return config_from_json(text);
}

namespace {

struct LabelSet {
  // Row indices (into the matrix) with a complete score for the trait.
  std::vector<std::size_t> rows;
  std::vector<psych::TraitLabel> labels;  // aligned with rows
};

struct Job {
  psych::TraitId trait;
  psych::Scheme scheme;
};

struct JobResult {
  std::vector<eval::EvalCell> cells;
  std::vector<std::string> notes;
  std::size_t models_trained = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

learn::ModelSpec make_spec(const PipelineConfig& config, learn::ModelFamily family,
                           psych::Scheme scheme, std::uint64_t seed) {
  learn::ModelSpec spec;
  spec.family = family;
  spec.scheme = scheme;
  spec.seed = seed;
  spec.tree = config.tree;
  spec.linear = config.linear;
  spec.forest = config.forest;
  spec.mlp = config.mlp;
  return spec;
}

/// Runs fn(0..n-1) on up to `threads` workers; results land in a
/// pre-sized vector so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) break;
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(n);
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config) {
  if (!config.base_seed.has_value()) {
    throw ConfigError("run_pipeline: base_seed is mandatory");
  }
  if (config.output_dir.empty()) {
    throw ConfigError("run_pipeline: output_dir is required");
  }
  const std::uint64_t base_seed = *config.base_seed;
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  RunResult result;
  result.run_dir = out_dir.string();

  json manifest;
  manifest["schema_version"] = 1;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["status"] = "incomplete";
  json stage_log = json::array();
  json outputs = json::array();
  auto flush_manifest = [&] {
    manifest["stages"] = stage_log;
    manifest["outputs"] = outputs;
    json warnings = json::array();
    for (const auto& w : result.warnings) warnings.push_back(w);
    manifest["warnings"] = std::move(warnings);
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  };
  auto record_output = [&](const std::string& name, const std::string& content) {
    write_text_file(out_dir / name, content);
    outputs.push_back(name);
  };

  std::string stage = "load-profiles";
  try {
    // ---- load or score profiles --------------------------------------
    std::vector<psych::TraitProfile> profiles;
    std::vector<ingest::ProfileSnapshot> snapshots;
    std::vector<features::Demographics> demographics;

    if (config.synthetic.has_value()) {
      const auto cohort = synth::generate_synthetic_cohort(*config.synthetic);
      profiles = cohort.profiles;
      snapshots = cohort.snapshots;
      demographics = cohort.demographics;
      record_output("ground_truth.json",
                    synth::ground_truth_to_json(cohort.truth, cohort.spec));
    } else if (!config.profiles_csv.empty()) {
      profiles = synth::read_profiles_csv(config.profiles_csv);
    } else if (!config.responses_csv.empty()) {
      const auto key = config.scoring_key_json.empty()
                           ? psych::default_scoring_key()
                           : psych::scoring_key_from_json(
                                 read_text_file(config.scoring_key_json, "scoring key"));
      for (const auto& row : psych::read_responses_csv(config.responses_csv)) {
        profiles.push_back(psych::score_questionnaire(row, key));
      }
    } else {
      throw ConfigError("config must supply responses_csv, profiles_csv or synthetic");
    }
    if (profiles.empty()) {
      throw ValidationError("no participants in input");
    }
    stage_log.push_back({{"stage", stage}, {"status", "ok"}});

    // ---- norms and labels ---------------------------------------------
    stage = "norms";
    const auto norms = psych::compute_norms(profiles, "v1");
    record_output("norms.json", psych::norm_table_to_json(norms));
    stage_log.push_back({{"stage", stage}, {"status", "ok"}});

    // ---- ingest ---------------------------------------------------------
    stage = "ingest";
    if (!config.synthetic.has_value()) {
      if (!config.snapshots_dir.empty()) {
        std::vector<std::string> dirs;
        for (const auto& entry : fs::directory_iterator(config.snapshots_dir)) {
          if (entry.is_directory()) dirs.push_back(entry.path().string());
        }
        std::sort(dirs.begin(), dirs.end());
        std::vector<ingest::ParseIssue> issues;
        for (const auto& dir : dirs) {
          snapshots.push_back(ingest::parse_snapshot(dir, issues));
        }
        if (!issues.empty()) {
          json issue_log = json::array();
          for (const auto& issue : issues) {
            issue_log.push_back({{"file", issue.file},
                                 {"line", issue.line},
                                 {"message", issue.message}});
          }
          record_output("ingest_issues.json", issue_log.dump(2) + "\n");
        }
      } else {
        result.warnings.push_back(
            "no snapshot directory supplied; building a demographics-only matrix");
      }
      if (!config.demographics_csv.empty()) {
        demographics = features::read_demographics_csv(config.demographics_csv);
      }
    }
    stage_log.push_back({{"stage", stage}, {"status", "ok"}});

    // ---- catalog ---------------------------------------------------------
    stage = "catalog";
    features::PopularAccountCatalog catalog;
    bool any_public = false;
    for (const auto& s : snapshots) any_public = any_public || !s.is_private;
    if (!config.catalog_json.empty()) {
      catalog = features::catalog_from_json(
          read_text_file(config.catalog_json, "catalog"));
    } else if (any_public) {
      catalog = features::build_popular_catalog(snapshots, config.catalog_min_followers,
                                                config.catalog_min_participants, "v1");
    } else {
      catalog.cohort_version = "v1";
      catalog.min_followers = config.catalog_min_followers;
      catalog.min_participants = config.catalog_min_participants;
      if (!snapshots.empty()) {
        result.warnings.push_back("no public snapshots; catalog is empty");
      }
    }
    record_output("catalog.json", features::catalog_to_json(catalog));
    stage_log.push_back(
        {{"stage", stage}, {"status", "ok"}, {"catalog_size", catalog.handles.size()}});

    // ---- matrix ---------------------------------------------------------
    stage = "matrix";
    std::vector<std::string> participant_ids;
    for (const auto& p : profiles) participant_ids.push_back(p.participant_id);
    const auto matrix =
        features::assemble_matrix(participant_ids, snapshots, catalog, demographics);
    features::write_matrix_csv(matrix, (out_dir / "features.csv").string());
    outputs.push_back("features.csv");
    record_output("features_catalog.json", features::matrix_sidecar_json(matrix, catalog));
    stage_log.push_back({{"stage", stage},
                         {"status", "ok"},
                         {"rows", matrix.n_rows()},
                         {"columns", matrix.n_cols()}});

    // ---- split ------------------------------------------------------------
    stage = "split";
    const std::uint64_t split_seed = Rng::derive(base_seed, "split");
    const auto split = eval::split_train_test(matrix.n_rows(), config.split_ratio,
                                              split_seed);
    stage_log.push_back({{"stage", stage},
                         {"status", "ok"},
                         {"train", split.train.size()},
                         {"test", split.test.size()}});

    // ---- per-(trait, scheme) jobs -----------------------------------------
    stage = "select/train/evaluate";
    const auto traits =
        config.traits.empty()
            ? std::vector<psych::TraitId>(psych::all_traits().begin(),
                                          psych::all_traits().end())
            : config.traits;

    std::vector<Job> jobs;
    for (const auto trait : traits) {
      for (const auto scheme : config.schemes) {
        jobs.push_back(Job{trait, scheme});
      }
    }
    std::vector<JobResult> job_results(jobs.size());
    json seed_table;

    const std::size_t threads =
        config.threads > 0
            ? config.threads
            : std::max<std::size_t>(1, std::thread::hardware_concurrency());

    auto run_job_inner = [&](std::size_t job_index) {
      const auto& job = jobs[job_index];
      auto& job_result = job_results[job_index];
      const std::string trait = psych::trait_slug(job.trait);
      const std::string scheme = psych::scheme_slug(job.scheme);
      const std::string tag = trait + "_" + scheme;

      // Labels over rows with a complete score for this trait.
      const auto& norm = norms.entry_for(job.trait);
      LabelSet all_rows;
      for (std::size_t r = 0; r < profiles.size(); ++r) {
        const auto it = profiles[r].scores.find(job.trait);
        if (it == profiles[r].scores.end()) continue;
        all_rows.rows.push_back(r);
        all_rows.labels.push_back(psych::bin_score(it->second, norm, job.scheme));
      }
      std::vector<std::size_t> train_rows, test_rows;
      std::vector<psych::TraitLabel> train_labels, test_labels;
      if (config.stratified_split) {
        // Per-trait stratification: the global split cannot balance 42
        // different label sets at once.
        const auto local = eval::split_train_test_stratified(
            all_rows.labels, config.split_ratio,
            Rng::derive(base_seed, "split-" + tag));
        for (const auto i : local.train) {
          train_rows.push_back(all_rows.rows[i]);
          train_labels.push_back(all_rows.labels[i]);
        }
        for (const auto i : local.test) {
          test_rows.push_back(all_rows.rows[i]);
          test_labels.push_back(all_rows.labels[i]);
        }
      } else {
        for (std::size_t i = 0; i < all_rows.rows.size(); ++i) {
          const auto r = all_rows.rows[i];
          const bool in_train =
              std::find(split.train.begin(), split.train.end(), r) != split.train.end();
          if (in_train) {
            train_rows.push_back(r);
            train_labels.push_back(all_rows.labels[i]);
          } else {
            test_rows.push_back(r);
            test_labels.push_back(all_rows.labels[i]);
          }
        }
      }
      if (train_labels.size() < 5 || test_labels.empty()) {
        job_result.notes.push_back(tag + ": too few labeled rows, skipped");
        job_result.skipped += config.families.size();
        return;
      }

      const auto train_matrix = matrix.select_rows(train_rows);
      const auto test_matrix = matrix.select_rows(test_rows);

      // Selection runs on the training partition only.
      select::SelectedFeatureSet selected;
      selected.trait = trait;
      selected.scheme = job.scheme;
      selected.params = config.selection;
      try {
        selected = select::select_features(train_matrix, train_labels, trait,
                                           config.selection);
        const auto target = select::target_indicator(train_labels);
        const auto correlations = select::correlate_features(train_matrix, target.values);
        std::ostringstream corr_csv;
        csv::write_row(corr_csv, {"feature", "trait", "r", "p", "n"});
        for (const auto& row : correlations.rows) {
          csv::write_row(corr_csv,
                         {row.feature, trait, csv::format_double(row.r),
                          csv::format_double(row.p), std::to_string(row.n_effective)});
        }
        job_result.files.emplace_back("correlations_" + tag + ".csv", corr_csv.str());
      } catch (const UndefinedStatError& e) {
        job_result.notes.push_back(tag + ": selection degenerate (" + e.what() +
                                   "), using no features");
      }

      if (config.refine && !selected.feature_names.empty()) {
        const auto scorer = [&config](const features::FeatureMatrix& train,
                                      std::span<const psych::TraitLabel> tl,
                                      const features::FeatureMatrix& validation,
                                      std::span<const psych::TraitLabel> vl,
                                      std::uint64_t seed) {
          auto spec = make_spec(config, learn::ModelFamily::kDecisionTree,
                                tl.front().scheme, seed);
          const auto model = learn::fit_model(train, tl, spec);
          std::size_t correct = 0;
          std::vector<Cell> row(validation.n_cols());
          for (std::size_t r = 0; r < validation.n_rows(); ++r) {
            for (std::size_t c = 0; c < validation.n_cols(); ++c) {
              row[c] = validation.at(r, c);
            }
            if (learn::predict_ordered(model, row).label == vl[r]) ++correct;
          }
          return static_cast<double>(correct) /
                 static_cast<double>(std::max<std::size_t>(1, validation.n_rows()));
        };
        selected = select::refine_features(train_matrix, train_labels, selected, scorer,
                                           Rng::derive(base_seed, "refine-" + tag));
      }
      job_result.files.emplace_back("selected_" + tag + ".json",
                                    select::selected_set_to_json(selected));

      const auto train_selected = train_matrix.select_columns(selected.feature_names);
      const auto test_selected = test_matrix.select_columns(selected.feature_names);

      for (const auto family : config.families) {
        if (family == learn::ModelFamily::kLogisticRegression &&
            job.scheme != psych::Scheme::kTwo) {
          job_result.notes.push_back(tag + ": lr skipped (binary-only family)");
          job_result.skipped += 1;
          continue;
        }
        const std::string family_name = learn::family_slug(family);
        const std::uint64_t seed =
            Rng::derive(base_seed, "train-" + tag + "-" + family_name);
        auto spec = make_spec(config, family, job.scheme, seed);
        auto model = learn::fit_model(train_selected, train_labels, spec);
        model.provenance["trait"] = trait;
        model.provenance["scheme"] = scheme;
        model.provenance["family"] = family_name;
        model.provenance["catalog_version"] = catalog.cohort_version;
        model.provenance["norms_version"] = norms.version;
        model.provenance["seed"] = std::to_string(seed);
        job_result.files.emplace_back("model_" + tag + "_" + family_name + ".json",
                                      learn::model_to_json(model));
        job_result.models_trained += 1;

        auto cell = eval::evaluate_model(model, test_selected, test_labels, trait,
                                         split_seed);
        job_result.cells.push_back(std::move(cell));
      }
    };

    // Failures carry the offending (trait, scheme) tag up into the manifest.
    auto run_job = [&](std::size_t job_index) {
      try {
        run_job_inner(job_index);
      } catch (const Error& e) {
        const std::string tag = psych::trait_slug(jobs[job_index].trait) + "_" +
                                psych::scheme_slug(jobs[job_index].scheme);
        throw StageError("select/train/evaluate(" + tag + ")", e.what());
      }
    };
    parallel_for(jobs.size(), threads, run_job);

    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto& job_result = job_results[i];
      for (const auto& [name, content] : job_result.files) {
        record_output(name, content);
      }
      for (const auto& note : job_result.notes) result.warnings.push_back(note);
      for (const auto& cell : job_result.cells) result.report.cells.push_back(cell);
      result.models_trained += job_result.models_trained;
      result.jobs_skipped += job_result.skipped;
      const std::string tag = psych::trait_slug(jobs[i].trait) + "_" +
                              psych::scheme_slug(jobs[i].scheme);
      for (const auto family : config.families) {
        seed_table[tag + "_" + learn::family_slug(family)] =
            Rng::derive(base_seed, "train-" + tag + "-" + learn::family_slug(family));
      }
    }
    stage_log.push_back({{"stage", stage},
                         {"status", "ok"},
                         {"models_trained", result.models_trained},
                         {"skipped", result.jobs_skipped}});

    // ---- report -------------------------------------------------------------
    stage = "report";
    record_output("evaluation.json", eval::report_to_json(result.report));
    std::vector<std::string> family_order;
    for (const auto family : config.families) {
      family_order.push_back(learn::family_slug(family));
    }
    for (const auto scheme : config.schemes) {
      const auto rendered = eval::render_report(result.report, scheme, family_order);
      const std::string scheme_name = psych::scheme_slug(scheme);
      record_output("report_" + scheme_name + "_level.txt", rendered.text);
      record_output("report_" + scheme_name + "_level.csv", rendered.csv);
      record_output("report_" + scheme_name + "_level.json", rendered.json);
    }
    stage_log.push_back({{"stage", stage}, {"status", "ok"}});

    manifest["base_seed"] = base_seed;
    manifest["split_seed"] = split_seed;
    manifest["derived_seeds"] = std::move(seed_table);
    manifest["models_trained"] = result.models_trained;
    manifest["jobs_skipped"] = result.jobs_skipped;
    manifest["status"] = "complete";
    flush_manifest();
    return result;
  } catch (const Error& e) {
    stage_log.push_back({{"stage", stage}, {"status", "failed"}, {"error", e.what()}});
    manifest["status"] = "incomplete";
    flush_manifest();
    throw StageError(stage, e.what());
  }
}

CandidateReport score_candidate(const std::string& run_dir,
                                const std::string& snapshot_dir,
                                const std::string& demographics_csv,
                                psych::Scheme scheme, learn::ModelFamily family) {
  const fs::path dir(run_dir);
  const auto catalog =
      features::catalog_from_json(read_text_file((dir / "catalog.json").string(),
                                                 "catalog"));

  CandidateReport report;
  std::vector<ingest::ProfileSnapshot> snapshots;
  if (!snapshot_dir.empty()) {
    std::vector<ingest::ParseIssue> issues;
    auto snapshot = ingest::parse_snapshot(snapshot_dir, issues);
    report.participant_id = snapshot.participant_id;
    report.low_coverage = snapshot.is_private;
    snapshots.push_back(std::move(snapshot));
  } else {
    report.participant_id = "candidate";
    report.low_coverage = true;
  }

  std::vector<features::Demographics> demographics;
  if (!demographics_csv.empty()) {
    demographics = features::read_demographics_csv(demographics_csv);
    if (demographics.size() != 1) {
      throw ValidationError("candidate demographics CSV must contain exactly one row");
    }
    demographics.front().participant_id =
        report.participant_id.empty() ? "candidate" : report.participant_id;
    if (report.participant_id.empty()) report.participant_id = "candidate";
  }
  if (!snapshots.empty() && !snapshots.front().participant_id.empty()) {
    report.participant_id = snapshots.front().participant_id;
  }

  const std::vector<std::string> ids = {report.participant_id};
  const auto matrix = features::assemble_matrix(ids, snapshots, catalog, demographics);

  report.provenance["run_dir"] = run_dir;
  report.provenance["catalog_version"] = catalog.cohort_version;
  report.provenance["scheme"] = psych::scheme_slug(scheme);
  report.provenance["family"] = learn::family_slug(family);

  for (const auto trait : psych::all_traits()) {
    const std::string file = "model_" + psych::trait_slug(trait) + "_" +
                             psych::scheme_slug(scheme) + "_" +
                             learn::family_slug(family) + ".json";
    const fs::path path = dir / file;
    if (!fs::exists(path)) {
      continue;  // run did not cover this trait
    }
    const auto model = learn::model_from_json(read_text_file(path.string(), "model"));
    const auto it = model.provenance.find("catalog_version");
    if (it == model.provenance.end() || it->second != catalog.cohort_version) {
      throw ContractError("model " + file + " was trained against catalog version '" +
                          (it == model.provenance.end() ? std::string("?") : it->second) +
                          "' but the run directory holds '" + catalog.cohort_version +
                          "'; refusing to score");
    }
    std::vector<Cell> cells;
    cells.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) {
      const auto col = matrix.columns.index_of(name);
      if (!col.has_value()) {
        throw ContractError("model feature '" + name +
                            "' is not produced by the feature assembly");
      }
      cells.push_back(matrix.at(0, *col));
    }
    const auto prediction = learn::predict_ordered(model, cells);
    CandidateScore score;
    score.trait = psych::trait_slug(trait);
    score.label = prediction.label;
    score.classes = prediction.classes;
    score.scores = prediction.scores;
    report.traits.push_back(std::move(score));
    const auto seed_it = model.provenance.find("seed");
    if (seed_it != model.provenance.end()) {
      report.provenance["seed_" + psych::trait_slug(trait)] = seed_it->second;
    }
  }
  if (report.traits.empty()) {
    throw SchemaError("run directory holds no models for scheme " +
                      psych::scheme_slug(scheme) + ", family " +
                      learn::family_slug(family));
  }
  return report;
}

std::string candidate_report_to_json(const CandidateReport& report) {
  json j;
  j["schema_version"] = 1;
  j["participant_id"] = report.participant_id;
  j["low_coverage"] = report.low_coverage;
  json traits = json::array();
  for (const auto& t : report.traits) {
    json entry;
    entry["trait"] = t.trait;
    entry["label"] = psych::label_slug(t.label.value);
    json scores;
    for (std::size_t k = 0; k < t.classes.size(); ++k) {
      scores[psych::label_slug(t.classes[k])] = t.scores[k];
    }
    entry["scores"] = std::move(scores);
    traits.push_back(std::move(entry));
  }
  j["traits"] = std::move(traits);
  j["provenance"] = report.provenance;
  return j.dump(2) + "\n";
}

}  // namespace traitpipe::pipeline
