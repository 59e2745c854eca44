#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "traitpipe/learners.hpp"
#include "tree_builder.hpp"

namespace traitpipe::learn {

const std::string& family_slug(ModelFamily family) {
  static const std::array<std::string, 5> slugs = {"dt", "lr", "glm", "rf", "mlp"};
  return slugs[static_cast<std::size_t>(family)];
}

ModelFamily family_from_slug(const std::string& slug) {
  if (slug == "dt") return ModelFamily::kDecisionTree;
  if (slug == "lr") return ModelFamily::kLogisticRegression;
  if (slug == "glm") return ModelFamily::kGlm;
  if (slug == "rf") return ModelFamily::kRandomForest;
  if (slug == "mlp") return ModelFamily::kMlp;
  throw ConfigError("unknown model family: " + slug);
}

void validate_spec(const ModelSpec& spec) {
  if (spec.family == ModelFamily::kLogisticRegression &&
      spec.scheme != psych::Scheme::kTwo) {
    throw ConfigError("logistic regression only supports the two-level scheme");
  }
  if ((spec.family == ModelFamily::kRandomForest || spec.family == ModelFamily::kMlp) &&
      !spec.seed.has_value()) {
    throw ConfigError("seed is mandatory for " + family_slug(spec.family));
  }
  if (spec.family == ModelFamily::kDecisionTree || spec.family == ModelFamily::kRandomForest) {
    if (spec.tree.min_leaf < 1) {
      throw ConfigError("min_leaf must be >= 1");
    }
  }
  if (spec.family == ModelFamily::kRandomForest) {
    if (spec.forest.tree_grid.empty() || spec.forest.depth_grid.empty()) {
      throw ConfigError("random forest grid must not be empty");
    }
    for (const auto t : spec.forest.tree_grid) {
      if (t < 1) throw ConfigError("random forest grid: tree count must be >= 1");
    }
    for (const auto d : spec.forest.depth_grid) {
      if (d < 1) throw ConfigError("random forest grid: depth must be >= 1");
    }
    if (spec.forest.cv_folds < 2) {
      throw ConfigError("random forest cross-validation needs >= 2 folds");
    }
  }
  if (spec.family == ModelFamily::kMlp) {
    if (spec.mlp.epochs < 1) {
      throw ConfigError("mlp epochs must be >= 1");
    }
    if (spec.mlp.batch_size < 1) {
      throw ConfigError("mlp batch size must be >= 1");
    }
    for (const auto h : spec.mlp.hidden) {
      if (h < 1) throw ConfigError("mlp hidden widths must be >= 1");
    }
  }
  if (spec.family == ModelFamily::kLogisticRegression || spec.family == ModelFamily::kGlm) {
    if (spec.linear.lambda < 0.0) {
      throw ConfigError("regularization strength must be >= 0");
    }
    if (spec.linear.max_iterations < 1) {
      throw ConfigError("max iterations must be >= 1");
    }
  }
}

std::vector<psych::LabelValue> classes_for_scheme(psych::Scheme scheme) {
  if (scheme == psych::Scheme::kTwo) {
    return {psych::LabelValue::kLow, psych::LabelValue::kHigh};
  }
  return {psych::LabelValue::kLow, psych::LabelValue::kMedium, psych::LabelValue::kHigh};
}

std::vector<int> encode_labels(std::span<const psych::TraitLabel> labels,
                               psych::Scheme scheme) {
  const auto classes = classes_for_scheme(scheme);
  std::vector<int> y;
  y.reserve(labels.size());
  for (const auto& label : labels) {
    if (label.scheme != scheme) {
      throw ConfigError("label scheme does not match the model scheme");
    }
    const auto it = std::find(classes.begin(), classes.end(), label.value);
    if (it == classes.end()) {
      throw ConfigError("label value is not legal for the scheme");
    }
    y.push_back(static_cast<int>(it - classes.begin()));
  }
  return y;
}

TrainedModel fit_model(const features::FeatureMatrix& matrix,
                       std::span<const psych::TraitLabel> labels, const ModelSpec& spec) {
  validate_spec(spec);
  if (matrix.n_rows() != labels.size()) {
    throw ContractError("fit_model: rows/labels mismatch");
  }
  Preprocessing prep;
  prep.imputer = Imputer::fit(matrix);
  const auto imputed = prep.imputer.apply(matrix);
  auto [standardized, params] = standardize_fit_apply(imputed);
  prep.standardization = std::move(params);

  const auto trained_names = prep.imputer.output_names();
  TrainedModel model;
  switch (spec.family) {
    case ModelFamily::kDecisionTree:
      model = train_decision_tree(standardized, labels, spec, trained_names);
      break;
    case ModelFamily::kLogisticRegression:
      model = train_logistic_regression(standardized, labels, spec, trained_names);
      break;
    case ModelFamily::kGlm:
      model = train_glm(standardized, labels, spec, trained_names);
      break;
    case ModelFamily::kRandomForest:
      model = train_random_forest(standardized, labels, spec, trained_names);
      break;
    case ModelFamily::kMlp:
      model = train_mlp(standardized, labels, spec, trained_names);
      break;
  }
  // Callers address the model by the raw (pre-companion) column names.
  model.feature_names = prep.imputer.input_names();
  model.preprocessing = std::move(prep);
  return model;
}

namespace {

std::vector<double> payload_scores(const TrainedModel& model,
                                   std::span<const double> row) {
  const std::size_t n_classes = model.classes.size();
  if (const auto* tree = std::get_if<TreeModel>(&model.payload)) {
    const auto& counts = detail::tree_leaf_counts(*tree, row);
    double total = 0.0;
    for (const double c : counts) total += c;
    std::vector<double> scores(n_classes, 0.0);
    if (total > 0.0) {
      for (std::size_t k = 0; k < n_classes; ++k) scores[k] = counts[k] / total;
    } else {
      scores.assign(n_classes, 1.0 / static_cast<double>(n_classes));
    }
    return scores;
  }
  if (const auto* forest = std::get_if<ForestModel>(&model.payload)) {
    std::vector<double> votes(n_classes, 0.0);
    for (const auto& tree : forest->trees) {
      const auto& counts = detail::tree_leaf_counts(tree, row);
      votes[detail::argmax_index(counts)] += 1.0;
    }
    const double total = static_cast<double>(forest->trees.size());
    for (auto& v : votes) v /= total;
    return votes;
  }
  if (const auto* linear = std::get_if<LinearModel>(&model.payload)) {
    if (linear->weights.size() == 1) {
      const auto& w = linear->weights[0];
      double z = w[0];
      for (std::size_t c = 0; c < row.size(); ++c) z += w[c + 1] * row[c];
      const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                : std::exp(z) / (1.0 + std::exp(z));
      return {1.0 - p, p};
    }
    std::vector<double> logits(linear->weights.size());
    double max_logit = -1e300;
    for (std::size_t k = 0; k < linear->weights.size(); ++k) {
      const auto& w = linear->weights[k];
      double z = w[0];
      for (std::size_t c = 0; c < row.size(); ++c) z += w[c + 1] * row[c];
      logits[k] = z;
      max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (auto& z : logits) {
      z = std::exp(z - max_logit);
      sum += z;
    }
    for (auto& z : logits) z /= sum;
    return logits;
  }
  const auto& mlp = std::get<MlpModel>(model.payload);
  return detail::mlp_forward(mlp, row);
}

Prediction predict_dense(const TrainedModel& model, std::vector<double> row) {
  if (model.preprocessing.has_value()) {
    standardize_apply_row(row, model.preprocessing->standardization);
  }
  Prediction prediction;
  prediction.classes = model.classes;
  prediction.scores = payload_scores(model, row);
  const std::size_t best = detail::argmax_index(prediction.scores);
  prediction.label =
      psych::TraitLabel{model.spec.scheme, model.classes[best]};
  return prediction;
}

}  // namespace

Prediction predict_ordered(const TrainedModel& model, std::span<const Cell> cells) {
  if (cells.size() != model.feature_names.size()) {
    throw ContractError("predict: expected " +
                        std::to_string(model.feature_names.size()) + " features, got " +
                        std::to_string(cells.size()));
  }
  std::vector<double> row;
  if (model.preprocessing.has_value()) {
    row = model.preprocessing->imputer.apply_row(cells);
  } else {
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      if (!cell.has_value()) {
        throw ContractError(
            "predict: missing value supplied to a model without an imputation policy");
      }
      row.push_back(*cell);
    }
  }
  return predict_dense(model, std::move(row));
}

Prediction predict(const TrainedModel& model, std::span<const std::string> names,
                   std::span<const Cell> cells) {
  if (names.size() != cells.size()) {
    throw ContractError("predict: names/cells length mismatch");
  }
  std::vector<Cell> ordered(model.feature_names.size());
  std::vector<bool> seen(model.feature_names.size(), false);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it =
        std::find(model.feature_names.begin(), model.feature_names.end(), names[i]);
    if (it == model.feature_names.end()) {
      throw ContractError("predict: unknown feature '" + names[i] + "'");
    }
    const auto idx = static_cast<std::size_t>(it - model.feature_names.begin());
    if (seen[idx]) {
      throw ContractError("predict: feature '" + names[i] + "' supplied twice");
    }
    seen[idx] = true;
    ordered[idx] = cells[i];
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw ContractError("predict: feature '" + model.feature_names[i] +
                          "' is missing from the row");
    }
  }
  return predict_ordered(model, ordered);
}

}  // namespace traitpipe::learn
