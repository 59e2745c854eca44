#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "traitpipe/common.hpp"
#include "traitpipe/featureset.hpp"
#include "traitpipe/psychometrics.hpp"

namespace traitpipe::learn {

/// Dense row-major numeric matrix used by the trainers. No missing cells;
/// imputation happens before data reaches a trainer.
struct NumericMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  NumericMatrix() = default;
  NumericMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  [[nodiscard]] double at(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

/// Per-column location/scale with population (n denominator) convention.
/// Constant columns are flagged and map to all-zero.
struct StandardizationParams {
  std::vector<double> means;
  std::vector<double> sds;
  std::vector<bool> constant;

  [[nodiscard]] std::size_t size() const { return means.size(); }
};

[[nodiscard]] std::pair<NumericMatrix, StandardizationParams> standardize_fit_apply(
    const NumericMatrix& matrix);
[[nodiscard]] NumericMatrix standardize_apply(const NumericMatrix& matrix,
                                              const StandardizationParams& params);
void standardize_apply_row(std::span<double> row, const StandardizationParams& params);
[[nodiscard]] NumericMatrix standardize_invert(const NumericMatrix& matrix,
                                               const StandardizationParams& params);

/// Missing-cell policy fitted on training data: numeric cells take the
/// training median, following-indicator cells take 0 and gain a companion
/// <name>__was_missing column.
class Imputer {
 public:
  Imputer() = default;

  /// Fits on a (possibly missing-valued) matrix.
  static Imputer fit(const features::FeatureMatrix& matrix);

  /// Applies to one row of cells aligned with the fitted columns; output
  /// has companions appended.
  [[nodiscard]] std::vector<double> apply_row(std::span<const Cell> cells) const;

  /// Applies to every row of a matrix with the fitted column set.
  [[nodiscard]] NumericMatrix apply(const features::FeatureMatrix& matrix) const;

  [[nodiscard]] const std::vector<std::string>& input_names() const { return input_names_; }
  /// Input names plus appended companion column names.
  [[nodiscard]] std::vector<std::string> output_names() const;
  [[nodiscard]] std::size_t output_width() const;

  // Serialization support.
  [[nodiscard]] const std::vector<double>& fill_values() const { return fill_values_; }
  [[nodiscard]] const std::vector<std::size_t>& companion_columns() const {
    return companion_columns_;
  }
  static Imputer from_parts(std::vector<std::string> input_names,
                            std::vector<double> fill_values,
                            std::vector<std::size_t> companion_columns);

 private:
  std::vector<std::string> input_names_;
  std::vector<double> fill_values_;
  std::vector<std::size_t> companion_columns_;  // input columns with companions
};

enum class ModelFamily { kDecisionTree, kLogisticRegression, kGlm, kRandomForest, kMlp };

[[nodiscard]] const std::string& family_slug(ModelFamily family);
[[nodiscard]] ModelFamily family_from_slug(const std::string& slug);

struct TreeParams {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 2;
};

struct LinearParams {
  double lambda = 1e-2;       // L2 strength on the mean-log-likelihood scale
  double tolerance = 1e-8;    // max-norm parameter change
  std::size_t max_iterations = 500;
};

struct ForestParams {
  std::vector<std::size_t> tree_grid = {50, 100, 200};
  std::vector<std::size_t> depth_grid = {4, 8, 16};
  std::size_t min_leaf = 2;
  std::size_t cv_folds = 3;
};

struct MlpParams {
  std::vector<std::size_t> hidden = {50};
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  // Aggressive default; the per-epoch loss check halves it when a step
  // overshoots.
  double learning_rate = 0.3;
};

inline constexpr std::uint64_t kDefaultMlpSeed = 1992;

struct ModelSpec {
  ModelFamily family = ModelFamily::kDecisionTree;
  psych::Scheme scheme = psych::Scheme::kTwo;
  std::optional<std::uint64_t> seed;  // mandatory for RF and MLP
  TreeParams tree;
  LinearParams linear;
  ForestParams forest;
  MlpParams mlp;
};

/// Throws ConfigError when the spec violates its invariants (LR beyond the
/// two-level scheme, missing seed for RF/MLP, empty or out-of-range grids,
/// epochs < 1).
void validate_spec(const ModelSpec& spec);

// --- fitted payloads ------------------------------------------------------

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<double> class_counts;
};

struct TreeModel {
  std::vector<TreeNode> nodes;
};

struct CvCell {
  std::size_t trees = 0;
  std::size_t depth = 0;
  double mean_accuracy = 0.0;
};

struct ForestModel {
  std::vector<TreeModel> trees;
  std::size_t chosen_trees = 0;
  std::size_t chosen_depth = 0;
  std::vector<CvCell> cv_table;
};

struct LinearModel {
  // One weight row per logit: binomial keeps a single row, multinomial one
  // per class. Intercept first.
  std::size_t n_classes = 2;
  std::vector<std::vector<double>> weights;
};

struct MlpLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
};

struct MlpModel {
  std::vector<MlpLayer> layers;  // hidden layers then the softmax output layer
};

struct TrainingMeta {
  std::vector<double> loss_checkpoints;
  std::size_t iterations = 0;
  std::vector<std::string> notes;
};

/// Optional preprocessing carried by models fitted through fit_model.
struct Preprocessing {
  Imputer imputer;
  StandardizationParams standardization;
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<psych::LabelValue> classes;  // fixed order per scheme
  std::vector<std::string> feature_names;  // names callers must supply
  std::optional<Preprocessing> preprocessing;
  std::variant<TreeModel, ForestModel, LinearModel, MlpModel> payload;
  TrainingMeta meta;
  std::map<std::string, std::string> provenance;  // catalog version, trait, ...
};

// --- trainers (dense, already imputed; standardized for LR/GLM/MLP) -------

[[nodiscard]] TrainedModel train_decision_tree(const NumericMatrix& matrix,
                                               std::span<const psych::TraitLabel> labels,
                                               const ModelSpec& spec,
                                               std::vector<std::string> feature_names = {});

[[nodiscard]] TrainedModel train_logistic_regression(
    const NumericMatrix& matrix, std::span<const psych::TraitLabel> labels,
    const ModelSpec& spec, std::vector<std::string> feature_names = {});

[[nodiscard]] TrainedModel train_glm(const NumericMatrix& matrix,
                                     std::span<const psych::TraitLabel> labels,
                                     const ModelSpec& spec,
                                     std::vector<std::string> feature_names = {});

[[nodiscard]] TrainedModel train_random_forest(const NumericMatrix& matrix,
                                               std::span<const psych::TraitLabel> labels,
                                               const ModelSpec& spec,
                                               std::vector<std::string> feature_names = {});

[[nodiscard]] TrainedModel train_mlp(const NumericMatrix& matrix,
                                     std::span<const psych::TraitLabel> labels,
                                     const ModelSpec& spec,
                                     std::vector<std::string> feature_names = {});

/// End-to-end fit over a feature matrix that may contain missing cells:
/// impute (train statistics), standardize, train. The returned model
/// carries the preprocessing and applies it inside predict.
[[nodiscard]] TrainedModel fit_model(const features::FeatureMatrix& matrix,
                                     std::span<const psych::TraitLabel> labels,
                                     const ModelSpec& spec);

struct Prediction {
  psych::TraitLabel label;
  std::vector<psych::LabelValue> classes;
  std::vector<double> scores;  // aligned with classes, in [0,1], summing to 1
};

/// Predicts one named feature vector. Names must match the model's stored
/// feature list (any order); unknown or absent names raise ContractError.
/// Models without preprocessing require complete (non-missing) cells.
[[nodiscard]] Prediction predict(const TrainedModel& model,
                                 std::span<const std::string> names,
                                 std::span<const Cell> cells);

/// Predicts a row already aligned with the model's stored feature order.
[[nodiscard]] Prediction predict_ordered(const TrainedModel& model,
                                         std::span<const Cell> cells);

/// Versioned JSON serialization. Round-trip load -> predict equals
/// in-memory predict exactly.
[[nodiscard]] std::string model_to_json(const TrainedModel& model);
[[nodiscard]] TrainedModel model_from_json(const std::string& text);

/// Class list for a scheme, ordered low < medium < high.
[[nodiscard]] std::vector<psych::LabelValue> classes_for_scheme(psych::Scheme scheme);

/// Maps labels to indices in classes_for_scheme order. Throws ConfigError
/// when a label's scheme disagrees with `scheme`.
[[nodiscard]] std::vector<int> encode_labels(std::span<const psych::TraitLabel> labels,
                                             psych::Scheme scheme);

namespace detail {

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean negative log-likelihood of the binomial logit model plus
/// (lambda/2)*||w||^2; gradient over the full weight vector (intercept
/// first).
[[nodiscard]] LossGrad binomial_loss_grad(std::span<const double> weights,
                                          const NumericMatrix& matrix,
                                          std::span<const int> y, double lambda);

/// Mean multinomial cross-entropy with softmax over n_classes weight rows
/// (flattened row-major, intercept first in each row) plus L2.
[[nodiscard]] LossGrad multinomial_loss_grad(std::span<const double> weights_flat,
                                             std::size_t n_classes,
                                             const NumericMatrix& matrix,
                                             std::span<const int> y, double lambda);

/// Mean cross-entropy of an MLP with parameters supplied as a flat vector
/// in layer order (weights then bias per layer).
[[nodiscard]] LossGrad mlp_loss_grad(const MlpModel& shape,
                                     std::span<const double> params_flat,
                                     const NumericMatrix& matrix, std::span<const int> y);

[[nodiscard]] std::vector<double> flatten_mlp(const MlpModel& model);
void unflatten_mlp(MlpModel& model, std::span<const double> params_flat);

/// Seeded Glorot-uniform initialization for the given layer widths
/// (input, hidden..., n_classes).
[[nodiscard]] MlpModel init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

/// Internal MLP fit; unlike train_mlp it accepts epochs == 0 so tests can
/// observe the untrained seeded network.
[[nodiscard]] MlpModel fit_mlp(const NumericMatrix& matrix, std::span<const int> y,
                               std::size_t n_classes, const MlpParams& params,
                               std::uint64_t seed, TrainingMeta& meta);

/// Forward pass returning per-class probabilities.
[[nodiscard]] std::vector<double> mlp_forward(const MlpModel& model,
                                              std::span<const double> input);

}  // namespace detail

}  // namespace traitpipe::learn
