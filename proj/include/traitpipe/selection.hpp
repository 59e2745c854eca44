#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitpipe/common.hpp"
#include "traitpipe/featureset.hpp"
#include "traitpipe/psychometrics.hpp"

namespace traitpipe::select {

/// Pearson product-moment correlation over pairwise-complete observations.
/// Throws InsufficientDataError when fewer than 3 complete pairs exist and
/// UndefinedStatError when either vector is constant over them.
[[nodiscard]] double pearson(std::span<const Cell> x, std::span<const Cell> y);

/// Convenience overload for complete vectors.
[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);

/// Two-sided significance of a correlation via the t transform
/// t = r * sqrt((n-2) / (1-r^2)) against Student's t with n-2 degrees of
/// freedom. |r| = 1 gives p = 0.
[[nodiscard]] double pearson_pvalue(double r, std::size_t n);

/// Indicator of the modal class ("class of highest interest").
struct TargetIndicator {
  psych::LabelValue target_class = psych::LabelValue::kHigh;
  std::vector<double> values;  // 1 for the target class, 0 otherwise
};

/// Builds the modal-class indicator. Ties break toward the higher-ordered
/// class. Throws UndefinedStatError when only one class is present.
[[nodiscard]] TargetIndicator target_indicator(std::span<const psych::TraitLabel> labels);

/// One (feature, target) correlation result.
struct CorrelationRow {
  std::string feature;
  double r = 0.0;
  double p = 1.0;
  std::size_t n_effective = 0;
};

/// Correlations of every feature column against a target vector, skipping
/// features with undefined correlation (noted).
struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  std::vector<std::string> notes;  // skipped features with reason
};

[[nodiscard]] CorrelationReport correlate_features(const features::FeatureMatrix& matrix,
                                                   std::span<const double> target);

/// Writes `feature,trait,r,p,n` rows.
void write_correlation_csv(const CorrelationReport& report, const std::string& trait,
                           const std::string& path);

struct SelectionParams {
  double r_min = 0.01;
  double p_max = 0.05;
};

struct SelectedFeatureSet {
  std::string trait;
  psych::Scheme scheme = psych::Scheme::kTwo;
  psych::LabelValue target_class = psych::LabelValue::kHigh;
  SelectionParams params;
  std::vector<std::string> feature_names;  // ordered by |r| descending, then name
  std::vector<double> feature_r;           // aligned with feature_names
  std::vector<std::string> notes;
};

/// Keeps features whose signed correlation with the modal-class indicator
/// is >= r_min at significance p <= p_max, ordered by |r| descending then
/// name. Features with undefined correlation are skipped with a note. An
/// empty result is valid.
[[nodiscard]] SelectedFeatureSet select_features(const features::FeatureMatrix& matrix,
                                                 std::span<const psych::TraitLabel> labels,
                                                 const std::string& trait,
                                                 SelectionParams params = {});

/// Trains on the rows/features it is given and returns validation accuracy;
/// used by refine_features to score candidate subsets. Implementations may
/// throw; the failing subset is skipped with a note.
using SubsetScorer = std::function<double(
    const features::FeatureMatrix& train, std::span<const psych::TraitLabel> train_labels,
    const features::FeatureMatrix& validation,
    std::span<const psych::TraitLabel> validation_labels, std::uint64_t seed)>;

/// Deterministic greedy refinement of a selected set: a backward pass drops
/// candidates from the low-|r| end whenever validation accuracy does not
/// degrade, then a forward pass re-adds dropped candidates that strictly
/// improve it. Ties keep the smaller set. The validation split is seeded
/// and internal.
[[nodiscard]] SelectedFeatureSet refine_features(const features::FeatureMatrix& matrix,
                                                 std::span<const psych::TraitLabel> labels,
                                                 const SelectedFeatureSet& initial,
                                                 const SubsetScorer& scorer,
                                                 std::uint64_t seed);

[[nodiscard]] std::string selected_set_to_json(const SelectedFeatureSet& set);
[[nodiscard]] SelectedFeatureSet selected_set_from_json(const std::string& text);

}  // namespace traitpipe::select
