#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitpipe/common.hpp"
#include "traitpipe/learners.hpp"
#include "traitpipe/psychometrics.hpp"

namespace traitpipe::eval {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded uniform shuffle then prefix split: floor(ratio * n) rows train,
/// the rest test. Unstratified by default; the stratified variant balances
/// class shares across the partition.
[[nodiscard]] Split split_train_test(std::size_t n_rows, double ratio, std::uint64_t seed);

[[nodiscard]] Split split_train_test_stratified(std::span<const psych::TraitLabel> labels,
                                                double ratio, std::uint64_t seed);

/// k x k contingency counts with class order low < medium < high. For the
/// two-level scheme, High is the positive class.
struct ConfusionMatrix {
  std::vector<psych::LabelValue> classes;
  std::vector<double> counts;  // row = actual, col = predicted

  [[nodiscard]] std::size_t k() const { return classes.size(); }
  [[nodiscard]] double at(std::size_t actual, std::size_t predicted) const {
    return counts[actual * k() + predicted];
  }
  double& at(std::size_t actual, std::size_t predicted) {
    return counts[actual * k() + predicted];
  }
  [[nodiscard]] double total() const;
  [[nodiscard]] double trace() const;

  /// Two-level accessors (positive class = High).
  [[nodiscard]] double tp() const;
  [[nodiscard]] double fp() const;
  [[nodiscard]] double fn() const;
  [[nodiscard]] double tn() const;

  static ConfusionMatrix from_counts_two_level(double tp, double fp, double fn, double tn);
  static ConfusionMatrix tally(std::span<const psych::TraitLabel> actual,
                               std::span<const psych::TraitLabel> predicted);
};

struct TwoLevelMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when TP+FP = 0 (value forced to 0)
  bool recall_defined = true;     // false when TP+FN = 0
  bool f1_defined = true;
};

/// accuracy = (TP+TN)/(TP+FP+FN+TN), precision = TP/(TP+FP),
/// recall = TP/(TP+FN), F1 = harmonic mean. Zero denominators yield 0 with
/// the matching defined flag cleared. Throws ValidationError on an empty
/// matrix.
[[nodiscard]] TwoLevelMetrics metrics_two_level(const ConfusionMatrix& cm);

/// Per-class one-vs-rest F1 scores and class sizes, in class order.
struct PerClassF1 {
  std::vector<double> f1;
  std::vector<double> sizes;
};

[[nodiscard]] PerClassF1 per_class_f1(const ConfusionMatrix& cm);

/// Size-weighted mean of per-class F1 values. Throws ValidationError when
/// sizes do not sum above zero or the lists disagree in length.
[[nodiscard]] double weighted_f1(std::span<const double> per_class_f1,
                                 std::span<const double> class_sizes);

/// Probability that a random positive outranks a random negative, ties
/// counted half. Computed from average ranks; algebraically equal to the
/// pair-counting statistic and to trapezoidal ROC integration.
/// Throws UndefinedStatError when either class is absent.
[[nodiscard]] double roc_auc(std::span<const double> scores,
                             std::span<const psych::TraitLabel> labels);
[[nodiscard]] double roc_auc(std::span<const double> scores, std::span<const int> positive);

/// One evaluated (trait, family) cell.
struct EvalCell {
  std::string trait;
  std::string family;
  psych::Scheme scheme = psych::Scheme::kTwo;
  double accuracy = 0.0;
  std::optional<double> auc;        // two-level only
  std::optional<double> precision;  // two-level only
  std::optional<double> weighted_f1;  // three-level only
  std::vector<double> class_f1;
  std::vector<double> class_sizes;
  std::size_t n_test = 0;
  std::uint64_t split_seed = 0;
  std::vector<std::string> notes;
};

struct EvaluationReport {
  std::vector<EvalCell> cells;

  [[nodiscard]] const EvalCell* find(const std::string& trait, const std::string& family,
                                     psych::Scheme scheme) const;
};

/// Evaluates one model on test rows: tallies the confusion matrix and
/// fills the scheme's metric set. AUC uses the High-class score.
[[nodiscard]] EvalCell evaluate_model(const learn::TrainedModel& model,
                                      const features::FeatureMatrix& test_matrix,
                                      std::span<const psych::TraitLabel> test_labels,
                                      const std::string& trait, std::uint64_t split_seed);

/// Rendering: rows = traits, columns = families, best value per (trait,
/// metric) flagged. The flag is a boolean column in the CSV/JSON forms.
struct RenderedReport {
  std::string text;
  std::string csv;
  std::string json;
};

[[nodiscard]] RenderedReport render_report(const EvaluationReport& report,
                                           psych::Scheme scheme,
                                           std::span<const std::string> family_order);

/// Machine-readable archive of every evaluated cell; the `report`
/// subcommand re-renders tables from this file.
[[nodiscard]] std::string report_to_json(const EvaluationReport& report);
[[nodiscard]] EvaluationReport report_from_json(const std::string& text);

}  // namespace traitpipe::eval
