#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitpipe/common.hpp"

namespace traitpipe::psych {

/// The 21 target traits: 5 personality factors followed by 16 behavioral
/// competencies. Order is canonical and used for report rows.
enum class TraitId {
  kNeuroticism,
  kExtraversion,
  kOpenness,
  kAgreeableness,
  kConscientiousness,
  kInnovation,
  kNegotiation,
  kCommunication,
  kGainingCommitment,
  kSalesAbility,
  kStrategicDecisionMaking,
  kStressTolerance,
  kInitiative,
  kWorkStandards,
  kDecisionMaking,
  kTeamwork,
  kEnergy,
  kPlanningOrganizing,
  kFollowUp,
  kContinuousLearning,
  kQualityOrientation,
};

inline constexpr std::size_t kTraitCount = 21;

/// All 21 traits in canonical order.
[[nodiscard]] std::span<const TraitId> all_traits();

/// Stable snake_case identifier used in file names and CSV columns.
[[nodiscard]] const std::string& trait_slug(TraitId trait);

/// Human-readable display name.
[[nodiscard]] const std::string& trait_display_name(TraitId trait);

/// Inverse of trait_slug. Throws ValidationError on unknown slug.
[[nodiscard]] TraitId trait_from_slug(const std::string& slug);

enum class Scheme { kTwo, kThree };

[[nodiscard]] const std::string& scheme_slug(Scheme scheme);
[[nodiscard]] Scheme scheme_from_slug(const std::string& slug);

enum class LabelValue { kLow, kMedium, kHigh };

[[nodiscard]] const std::string& label_slug(LabelValue value);
[[nodiscard]] LabelValue label_from_slug(const std::string& slug);

/// A class label under one binning scheme.
struct TraitLabel {
  Scheme scheme = Scheme::kTwo;
  LabelValue value = LabelValue::kLow;

  bool operator==(const TraitLabel&) const = default;
};

/// One questionnaire item's contribution to a trait score.
/// points = direction * answer + offset, so a reverse-keyed 0..4 item is
/// {direction = -1, offset = 4}.
struct KeyItem {
  int index = 0;  // 1-based position in the response row (column q<index>)
  int direction = 1;
  int offset = 0;
};

/// Scoring rule for one trait.
struct TraitKey {
  TraitId trait = TraitId::kNeuroticism;
  std::vector<KeyItem> items;
  int answer_min = 0;  // legal per-item answer range
  int answer_max = 4;

  [[nodiscard]] double min_total() const;
  [[nodiscard]] double max_total() const;
};

/// A full questionnaire scoring key: disjoint item sets, one per trait.
struct ScoringKey {
  std::string version = "default-1";
  std::vector<TraitKey> traits;

  /// Validates the structural invariants: every trait present exactly once,
  /// at least one item per trait, item indices disjoint and >= 1.
  void validate() const;

  [[nodiscard]] const TraitKey& key_for(TraitId trait) const;

  /// Highest item index referenced by any trait.
  [[nodiscard]] int item_count() const;
};

/// Default instrument: 60 personality items (12 per factor, 0..4) followed
/// by 72 competency items sized per the published score ranges. Real
/// instruments supply their own key file; this one keeps the pipeline
/// runnable end to end.
[[nodiscard]] ScoringKey default_scoring_key();

/// Scored questionnaire for one participant.
struct TraitProfile {
  std::string participant_id;
  std::map<TraitId, double> scores;          // only complete traits
  std::vector<TraitId> incomplete;           // traits with missing items

  [[nodiscard]] bool is_complete(TraitId trait) const;
};

/// Per-item answers for one participant; missing answers are allowed and
/// flag the owning trait incomplete.
struct ResponseRow {
  std::string participant_id;
  std::vector<std::optional<int>> answers;  // answers[i] is item i+1
};

/// Scores one participant's answers against a key.
/// Throws ValidationError when an answer is outside the item range and
/// SchemaError when the key references an item the row does not have.
[[nodiscard]] TraitProfile score_questionnaire(const ResponseRow& responses,
                                               const ScoringKey& key);

/// Cohort norm for one trait.
struct NormEntry {
  double mean = 0.0;
  double sd = 0.0;   // sample (n-1) standard deviation
  std::size_t n = 0;
};

/// Frozen per-trait norms for one cohort version. Updating norms means
/// computing a new table under a new version, never mutating this one.
struct NormTable {
  std::string version;
  std::map<TraitId, NormEntry> entries;

  [[nodiscard]] const NormEntry& entry_for(TraitId trait) const;
};

/// Sample mean and sd per trait over complete profiles.
/// Throws InsufficientDataError when a trait has fewer than 2 complete scores.
[[nodiscard]] NormTable compute_norms(std::span<const TraitProfile> profiles,
                                      const std::string& cohort_version);

/// Norm-based binning.
///   Two:   score > mean           -> High, else Low
///   Three: score > mean + sd      -> High
///          score < mean - sd      -> Low
///          otherwise              -> Medium
/// Boundary equality resolves to the less extreme class.
[[nodiscard]] TraitLabel bin_score(double score, const NormEntry& norm,
                                   Scheme scheme);

/// Cronbach's alpha over a participants x items matrix (row-major).
/// alpha = k/(k-1) * (1 - sum(item variances) / variance(row sums)),
/// sample variances throughout.
/// Throws InsufficientDataError for fewer than 2 items or participants and
/// UndefinedStatError when the total-score variance is zero.
[[nodiscard]] double cronbach_alpha(const std::vector<std::vector<double>>& item_matrix);

/// Reads `participant_id,q1..qN` rows; empty cells are missing answers.
[[nodiscard]] std::vector<ResponseRow> read_responses_csv(const std::string& path);

// JSON (de)serialization for the two interchange files.
[[nodiscard]] std::string scoring_key_to_json(const ScoringKey& key);
[[nodiscard]] ScoringKey scoring_key_from_json(const std::string& text);
[[nodiscard]] std::string norm_table_to_json(const NormTable& norms);
[[nodiscard]] NormTable norm_table_from_json(const std::string& text);

}  // namespace traitpipe::psych
