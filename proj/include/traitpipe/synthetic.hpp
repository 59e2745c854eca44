#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "traitpipe/featureset.hpp"
#include "traitpipe/ingestion.hpp"
#include "traitpipe/psychometrics.hpp"

namespace traitpipe::synth {

/// Parameters of a generated benchmark cohort. Trait scores are drawn so
/// that each trait's labels correlate with its planted following
/// indicators at the configured effect size; everything is a pure function
/// of the seed.
struct SyntheticCohortSpec {
  std::size_t n_participants = 400;
  std::size_t catalog_width = 830;
  std::size_t planted_per_trait = 20;
  /// Fraction of score standard deviation carried by the planted signal,
  /// in [0, 1]. 0 produces a null cohort, 1 a noiseless one.
  double effect_size = 0.85;
  std::map<psych::TraitId, double> effect_overrides;
  /// Probability that a participant's score for a trait is replaced by
  /// pure noise.
  double label_noise = 0.0;
  double private_rate = 0.1;
  /// Fraction of low-activity participants: they follow few accounts and,
  /// when the effect is nonzero, score proportionally lower.
  double disengaged_rate = 0.12;
  double age_missing_rate = 0.06;
  double occupation_missing_rate = 0.16;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  /// Planted account handles per trait (disjoint across traits).
  std::map<psych::TraitId, std::vector<std::string>> planted_handles;
  std::map<psych::TraitId, double> effect;
};

struct SyntheticCohort {
  SyntheticCohortSpec spec;
  std::vector<psych::TraitProfile> profiles;
  std::vector<ingest::ProfileSnapshot> snapshots;
  std::vector<features::Demographics> demographics;
  GroundTruth truth;
};

/// Throws ConfigError when the spec is infeasible (planted sets exceed the
/// catalog, effect outside [0,1], cohort too small).
[[nodiscard]] SyntheticCohort generate_synthetic_cohort(const SyntheticCohortSpec& spec);

/// Writes profiles.csv, demographics.csv, ground_truth.json and one
/// snapshot directory per participant under `directory`.
void write_cohort(const SyntheticCohort& cohort, const std::string& directory);

[[nodiscard]] std::string ground_truth_to_json(const GroundTruth& truth,
                                               const SyntheticCohortSpec& spec);

/// profiles.csv: participant_id followed by one column per trait slug.
void write_profiles_csv(std::span<const psych::TraitProfile> profiles,
                        const std::string& path);
[[nodiscard]] std::vector<psych::TraitProfile> read_profiles_csv(const std::string& path);

}  // namespace traitpipe::synth
