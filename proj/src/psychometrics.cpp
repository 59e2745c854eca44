#include "traitpipe/psychometrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/stats.hpp"

namespace traitpipe::psych {

namespace {

struct TraitMeta {
  TraitId id;
  const char* slug;
  const char* display;
  int default_items;  // item count in the default instrument
};

// Order is canonical: 5 personality factors, then the 16 competencies.
// Default item counts follow each trait's published score range with
// 0..4 items (max_total = items * 4).
constexpr std::array<TraitMeta, kTraitCount> kTraitMeta = {{
    {TraitId::kNeuroticism, "neuroticism", "Neuroticism", 12},
    {TraitId::kExtraversion, "extraversion", "Extraversion", 12},
    {TraitId::kOpenness, "openness", "Openness to Experience", 12},
    {TraitId::kAgreeableness, "agreeableness", "Agreeableness", 12},
    {TraitId::kConscientiousness, "conscientiousness", "Conscientiousness", 12},
    {TraitId::kInnovation, "innovation", "Innovation", 5},
    {TraitId::kNegotiation, "negotiation", "Negotiation", 5},
    {TraitId::kCommunication, "communication", "Communication", 5},
    {TraitId::kGainingCommitment, "gaining_commitment", "Gaining Commitment", 6},
    {TraitId::kSalesAbility, "sales_ability", "Sales Ability/Persuasiveness", 3},
    {TraitId::kStrategicDecisionMaking, "strategic_decision_making",
     "Strategic Decision Making", 4},
    {TraitId::kStressTolerance, "stress_tolerance", "Stress Tolerance", 3},
    {TraitId::kInitiative, "initiative", "Initiative", 4},
    {TraitId::kWorkStandards, "work_standards", "Work Standards", 8},
    {TraitId::kDecisionMaking, "decision_making", "Decision Making", 4},
    {TraitId::kTeamwork, "teamwork", "Teamwork", 3},
    {TraitId::kEnergy, "energy", "Energy", 3},
    {TraitId::kPlanningOrganizing, "planning_organizing",
     "Planning and Organizing", 3},
    {TraitId::kFollowUp, "follow_up", "Follow-Up", 4},
    {TraitId::kContinuousLearning, "continuous_learning",
     "Continuous Learning", 6},
    {TraitId::kQualityOrientation, "quality_orientation",
     "Quality Orientation", 6},
}};

}  // namespace

std::span<const TraitId> all_traits() {
  static const std::array<TraitId, kTraitCount> ids = [] {
    std::array<TraitId, kTraitCount> out{};
    for (std::size_t i = 0; i < kTraitCount; ++i) out[i] = kTraitMeta[i].id;
    return out;
  }();
  return ids;
}

const std::string& trait_slug(TraitId trait) {
  static const std::array<std::string, kTraitCount> slugs = [] {
    std::array<std::string, kTraitCount> out;
    for (std::size_t i = 0; i < kTraitCount; ++i) out[i] = kTraitMeta[i].slug;
    return out;
  }();
  return slugs[static_cast<std::size_t>(trait)];
}

const std::string& trait_display_name(TraitId trait) {
  static const std::array<std::string, kTraitCount> names = [] {
    std::array<std::string, kTraitCount> out;
    for (std::size_t i = 0; i < kTraitCount; ++i) out[i] = kTraitMeta[i].display;
    return out;
  }();
  return names[static_cast<std::size_t>(trait)];
}

TraitId trait_from_slug(const std::string& slug) {
  for (const auto& m : kTraitMeta) {
    if (slug == m.slug) return m.id;
  }
  throw ValidationError("unknown trait: " + slug);
}

const std::string& scheme_slug(Scheme scheme) {
  static const std::string two = "two";
  static const std::string three = "three";
  return scheme == Scheme::kTwo ? two : three;
}

Scheme scheme_from_slug(const std::string& slug) {
  if (slug == "two") return Scheme::kTwo;
  if (slug == "three") return Scheme::kThree;
  throw ValidationError("unknown scheme: " + slug);
}

const std::string& label_slug(LabelValue value) {
  static const std::array<std::string, 3> slugs = {"low", "medium", "high"};
  return slugs[static_cast<std::size_t>(value)];
}

LabelValue label_from_slug(const std::string& slug) {
  if (slug == "low") return LabelValue::kLow;
  if (slug == "medium") return LabelValue::kMedium;
  if (slug == "high") return LabelValue::kHigh;
  throw ValidationError("unknown label: " + slug);
}

double TraitKey::min_total() const {
  double total = 0.0;
  for (const auto& item : items) {
    const double a = item.direction > 0 ? answer_min : answer_max;
    total += item.direction * a + item.offset;
  }
  return total;
}

double TraitKey::max_total() const {
  double total = 0.0;
  for (const auto& item : items) {
    const double a = item.direction > 0 ? answer_max : answer_min;
    total += item.direction * a + item.offset;
  }
  return total;
}

void ScoringKey::validate() const {
  std::set<TraitId> seen;
  std::set<int> used_indices;
  for (const auto& tk : traits) {
    if (!seen.insert(tk.trait).second) {
      throw SchemaError("scoring key repeats trait " + trait_slug(tk.trait));
    }
    if (tk.items.empty()) {
      throw SchemaError("scoring key has no items for " + trait_slug(tk.trait));
    }
    if (tk.answer_min > tk.answer_max) {
      throw SchemaError("scoring key answer range inverted for " +
                        trait_slug(tk.trait));
    }
    for (const auto& item : tk.items) {
      if (item.index < 1) {
        throw SchemaError("scoring key item index must be >= 1");
      }
      if (item.direction != 1 && item.direction != -1) {
        throw SchemaError("scoring key item direction must be +1 or -1");
      }
      if (!used_indices.insert(item.index).second) {
        std::ostringstream msg;
        msg << "scoring key item q" << item.index
            << " is assigned to more than one trait";
        throw SchemaError(msg.str());
      }
    }
  }
  if (seen.size() != kTraitCount) {
    throw SchemaError("scoring key must cover all 21 traits");
  }
}

const TraitKey& ScoringKey::key_for(TraitId trait) const {
  for (const auto& tk : traits) {
    if (tk.trait == trait) return tk;
  }
  throw SchemaError("scoring key missing trait " + trait_slug(trait));
}

int ScoringKey::item_count() const {
  int max_index = 0;
  for (const auto& tk : traits) {
    for (const auto& item : tk.items) max_index = std::max(max_index, item.index);
  }
  return max_index;
}

ScoringKey default_scoring_key() {
  ScoringKey key;
  key.version = "default-1";
  int next_index = 1;
  for (const auto& m : kTraitMeta) {
    TraitKey tk;
    tk.trait = m.id;
    tk.answer_min = 0;
    tk.answer_max = 4;
    for (int i = 0; i < m.default_items; ++i) {
      tk.items.push_back(KeyItem{next_index++, 1, 0});
    }
    key.traits.push_back(std::move(tk));
  }
  key.validate();
  return key;
}

bool TraitProfile::is_complete(TraitId trait) const {
  return scores.count(trait) > 0;
}

TraitProfile score_questionnaire(const ResponseRow& responses,
                                 const ScoringKey& key) {
  key.validate();
  TraitProfile profile;
  profile.participant_id = responses.participant_id;
  for (const auto& tk : key.traits) {
    double total = 0.0;
    bool complete = true;
    for (const auto& item : tk.items) {
      const std::size_t pos = static_cast<std::size_t>(item.index - 1);
      if (pos >= responses.answers.size()) {
        std::ostringstream msg;
        msg << "item q" << item.index << " referenced by "
            << trait_slug(tk.trait) << " is not present in the response row";
        throw SchemaError(msg.str());
      }
      const auto& answer = responses.answers[pos];
      if (!answer.has_value()) {
        complete = false;
        continue;
      }
      if (*answer < tk.answer_min || *answer > tk.answer_max) {
        std::ostringstream msg;
        msg << "answer " << *answer << " for item q" << item.index
            << " is outside the legal range [" << tk.answer_min << ", "
            << tk.answer_max << "]";
        throw ValidationError(msg.str());
      }
      total += item.direction * (*answer) + item.offset;
    }
    if (complete) {
      profile.scores[tk.trait] = total;
    } else {
      profile.incomplete.push_back(tk.trait);
    }
  }
  return profile;
}

const NormEntry& NormTable::entry_for(TraitId trait) const {
  const auto it = entries.find(trait);
  if (it == entries.end()) {
    throw InsufficientDataError("norm table has no entry for " +
                                trait_slug(trait));
  }
  return it->second;
}

NormTable compute_norms(std::span<const TraitProfile> profiles,
                        const std::string& cohort_version) {
  NormTable table;
  table.version = cohort_version;
  for (const TraitId trait : all_traits()) {
    std::vector<double> values;
    for (const auto& p : profiles) {
      const auto it = p.scores.find(trait);
      if (it != p.scores.end()) values.push_back(it->second);
    }
    if (values.size() < 2) {
      throw InsufficientDataError(
          "compute_norms: trait " + trait_slug(trait) + " has " +
          std::to_string(values.size()) + " complete scores (need >= 2)");
    }
    NormEntry entry;
    entry.mean = stats::mean(values);
    entry.sd = stats::sample_sd(values);
    entry.n = values.size();
    table.entries[trait] = entry;
  }
  return table;
}

TraitLabel bin_score(double score, const NormEntry& norm, Scheme scheme) {
  if (scheme == Scheme::kTwo) {
    return TraitLabel{Scheme::kTwo, score > norm.mean ? LabelValue::kHigh
                                                      : LabelValue::kLow};
  }
  if (score > norm.mean + norm.sd) {
    return TraitLabel{Scheme::kThree, LabelValue::kHigh};
  }
  if (score < norm.mean - norm.sd) {
    return TraitLabel{Scheme::kThree, LabelValue::kLow};
  }
  return TraitLabel{Scheme::kThree, LabelValue::kMedium};
}

double cronbach_alpha(const std::vector<std::vector<double>>& item_matrix) {
  const std::size_t n = item_matrix.size();
  if (n < 2) {
    throw InsufficientDataError("cronbach_alpha: need at least 2 participants");
  }
  const std::size_t k = item_matrix.front().size();
  if (k < 2) {
    throw InsufficientDataError("cronbach_alpha: need at least 2 items");
  }
  for (const auto& row : item_matrix) {
    if (row.size() != k) {
      throw SchemaError("cronbach_alpha: ragged item matrix");
    }
  }
  std::vector<double> column(n);
  double item_variance_sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = item_matrix[i][j];
    item_variance_sum += stats::sample_variance(column);
  }
  std::vector<double> totals(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) totals[i] += item_matrix[i][j];
  }
  const double total_variance = stats::sample_variance(totals);
  if (total_variance == 0.0) {
    throw UndefinedStatError(
        "cronbach_alpha: total-score variance is zero, reliability undefined");
  }
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_variance_sum / total_variance);
}

std::vector<ResponseRow> read_responses_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  const auto& header = rows.front();
  if (header.empty() || header[0] != "participant_id") {
    throw SchemaError("responses CSV must start with a participant_id column");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    const std::string expected = "q" + std::to_string(j);
    if (header[j] != expected) {
      throw SchemaError("responses CSV column " + std::to_string(j + 1) +
                        " must be named " + expected + ", saw " + header[j]);
    }
  }
  std::vector<ResponseRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw SchemaError("responses CSV row " + std::to_string(r + 1) +
                        " has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    ResponseRow rr;
    rr.participant_id = row[0];
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j].empty()) {
        rr.answers.push_back(std::nullopt);
        continue;
      }
      try {
        rr.answers.push_back(std::stoi(row[j]));
      } catch (const std::exception&) {
        throw SchemaError("responses CSV row " + std::to_string(r + 1) +
                          ": non-integer answer '" + row[j] + "'");
      }
    }
    out.push_back(std::move(rr));
  }
  return out;
}

namespace {

using nlohmann::json;

}  // namespace

std::string scoring_key_to_json(const ScoringKey& key) {
  json j;
  j["schema_version"] = 1;
  j["version"] = key.version;
  json traits = json::array();
  for (const auto& tk : key.traits) {
    json t;
    t["trait"] = trait_slug(tk.trait);
    t["answer_min"] = tk.answer_min;
    t["answer_max"] = tk.answer_max;
    json items = json::array();
    for (const auto& item : tk.items) {
      items.push_back(
          {{"index", item.index}, {"direction", item.direction}, {"offset", item.offset}});
    }
    t["items"] = std::move(items);
    traits.push_back(std::move(t));
  }
  j["traits"] = std::move(traits);
  return j.dump(2) + "\n";
}

ScoringKey scoring_key_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scoring key JSON parse error: ") + e.what());
  }
  try {
    ScoringKey key;
    key.version = j.at("version").get<std::string>();
    for (const auto& t : j.at("traits")) {
      TraitKey tk;
      tk.trait = trait_from_slug(t.at("trait").get<std::string>());
      tk.answer_min = t.at("answer_min").get<int>();
      tk.answer_max = t.at("answer_max").get<int>();
      for (const auto& item : t.at("items")) {
        tk.items.push_back(KeyItem{item.at("index").get<int>(),
                                   item.at("direction").get<int>(),
                                   item.at("offset").get<int>()});
      }
      key.traits.push_back(std::move(tk));
    }
    key.validate();
    return key;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scoring key JSON field error: ") + e.what());
  }
}

std::string norm_table_to_json(const NormTable& norms) {
  json j;
  j["schema_version"] = 1;
  j["version"] = norms.version;
  json entries;
  for (const auto& [trait, entry] : norms.entries) {
    entries[trait_slug(trait)] = {
        {"mean", entry.mean}, {"sd", entry.sd}, {"n", entry.n}};
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

NormTable norm_table_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("norm table JSON parse error: ") + e.what());
  }
  try {
    NormTable table;
    table.version = j.at("version").get<std::string>();
    for (const auto& [slug, entry] : j.at("entries").items()) {
      NormEntry e;
      e.mean = entry.at("mean").get<double>();
      e.sd = entry.at("sd").get<double>();
      e.n = entry.at("n").get<std::size_t>();
      table.entries[trait_from_slug(slug)] = e;
    }
    return table;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("norm table JSON field error: ") + e.what());
  }
}

}  // namespace traitpipe::psych
