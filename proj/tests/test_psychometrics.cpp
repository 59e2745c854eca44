#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "traitpipe/psychometrics.hpp"
#include "traitpipe/rng.hpp"

using namespace traitpipe;
using namespace traitpipe::psych;

namespace {

ResponseRow uniform_answers(const ScoringKey& key, int answer) {
  ResponseRow row;
  row.participant_id = "p1";
  row.answers.assign(static_cast<std::size_t>(key.item_count()), answer);
  return row;
}

// Builds a full 21-trait profile with the same score everywhere.
TraitProfile flat_profile(const std::string& id, double value) {
  TraitProfile profile;
  profile.participant_id = id;
  for (const auto trait : all_traits()) profile.scores[trait] = value;
  return profile;
}

// Independent reliability oracle: covariance-matrix route.
double cronbach_oracle(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  const std::size_t k = m.front().size();
  std::vector<double> means(k, 0.0);
  for (const auto& row : m) {
    for (std::size_t j = 0; j < k; ++j) means[j] += row[j];
  }
  for (auto& v : means) v /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (const auto& row : m) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        cov[a][b] += (row[a] - means[a]) * (row[b] - means[b]);
      }
    }
  }
  double trace = 0.0, total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      cov[a][b] /= static_cast<double>(n - 1);
      total += cov[a][b];
    }
    trace += cov[a][a];
  }
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - trace / total);
}

int label_rank(LabelValue v) { return static_cast<int>(v); }

}  // namespace

TEST_CASE("default scoring key matches the published score ranges") {
  const auto key = default_scoring_key();
  key.validate();
  CHECK(key.key_for(TraitId::kNeuroticism).items.size() == 12);
  CHECK(key.key_for(TraitId::kNeuroticism).max_total() == 48.0);
  CHECK(key.key_for(TraitId::kWorkStandards).items.size() == 8);
  CHECK(key.key_for(TraitId::kWorkStandards).max_total() == 32.0);
  CHECK(key.key_for(TraitId::kStressTolerance).max_total() == 12.0);
  CHECK(key.key_for(TraitId::kGainingCommitment).max_total() == 24.0);
  CHECK(key.key_for(TraitId::kInnovation).max_total() == 20.0);
  // 60 personality items come first.
  CHECK(key.key_for(TraitId::kInnovation).items.front().index == 61);
}

TEST_CASE("score_questionnaire") {
  const auto key = default_scoring_key();

  SUBCASE("all items answered 0 gives every trait its minimum") {
    const auto profile = score_questionnaire(uniform_answers(key, 0), key);
    for (const auto trait : all_traits()) {
      CHECK(profile.scores.at(trait) == key.key_for(trait).min_total());
    }
    CHECK(profile.incomplete.empty());
  }

  SUBCASE("12 items per factor, all answered 4, tops out at 48") {
    const auto profile = score_questionnaire(uniform_answers(key, 4), key);
    CHECK(profile.scores.at(TraitId::kNeuroticism) == 48.0);
    CHECK(profile.scores.at(TraitId::kExtraversion) == 48.0);
  }

  SUBCASE("one missing teamwork item flags only teamwork incomplete") {
    auto row = uniform_answers(key, 2);
    const auto teamwork_item = key.key_for(TraitId::kTeamwork).items.front().index;
    row.answers[static_cast<std::size_t>(teamwork_item - 1)] = std::nullopt;
    const auto profile = score_questionnaire(row, key);
    CHECK(profile.scores.count(TraitId::kTeamwork) == 0);
    REQUIRE(profile.incomplete.size() == 1);
    CHECK(profile.incomplete.front() == TraitId::kTeamwork);
    CHECK(profile.scores.size() == kTraitCount - 1);
  }

  SUBCASE("answer out of range names the item") {
    auto row = uniform_answers(key, 2);
    row.answers[4] = 9;
    CHECK_THROWS_WITH_AS((void)score_questionnaire(row, key), doctest::Contains("q5"),
                         ValidationError);
  }

  SUBCASE("key referencing an absent item is a schema error") {
    ResponseRow row;
    row.participant_id = "p1";
    row.answers.assign(10, 1);
    CHECK_THROWS_AS((void)score_questionnaire(row, key), SchemaError);
  }

  SUBCASE("reverse-keyed items score as offset minus answer") {
    ScoringKey reversed = key;
    for (auto& tk : reversed.traits) {
      if (tk.trait == TraitId::kNeuroticism) {
        for (auto& item : tk.items) {
          item.direction = -1;
          item.offset = 4;
        }
      }
    }
    auto row = uniform_answers(reversed, 0);
    const auto profile = score_questionnaire(row, reversed);
    CHECK(profile.scores.at(TraitId::kNeuroticism) == 48.0);
    CHECK(profile.scores.at(TraitId::kExtraversion) == 0.0);
  }

  SUBCASE("scores are invariant to item order within a trait") {
    Rng rng(991);
    for (int rep = 0; rep < 20; ++rep) {
      ResponseRow row;
      row.participant_id = "p1";
      for (int i = 0; i < key.item_count(); ++i) {
        row.answers.push_back(static_cast<int>(rng.next_below(5)));
      }
      ScoringKey shuffled = key;
      for (auto& tk : shuffled.traits) rng.shuffle(tk.items);
      const auto a = score_questionnaire(row, key);
      const auto b = score_questionnaire(row, shuffled);
      for (const auto trait : all_traits()) {
        CHECK(a.scores.at(trait) == b.scores.at(trait));
      }
    }
  }
}

TEST_CASE("compute_norms") {
  SUBCASE("constant scores give zero sd") {
    std::vector<TraitProfile> profiles = {flat_profile("a", 10), flat_profile("b", 10),
                                          flat_profile("c", 10)};
    const auto norms = compute_norms(profiles, "v1");
    CHECK(norms.entry_for(TraitId::kEnergy).mean == 10.0);
    CHECK(norms.entry_for(TraitId::kEnergy).sd == 0.0);
    CHECK(norms.entry_for(TraitId::kEnergy).n == 3);
  }

  SUBCASE("two points use the n-1 denominator") {
    std::vector<TraitProfile> profiles = {flat_profile("a", 0), flat_profile("b", 2)};
    const auto norms = compute_norms(profiles, "v1");
    CHECK(norms.entry_for(TraitId::kTeamwork).mean == doctest::Approx(1.0));
    CHECK(norms.entry_for(TraitId::kTeamwork).sd ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("a cohort built around the published neuroticism norm echoes it") {
    const double mean = 21.87, sd = 9.51;
    const double d = sd / std::sqrt(2.0);
    std::vector<TraitProfile> profiles = {flat_profile("a", mean + d),
                                          flat_profile("b", mean - d)};
    const auto norms = compute_norms(profiles, "table-fixture");
    CHECK(norms.entry_for(TraitId::kNeuroticism).mean == doctest::Approx(21.87));
    CHECK(norms.entry_for(TraitId::kNeuroticism).sd ==
          doctest::Approx(9.51).epsilon(1e-12));
    CHECK(norms.version == "table-fixture");
  }

  SUBCASE("fewer than two complete scores is an error") {
    std::vector<TraitProfile> profiles = {flat_profile("a", 5)};
    CHECK_THROWS_AS((void)compute_norms(profiles, "v1"), InsufficientDataError);
  }

  SUBCASE("incomplete traits are excluded from the norm sample") {
    auto a = flat_profile("a", 4);
    auto b = flat_profile("b", 8);
    auto c = flat_profile("c", 100);
    c.scores.erase(TraitId::kEnergy);
    const std::vector<TraitProfile> profiles = {a, b, c};
    const auto norms = compute_norms(profiles, "v1");
    CHECK(norms.entry_for(TraitId::kEnergy).n == 2);
    CHECK(norms.entry_for(TraitId::kEnergy).mean == doctest::Approx(6.0));
  }
}

TEST_CASE("bin_score") {
  const NormEntry published{21.87, 9.51, 400};

  SUBCASE("three-level cutoffs sit at mean plus/minus sd") {
    CHECK(bin_score(35, published, Scheme::kThree).value == LabelValue::kHigh);
    CHECK(bin_score(20, published, Scheme::kThree).value == LabelValue::kMedium);
    CHECK(bin_score(10, published, Scheme::kThree).value == LabelValue::kLow);
  }

  SUBCASE("boundary equality resolves to the less extreme class") {
    const NormEntry norm{10.0, 2.0, 50};
    CHECK(bin_score(10.0, norm, Scheme::kTwo).value == LabelValue::kLow);
    CHECK(bin_score(8.0, norm, Scheme::kThree).value == LabelValue::kMedium);
    CHECK(bin_score(12.0, norm, Scheme::kThree).value == LabelValue::kMedium);
  }

  SUBCASE("monotone in the score and consistent across schemes") {
    Rng rng(4242);
    for (int rep = 0; rep < 200; ++rep) {
      const NormEntry norm{rng.next_normal() * 10.0, std::fabs(rng.next_normal()) * 5.0,
                           100};
      const double s1 = norm.mean + rng.next_normal() * 15.0;
      const double s2 = norm.mean + rng.next_normal() * 15.0;
      const double lo = std::min(s1, s2), hi = std::max(s1, s2);
      for (const auto scheme : {Scheme::kTwo, Scheme::kThree}) {
        CHECK(label_rank(bin_score(lo, norm, scheme).value) <=
              label_rank(bin_score(hi, norm, scheme).value));
      }
      const auto three = bin_score(s1, norm, Scheme::kThree).value;
      const auto two = bin_score(s1, norm, Scheme::kTwo).value;
      if (three == LabelValue::kHigh) CHECK(two == LabelValue::kHigh);
      if (three == LabelValue::kLow) CHECK(two == LabelValue::kLow);
    }
  }

  SUBCASE("medium is the modal three-level class on a symmetric cohort") {
    Rng rng(77);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<TraitProfile> profiles;
      for (int i = 0; i < 150; ++i) {
        profiles.push_back(
            flat_profile("p" + std::to_string(i), 24.0 + 6.0 * rng.next_normal()));
      }
      const auto norms = compute_norms(profiles, "v1");
      int low = 0, medium = 0, high = 0;
      for (const auto& p : profiles) {
        switch (bin_score(p.scores.at(TraitId::kEnergy),
                          norms.entry_for(TraitId::kEnergy), Scheme::kThree)
                    .value) {
          case LabelValue::kLow: ++low; break;
          case LabelValue::kMedium: ++medium; break;
          case LabelValue::kHigh: ++high; break;
        }
      }
      CHECK(medium >= low);
      CHECK(medium >= high);
    }
  }
}

TEST_CASE("cronbach_alpha") {
  SUBCASE("identical item columns give alpha = 1") {
    const std::vector<std::vector<double>> m = {
        {1, 1, 1}, {3, 3, 3}, {2, 2, 2}, {4, 4, 4}};
    CHECK(cronbach_alpha(m) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("columns identical up to additive constants also give 1") {
    const std::vector<std::vector<double>> m = {{1, 2}, {3, 4}, {2, 3}, {5, 6}};
    CHECK(cronbach_alpha(m) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("two items with zero covariance give alpha = 0") {
    const std::vector<std::vector<double>> m = {{0, 1}, {1, 1}, {0, 0}, {1, 0}};
    CHECK(cronbach_alpha(m) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("random matrices match the covariance-matrix oracle") {
    Rng rng(2024);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<std::vector<double>> m(5, std::vector<double>(4));
      for (auto& row : m) {
        for (auto& v : row) v = rng.next_normal();
      }
      const double got = cronbach_alpha(m);
      CHECK(got == doctest::Approx(cronbach_oracle(m)).epsilon(1e-12));
      CHECK(got <= 1.0 + 1e-12);
    }
  }

  SUBCASE("alpha stays <= 1 over larger random matrices") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 3 + rng.next_below(20);
      const std::size_t k = 2 + rng.next_below(8);
      std::vector<std::vector<double>> m(n, std::vector<double>(k));
      const double common_weight = rng.next_double() * 2.0;
      for (auto& row : m) {
        const double common = rng.next_normal() * common_weight;
        for (auto& v : row) v = common + rng.next_normal();
      }
      CHECK(cronbach_alpha(m) <= 1.0 + 1e-12);
    }
  }

  SUBCASE("zero total variance is an undefined-reliability error") {
    const std::vector<std::vector<double>> m = {{0, 1}, {1, 0}, {0.5, 0.5}};
    CHECK_THROWS_AS((void)cronbach_alpha(m), UndefinedStatError);
  }

  SUBCASE("preconditions") {
    CHECK_THROWS_AS((void)cronbach_alpha({{1.0, 2.0}}), InsufficientDataError);
    CHECK_THROWS_AS((void)cronbach_alpha({{1.0}, {2.0}}), InsufficientDataError);
  }
}

TEST_CASE("scoring key and norm table JSON round-trips") {
  const auto key = default_scoring_key();
  const auto text = scoring_key_to_json(key);
  const auto back = scoring_key_from_json(text);
  CHECK(back.version == key.version);
  REQUIRE(back.traits.size() == key.traits.size());
  CHECK(back.key_for(TraitId::kTeamwork).items.size() ==
        key.key_for(TraitId::kTeamwork).items.size());

  std::vector<TraitProfile> profiles = {flat_profile("a", 3), flat_profile("b", 9)};
  const auto norms = compute_norms(profiles, "v2");
  const auto norms_back = norm_table_from_json(norm_table_to_json(norms));
  CHECK(norms_back.version == "v2");
  CHECK(norms_back.entry_for(TraitId::kFollowUp).mean ==
        norms.entry_for(TraitId::kFollowUp).mean);
  CHECK(norms_back.entry_for(TraitId::kFollowUp).sd ==
        norms.entry_for(TraitId::kFollowUp).sd);
}

TEST_CASE("scoring key validation rejects duplicate item assignment") {
  auto key = default_scoring_key();
  key.traits[1].items.front().index = key.traits[0].items.front().index;
  CHECK_THROWS_AS(key.validate(), SchemaError);
}

TEST_CASE("responses CSV reader") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "traitpipe_responses_test";
  fs::create_directories(dir);
  const auto path = (dir / "responses.csv").string();
  {
    std::ofstream out(path);
    out << "participant_id,q1,q2,q3\n";
    out << "p1,0,4,2\n";
    out << "p2,1,,3\n";  // q2 missing
  }
  const auto rows = read_responses_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].participant_id == "p1");
  CHECK(rows[0].answers == std::vector<std::optional<int>>{0, 4, 2});
  CHECK_FALSE(rows[1].answers[1].has_value());

  {
    std::ofstream out(path);
    out << "participant_id,q1,wrong\n"
        << "p1,0,1\n";
  }
  CHECK_THROWS_AS((void)read_responses_csv(path), SchemaError);
  fs::remove_all(dir);
}
