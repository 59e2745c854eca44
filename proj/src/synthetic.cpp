#include "traitpipe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/rng.hpp"
#include "traitpipe/stats.hpp"

namespace traitpipe::synth {

namespace {

using nlohmann::json;
using psych::TraitId;

struct TraitScoreShape {
  double mean;
  double sd;
  double min;
  double max;
};

// Score distributions sit mid-range of each trait's span in the default
// instrument.
TraitScoreShape shape_for(const psych::ScoringKey& key, TraitId trait) {
  const auto& tk = key.key_for(trait);
  const double max = tk.max_total();
  const double min = tk.min_total();
  return {min + 0.55 * (max - min), 0.18 * (max - min), min, max};
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  while (s.size() < width) s.insert(s.begin(), '0');
  return s;
}

struct AccountPool {
  std::vector<std::string> handles;
  std::vector<std::int64_t> follower_counts;
  std::vector<double> base_follow_prob;
  // planted_owner[a] = trait index owning account a, or -1.
  std::vector<int> planted_owner;
};

AccountPool make_accounts(const SyntheticCohortSpec& spec) {
  AccountPool pool;
  Rng rng(Rng::derive(spec.seed, "accounts"));
  pool.handles.reserve(spec.catalog_width);
  for (std::size_t a = 0; a < spec.catalog_width; ++a) {
    pool.handles.push_back("popacct_" + padded(a + 1, 5));
    const double u = rng.next_double();
    pool.follower_counts.push_back(
        ingest::kPopularFollowerThreshold + 1 +
        static_cast<std::int64_t>(u * u * 2.0e6));
    pool.base_follow_prob.push_back(0.03 + 0.32 * rng.next_double());
  }
  pool.planted_owner.assign(spec.catalog_width, -1);
  if (spec.planted_per_trait > 0) {
    std::vector<std::size_t> order(spec.catalog_width);
    std::iota(order.begin(), order.end(), 0);
    Rng assignment_rng(Rng::derive(spec.seed, "planted-assignment"));
    assignment_rng.shuffle(order);
    std::size_t next = 0;
    for (std::size_t t = 0; t < psych::kTraitCount; ++t) {
      for (std::size_t i = 0; i < spec.planted_per_trait; ++i) {
        pool.planted_owner[order[next++]] = static_cast<int>(t);
      }
    }
  }
  return pool;
}

}  // namespace

SyntheticCohort generate_synthetic_cohort(const SyntheticCohortSpec& spec) {
  if (spec.n_participants < 10) {
    throw ConfigError("synthetic cohort needs at least 10 participants");
  }
  if (spec.planted_per_trait * psych::kTraitCount > spec.catalog_width) {
    throw ConfigError("planted sets exceed the catalog width");
  }
  auto check_effect = [](double e) {
    if (!(e >= 0.0 && e <= 1.0)) {
      throw ConfigError("effect size must lie in [0, 1]");
    }
  };
  check_effect(spec.effect_size);
  for (const auto& [trait, e] : spec.effect_overrides) check_effect(e);
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 1.0)) {
    throw ConfigError("label noise rate must lie in [0, 1)");
  }

  const auto key = psych::default_scoring_key();
  const auto traits = psych::all_traits();
  const auto pool = make_accounts(spec);

  std::map<TraitId, double> effect;
  for (const auto trait : traits) {
    const auto it = spec.effect_overrides.find(trait);
    effect[trait] = it != spec.effect_overrides.end() ? it->second : spec.effect_size;
  }

  const std::size_t n = spec.n_participants;
  std::vector<bool> disengaged(n);
  std::vector<bool> is_private(n);
  std::vector<std::vector<bool>> follows(n);        // n x catalog_width
  std::vector<std::vector<double>> trait_latent(n); // n x 21
  std::vector<std::vector<double>> noise(n);        // n x 21
  std::vector<std::vector<double>> replace_draw(n); // label-noise uniforms
  std::vector<std::vector<double>> replacement(n);  // label-noise normals

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(spec.seed, "participant-" + std::to_string(i)));
    disengaged[i] = rng.next_bernoulli(spec.disengaged_rate);
    is_private[i] = rng.next_bernoulli(spec.private_rate);
    trait_latent[i].resize(psych::kTraitCount);
    for (auto& u : trait_latent[i]) u = rng.next_normal();
    follows[i].resize(spec.catalog_width);
    for (std::size_t a = 0; a < spec.catalog_width; ++a) {
      double p;
      const int owner = pool.planted_owner[a];
      if (owner >= 0) {
        p = disengaged[i]
                ? 0.08
                : sigmoid(1.5 * trait_latent[i][static_cast<std::size_t>(owner)]);
      } else {
        p = disengaged[i] ? 0.3 * pool.base_follow_prob[a] : pool.base_follow_prob[a];
      }
      follows[i][a] = rng.next_bernoulli(p);
    }
    noise[i].resize(psych::kTraitCount);
    for (auto& e : noise[i]) e = rng.next_normal();
    replace_draw[i].resize(psych::kTraitCount);
    for (auto& u : replace_draw[i]) u = rng.next_double();
    replacement[i].resize(psych::kTraitCount);
    for (auto& z : replacement[i]) z = rng.next_normal();
  }

  // Per-trait planted follow sums, standardized over the cohort.
  SyntheticCohort cohort;
  cohort.spec = spec;
  std::vector<psych::TraitProfile> profiles(n);
  for (std::size_t i = 0; i < n; ++i) {
    profiles[i].participant_id = "p" + padded(i + 1, 5);
  }

  for (std::size_t t = 0; t < psych::kTraitCount; ++t) {
    const TraitId trait = traits[t];
    const double e = effect[trait];
    std::vector<double> signal(n, 0.0);
    if (spec.planted_per_trait > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t a = 0; a < spec.catalog_width; ++a) {
          if (pool.planted_owner[a] == static_cast<int>(t) && follows[i][a]) sum += 1.0;
        }
        signal[i] = sum;
      }
      const double mean = stats::mean(signal);
      double ss = 0.0;
      for (const double s : signal) ss += (s - mean) * (s - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      for (auto& s : signal) s = sd > 0.0 ? (s - mean) / sd : 0.0;
    }

    const auto shape = shape_for(key, trait);
    for (std::size_t i = 0; i < n; ++i) {
      double z = e * signal[i] + std::sqrt(1.0 - e * e) * noise[i][t];
      if (disengaged[i]) z -= 2.5 * e;
      if (replace_draw[i][t] < spec.label_noise) z = replacement[i][t];
      // Scores stay continuous: snapping to integers would move the
      // norm-based cutoffs by up to half a point, which distorts the
      // designed class balance on narrow-range traits.
      const double raw = shape.mean + shape.sd * z;
      profiles[i].scores[trait] = std::clamp(raw, shape.min, shape.max);
    }
  }
  cohort.profiles = std::move(profiles);

  // Snapshots and demographics.
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(spec.seed, "snapshot-" + std::to_string(i)));
    ingest::ProfileSnapshot snapshot;
    snapshot.participant_id = cohort.profiles[i].participant_id;
    snapshot.username = "user_" + padded(i + 1, 5);
    snapshot.is_private = is_private[i];
    snapshot.follower_count = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::exp(5.5 + 1.2 * rng.next_normal())), 0, 20000);

    std::vector<ingest::FollowedAccount> following;
    for (std::size_t a = 0; a < spec.catalog_width; ++a) {
      if (!follows[i][a]) continue;
      following.push_back(
          ingest::FollowedAccount{pool.handles[a], pool.follower_counts[a]});
    }
    const auto n_filler = static_cast<std::size_t>(rng.next_double() * 150.0);
    for (std::size_t f = 0; f < n_filler; ++f) {
      ingest::FollowedAccount account;
      account.handle =
          "acct_" + padded(i + 1, 5) + "_" + padded(f + 1, 3);
      if (!rng.next_bernoulli(0.1)) {
        account.follower_count =
            static_cast<std::int64_t>(rng.next_double() * 50000.0);
      }
      following.push_back(std::move(account));
    }
    snapshot.following_count = static_cast<std::int64_t>(following.size());

    const auto post_count = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::exp(3.5 + 1.3 * rng.next_normal())), 0, 1729);
    snapshot.post_count = post_count;
    const auto crawled =
        static_cast<std::size_t>(std::min<std::int64_t>(post_count, 40));
    for (std::size_t p = 0; p < crawled; ++p) {
      ingest::PostRecord post;
      post.post_id = "post_" + padded(i + 1, 5) + "_" + padded(p + 1, 3);
      const double kind_draw = rng.next_double();
      post.kind = kind_draw < 0.85 ? ingest::PostKind::kImage
                  : kind_draw < 0.91 ? ingest::PostKind::kSlide
                                     : ingest::PostKind::kVideo;
      const double engagement = 0.05 + 0.3 * rng.next_double() * rng.next_double();
      post.like_count = static_cast<std::int64_t>(
          engagement * static_cast<double>(snapshot.follower_count));
      const bool disabled = rng.next_bernoulli(0.02);
      if (!disabled) {
        post.comment_count = static_cast<std::int64_t>(
            0.08 * rng.next_double() * static_cast<double>(post.like_count));
      }
      post.caption_length = rng.next_bernoulli(0.25)
                                ? 0
                                : 5 + static_cast<std::int64_t>(rng.next_double() * 400.0);
      post.hashtag_count = rng.next_bernoulli(0.6)
                               ? 0
                               : 1 + static_cast<std::int64_t>(rng.next_double() * 9.0);
      post.has_location = rng.next_bernoulli(0.2);
      snapshot.posts.push_back(std::move(post));
    }

    if (snapshot.is_private) {
      snapshot.posts.clear();
    } else {
      snapshot.following = std::move(following);
    }

    features::Demographics demo;
    demo.participant_id = snapshot.participant_id;
    demo.gender = rng.next_bernoulli(0.64) ? features::Gender::kFemale
                                           : features::Gender::kMale;
    if (!rng.next_bernoulli(spec.age_missing_rate)) {
      demo.age = std::clamp(std::round(28.4 + 6.8 * rng.next_normal()), 14.0, 65.0);
    }
    {
      const double u = rng.next_double();
      const double cuts[] = {0.03, 0.10, 0.145, 0.445, 0.95};
      int level = 5;
      for (int c = 0; c < 5; ++c) {
        if (u < cuts[c]) {
          level = c;
          break;
        }
      }
      demo.education = static_cast<features::Education>(level);
    }
    if (!rng.next_bernoulli(spec.occupation_missing_rate)) {
      const double u = rng.next_double();
      const double cuts[] = {0.06, 0.64, 0.675, 0.69, 0.75, 0.94};
      int code = 6;
      for (int c = 0; c < 6; ++c) {
        if (u < cuts[c]) {
          code = c;
          break;
        }
      }
      demo.occupation = static_cast<features::Occupation>(code);
    }
    demo.private_page = snapshot.is_private;

    cohort.snapshots.push_back(std::move(snapshot));
    cohort.demographics.push_back(std::move(demo));
  }

  for (std::size_t t = 0; t < psych::kTraitCount; ++t) {
    std::vector<std::string> handles;
    for (std::size_t a = 0; a < spec.catalog_width; ++a) {
      if (pool.planted_owner[a] == static_cast<int>(t)) {
        handles.push_back(pool.handles[a]);
      }
    }
    std::sort(handles.begin(), handles.end());
    cohort.truth.planted_handles[traits[t]] = std::move(handles);
    cohort.truth.effect[traits[t]] = effect[traits[t]];
  }
  return cohort;
}

std::string ground_truth_to_json(const GroundTruth& truth,
                                 const SyntheticCohortSpec& spec) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = spec.seed;
  j["n_participants"] = spec.n_participants;
  j["catalog_width"] = spec.catalog_width;
  j["planted_per_trait"] = spec.planted_per_trait;
  j["label_noise"] = spec.label_noise;
  j["private_rate"] = spec.private_rate;
  j["disengaged_rate"] = spec.disengaged_rate;
  json planted;
  json effect;
  for (const auto& [trait, handles] : truth.planted_handles) {
    planted[psych::trait_slug(trait)] = handles;
  }
  for (const auto& [trait, e] : truth.effect) {
    effect[psych::trait_slug(trait)] = e;
  }
  j["planted"] = std::move(planted);
  j["effect"] = std::move(effect);
  return j.dump(2) + "\n";
}

void write_profiles_csv(std::span<const psych::TraitProfile> profiles,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw SchemaError("cannot write profiles CSV: " + path);
  }
  csv::Row header = {"participant_id"};
  for (const auto trait : psych::all_traits()) {
    header.push_back(psych::trait_slug(trait));
  }
  csv::write_row(out, header);
  for (const auto& profile : profiles) {
    csv::Row row = {profile.participant_id};
    for (const auto trait : psych::all_traits()) {
      const auto it = profile.scores.find(trait);
      row.push_back(it != profile.scores.end() ? csv::format_double(it->second)
                                               : std::string());
    }
    csv::write_row(out, row);
  }
}

std::vector<psych::TraitProfile> read_profiles_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  const auto& header = rows.front();
  if (header.empty() || header[0] != "participant_id") {
    throw SchemaError("profiles CSV must start with participant_id");
  }
  std::vector<psych::TraitId> column_traits;
  for (std::size_t c = 1; c < header.size(); ++c) {
    column_traits.push_back(psych::trait_from_slug(header[c]));
  }
  std::vector<psych::TraitProfile> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw SchemaError("profiles CSV row " + std::to_string(r + 1) +
                        " has wrong field count");
    }
    psych::TraitProfile profile;
    profile.participant_id = row[0];
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        profile.incomplete.push_back(column_traits[c - 1]);
      } else {
        profile.scores[column_traits[c - 1]] = std::stod(row[c]);
      }
    }
    out.push_back(std::move(profile));
  }
  return out;
}

void write_cohort(const SyntheticCohort& cohort, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir / "snapshots");
  write_profiles_csv(cohort.profiles, (dir / "profiles.csv").string());
  features::write_demographics_csv(cohort.demographics,
                                   (dir / "demographics.csv").string());
  {
    std::ofstream out(dir / "ground_truth.json");
    out << ground_truth_to_json(cohort.truth, cohort.spec);
  }
  for (const auto& snapshot : cohort.snapshots) {
    const fs::path snap_dir = dir / "snapshots" / snapshot.participant_id;
    fs::create_directories(snap_dir);
    {
      std::ofstream out(snap_dir / "profile.json");
      out << ingest::snapshot_profile_json(snapshot);
    }
    {
      std::ofstream out(snap_dir / "posts.jsonl");
      for (const auto& line : ingest::snapshot_post_lines(snapshot)) out << line << "\n";
    }
    {
      std::ofstream out(snap_dir / "following.jsonl");
      for (const auto& line : ingest::snapshot_following_lines(snapshot)) {
        out << line << "\n";
      }
    }
  }
}

}  // namespace traitpipe::synth
