#include "traitpipe/ingestion.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace traitpipe::ingest {

namespace {

using nlohmann::json;

std::int64_t require_count(const json& j, const char* field, const std::string& origin) {
  if (!j.contains(field) || !j.at(field).is_number_integer()) {
    throw SchemaError(origin + ": profile.json is missing mandatory count '" +
                      std::string(field) + "'");
  }
  const auto v = j.at(field).get<std::int64_t>();
  if (v < 0) {
    throw SchemaError(origin + ": count '" + std::string(field) +
                      "' must be non-negative");
  }
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  if (!in) return lines;  // absent files are treated as empty lists
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

const std::string& post_kind_slug(PostKind kind) {
  static const std::array<std::string, 3> slugs = {"image", "slide", "video"};
  return slugs[static_cast<std::size_t>(kind)];
}

PostKind post_kind_from_slug(const std::string& slug) {
  if (slug == "image") return PostKind::kImage;
  if (slug == "slide") return PostKind::kSlide;
  if (slug == "video") return PostKind::kVideo;
  throw SchemaError("unknown post kind: " + slug);
}

ProfileSnapshot parse_snapshot_documents(
    const std::string& profile_json, const std::vector<std::string>& post_lines,
    const std::vector<std::string>& following_lines, const std::string& origin,
    std::vector<ParseIssue>& issues) {
  json profile;
  try {
    profile = json::parse(profile_json);
  } catch (const json::exception& e) {
    throw SchemaError(origin + ": profile.json parse error: " + e.what());
  }

  ProfileSnapshot snapshot;
  if (profile.contains("participant_id")) {
    snapshot.participant_id = profile.at("participant_id").get<std::string>();
  }
  if (profile.contains("username")) {
    snapshot.username = profile.at("username").get<std::string>();
  }
  snapshot.is_private = profile.value("is_private", false);
  snapshot.follower_count = require_count(profile, "follower_count", origin);
  snapshot.following_count = require_count(profile, "following_count", origin);
  snapshot.post_count = require_count(profile, "post_count", origin);

  if (snapshot.is_private) {
    if (!post_lines.empty() || !following_lines.empty()) {
      throw SchemaError(origin +
                        ": private profiles must not carry posts or following lists");
    }
    return snapshot;
  }

  std::set<std::string> post_ids;
  int line_no = 0;
  for (const auto& line : post_lines) {
    ++line_no;
    json p;
    try {
      p = json::parse(line);
    } catch (const json::exception& e) {
      issues.push_back({origin + "/posts.jsonl", line_no,
                        std::string("unparseable line: ") + e.what()});
      continue;
    }
    try {
      PostRecord record;
      record.post_id = p.at("post_id").get<std::string>();
      record.kind = post_kind_from_slug(p.at("kind").get<std::string>());
      record.like_count = p.at("like_count").get<std::int64_t>();
      if (p.value("comments_disabled", false)) {
        if (p.contains("comment_count") && !p.at("comment_count").is_null()) {
          issues.push_back({origin + "/posts.jsonl", line_no,
                            "post with disabled comments carries a comment_count"});
          continue;
        }
      } else {
        record.comment_count = p.at("comment_count").get<std::int64_t>();
      }
      record.caption_length = p.value("caption_length", std::int64_t{0});
      record.hashtag_count = p.value("hashtag_count", std::int64_t{0});
      record.has_location = p.value("has_location", false);
      if (record.like_count < 0 || record.caption_length < 0 ||
          record.hashtag_count < 0 ||
          (record.comment_count.has_value() && *record.comment_count < 0)) {
        issues.push_back({origin + "/posts.jsonl", line_no,
                          "negative count in post record"});
        continue;
      }
      if (!post_ids.insert(record.post_id).second) {
        throw SchemaError(origin + ": duplicate post_id '" + record.post_id + "'");
      }
      snapshot.posts.push_back(std::move(record));
    } catch (const json::exception& e) {
      issues.push_back({origin + "/posts.jsonl", line_no,
                        std::string("bad post record: ") + e.what()});
    }
  }

  if (static_cast<std::int64_t>(snapshot.posts.size()) > snapshot.post_count) {
    throw SchemaError(origin + ": posts.jsonl has more records than post_count");
  }

  std::set<std::string> handles;
  line_no = 0;
  for (const auto& line : following_lines) {
    ++line_no;
    json f;
    try {
      f = json::parse(line);
    } catch (const json::exception& e) {
      issues.push_back({origin + "/following.jsonl", line_no,
                        std::string("unparseable line: ") + e.what()});
      continue;
    }
    try {
      FollowedAccount account;
      account.handle = f.at("handle").get<std::string>();
      if (account.handle.empty()) {
        issues.push_back({origin + "/following.jsonl", line_no, "empty handle"});
        continue;
      }
      if (f.contains("follower_count") && !f.at("follower_count").is_null()) {
        const auto count = f.at("follower_count").get<std::int64_t>();
        if (count < 0) {
          issues.push_back({origin + "/following.jsonl", line_no,
                            "negative follower_count"});
          continue;
        }
        account.follower_count = count;
      }
      if (!handles.insert(account.handle).second) {
        issues.push_back({origin + "/following.jsonl", line_no,
                          "duplicate handle '" + account.handle + "' skipped"});
        continue;
      }
      snapshot.following.push_back(std::move(account));
    } catch (const json::exception& e) {
      issues.push_back({origin + "/following.jsonl", line_no,
                        std::string("bad following record: ") + e.what()});
    }
  }

  return snapshot;
}

ProfileSnapshot parse_snapshot(const std::string& directory,
                               std::vector<ParseIssue>& issues) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  const fs::path profile_path = dir / "profile.json";
  std::ifstream in(profile_path);
  if (!in) {
    throw SchemaError("snapshot directory has no profile.json: " + directory);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto snapshot = parse_snapshot_documents(
      buffer.str(), read_lines(dir / "posts.jsonl"),
      read_lines(dir / "following.jsonl"), directory, issues);
  if (snapshot.participant_id.empty()) {
    snapshot.participant_id = dir.filename().string();
  }
  return snapshot;
}

const std::vector<std::string>& PostFeatureSet::feature_names() {
  static const std::vector<std::string> names = {
      "follower_count",
      "following_count",
      "post_count",
      "total_post_likes",
      "average_post_likes",
      "total_post_comments",
      "average_post_comments",
      "hashtag_usage_ratio",
      "caption_count",
      "average_caption_length",
      "total_caption_length",
      "location_count",
      "location_usage_ratio",
      "disabled_comment_count",
      "image_post_count",
      "image_post_ratio",
      "slide_post_count",
      "slide_post_ratio",
      "video_post_count",
      "video_post_ratio",
      "average_post_engagement",
      "total_followers_of_followings",
      "max_followers_of_followings",
      "popular_following_count",
  };
  return names;
}

std::vector<Cell> PostFeatureSet::values() const {
  return {follower_count,
          following_count,
          post_count,
          total_post_likes,
          average_post_likes,
          total_post_comments,
          average_post_comments,
          hashtag_usage_ratio,
          caption_count,
          average_caption_length,
          total_caption_length,
          location_count,
          location_usage_ratio,
          disabled_comment_count,
          image_post_count,
          image_post_ratio,
          slide_post_count,
          slide_post_ratio,
          video_post_count,
          video_post_ratio,
          average_post_engagement,
          total_followers_of_followings,
          max_followers_of_followings,
          popular_following_count};
}

PostFeatureSet derive_post_features(const ProfileSnapshot& snapshot) {
  PostFeatureSet out;
  out.follower_count = static_cast<double>(snapshot.follower_count);
  out.following_count = static_cast<double>(snapshot.following_count);
  out.post_count = static_cast<double>(snapshot.post_count);
  if (snapshot.is_private) {
    return out;  // only the three counts are observable
  }

  const auto& posts = snapshot.posts;
  const double n_posts = static_cast<double>(posts.size());

  if (!posts.empty()) {
    double total_likes = 0.0;
    double total_comments = 0.0;
    std::int64_t commentable = 0;
    std::int64_t disabled = 0;
    std::int64_t hashtagged = 0;
    std::int64_t captioned = 0;
    double caption_total = 0.0;
    std::int64_t located = 0;
    std::int64_t images = 0, slides = 0, videos = 0;
    double engagement_sum = 0.0;

    for (const auto& p : posts) {
      total_likes += static_cast<double>(p.like_count);
      if (p.comment_count.has_value()) {
        total_comments += static_cast<double>(*p.comment_count);
        ++commentable;
      } else {
        ++disabled;
      }
      if (p.hashtag_count > 0) ++hashtagged;
      if (p.caption_length > 0) {
        ++captioned;
        caption_total += static_cast<double>(p.caption_length);
      }
      if (p.has_location) ++located;
      switch (p.kind) {
        case PostKind::kImage: ++images; break;
        case PostKind::kSlide: ++slides; break;
        case PostKind::kVideo: ++videos; break;
      }
      if (snapshot.follower_count > 0) {
        const double comments =
            p.comment_count.has_value() ? static_cast<double>(*p.comment_count) : 0.0;
        engagement_sum += (static_cast<double>(p.like_count) + comments) /
                          static_cast<double>(snapshot.follower_count);
      }
    }

    out.total_post_likes = total_likes;
    out.average_post_likes = total_likes / n_posts;
    if (commentable > 0) {
      out.total_post_comments = total_comments;
      out.average_post_comments = total_comments / static_cast<double>(commentable);
    }
    out.hashtag_usage_ratio = static_cast<double>(hashtagged) / n_posts;
    out.caption_count = static_cast<double>(captioned);
    out.total_caption_length = caption_total;
    if (captioned > 0) {
      out.average_caption_length = caption_total / static_cast<double>(captioned);
    }
    out.location_count = static_cast<double>(located);
    out.location_usage_ratio = static_cast<double>(located) / n_posts;
    out.disabled_comment_count = static_cast<double>(disabled);
    out.image_post_count = static_cast<double>(images);
    out.image_post_ratio = static_cast<double>(images) / n_posts;
    out.slide_post_count = static_cast<double>(slides);
    out.slide_post_ratio = static_cast<double>(slides) / n_posts;
    out.video_post_count = static_cast<double>(videos);
    out.video_post_ratio = static_cast<double>(videos) / n_posts;
    if (snapshot.follower_count > 0) {
      out.average_post_engagement = engagement_sum / n_posts;
    }
  }

  bool any_known = false;
  double total_fof = 0.0;
  double max_fof = 0.0;
  std::int64_t popular = 0;
  for (const auto& account : snapshot.following) {
    if (!account.follower_count.has_value()) continue;
    const double count = static_cast<double>(*account.follower_count);
    total_fof += count;
    max_fof = any_known ? std::max(max_fof, count) : count;
    any_known = true;
    if (*account.follower_count > kPopularFollowerThreshold) ++popular;
  }
  if (any_known) {
    out.total_followers_of_followings = total_fof;
    out.max_followers_of_followings = max_fof;
  }
  // An empty list with a nonzero following_count means the crawl was
  // truncated, so the count is unknown rather than zero.
  const bool genuinely_none = snapshot.following.empty() && snapshot.following_count == 0;
  if (!snapshot.following.empty() || genuinely_none) {
    out.popular_following_count = static_cast<double>(popular);
  }
  if (genuinely_none) {
    out.total_followers_of_followings = 0.0;
  }
  return out;
}

std::string snapshot_profile_json(const ProfileSnapshot& snapshot) {
  json j;
  j["schema_version"] = 1;
  j["participant_id"] = snapshot.participant_id;
  j["username"] = snapshot.username;
  j["is_private"] = snapshot.is_private;
  j["follower_count"] = snapshot.follower_count;
  j["following_count"] = snapshot.following_count;
  j["post_count"] = snapshot.post_count;
  return j.dump(2) + "\n";
}

std::vector<std::string> snapshot_post_lines(const ProfileSnapshot& snapshot) {
  std::vector<std::string> lines;
  lines.reserve(snapshot.posts.size());
  for (const auto& p : snapshot.posts) {
    json j;
    j["post_id"] = p.post_id;
    j["kind"] = post_kind_slug(p.kind);
    j["like_count"] = p.like_count;
    if (p.comment_count.has_value()) {
      j["comment_count"] = *p.comment_count;
    } else {
      j["comments_disabled"] = true;
    }
    j["caption_length"] = p.caption_length;
    j["hashtag_count"] = p.hashtag_count;
    j["has_location"] = p.has_location;
    lines.push_back(j.dump());
  }
  return lines;
}

std::vector<std::string> snapshot_following_lines(const ProfileSnapshot& snapshot) {
  std::vector<std::string> lines;
  lines.reserve(snapshot.following.size());
  for (const auto& f : snapshot.following) {
    json j;
    j["handle"] = f.handle;
    if (f.follower_count.has_value()) j["follower_count"] = *f.follower_count;
    lines.push_back(j.dump());
  }
  return lines;
}

}  // namespace traitpipe::ingest
