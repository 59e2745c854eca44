#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "traitpipe/common.hpp"

namespace traitpipe::ingest {

enum class PostKind { kImage, kSlide, kVideo };

[[nodiscard]] const std::string& post_kind_slug(PostKind kind);
[[nodiscard]] PostKind post_kind_from_slug(const std::string& slug);

struct PostRecord {
  std::string post_id;
  PostKind kind = PostKind::kImage;
  std::int64_t like_count = 0;
  std::optional<std::int64_t> comment_count;  // empty when comments disabled
  std::int64_t caption_length = 0;
  std::int64_t hashtag_count = 0;
  bool has_location = false;

  [[nodiscard]] bool comments_disabled() const { return !comment_count.has_value(); }
};

struct FollowedAccount {
  std::string handle;
  std::optional<std::int64_t> follower_count;  // empty when unknown
};

/// One participant's crawled profile. Private profiles carry only the three
/// counts; posts and following are empty.
struct ProfileSnapshot {
  std::string participant_id;
  std::string username;
  bool is_private = false;
  std::int64_t follower_count = 0;
  std::int64_t following_count = 0;
  std::int64_t post_count = 0;
  std::vector<PostRecord> posts;
  std::vector<FollowedAccount> following;
};

/// A malformed record noticed during parsing; collected, never dropped
/// silently.
struct ParseIssue {
  std::string file;
  int line = 0;
  std::string message;
};

/// The scalar profile/post quantities. Every field is numeric-or-missing;
/// a quantity whose denominator is zero or whose inputs are absent stays
/// missing. Per-account following indicators live in the feature matrix,
/// not here.
struct PostFeatureSet {
  Cell follower_count;
  Cell following_count;
  Cell post_count;
  Cell total_post_likes;
  Cell average_post_likes;
  Cell total_post_comments;
  Cell average_post_comments;
  Cell hashtag_usage_ratio;
  Cell caption_count;
  Cell average_caption_length;
  Cell total_caption_length;
  Cell location_count;
  Cell location_usage_ratio;
  Cell disabled_comment_count;
  Cell image_post_count;
  Cell image_post_ratio;
  Cell slide_post_count;
  Cell slide_post_ratio;
  Cell video_post_count;
  Cell video_post_ratio;
  Cell average_post_engagement;
  Cell total_followers_of_followings;
  Cell max_followers_of_followings;
  Cell popular_following_count;  // followings with > 50,000 followers

  /// Feature names in declaration order; used for matrix columns.
  [[nodiscard]] static const std::vector<std::string>& feature_names();

  /// Values aligned with feature_names().
  [[nodiscard]] std::vector<Cell> values() const;
};

/// Follower-count threshold above which an account counts as popular.
inline constexpr std::int64_t kPopularFollowerThreshold = 50000;

/// Parses one participant's export directory (profile.json, posts.jsonl,
/// following.jsonl). Malformed post/following lines are collected into
/// `issues`; structural problems (missing counts, duplicate post ids)
/// throw SchemaError.
[[nodiscard]] ProfileSnapshot parse_snapshot(const std::string& directory,
                                             std::vector<ParseIssue>& issues);

/// Parses a snapshot from in-memory documents (same schema as the files).
[[nodiscard]] ProfileSnapshot parse_snapshot_documents(
    const std::string& profile_json, const std::vector<std::string>& post_lines,
    const std::vector<std::string>& following_lines, const std::string& origin,
    std::vector<ParseIssue>& issues);

/// Derives the scalar feature set. Private snapshots populate only the
/// three counts.
[[nodiscard]] PostFeatureSet derive_post_features(const ProfileSnapshot& snapshot);

/// Serializes a snapshot back to the export schema (used by the synthetic
/// cohort writer). Returns profile.json text plus one line per post /
/// followed account.
[[nodiscard]] std::string snapshot_profile_json(const ProfileSnapshot& snapshot);
[[nodiscard]] std::vector<std::string> snapshot_post_lines(const ProfileSnapshot& snapshot);
[[nodiscard]] std::vector<std::string> snapshot_following_lines(const ProfileSnapshot& snapshot);

}  // namespace traitpipe::ingest
