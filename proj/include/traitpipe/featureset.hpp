#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "traitpipe/common.hpp"
#include "traitpipe/ingestion.hpp"

namespace traitpipe::features {

/// Accounts that qualify as following-indicator features: follower count
/// strictly above min_followers and followed by at least min_participants
/// cohort members. Handle order is lexicographic.
struct PopularAccountCatalog {
  std::string cohort_version;
  std::int64_t min_followers = ingest::kPopularFollowerThreshold;
  std::size_t min_participants = 6;
  std::vector<std::string> handles;

  [[nodiscard]] bool contains(const std::string& handle) const;
};

[[nodiscard]] PopularAccountCatalog build_popular_catalog(
    std::span<const ingest::ProfileSnapshot> snapshots,
    std::int64_t min_followers = ingest::kPopularFollowerThreshold,
    std::size_t min_participants = 6,
    const std::string& cohort_version = "v1");

[[nodiscard]] std::string catalog_to_json(const PopularAccountCatalog& catalog);
[[nodiscard]] PopularAccountCatalog catalog_from_json(const std::string& text);

enum class Gender { kFemale, kMale };
enum class Education {
  kHighSchoolStudent,  // 0
  kDiploma,            // 1
  kAssociateDegree,    // 2
  kBachelorsDegree,    // 3
  kMastersDegree,      // 4
  kDoctorateDegree,    // 5
};
enum class Occupation {
  kArtist,        // 0
  kEmployee,      // 1
  kHousewife,     // 2
  kRetired,       // 3
  kSelfEmployed,  // 4
  kStudent,       // 5
  kUnemployed,    // 6
};

[[nodiscard]] Education education_from_slug(const std::string& slug);
[[nodiscard]] Occupation occupation_from_slug(const std::string& slug);
[[nodiscard]] const std::string& education_slug(Education e);
[[nodiscard]] const std::string& occupation_slug(Occupation o);

/// Self-reported demographics; every field may be unreported.
struct Demographics {
  std::string participant_id;
  std::optional<Gender> gender;
  std::optional<double> age;
  std::optional<Education> education;
  std::optional<Occupation> occupation;
  std::optional<bool> private_page;
};

/// One encoded demographic value with its column name.
struct EncodedFeature {
  std::string name;
  Cell value;
};

/// Encodes demographics into the ordinal codes (female = 1, education and
/// occupation category codes, private_page flag, age passthrough) plus one
/// indicator column per education/occupation category. Unreported fields
/// stay missing, indicators included.
[[nodiscard]] std::vector<EncodedFeature> encode_demographics(const Demographics& d);

/// Column names produced by encode_demographics, in order.
[[nodiscard]] const std::vector<std::string>& demographic_feature_names();

enum class FeatureCategory { kFollowingIndicator, kPostProfile, kDemographic };

[[nodiscard]] const std::string& feature_category_slug(FeatureCategory c);
[[nodiscard]] FeatureCategory feature_category_from_slug(const std::string& slug);

struct FeatureInfo {
  std::string name;
  FeatureCategory category = FeatureCategory::kPostProfile;
};

/// Ordered, uniquely named feature columns with category tags.
class FeatureCatalog {
 public:
  void add(std::string name, FeatureCategory category);
  [[nodiscard]] std::size_t size() const { return infos_.size(); }
  [[nodiscard]] const FeatureInfo& info(std::size_t index) const { return infos_[index]; }
  [[nodiscard]] const std::vector<FeatureInfo>& infos() const { return infos_; }
  [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const;

 private:
  std::vector<FeatureInfo> infos_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Participants x features grid with explicit missing cells.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  FeatureCatalog columns;
  std::vector<Cell> cells;  // row-major

  [[nodiscard]] std::size_t n_rows() const { return row_ids.size(); }
  [[nodiscard]] std::size_t n_cols() const { return columns.size(); }
  [[nodiscard]] const Cell& at(std::size_t row, std::size_t col) const {
    return cells[row * n_cols() + col];
  }
  [[nodiscard]] Cell& at(std::size_t row, std::size_t col) {
    return cells[row * n_cols() + col];
  }
  [[nodiscard]] std::vector<Cell> column(std::size_t col) const;

  /// New matrix keeping only the named columns, in the given order.
  /// Throws ContractError when a name is unknown.
  [[nodiscard]] FeatureMatrix select_columns(std::span<const std::string> names) const;

  /// New matrix keeping only the given rows, in the given order.
  [[nodiscard]] FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
};

/// Assembles one row per participant id: demographic columns, post/profile
/// columns, one followed-catalog-count column, then the indicator block in
/// catalog order. Indicator cells are 1/0 for public profiles and missing
/// for private profiles or participants without a snapshot.
/// Throws ValidationError on duplicate participant ids.
[[nodiscard]] FeatureMatrix assemble_matrix(
    std::span<const std::string> participant_ids,
    std::span<const ingest::ProfileSnapshot> snapshots,
    const PopularAccountCatalog& catalog,
    std::span<const Demographics> demographics);

/// CSV with a participant_id column; missing cells serialize as empty.
void write_matrix_csv(const FeatureMatrix& matrix, const std::string& path);
[[nodiscard]] FeatureMatrix read_matrix_csv(const std::string& path,
                                            const std::string& sidecar_json_path);

/// Sidecar JSON describing the columns (name, category) and provenance.
[[nodiscard]] std::string matrix_sidecar_json(const FeatureMatrix& matrix,
                                              const PopularAccountCatalog& catalog);

/// Reads demographics from CSV with header
/// participant_id,gender,age,education,occupation[,private_page].
[[nodiscard]] std::vector<Demographics> read_demographics_csv(const std::string& path);
void write_demographics_csv(std::span<const Demographics> rows, const std::string& path);

}  // namespace traitpipe::features
