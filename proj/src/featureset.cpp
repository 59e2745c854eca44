#include "traitpipe/featureset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "traitpipe/csv.hpp"

namespace traitpipe::features {

namespace {
using nlohmann::json;
}

bool PopularAccountCatalog::contains(const std::string& handle) const {
  return std::binary_search(handles.begin(), handles.end(), handle);
}

PopularAccountCatalog build_popular_catalog(
    std::span<const ingest::ProfileSnapshot> snapshots, std::int64_t min_followers,
    std::size_t min_participants, const std::string& cohort_version) {
  bool any_public = false;
  // handle -> (best known follower count, number of cohort followers)
  std::map<std::string, std::pair<std::optional<std::int64_t>, std::size_t>> tally;
  for (const auto& snapshot : snapshots) {
    if (snapshot.is_private) continue;
    any_public = true;
    for (const auto& account : snapshot.following) {
      auto& entry = tally[account.handle];
      entry.second += 1;
      if (account.follower_count.has_value()) {
        if (!entry.first.has_value() || *account.follower_count > *entry.first) {
          entry.first = account.follower_count;
        }
      }
    }
  }
  if (!any_public) {
    throw ValidationError("build_popular_catalog: no public snapshots in cohort");
  }
  PopularAccountCatalog catalog;
  catalog.cohort_version = cohort_version;
  catalog.min_followers = min_followers;
  catalog.min_participants = min_participants;
  for (const auto& [handle, entry] : tally) {
    const auto& [followers, cohort_count] = entry;
    if (!followers.has_value()) continue;
    if (*followers > min_followers && cohort_count >= min_participants) {
      catalog.handles.push_back(handle);
    }
  }
  // std::map iteration already yields lexicographic order.
  return catalog;
}

std::string catalog_to_json(const PopularAccountCatalog& catalog) {
  json j;
  j["schema_version"] = 1;
  j["cohort_version"] = catalog.cohort_version;
  j["min_followers"] = catalog.min_followers;
  j["min_participants"] = catalog.min_participants;
  j["handles"] = catalog.handles;
  return j.dump(2) + "\n";
}

PopularAccountCatalog catalog_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("catalog JSON parse error: ") + e.what());
  }
  try {
    PopularAccountCatalog catalog;
    catalog.cohort_version = j.at("cohort_version").get<std::string>();
    catalog.min_followers = j.at("min_followers").get<std::int64_t>();
    catalog.min_participants = j.at("min_participants").get<std::size_t>();
    catalog.handles = j.at("handles").get<std::vector<std::string>>();
    if (!std::is_sorted(catalog.handles.begin(), catalog.handles.end())) {
      throw SchemaError("catalog handles must be lexicographically sorted");
    }
    return catalog;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("catalog JSON field error: ") + e.what());
  }
}

namespace {

constexpr std::array<const char*, 6> kEducationSlugs = {
    "high_school_student", "diploma",        "associate_degree",
    "bachelors_degree",    "masters_degree", "doctorate_degree"};

constexpr std::array<const char*, 7> kOccupationSlugs = {
    "artist",  "employee", "housewife", "retired",
    "self_employed", "student", "unemployed"};

}  // namespace

Education education_from_slug(const std::string& slug) {
  for (std::size_t i = 0; i < kEducationSlugs.size(); ++i) {
    if (slug == kEducationSlugs[i]) return static_cast<Education>(i);
  }
  throw ValidationError("unknown education category: " + slug);
}

Occupation occupation_from_slug(const std::string& slug) {
  for (std::size_t i = 0; i < kOccupationSlugs.size(); ++i) {
    if (slug == kOccupationSlugs[i]) return static_cast<Occupation>(i);
  }
  throw ValidationError("unknown occupation category: " + slug);
}

const std::string& education_slug(Education e) {
  static const std::array<std::string, 6> slugs = [] {
    std::array<std::string, 6> out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kEducationSlugs[i];
    return out;
  }();
  return slugs[static_cast<std::size_t>(e)];
}

const std::string& occupation_slug(Occupation o) {
  static const std::array<std::string, 7> slugs = [] {
    std::array<std::string, 7> out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kOccupationSlugs[i];
    return out;
  }();
  return slugs[static_cast<std::size_t>(o)];
}

const std::vector<std::string>& demographic_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out = {"gender", "age", "education", "occupation",
                                    "private_page"};
    for (const auto* slug : kEducationSlugs) {
      out.push_back(std::string("education=") + slug);
    }
    for (const auto* slug : kOccupationSlugs) {
      out.push_back(std::string("occupation=") + slug);
    }
    return out;
  }();
  return names;
}

std::vector<EncodedFeature> encode_demographics(const Demographics& d) {
  std::vector<EncodedFeature> out;
  out.reserve(demographic_feature_names().size());
  // Female encodes as 1, male as 0.
  out.push_back({"gender", d.gender.has_value()
                               ? Cell(*d.gender == Gender::kFemale ? 1.0 : 0.0)
                               : Cell{}});
  out.push_back({"age", d.age.has_value() ? Cell(*d.age) : Cell{}});
  out.push_back({"education",
                 d.education.has_value()
                     ? Cell(static_cast<double>(static_cast<int>(*d.education)))
                     : Cell{}});
  out.push_back({"occupation",
                 d.occupation.has_value()
                     ? Cell(static_cast<double>(static_cast<int>(*d.occupation)))
                     : Cell{}});
  out.push_back({"private_page",
                 d.private_page.has_value() ? Cell(*d.private_page ? 1.0 : 0.0)
                                            : Cell{}});
  for (std::size_t i = 0; i < kEducationSlugs.size(); ++i) {
    Cell cell;
    if (d.education.has_value()) {
      cell = (static_cast<std::size_t>(*d.education) == i) ? 1.0 : 0.0;
    }
    out.push_back({std::string("education=") + kEducationSlugs[i], cell});
  }
  for (std::size_t i = 0; i < kOccupationSlugs.size(); ++i) {
    Cell cell;
    if (d.occupation.has_value()) {
      cell = (static_cast<std::size_t>(*d.occupation) == i) ? 1.0 : 0.0;
    }
    out.push_back({std::string("occupation=") + kOccupationSlugs[i], cell});
  }
  return out;
}

const std::string& feature_category_slug(FeatureCategory c) {
  static const std::array<std::string, 3> slugs = {"following_indicator",
                                                   "post_profile", "demographic"};
  return slugs[static_cast<std::size_t>(c)];
}

FeatureCategory feature_category_from_slug(const std::string& slug) {
  if (slug == "following_indicator") return FeatureCategory::kFollowingIndicator;
  if (slug == "post_profile") return FeatureCategory::kPostProfile;
  if (slug == "demographic") return FeatureCategory::kDemographic;
  throw SchemaError("unknown feature category: " + slug);
}

void FeatureCatalog::add(std::string name, FeatureCategory category) {
  if (index_.count(name) > 0) {
    throw ValidationError("duplicate feature column name: " + name);
  }
  index_[name] = infos_.size();
  infos_.push_back(FeatureInfo{std::move(name), category});
}

std::optional<std::size_t> FeatureCatalog::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Cell> FeatureMatrix::column(std::size_t col) const {
  std::vector<Cell> out(n_rows());
  for (std::size_t r = 0; r < n_rows(); ++r) out[r] = at(r, col);
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  FeatureMatrix out;
  out.row_ids = row_ids;
  std::vector<std::size_t> indices;
  indices.reserve(names.size());
  for (const auto& name : names) {
    const auto idx = columns.index_of(name);
    if (!idx.has_value()) {
      throw ContractError("select_columns: unknown feature '" + name + "'");
    }
    indices.push_back(*idx);
    out.columns.add(name, columns.info(*idx).category);
  }
  out.cells.resize(n_rows() * indices.size());
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t j = 0; j < indices.size(); ++j) {
      out.cells[r * indices.size() + j] = at(r, indices[j]);
    }
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.columns = columns;
  out.row_ids.reserve(rows.size());
  out.cells.reserve(rows.size() * n_cols());
  for (const std::size_t r : rows) {
    out.row_ids.push_back(row_ids[r]);
    for (std::size_t c = 0; c < n_cols(); ++c) out.cells.push_back(at(r, c));
  }
  return out;
}

FeatureMatrix assemble_matrix(std::span<const std::string> participant_ids,
                              std::span<const ingest::ProfileSnapshot> snapshots,
                              const PopularAccountCatalog& catalog,
                              std::span<const Demographics> demographics) {
  std::set<std::string> seen;
  for (const auto& id : participant_ids) {
    if (!seen.insert(id).second) {
      throw ValidationError("assemble_matrix: duplicate participant id '" + id + "'");
    }
  }
  std::map<std::string, const ingest::ProfileSnapshot*> snapshot_by_id;
  for (const auto& s : snapshots) {
    if (!snapshot_by_id.emplace(s.participant_id, &s).second) {
      throw ValidationError("assemble_matrix: duplicate snapshot for '" +
                            s.participant_id + "'");
    }
  }
  std::map<std::string, const Demographics*> demo_by_id;
  for (const auto& d : demographics) {
    if (!demo_by_id.emplace(d.participant_id, &d).second) {
      throw ValidationError("assemble_matrix: duplicate demographics for '" +
                            d.participant_id + "'");
    }
  }

  FeatureMatrix matrix;
  for (const auto& name : demographic_feature_names()) {
    matrix.columns.add(name, FeatureCategory::kDemographic);
  }
  for (const auto& name : ingest::PostFeatureSet::feature_names()) {
    matrix.columns.add(name, FeatureCategory::kPostProfile);
  }
  matrix.columns.add("followed_catalog_count", FeatureCategory::kPostProfile);
  for (const auto& handle : catalog.handles) {
    matrix.columns.add("follows=" + handle, FeatureCategory::kFollowingIndicator);
  }

  matrix.row_ids.assign(participant_ids.begin(), participant_ids.end());
  matrix.cells.assign(matrix.n_rows() * matrix.n_cols(), Cell{});

  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    const auto& id = matrix.row_ids[r];
    std::size_t c = 0;

    Demographics demo;
    demo.participant_id = id;
    if (const auto it = demo_by_id.find(id); it != demo_by_id.end()) {
      demo = *it->second;
    }
    const auto snap_it = snapshot_by_id.find(id);
    if (snap_it != snapshot_by_id.end() && !demo.private_page.has_value()) {
      demo.private_page = snap_it->second->is_private;
    }
    for (const auto& feature : encode_demographics(demo)) {
      matrix.at(r, c++) = feature.value;
    }

    if (snap_it == snapshot_by_id.end()) {
      continue;  // every profile-derived column stays missing
    }
    const auto& snapshot = *snap_it->second;
    const auto post_features = ingest::derive_post_features(snapshot);
    for (const auto& value : post_features.values()) {
      matrix.at(r, c++) = value;
    }

    if (snapshot.is_private) {
      continue;  // indicator block and catalog count stay missing
    }
    std::set<std::string> followed;
    for (const auto& account : snapshot.following) followed.insert(account.handle);
    double catalog_count = 0.0;
    for (const auto& handle : catalog.handles) {
      if (followed.count(handle) > 0) catalog_count += 1.0;
    }
    matrix.at(r, c++) = catalog_count;
    for (const auto& handle : catalog.handles) {
      matrix.at(r, c++) = followed.count(handle) > 0 ? 1.0 : 0.0;
    }
  }
  return matrix;
}

void write_matrix_csv(const FeatureMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw SchemaError("cannot write matrix CSV: " + path);
  }
  csv::Row header;
  header.push_back("participant_id");
  for (const auto& info : matrix.columns.infos()) header.push_back(info.name);
  csv::write_row(out, header);
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    csv::Row row;
    row.push_back(matrix.row_ids[r]);
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
      const auto& cell = matrix.at(r, c);
      row.push_back(cell.has_value() ? csv::format_double(*cell) : std::string());
    }
    csv::write_row(out, row);
  }
}

FeatureMatrix read_matrix_csv(const std::string& path,
                              const std::string& sidecar_json_path) {
  std::ifstream sidecar_in(sidecar_json_path);
  if (!sidecar_in) {
    throw SchemaError("cannot open matrix sidecar: " + sidecar_json_path);
  }
  std::stringstream buffer;
  buffer << sidecar_in.rdbuf();
  json sidecar;
  try {
    sidecar = json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("matrix sidecar parse error: ") + e.what());
  }

  FeatureMatrix matrix;
  try {
    for (const auto& f : sidecar.at("features")) {
      matrix.columns.add(f.at("name").get<std::string>(),
                         feature_category_from_slug(f.at("category").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("matrix sidecar field error: ") + e.what());
  }

  const auto rows = csv::read_file(path);
  const auto& header = rows.front();
  if (header.empty() || header[0] != "participant_id") {
    throw SchemaError("matrix CSV must start with participant_id");
  }
  if (header.size() != matrix.n_cols() + 1) {
    throw SchemaError("matrix CSV and sidecar disagree on column count");
  }
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    if (header[c + 1] != matrix.columns.info(c).name) {
      throw SchemaError("matrix CSV column '" + header[c + 1] +
                        "' does not match sidecar '" + matrix.columns.info(c).name + "'");
    }
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw SchemaError("matrix CSV row " + std::to_string(r + 1) +
                        " has wrong field count");
    }
    matrix.row_ids.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        matrix.cells.emplace_back();
      } else {
        matrix.cells.emplace_back(std::stod(row[c]));
      }
    }
  }
  return matrix;
}

std::string matrix_sidecar_json(const FeatureMatrix& matrix,
                                const PopularAccountCatalog& catalog) {
  json j;
  j["schema_version"] = 1;
  j["catalog"] = {{"cohort_version", catalog.cohort_version},
                  {"min_followers", catalog.min_followers},
                  {"min_participants", catalog.min_participants}};
  json features = json::array();
  for (const auto& info : matrix.columns.infos()) {
    features.push_back({{"name", info.name},
                        {"category", feature_category_slug(info.category)}});
  }
  j["features"] = std::move(features);
  return j.dump(2) + "\n";
}

std::vector<Demographics> read_demographics_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  const auto& header = rows.front();
  const std::vector<std::string> required = {"participant_id", "gender", "age",
                                             "education", "occupation"};
  if (header.size() < required.size()) {
    throw SchemaError("demographics CSV header too short");
  }
  for (std::size_t i = 0; i < required.size(); ++i) {
    if (header[i] != required[i]) {
      throw SchemaError("demographics CSV column " + std::to_string(i + 1) +
                        " must be " + required[i]);
    }
  }
  const bool has_private = header.size() > 5 && header[5] == "private_page";
  std::vector<Demographics> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw SchemaError("demographics CSV row " + std::to_string(r + 1) +
                        " has wrong field count");
    }
    Demographics d;
    d.participant_id = row[0];
    if (!row[1].empty()) {
      if (row[1] == "female") d.gender = Gender::kFemale;
      else if (row[1] == "male") d.gender = Gender::kMale;
      else throw ValidationError("unknown gender: " + row[1]);
    }
    if (!row[2].empty()) d.age = std::stod(row[2]);
    if (!row[3].empty()) d.education = education_from_slug(row[3]);
    if (!row[4].empty()) d.occupation = occupation_from_slug(row[4]);
    if (has_private && !row[5].empty()) d.private_page = row[5] == "1";
    out.push_back(std::move(d));
  }
  return out;
}

void write_demographics_csv(std::span<const Demographics> rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw SchemaError("cannot write demographics CSV: " + path);
  }
  csv::write_row(out, {"participant_id", "gender", "age", "education",
                       "occupation", "private_page"});
  for (const auto& d : rows) {
    csv::Row row;
    row.push_back(d.participant_id);
    row.push_back(d.gender.has_value()
                      ? (*d.gender == Gender::kFemale ? "female" : "male")
                      : "");
    row.push_back(d.age.has_value() ? csv::format_double(*d.age) : "");
    row.push_back(d.education.has_value() ? education_slug(*d.education) : "");
    row.push_back(d.occupation.has_value() ? occupation_slug(*d.occupation) : "");
    row.push_back(d.private_page.has_value() ? (*d.private_page ? "1" : "0") : "");
    csv::write_row(out, row);
  }
}

}  // namespace traitpipe::features
