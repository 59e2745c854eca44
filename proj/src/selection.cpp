#include "traitpipe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/rng.hpp"
#include "traitpipe/stats.hpp"

namespace traitpipe::select {

namespace {
using nlohmann::json;

double pearson_complete(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 3) {
    throw InsufficientDataError("pearson: need at least 3 complete pairs, have " +
                                std::to_string(n));
  }
  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedStatError("pearson: correlation undefined for a constant vector");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ContractError("pearson: vectors differ in length");
  }
  return pearson_complete(x, y);
}

double pearson(std::span<const Cell> x, std::span<const Cell> y) {
  if (x.size() != y.size()) {
    throw ContractError("pearson: vectors differ in length");
  }
  std::vector<double> xs, ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].has_value() && y[i].has_value()) {
      xs.push_back(*x[i]);
      ys.push_back(*y[i]);
    }
  }
  return pearson_complete(xs, ys);
}

double pearson_pvalue(double r, std::size_t n) {
  if (n < 3) {
    throw InsufficientDataError("pearson_pvalue: need n >= 3");
  }
  if (!(std::fabs(r) <= 1.0)) {
    throw ValidationError("pearson_pvalue: |r| must be <= 1");
  }
  const double ar = std::fabs(r);
  if (ar >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  return stats::student_t_two_sided_p(t, df);
}

TargetIndicator target_indicator(std::span<const psych::TraitLabel> labels) {
  if (labels.empty()) {
    throw InsufficientDataError("target_indicator: no labels");
  }
  std::array<std::size_t, 3> counts{0, 0, 0};
  for (const auto& label : labels) {
    counts[static_cast<std::size_t>(label.value)] += 1;
  }
  std::size_t distinct = 0;
  for (const auto c : counts) distinct += (c > 0) ? 1 : 0;
  if (distinct < 2) {
    throw UndefinedStatError(
        "target_indicator: labels contain a single class, target degenerate");
  }
  // Modal class; ties go to the higher-ordered class (low < medium < high).
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] >= counts[best]) best = i;
  }
  TargetIndicator out;
  out.target_class = static_cast<psych::LabelValue>(best);
  out.values.reserve(labels.size());
  for (const auto& label : labels) {
    out.values.push_back(label.value == out.target_class ? 1.0 : 0.0);
  }
  return out;
}

CorrelationReport correlate_features(const features::FeatureMatrix& matrix,
                                     std::span<const double> target) {
  if (target.size() != matrix.n_rows()) {
    throw ContractError("correlate_features: target length mismatch");
  }
  CorrelationReport report;
  std::vector<double> xs, ys;
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    xs.clear();
    ys.clear();
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
      const auto& cell = matrix.at(r, c);
      if (cell.has_value()) {
        xs.push_back(*cell);
        ys.push_back(target[r]);
      }
    }
    const auto& name = matrix.columns.info(c).name;
    try {
      CorrelationRow row;
      row.feature = name;
      row.r = pearson_complete(xs, ys);
      row.n_effective = xs.size();
      row.p = pearson_pvalue(row.r, row.n_effective);
      report.rows.push_back(std::move(row));
    } catch (const InsufficientDataError&) {
      report.notes.push_back(name + ": fewer than 3 complete pairs, skipped");
    } catch (const UndefinedStatError&) {
      report.notes.push_back(name + ": constant over complete pairs, skipped");
    }
  }
  return report;
}

void write_correlation_csv(const CorrelationReport& report, const std::string& trait,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw SchemaError("cannot write correlation CSV: " + path);
  }
  csv::write_row(out, {"feature", "trait", "r", "p", "n"});
  for (const auto& row : report.rows) {
    csv::write_row(out, {row.feature, trait, csv::format_double(row.r),
                         csv::format_double(row.p), std::to_string(row.n_effective)});
  }
}

SelectedFeatureSet select_features(const features::FeatureMatrix& matrix,
                                   std::span<const psych::TraitLabel> labels,
                                   const std::string& trait, SelectionParams params) {
  if (labels.size() != matrix.n_rows()) {
    throw ContractError("select_features: labels/rows mismatch");
  }
  const auto target = target_indicator(labels);
  auto report = correlate_features(matrix, target.values);

  SelectedFeatureSet out;
  out.trait = trait;
  out.scheme = labels.empty() ? psych::Scheme::kTwo : labels.front().scheme;
  out.target_class = target.target_class;
  out.params = params;
  out.notes = std::move(report.notes);

  std::vector<const CorrelationRow*> kept;
  for (const auto& row : report.rows) {
    if (row.r >= params.r_min && row.p <= params.p_max) {
      kept.push_back(&row);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const CorrelationRow* a, const CorrelationRow* b) {
    const double aa = std::fabs(a->r);
    const double ab = std::fabs(b->r);
    if (aa != ab) return aa > ab;
    return a->feature < b->feature;
  });
  for (const auto* row : kept) {
    out.feature_names.push_back(row->feature);
    out.feature_r.push_back(row->r);
  }
  return out;
}

namespace {

struct RefineSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

RefineSplit make_refine_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, "refine-split"));
  rng.shuffle(order);
  const std::size_t n_train = (n * 3) / 4;  // internal 75/25 split
  RefineSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.end());
  return split;
}

}  // namespace

SelectedFeatureSet refine_features(const features::FeatureMatrix& matrix,
                                   std::span<const psych::TraitLabel> labels,
                                   const SelectedFeatureSet& initial,
                                   const SubsetScorer& scorer, std::uint64_t seed) {
  if (initial.feature_names.empty()) {
    throw ContractError("refine_features: initial selection is empty");
  }
  if (labels.size() != matrix.n_rows()) {
    throw ContractError("refine_features: labels/rows mismatch");
  }

  const auto split = make_refine_split(matrix.n_rows(), seed);
  std::vector<psych::TraitLabel> train_labels, validation_labels;
  for (const auto r : split.train) train_labels.push_back(labels[r]);
  for (const auto r : split.validation) validation_labels.push_back(labels[r]);

  SelectedFeatureSet result = initial;
  const std::uint64_t score_seed = Rng::derive(seed, "refine-score");

  auto score_subset = [&](const std::vector<std::string>& names) -> std::optional<double> {
    const auto sub = matrix.select_columns(names);
    const auto train = sub.select_rows(split.train);
    const auto validation = sub.select_rows(split.validation);
    try {
      return scorer(train, train_labels, validation, validation_labels, score_seed);
    } catch (const std::exception& e) {
      result.notes.push_back("refine: subset of " + std::to_string(names.size()) +
                             " features skipped: " + e.what());
      return std::nullopt;
    }
  };

  std::vector<std::string> current = initial.feature_names;
  const auto initial_score = score_subset(current);
  if (!initial_score.has_value()) {
    result.notes.push_back("refine: initial subset failed to score, selection unchanged");
    return result;
  }
  double best_score = *initial_score;

  // Backward pass: drop from the lowest-|r| end when accuracy does not drop.
  std::vector<std::string> dropped;
  for (std::size_t i = initial.feature_names.size(); i-- > 0;) {
    if (current.size() == 1) break;
    const std::string& candidate = initial.feature_names[i];
    std::vector<std::string> without;
    for (const auto& name : current) {
      if (name != candidate) without.push_back(name);
    }
    const auto score = score_subset(without);
    if (score.has_value() && *score >= best_score) {
      best_score = *score;
      current = std::move(without);
      dropped.push_back(candidate);
    }
  }

  // Forward pass: re-add dropped candidates, highest |r| first, on strict
  // improvement only.
  std::vector<std::string> forward(dropped.rbegin(), dropped.rend());
  for (const auto& candidate : forward) {
    std::vector<std::string> with = current;
    // Reinsert preserving the original |r| ordering.
    std::vector<std::string> merged;
    for (const auto& name : initial.feature_names) {
      const bool in_current =
          std::find(with.begin(), with.end(), name) != with.end();
      if (in_current || name == candidate) merged.push_back(name);
    }
    const auto score = score_subset(merged);
    if (score.has_value() && *score > best_score) {
      best_score = *score;
      current = std::move(merged);
    }
  }

  // Rebuild names/r in the original ordering.
  result.feature_names.clear();
  result.feature_r.clear();
  for (std::size_t i = 0; i < initial.feature_names.size(); ++i) {
    const auto& name = initial.feature_names[i];
    if (std::find(current.begin(), current.end(), name) != current.end()) {
      result.feature_names.push_back(name);
      result.feature_r.push_back(initial.feature_r[i]);
    }
  }
  return result;
}

std::string selected_set_to_json(const SelectedFeatureSet& set) {
  json j;
  j["schema_version"] = 1;
  j["trait"] = set.trait;
  j["scheme"] = psych::scheme_slug(set.scheme);
  j["target_class"] = psych::label_slug(set.target_class);
  j["params"] = {{"r_min", set.params.r_min}, {"p_max", set.params.p_max}};
  j["features"] = set.feature_names;
  j["r"] = set.feature_r;
  j["notes"] = set.notes;
  return j.dump(2) + "\n";
}

SelectedFeatureSet selected_set_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("selected set JSON parse error: ") + e.what());
  }
  try {
    SelectedFeatureSet set;
    set.trait = j.at("trait").get<std::string>();
    set.scheme = psych::scheme_from_slug(j.at("scheme").get<std::string>());
    set.target_class = psych::label_from_slug(j.at("target_class").get<std::string>());
    set.params.r_min = j.at("params").at("r_min").get<double>();
    set.params.p_max = j.at("params").at("p_max").get<double>();
    set.feature_names = j.at("features").get<std::vector<std::string>>();
    set.feature_r = j.at("r").get<std::vector<double>>();
    set.notes = j.at("notes").get<std::vector<std::string>>();
    return set;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("selected set JSON field error: ") + e.what());
  }
}

}  // namespace traitpipe::select
