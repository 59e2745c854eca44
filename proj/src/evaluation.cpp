#include "traitpipe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "traitpipe/csv.hpp"
#include "traitpipe/rng.hpp"

namespace traitpipe::eval {

namespace {
using nlohmann::json;
}

Split split_train_test(std::size_t n_rows, double ratio, std::uint64_t seed) {
  if (n_rows < 5) {
    throw InsufficientDataError("split_train_test: need at least 5 rows");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split_train_test: ratio must be in (0, 1)");
  }
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, "train-test-split"));
  rng.shuffle(order);
  const auto n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_rows)));
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  split.test.assign(order.begin() + static_cast<long>(n_train), order.end());
  return split;
}

Split split_train_test_stratified(std::span<const psych::TraitLabel> labels, double ratio,
                                  std::uint64_t seed) {
  if (labels.size() < 5) {
    throw InsufficientDataError("split_train_test_stratified: need at least 5 rows");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split_train_test_stratified: ratio must be in (0, 1)");
  }
  Split split;
  Rng rng(Rng::derive(seed, "stratified-split"));
  for (const auto cls :
       {psych::LabelValue::kLow, psych::LabelValue::kMedium, psych::LabelValue::kHigh}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].value == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_train ? split.train : split.test).push_back(members[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double ConfusionMatrix::total() const {
  double sum = 0.0;
  for (const double c : counts) sum += c;
  return sum;
}

double ConfusionMatrix::trace() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < k(); ++i) sum += at(i, i);
  return sum;
}

namespace {

std::size_t high_index(const ConfusionMatrix& cm) {
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    if (cm.classes[i] == psych::LabelValue::kHigh) return i;
  }
  throw ContractError("confusion matrix has no High class");
}

}  // namespace

double ConfusionMatrix::tp() const {
  const auto h = high_index(*this);
  return at(h, h);
}

double ConfusionMatrix::fp() const {
  const auto h = high_index(*this);
  double sum = 0.0;
  for (std::size_t actual = 0; actual < k(); ++actual) {
    if (actual != h) sum += at(actual, h);
  }
  return sum;
}

double ConfusionMatrix::fn() const {
  const auto h = high_index(*this);
  double sum = 0.0;
  for (std::size_t predicted = 0; predicted < k(); ++predicted) {
    if (predicted != h) sum += at(h, predicted);
  }
  return sum;
}

double ConfusionMatrix::tn() const {
  const auto h = high_index(*this);
  double sum = 0.0;
  for (std::size_t actual = 0; actual < k(); ++actual) {
    for (std::size_t predicted = 0; predicted < k(); ++predicted) {
      if (actual != h && predicted != h) sum += at(actual, predicted);
    }
  }
  return sum;
}

ConfusionMatrix ConfusionMatrix::from_counts_two_level(double tp, double fp, double fn,
                                                       double tn) {
  ConfusionMatrix cm;
  cm.classes = {psych::LabelValue::kLow, psych::LabelValue::kHigh};
  cm.counts = {tn, fp, fn, tp};
  return cm;
}

ConfusionMatrix ConfusionMatrix::tally(std::span<const psych::TraitLabel> actual,
                                       std::span<const psych::TraitLabel> predicted) {
  if (actual.size() != predicted.size()) {
    throw ContractError("ConfusionMatrix::tally: length mismatch");
  }
  if (actual.empty()) {
    throw ValidationError("ConfusionMatrix::tally: no rows");
  }
  const auto scheme = actual.front().scheme;
  ConfusionMatrix cm;
  cm.classes = learn::classes_for_scheme(scheme);
  cm.counts.assign(cm.k() * cm.k(), 0.0);
  const auto y_actual = learn::encode_labels(actual, scheme);
  const auto y_predicted = learn::encode_labels(predicted, scheme);
  for (std::size_t i = 0; i < y_actual.size(); ++i) {
    cm.at(static_cast<std::size_t>(y_actual[i]), static_cast<std::size_t>(y_predicted[i])) +=
        1.0;
  }
  return cm;
}

TwoLevelMetrics metrics_two_level(const ConfusionMatrix& cm) {
  if (cm.total() <= 0.0) {
    throw ValidationError("metrics_two_level: empty confusion matrix");
  }
  const double tp = cm.tp(), fp = cm.fp(), fn = cm.fn(), tn = cm.tn();
  TwoLevelMetrics m;
  m.accuracy = (tp + tn) / (tp + fp + fn + tn);
  if (tp + fp > 0.0) {
    m.precision = tp / (tp + fp);
  } else {
    m.precision = 0.0;
    m.precision_defined = false;
  }
  if (tp + fn > 0.0) {
    m.recall = tp / (tp + fn);
  } else {
    m.recall = 0.0;
    m.recall_defined = false;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1 = 0.0;
    m.f1_defined = false;
  }
  return m;
}

PerClassF1 per_class_f1(const ConfusionMatrix& cm) {
  PerClassF1 out;
  for (std::size_t c = 0; c < cm.k(); ++c) {
    const double tp = cm.at(c, c);
    double fp = 0.0, fn = 0.0, size = 0.0;
    for (std::size_t i = 0; i < cm.k(); ++i) {
      if (i != c) {
        fp += cm.at(i, c);
        fn += cm.at(c, i);
      }
      size += cm.at(c, i);
    }
    const double precision = (tp + fp > 0.0) ? tp / (tp + fp) : 0.0;
    const double recall = (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
    const double f1 = (precision + recall > 0.0)
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    out.f1.push_back(f1);
    out.sizes.push_back(size);
  }
  return out;
}

double weighted_f1(std::span<const double> per_class_f1,
                   std::span<const double> class_sizes) {
  if (per_class_f1.size() != class_sizes.size()) {
    throw ValidationError("weighted_f1: list lengths differ");
  }
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < per_class_f1.size(); ++i) {
    if (class_sizes[i] < 0.0) {
      throw ValidationError("weighted_f1: negative class size");
    }
    weighted += class_sizes[i] * per_class_f1[i];
    total += class_sizes[i];
  }
  if (total <= 0.0) {
    throw ValidationError("weighted_f1: class sizes sum to zero");
  }
  return weighted / total;
}

double roc_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) {
    throw ContractError("roc_auc: scores/labels length mismatch");
  }
  std::size_t n_pos = 0, n_neg = 0;
  for (const int p : positive) {
    if (p != 0) ++n_pos;
    else ++n_neg;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedStatError("roc_auc: both classes must be present");
  }
  // Average ranks, ties shared; AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg).
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) {
      if (positive[order[t]] != 0) positive_rank_sum += mean_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double roc_auc(std::span<const double> scores, std::span<const psych::TraitLabel> labels) {
  std::vector<int> positive;
  positive.reserve(labels.size());
  for (const auto& label : labels) {
    positive.push_back(label.value == psych::LabelValue::kHigh ? 1 : 0);
  }
  return roc_auc(scores, positive);
}

const EvalCell* EvaluationReport::find(const std::string& trait, const std::string& family,
                                       psych::Scheme scheme) const {
  for (const auto& cell : cells) {
    if (cell.trait == trait && cell.family == family && cell.scheme == scheme) {
      return &cell;
    }
  }
  return nullptr;
}

EvalCell evaluate_model(const learn::TrainedModel& model,
                        const features::FeatureMatrix& test_matrix,
                        std::span<const psych::TraitLabel> test_labels,
                        const std::string& trait, std::uint64_t split_seed) {
  if (test_matrix.n_rows() != test_labels.size()) {
    throw ContractError("evaluate_model: rows/labels mismatch");
  }
  if (test_labels.empty()) {
    throw ValidationError("evaluate_model: empty test set");
  }
  std::vector<psych::TraitLabel> predicted;
  std::vector<double> high_scores;
  predicted.reserve(test_labels.size());
  std::vector<Cell> row(test_matrix.n_cols());
  for (std::size_t r = 0; r < test_matrix.n_rows(); ++r) {
    for (std::size_t c = 0; c < test_matrix.n_cols(); ++c) row[c] = test_matrix.at(r, c);
    const auto prediction = learn::predict_ordered(model, row);
    predicted.push_back(prediction.label);
    for (std::size_t k = 0; k < prediction.classes.size(); ++k) {
      if (prediction.classes[k] == psych::LabelValue::kHigh) {
        high_scores.push_back(prediction.scores[k]);
      }
    }
  }

  const auto cm = ConfusionMatrix::tally(test_labels, predicted);
  const auto per_class = per_class_f1(cm);

  EvalCell cell;
  cell.trait = trait;
  cell.family = learn::family_slug(model.spec.family);
  cell.scheme = model.spec.scheme;
  cell.n_test = test_labels.size();
  cell.split_seed = split_seed;
  cell.class_f1 = per_class.f1;
  cell.class_sizes = per_class.sizes;
  cell.accuracy = cm.trace() / cm.total();
  if (model.spec.scheme == psych::Scheme::kTwo) {
    const auto metrics = metrics_two_level(cm);
    cell.precision = metrics.precision;
    if (!metrics.precision_defined) {
      cell.notes.push_back("precision undefined (no predicted positives), reported as 0");
    }
    try {
      cell.auc = roc_auc(high_scores, test_labels);
    } catch (const UndefinedStatError&) {
      cell.notes.push_back("auc undefined: test set contains a single class");
    }
  } else {
    cell.weighted_f1 = weighted_f1(per_class.f1, per_class.sizes);
  }
  return cell;
}

namespace {

struct MetricColumn {
  std::string name;
  std::function<std::optional<double>(const EvalCell&)> get;
};

std::string fmt3(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v;
  return out.str();
}

}  // namespace

RenderedReport render_report(const EvaluationReport& report, psych::Scheme scheme,
                             std::span<const std::string> family_order) {
  std::vector<MetricColumn> metrics;
  metrics.push_back({"accuracy", [](const EvalCell& c) -> std::optional<double> {
                       return c.accuracy;
                     }});
  if (scheme == psych::Scheme::kTwo) {
    metrics.push_back({"auc", [](const EvalCell& c) { return c.auc; }});
    metrics.push_back({"precision", [](const EvalCell& c) { return c.precision; }});
  } else {
    metrics.push_back({"weighted_f1", [](const EvalCell& c) { return c.weighted_f1; }});
  }

  // Collect traits in first-seen order.
  std::vector<std::string> traits;
  for (const auto& cell : report.cells) {
    if (cell.scheme != scheme) continue;
    if (std::find(traits.begin(), traits.end(), cell.trait) == traits.end()) {
      traits.push_back(cell.trait);
    }
  }
  // Families actually present, respecting the requested order.
  std::vector<std::string> families;
  std::vector<std::string> absent;
  for (const auto& family : family_order) {
    bool present = false;
    for (const auto& cell : report.cells) {
      if (cell.scheme == scheme && cell.family == family) {
        present = true;
        break;
      }
    }
    if (present) families.push_back(family);
    else absent.push_back(family);
  }

  std::ostringstream text;
  std::ostringstream csv_out;
  json j;
  j["scheme"] = psych::scheme_slug(scheme);
  json jrows = json::array();

  text << (scheme == psych::Scheme::kTwo ? "Two-level classification"
                                         : "Three-level classification")
       << "\n";
  {
    std::ostringstream header;
    header << std::left << std::setw(28) << "trait" << std::setw(13) << "metric";
    for (const auto& family : families) header << std::setw(10) << family;
    header << "best";
    text << header.str() << "\n";
  }

  csv::Row csv_header = {"trait", "metric"};
  for (const auto& family : families) csv_header.push_back(family);
  for (const auto& family : families) csv_header.push_back(family + "_best");
  csv::write_row(csv_out, csv_header);

  for (const auto& trait : traits) {
    for (const auto& metric : metrics) {
      std::vector<std::optional<double>> values;
      double best = -1.0;
      for (const auto& family : families) {
        const auto* cell = report.find(trait, family, scheme);
        std::optional<double> value;
        if (cell != nullptr) value = metric.get(*cell);
        if (value.has_value()) best = std::max(best, *value);
        values.push_back(value);
      }
      std::vector<bool> is_best;
      std::string best_families;
      for (std::size_t f = 0; f < families.size(); ++f) {
        const bool flag = values[f].has_value() && *values[f] == best;
        is_best.push_back(flag);
        if (flag) {
          if (!best_families.empty()) best_families += "|";
          best_families += families[f];
        }
      }

      std::ostringstream line;
      line << std::left << std::setw(28) << trait << std::setw(13) << metric.name;
      for (const auto& value : values) {
        line << std::setw(10) << (value.has_value() ? fmt3(*value) : "-");
      }
      line << best_families;
      text << line.str() << "\n";

      csv::Row row = {trait, metric.name};
      for (const auto& value : values) {
        row.push_back(value.has_value() ? csv::format_double(*value) : "");
      }
      for (const bool flag : is_best) row.push_back(flag ? "1" : "0");
      csv::write_row(csv_out, row);

      json jrow;
      jrow["trait"] = trait;
      jrow["metric"] = metric.name;
      json per_family;
      for (std::size_t f = 0; f < families.size(); ++f) {
        json entry;
        if (values[f].has_value()) entry["value"] = *values[f];
        else entry["value"] = nullptr;
        entry["best"] = static_cast<bool>(is_best[f]);
        per_family[families[f]] = std::move(entry);
      }
      jrow["families"] = std::move(per_family);
      jrows.push_back(std::move(jrow));
    }
  }
  j["rows"] = std::move(jrows);
  if (!absent.empty()) {
    std::string note = "omitted (no results):";
    for (const auto& family : absent) note += " " + family;
    text << note << "\n";
    j["omitted_families"] = absent;
  }

  RenderedReport rendered;
  rendered.text = text.str();
  rendered.csv = csv_out.str();
  rendered.json = j.dump(2) + "\n";
  return rendered;
}

std::string report_to_json(const EvaluationReport& report) {
  json cells = json::array();
  for (const auto& cell : report.cells) {
    json c;
    c["trait"] = cell.trait;
    c["family"] = cell.family;
    c["scheme"] = psych::scheme_slug(cell.scheme);
    c["accuracy"] = cell.accuracy;
    if (cell.auc.has_value()) c["auc"] = *cell.auc;
    if (cell.precision.has_value()) c["precision"] = *cell.precision;
    if (cell.weighted_f1.has_value()) c["weighted_f1"] = *cell.weighted_f1;
    c["class_f1"] = cell.class_f1;
    c["class_sizes"] = cell.class_sizes;
    c["n_test"] = cell.n_test;
    c["split_seed"] = cell.split_seed;
    c["notes"] = cell.notes;
    cells.push_back(std::move(c));
  }
  json j;
  j["schema_version"] = 1;
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("evaluation JSON parse error: ") + e.what());
  }
  try {
    EvaluationReport report;
    for (const auto& c : j.at("cells")) {
      EvalCell cell;
      cell.trait = c.at("trait").get<std::string>();
      cell.family = c.at("family").get<std::string>();
      cell.scheme = psych::scheme_from_slug(c.at("scheme").get<std::string>());
      cell.accuracy = c.at("accuracy").get<double>();
      if (c.contains("auc")) cell.auc = c.at("auc").get<double>();
      if (c.contains("precision")) cell.precision = c.at("precision").get<double>();
      if (c.contains("weighted_f1")) cell.weighted_f1 = c.at("weighted_f1").get<double>();
      cell.class_f1 = c.at("class_f1").get<std::vector<double>>();
      cell.class_sizes = c.at("class_sizes").get<std::vector<double>>();
      cell.n_test = c.at("n_test").get<std::size_t>();
      cell.split_seed = c.at("split_seed").get<std::uint64_t>();
      cell.notes = c.at("notes").get<std::vector<std::string>>();
      report.cells.push_back(std::move(cell));
    }
    return report;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("evaluation JSON field error: ") + e.what());
  }
}

}  // namespace traitpipe::eval
