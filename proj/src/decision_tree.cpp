#include <algorithm>
#include <numeric>

#include "tree_builder.hpp"

namespace traitpipe::learn {

namespace detail {

namespace {

struct SplitCandidate {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini
};

double gini_from_counts(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (const double c : counts) sum_sq += c * c;
  return 1.0 - sum_sq / (total * total);
}

// Sorted (value, class) pairs for one feature over the node's rows.
struct ValueLabel {
  double value;
  int label;
};

SplitCandidate best_split_for_feature(const NumericMatrix& matrix,
                                      std::span<const int> y,
                                      std::span<const std::size_t> rows,
                                      std::size_t feature, std::size_t n_classes,
                                      std::size_t min_leaf,
                                      std::vector<ValueLabel>& scratch) {
  scratch.clear();
  scratch.reserve(rows.size());
  for (const std::size_t r : rows) {
    scratch.push_back({matrix.at(r, feature), y[r]});
  }
  std::sort(scratch.begin(), scratch.end(),
            [](const ValueLabel& a, const ValueLabel& b) { return a.value < b.value; });

  const double n = static_cast<double>(scratch.size());
  std::vector<double> left(n_classes, 0.0);
  std::vector<double> right(n_classes, 0.0);
  for (const auto& vl : scratch) right[static_cast<std::size_t>(vl.label)] += 1.0;

  SplitCandidate best;
  double n_left = 0.0;
  for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
    const auto cls = static_cast<std::size_t>(scratch[i].label);
    left[cls] += 1.0;
    right[cls] -= 1.0;
    n_left += 1.0;
    if (scratch[i].value == scratch[i + 1].value) continue;
    const double n_right = n - n_left;
    if (n_left < static_cast<double>(min_leaf) ||
        n_right < static_cast<double>(min_leaf)) {
      continue;
    }
    const double impurity = (n_left / n) * gini_from_counts(left, n_left) +
                            (n_right / n) * gini_from_counts(right, n_right);
    if (!best.found || impurity < best.impurity) {
      best.found = true;
      best.feature = feature;
      best.threshold = 0.5 * (scratch[i].value + scratch[i + 1].value);
      best.impurity = impurity;
    }
  }
  return best;
}

struct Builder {
  const NumericMatrix& matrix;
  std::span<const int> y;
  const TreeBuildOptions& options;
  TreeModel tree;
  std::vector<ValueLabel> scratch;
  std::vector<std::size_t> feature_pool;

  std::int32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
    std::vector<double> counts(options.n_classes, 0.0);
    for (const std::size_t r : rows) counts[static_cast<std::size_t>(y[r])] += 1.0;

    const double total = static_cast<double>(rows.size());
    const bool pure = gini_from_counts(counts, total) == 0.0;
    const bool too_small = rows.size() < 2 * options.min_leaf;
    if (pure || too_small || depth >= options.max_depth) {
      return make_leaf(std::move(counts));
    }

    SplitCandidate best;
    if (options.features_per_split == 0) {
      for (std::size_t f = 0; f < matrix.cols; ++f) {
        consider(best, f, rows);
      }
    } else {
      // Partial Fisher-Yates draw of distinct features; ascending scan
      // order keeps tie-breaking deterministic.
      feature_pool.resize(matrix.cols);
      std::iota(feature_pool.begin(), feature_pool.end(), 0);
      const std::size_t k = std::min(options.features_per_split, matrix.cols);
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(options.rng->next_below(matrix.cols - i));
        std::swap(feature_pool[i], feature_pool[j]);
      }
      std::sort(feature_pool.begin(), feature_pool.begin() + static_cast<long>(k));
      for (std::size_t i = 0; i < k; ++i) {
        consider(best, feature_pool[i], rows);
      }
    }

    if (!best.found) {
      return make_leaf(std::move(counts));
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (const std::size_t r : rows) {
      if (matrix.at(r, best.feature) <= best.threshold) left_rows.push_back(r);
      else right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(index)].leaf = false;
    tree.nodes[static_cast<std::size_t>(index)].feature = best.feature;
    tree.nodes[static_cast<std::size_t>(index)].threshold = best.threshold;
    const auto left = build(left_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].left = left;
    const auto right = build(right_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  void consider(SplitCandidate& best, std::size_t feature,
                std::span<const std::size_t> rows) {
    const auto candidate = best_split_for_feature(
        matrix, y, rows, feature, options.n_classes, options.min_leaf, scratch);
    if (!candidate.found) return;
    if (!best.found || candidate.impurity < best.impurity ||
        (candidate.impurity == best.impurity &&
         (candidate.feature < best.feature ||
          (candidate.feature == best.feature && candidate.threshold < best.threshold)))) {
      best = candidate;
    }
  }

  std::int32_t make_leaf(std::vector<double> counts) {
    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(index)].leaf = true;
    tree.nodes[static_cast<std::size_t>(index)].class_counts = std::move(counts);
    return index;
  }
};

}  // namespace

TreeModel build_tree(const NumericMatrix& matrix, std::span<const int> y,
                     std::span<const std::size_t> row_indices,
                     const TreeBuildOptions& options) {
  if (options.features_per_split > 0 && options.rng == nullptr) {
    throw ConfigError("build_tree: feature subsampling requires an rng");
  }
  Builder builder{matrix, y, options, {}, {}, {}};
  std::vector<std::size_t> rows(row_indices.begin(), row_indices.end());
  builder.build(rows, 0);
  return builder.tree;
}

const std::vector<double>& tree_leaf_counts(const TreeModel& tree,
                                            std::span<const double> row) {
  std::size_t index = 0;
  while (!tree.nodes[index].leaf) {
    const auto& node = tree.nodes[index];
    index = static_cast<std::size_t>(row[node.feature] <= node.threshold ? node.left
                                                                         : node.right);
  }
  return tree.nodes[index].class_counts;
}

std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace detail

TrainedModel train_decision_tree(const NumericMatrix& matrix,
                                 std::span<const psych::TraitLabel> labels,
                                 const ModelSpec& spec,
                                 std::vector<std::string> feature_names) {
  if (spec.family != ModelFamily::kDecisionTree) {
    throw ConfigError("train_decision_tree: spec family mismatch");
  }
  validate_spec(spec);
  if (matrix.rows != labels.size()) {
    throw ContractError("train_decision_tree: rows/labels mismatch");
  }
  const auto classes = classes_for_scheme(spec.scheme);
  const auto y = encode_labels(labels, spec.scheme);

  detail::TreeBuildOptions options;
  options.max_depth = spec.tree.max_depth;
  options.min_leaf = spec.tree.min_leaf;
  options.n_classes = classes.size();

  std::vector<std::size_t> rows(matrix.rows);
  std::iota(rows.begin(), rows.end(), 0);

  TrainedModel model;
  model.spec = spec;
  model.classes = classes;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      feature_names.push_back("f" + std::to_string(c));
    }
  }
  model.feature_names = std::move(feature_names);
  model.payload = detail::build_tree(matrix, y, rows, options);
  return model;
}

}  // namespace traitpipe::learn
