#include <algorithm>
#include <cmath>
#include <numeric>

#include "tree_builder.hpp"

namespace traitpipe::learn {

namespace {

using detail::TreeBuildOptions;

std::vector<TreeModel> fit_forest(const NumericMatrix& matrix, std::span<const int> y,
                                  std::span<const std::size_t> train_rows,
                                  std::size_t n_classes, std::size_t n_trees,
                                  std::size_t max_depth, std::size_t min_leaf,
                                  std::uint64_t seed) {
  const std::size_t features_per_split = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(matrix.cols)))));
  std::vector<TreeModel> trees;
  trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng(Rng::derive(seed, "tree-" + std::to_string(t)));
    std::vector<std::size_t> bootstrap(train_rows.size());
    for (auto& r : bootstrap) {
      r = train_rows[static_cast<std::size_t>(rng.next_below(train_rows.size()))];
    }
    TreeBuildOptions options;
    options.max_depth = max_depth;
    options.min_leaf = min_leaf;
    options.n_classes = n_classes;
    options.features_per_split = features_per_split;
    options.rng = &rng;
    trees.push_back(detail::build_tree(matrix, y, bootstrap, options));
  }
  return trees;
}

std::size_t forest_vote(const std::vector<TreeModel>& trees, std::span<const double> row,
                        std::size_t n_classes, std::vector<double>& votes) {
  votes.assign(n_classes, 0.0);
  for (const auto& tree : trees) {
    const auto& counts = detail::tree_leaf_counts(tree, row);
    votes[detail::argmax_index(counts)] += 1.0;
  }
  return detail::argmax_index(votes);
}

}  // namespace

TrainedModel train_random_forest(const NumericMatrix& matrix,
                                 std::span<const psych::TraitLabel> labels,
                                 const ModelSpec& spec,
                                 std::vector<std::string> feature_names) {
  if (spec.family != ModelFamily::kRandomForest) {
    throw ConfigError("train_random_forest: spec family mismatch");
  }
  validate_spec(spec);
  if (matrix.rows != labels.size()) {
    throw ContractError("train_random_forest: rows/labels mismatch");
  }
  const auto classes = classes_for_scheme(spec.scheme);
  const auto y = encode_labels(labels, spec.scheme);
  const std::uint64_t seed = *spec.seed;
  const auto& params = spec.forest;

  // Seeded fold assignment for the hyperparameter search.
  std::vector<std::size_t> order(matrix.rows);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(Rng::derive(seed, "cv-folds"));
    rng.shuffle(order);
  }
  const std::size_t folds = std::min<std::size_t>(params.cv_folds, matrix.rows);

  ForestModel forest;
  double best_accuracy = -1.0;
  std::vector<double> votes;
  for (const std::size_t n_trees : params.tree_grid) {
    for (const std::size_t depth : params.depth_grid) {
      double accuracy_sum = 0.0;
      std::size_t scored_folds = 0;
      for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < order.size(); ++i) {
          if (i % folds == fold) test_rows.push_back(order[i]);
          else train_rows.push_back(order[i]);
        }
        if (train_rows.empty() || test_rows.empty()) continue;
        const auto trees = fit_forest(
            matrix, y, train_rows, classes.size(), n_trees, depth, params.min_leaf,
            Rng::derive(seed, "cv-" + std::to_string(n_trees) + "-" +
                                  std::to_string(depth) + "-" + std::to_string(fold)));
        std::size_t correct = 0;
        for (const std::size_t r : test_rows) {
          if (forest_vote(trees, matrix.row(r), classes.size(), votes) ==
              static_cast<std::size_t>(y[r])) {
            ++correct;
          }
        }
        accuracy_sum += static_cast<double>(correct) / static_cast<double>(test_rows.size());
        ++scored_folds;
      }
      const double mean_accuracy =
          scored_folds > 0 ? accuracy_sum / static_cast<double>(scored_folds) : 0.0;
      forest.cv_table.push_back(CvCell{n_trees, depth, mean_accuracy});
      if (mean_accuracy > best_accuracy) {
        best_accuracy = mean_accuracy;
        forest.chosen_trees = n_trees;
        forest.chosen_depth = depth;
      }
    }
  }

  std::vector<std::size_t> all_rows(matrix.rows);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  forest.trees = fit_forest(matrix, y, all_rows, classes.size(), forest.chosen_trees,
                            forest.chosen_depth, params.min_leaf,
                            Rng::derive(seed, "final-forest"));

  TrainedModel model;
  model.spec = spec;
  model.classes = classes;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      feature_names.push_back("f" + std::to_string(c));
    }
  }
  model.feature_names = std::move(feature_names);
  model.meta.notes.push_back(
      "cv chose trees=" + std::to_string(forest.chosen_trees) +
      " depth=" + std::to_string(forest.chosen_depth) + " accuracy=" +
      std::to_string(best_accuracy));
  model.payload = std::move(forest);
  return model;
}

}  // namespace traitpipe::learn
