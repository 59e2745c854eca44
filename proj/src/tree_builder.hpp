#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "traitpipe/learners.hpp"
#include "traitpipe/rng.hpp"

namespace traitpipe::learn::detail {

struct TreeBuildOptions {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 2;
  std::size_t n_classes = 2;
  // 0 means consider every feature at each split; otherwise sample this
  // many distinct features per split from rng (must be non-null then).
  std::size_t features_per_split = 0;
  Rng* rng = nullptr;
};

/// Greedy CART-style tree on Gini impurity. Deterministic given data order
/// and the rng stream. `row_indices` selects (with possible repeats, for
/// bootstrap samples) the rows to train on.
[[nodiscard]] TreeModel build_tree(const NumericMatrix& matrix, std::span<const int> y,
                                   std::span<const std::size_t> row_indices,
                                   const TreeBuildOptions& options);

/// Leaf class counts for one input row.
[[nodiscard]] const std::vector<double>& tree_leaf_counts(const TreeModel& tree,
                                                          std::span<const double> row);

/// Index of the first maximal count.
[[nodiscard]] std::size_t argmax_index(std::span<const double> values);

}  // namespace traitpipe::learn::detail
