#include <algorithm>
#include <cmath>

#include "traitpipe/learners.hpp"
#include "traitpipe/stats.hpp"

namespace traitpipe::learn {

std::pair<NumericMatrix, StandardizationParams> standardize_fit_apply(
    const NumericMatrix& matrix) {
  StandardizationParams params;
  params.means.resize(matrix.cols);
  params.sds.resize(matrix.cols);
  params.constant.resize(matrix.cols);
  for (std::size_t c = 0; c < matrix.cols; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < matrix.rows; ++r) sum += matrix.at(r, c);
    const double mean = matrix.rows > 0 ? sum / static_cast<double>(matrix.rows) : 0.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < matrix.rows; ++r) {
      const double d = matrix.at(r, c) - mean;
      ss += d * d;
    }
    const double sd =
        matrix.rows > 0 ? std::sqrt(ss / static_cast<double>(matrix.rows)) : 0.0;
    params.means[c] = mean;
    params.sds[c] = sd;
    params.constant[c] = sd == 0.0;
  }
  return {standardize_apply(matrix, params), params};
}

NumericMatrix standardize_apply(const NumericMatrix& matrix,
                                const StandardizationParams& params) {
  if (params.size() != matrix.cols) {
    throw ContractError("standardize_apply: column count mismatch");
  }
  NumericMatrix out(matrix.rows, matrix.cols);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      out.at(r, c) = params.constant[c]
                         ? 0.0
                         : (matrix.at(r, c) - params.means[c]) / params.sds[c];
    }
  }
  return out;
}

void standardize_apply_row(std::span<double> row, const StandardizationParams& params) {
  if (params.size() != row.size()) {
    throw ContractError("standardize_apply_row: column count mismatch");
  }
  for (std::size_t c = 0; c < row.size(); ++c) {
    row[c] = params.constant[c] ? 0.0 : (row[c] - params.means[c]) / params.sds[c];
  }
}

NumericMatrix standardize_invert(const NumericMatrix& matrix,
                                 const StandardizationParams& params) {
  if (params.size() != matrix.cols) {
    throw ContractError("standardize_invert: column count mismatch");
  }
  NumericMatrix out(matrix.rows, matrix.cols);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      out.at(r, c) = params.constant[c]
                         ? params.means[c]
                         : matrix.at(r, c) * params.sds[c] + params.means[c];
    }
  }
  return out;
}

Imputer Imputer::fit(const features::FeatureMatrix& matrix) {
  Imputer imputer;
  std::vector<double> present;
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    const auto& info = matrix.columns.info(c);
    imputer.input_names_.push_back(info.name);
    present.clear();
    bool any_missing = false;
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
      const auto& cell = matrix.at(r, c);
      if (cell.has_value()) present.push_back(*cell);
      else any_missing = true;
    }
    if (info.category == features::FeatureCategory::kFollowingIndicator) {
      imputer.fill_values_.push_back(0.0);
      if (any_missing) imputer.companion_columns_.push_back(c);
    } else {
      imputer.fill_values_.push_back(present.empty() ? 0.0 : stats::median(present));
    }
  }
  return imputer;
}

std::vector<double> Imputer::apply_row(std::span<const Cell> cells) const {
  if (cells.size() != input_names_.size()) {
    throw ContractError("Imputer::apply_row: cell count mismatch");
  }
  std::vector<double> out;
  out.reserve(output_width());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out.push_back(cells[c].has_value() ? *cells[c] : fill_values_[c]);
  }
  for (const std::size_t c : companion_columns_) {
    out.push_back(cells[c].has_value() ? 0.0 : 1.0);
  }
  return out;
}

NumericMatrix Imputer::apply(const features::FeatureMatrix& matrix) const {
  if (matrix.n_cols() != input_names_.size()) {
    throw ContractError("Imputer::apply: column count mismatch");
  }
  NumericMatrix out(matrix.n_rows(), output_width());
  std::vector<Cell> row_cells(matrix.n_cols());
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) row_cells[c] = matrix.at(r, c);
    const auto row = apply_row(row_cells);
    for (std::size_t c = 0; c < row.size(); ++c) out.at(r, c) = row[c];
  }
  return out;
}

std::vector<std::string> Imputer::output_names() const {
  std::vector<std::string> names = input_names_;
  for (const std::size_t c : companion_columns_) {
    names.push_back(input_names_[c] + "__was_missing");
  }
  return names;
}

std::size_t Imputer::output_width() const {
  return input_names_.size() + companion_columns_.size();
}

Imputer Imputer::from_parts(std::vector<std::string> input_names,
                            std::vector<double> fill_values,
                            std::vector<std::size_t> companion_columns) {
  if (input_names.size() != fill_values.size()) {
    throw SchemaError("Imputer::from_parts: names/fills mismatch");
  }
  for (const auto c : companion_columns) {
    if (c >= input_names.size()) {
      throw SchemaError("Imputer::from_parts: companion index out of range");
    }
  }
  Imputer imputer;
  imputer.input_names_ = std::move(input_names);
  imputer.fill_values_ = std::move(fill_values);
  imputer.companion_columns_ = std::move(companion_columns);
  return imputer;
}

}  // namespace traitpipe::learn
