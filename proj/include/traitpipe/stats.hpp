#pragma once

#include <cstddef>
#include <span>

namespace traitpipe::stats {

/// Arithmetic mean. Throws InsufficientDataError on empty input.
[[nodiscard]] double mean(std::span<const double> data);

/// Sample variance (n-1 denominator). Requires at least 2 values.
[[nodiscard]] double sample_variance(std::span<const double> data);

/// Sample standard deviation (n-1 denominator). Requires at least 2 values.
[[nodiscard]] double sample_sd(std::span<const double> data);

/// Population variance (n denominator). Requires at least 1 value.
[[nodiscard]] double population_variance(std::span<const double> data);

/// Median over the given values. Requires at least 1 value.
[[nodiscard]] double median(std::span<const double> data);

/// Regularized incomplete beta function I_x(a, b), a, b > 0, x in [0, 1].
/// Continued-fraction evaluation (modified Lentz).
[[nodiscard]] double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of Student's t: P(|T_df| >= |t|).
[[nodiscard]] double student_t_two_sided_p(double t, double df);

}  // namespace traitpipe::stats
