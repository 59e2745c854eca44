#include "traitpipe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "traitpipe/common.hpp"

namespace traitpipe::stats {

double mean(std::span<const double> data) {
  if (data.empty()) {
    throw InsufficientDataError("mean: empty input");
  }
  double sum = 0.0;
  for (const double v : data) sum += v;
  return sum / static_cast<double>(data.size());
}

double sample_variance(std::span<const double> data) {
  if (data.size() < 2) {
    throw InsufficientDataError("sample_variance: need at least 2 values");
  }
  const double m = mean(data);
  double ss = 0.0;
  for (const double v : data) {
    const double d = v - m;
    ss += d * d;
  }
  return ss / static_cast<double>(data.size() - 1);
}

double sample_sd(std::span<const double> data) {
  return std::sqrt(sample_variance(data));
}

double population_variance(std::span<const double> data) {
  if (data.empty()) {
    throw InsufficientDataError("population_variance: empty input");
  }
  const double m = mean(data);
  double ss = 0.0;
  for (const double v : data) {
    const double d = v - m;
    ss += d * d;
  }
  return ss / static_cast<double>(data.size());
}

double median(std::span<const double> data) {
  if (data.empty()) {
    throw InsufficientDataError("median: empty input");
  }
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int max_iterations = 400;
  constexpr double eps = 3.0e-16;
  constexpr double fp_min = 1.0e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fp_min) d = fp_min;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fp_min) d = fp_min;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fp_min) c = fp_min;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fp_min) d = fp_min;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fp_min) c = fp_min;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("regularized_incomplete_beta: a, b must be > 0");
  }
  if (!(x >= 0.0) || !(x <= 1.0)) {
    throw ValidationError("regularized_incomplete_beta: x must be in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) {
    throw ValidationError("student_t_two_sided_p: df must be > 0");
  }
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double x = df / (df + t2);
  // P(|T| >= |t|) = I_x(df/2, 1/2)
  return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

}  // namespace traitpipe::stats
