#include <algorithm>
#include <cmath>
#include <numeric>

#include "traitpipe/learners.hpp"

namespace traitpipe::learn {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double log1p_exp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// Dot of weights (intercept first) with a data row.
double affine(std::span<const double> w, std::span<const double> row) {
  double z = w[0];
  for (std::size_t c = 0; c < row.size(); ++c) z += w[c + 1] * row[c];
  return z;
}

// In-place Cholesky solve of A x = b for SPD A (row-major n x n).
// Adds a tiny jitter on breakdown so near-singular Hessians still solve.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                   std::size_t n) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<double> l = a;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = l[i * n + j];
        for (std::size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
        if (i == j) {
          if (sum <= 0.0) {
            ok = false;
            break;
          }
          l[i * n + i] = std::sqrt(sum);
        } else {
          l[i * n + j] = sum / l[j * n + j];
        }
      }
    }
    if (ok) {
      std::vector<double> x = b;
      for (std::size_t i = 0; i < n; ++i) {
        double sum = x[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * x[k];
        x[i] = sum / l[i * n + i];
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double sum = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= l[k * n + ii] * x[k];
        x[ii] = sum / l[ii * n + ii];
      }
      return x;
    }
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-8 * (attempt + 1);
  }
  throw Error("cholesky_solve: matrix is not positive definite");
}

struct BinomialFit {
  std::vector<double> weights;
  TrainingMeta meta;
};

// Newton (IRLS) with step halving; objective is mean negative
// log-likelihood plus (lambda/2)*||w||^2, every weight penalized.
BinomialFit fit_binomial(const NumericMatrix& matrix, std::span<const int> y,
                         const LinearParams& params) {
  const std::size_t d = matrix.cols + 1;
  const double n = static_cast<double>(matrix.rows);
  std::vector<double> w(d, 0.0);

  BinomialFit fit;
  auto loss_of = [&](std::span<const double> weights) {
    const auto lg = detail::binomial_loss_grad(weights, matrix, y, params.lambda);
    return lg.loss;
  };
  double loss = loss_of(w);
  fit.meta.loss_checkpoints.push_back(loss);

  std::vector<double> hessian(d * d);
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    const auto lg = detail::binomial_loss_grad(w, matrix, y, params.lambda);
    // Hessian = X'WX / n + lambda I over the intercept-augmented design.
    std::fill(hessian.begin(), hessian.end(), 0.0);
    for (std::size_t r = 0; r < matrix.rows; ++r) {
      const auto row = matrix.row(r);
      const double p = sigmoid(affine(w, row));
      const double weight = p * (1.0 - p) / n;
      // Augmented row: [1, x...]
      for (std::size_t i = 0; i < d; ++i) {
        const double xi = (i == 0) ? 1.0 : row[i - 1];
        for (std::size_t j = 0; j <= i; ++j) {
          const double xj = (j == 0) ? 1.0 : row[j - 1];
          hessian[i * d + j] += weight * xi * xj;
        }
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) hessian[i * d + j] = hessian[j * d + i];
      hessian[i * d + i] += params.lambda;
    }
    std::vector<double> neg_grad(d);
    for (std::size_t i = 0; i < d; ++i) neg_grad[i] = -lg.grad[i];
    const auto direction = cholesky_solve(hessian, neg_grad, d);

    // Step halving keeps the recorded loss non-increasing.
    double step = 1.0;
    std::vector<double> trial(d);
    double trial_loss = loss;
    bool moved = false;
    for (int halvings = 0; halvings < 40; ++halvings) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = w[i] + step * direction[i];
      trial_loss = loss_of(trial);
      if (trial_loss <= loss) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;

    double max_change = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      max_change = std::max(max_change, std::fabs(trial[i] - w[i]));
    }
    w = trial;
    loss = trial_loss;
    fit.meta.loss_checkpoints.push_back(loss);
    fit.meta.iterations = iter + 1;
    if (max_change < params.tolerance) break;
  }
  fit.weights = std::move(w);
  return fit;
}

struct MultinomialFit {
  std::vector<std::vector<double>> weights;
  TrainingMeta meta;
};

// Full-batch gradient descent with backtracking line search; monotone in
// the penalized loss by construction.
MultinomialFit fit_multinomial(const NumericMatrix& matrix, std::span<const int> y,
                               std::size_t n_classes, const LinearParams& params) {
  const std::size_t d = matrix.cols + 1;
  std::vector<double> w(n_classes * d, 0.0);

  MultinomialFit fit;
  auto eval = [&](std::span<const double> weights) {
    return detail::multinomial_loss_grad(weights, n_classes, matrix, y, params.lambda);
  };
  auto lg = eval(w);
  fit.meta.loss_checkpoints.push_back(lg.loss);

  double step = 1.0;
  std::vector<double> trial(w.size());
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    double grad_sq = 0.0;
    for (const double g : lg.grad) grad_sq += g * g;
    if (grad_sq == 0.0) break;

    bool moved = false;
    double trial_loss = lg.loss;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t i = 0; i < w.size(); ++i) trial[i] = w[i] - step * lg.grad[i];
      trial_loss = eval(trial).loss;
      if (trial_loss <= lg.loss - 1e-4 * step * grad_sq) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;

    double max_change = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      max_change = std::max(max_change, std::fabs(trial[i] - w[i]));
    }
    w.swap(trial);
    lg = eval(w);
    fit.meta.loss_checkpoints.push_back(lg.loss);
    fit.meta.iterations = iter + 1;
    step = std::min(step * 2.0, 1024.0);
    if (max_change < params.tolerance) break;
  }

  fit.weights.resize(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    fit.weights[k].assign(w.begin() + static_cast<long>(k * d),
                          w.begin() + static_cast<long>((k + 1) * d));
  }
  return fit;
}

TrainedModel finish_linear(const NumericMatrix& matrix, const ModelSpec& spec,
                           std::vector<std::string> feature_names,
                           std::vector<psych::LabelValue> classes, LinearModel payload,
                           TrainingMeta meta) {
  TrainedModel model;
  model.spec = spec;
  model.classes = std::move(classes);
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      feature_names.push_back("f" + std::to_string(c));
    }
  }
  model.feature_names = std::move(feature_names);
  model.payload = std::move(payload);
  model.meta = std::move(meta);
  return model;
}

}  // namespace

namespace detail {

LossGrad binomial_loss_grad(std::span<const double> weights, const NumericMatrix& matrix,
                            std::span<const int> y, double lambda) {
  const std::size_t d = matrix.cols + 1;
  if (weights.size() != d) {
    throw ContractError("binomial_loss_grad: weight length mismatch");
  }
  const double n = static_cast<double>(matrix.rows);
  LossGrad out;
  out.grad.assign(d, 0.0);
  double nll = 0.0;
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    const auto row = matrix.row(r);
    const double z = affine(weights, row);
    const double target = static_cast<double>(y[r]);
    // -log p(y|x) = log(1+e^z) - y z
    nll += log1p_exp(z) - target * z;
    const double residual = (sigmoid(z) - target) / n;
    out.grad[0] += residual;
    for (std::size_t c = 0; c < matrix.cols; ++c) out.grad[c + 1] += residual * row[c];
  }
  out.loss = nll / n;
  for (std::size_t i = 0; i < d; ++i) {
    out.loss += 0.5 * lambda * weights[i] * weights[i];
    out.grad[i] += lambda * weights[i];
  }
  return out;
}

LossGrad multinomial_loss_grad(std::span<const double> weights_flat,
                               std::size_t n_classes, const NumericMatrix& matrix,
                               std::span<const int> y, double lambda) {
  const std::size_t d = matrix.cols + 1;
  if (weights_flat.size() != n_classes * d) {
    throw ContractError("multinomial_loss_grad: weight length mismatch");
  }
  const double n = static_cast<double>(matrix.rows);
  LossGrad out;
  out.grad.assign(weights_flat.size(), 0.0);
  std::vector<double> logits(n_classes);
  double nll = 0.0;
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    const auto row = matrix.row(r);
    double max_logit = -1e300;
    for (std::size_t k = 0; k < n_classes; ++k) {
      logits[k] = affine(weights_flat.subspan(k * d, d), row);
      max_logit = std::max(max_logit, logits[k]);
    }
    double z_sum = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      logits[k] = std::exp(logits[k] - max_logit);
      z_sum += logits[k];
    }
    const auto target = static_cast<std::size_t>(y[r]);
    nll += -std::log(logits[target] / z_sum);
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double p = logits[k] / z_sum;
      const double residual = (p - (k == target ? 1.0 : 0.0)) / n;
      out.grad[k * d] += residual;
      for (std::size_t c = 0; c < matrix.cols; ++c) {
        out.grad[k * d + c + 1] += residual * row[c];
      }
    }
  }
  out.loss = nll / n;
  for (std::size_t i = 0; i < weights_flat.size(); ++i) {
    out.loss += 0.5 * lambda * weights_flat[i] * weights_flat[i];
    out.grad[i] += lambda * weights_flat[i];
  }
  return out;
}

}  // namespace detail

TrainedModel train_logistic_regression(const NumericMatrix& matrix,
                                       std::span<const psych::TraitLabel> labels,
                                       const ModelSpec& spec,
                                       std::vector<std::string> feature_names) {
  if (spec.family != ModelFamily::kLogisticRegression) {
    throw ConfigError("train_logistic_regression: spec family mismatch");
  }
  validate_spec(spec);
  if (matrix.rows != labels.size()) {
    throw ContractError("train_logistic_regression: rows/labels mismatch");
  }
  const auto y = encode_labels(labels, psych::Scheme::kTwo);
  auto fit = fit_binomial(matrix, y, spec.linear);
  LinearModel payload;
  payload.n_classes = 2;
  payload.weights = {std::move(fit.weights)};
  return finish_linear(matrix, spec, std::move(feature_names),
                       classes_for_scheme(psych::Scheme::kTwo), std::move(payload),
                       std::move(fit.meta));
}

TrainedModel train_glm(const NumericMatrix& matrix,
                       std::span<const psych::TraitLabel> labels, const ModelSpec& spec,
                       std::vector<std::string> feature_names) {
  if (spec.family != ModelFamily::kGlm) {
    throw ConfigError("train_glm: spec family mismatch");
  }
  validate_spec(spec);
  if (matrix.rows != labels.size()) {
    throw ContractError("train_glm: rows/labels mismatch");
  }
  const auto classes = classes_for_scheme(spec.scheme);
  const auto y = encode_labels(labels, spec.scheme);
  LinearModel payload;
  TrainingMeta meta;
  if (spec.scheme == psych::Scheme::kTwo) {
    // Binomial family: identical objective and solver as LR.
    auto fit = fit_binomial(matrix, y, spec.linear);
    payload.n_classes = 2;
    payload.weights = {std::move(fit.weights)};
    meta = std::move(fit.meta);
  } else {
    auto fit = fit_multinomial(matrix, y, classes.size(), spec.linear);
    payload.n_classes = classes.size();
    payload.weights = std::move(fit.weights);
    meta = std::move(fit.meta);
  }
  return finish_linear(matrix, spec, std::move(feature_names), classes,
                       std::move(payload), std::move(meta));
}

}  // namespace traitpipe::learn
