#include <algorithm>
#include <cmath>
#include <numeric>

#include "traitpipe/learners.hpp"
#include "traitpipe/rng.hpp"

namespace traitpipe::learn {

namespace detail {

namespace {

// Forward pass storing pre-activations per layer for backprop.
struct ForwardState {
  std::vector<std::vector<double>> activations;  // per layer input, then output
};

std::vector<double> layer_forward(const MlpLayer& layer, std::span<const double> input,
                                  bool rectify) {
  std::vector<double> out(layer.out, 0.0);
  for (std::size_t i = 0; i < layer.out; ++i) {
    double z = layer.bias[i];
    const double* w = layer.weights.data() + i * layer.in;
    for (std::size_t j = 0; j < layer.in; ++j) z += w[j] * input[j];
    out[i] = rectify ? std::max(0.0, z) : z;
  }
  return out;
}

std::vector<double> softmax(std::vector<double> logits) {
  double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& z : logits) {
    z = std::exp(z - max_logit);
    sum += z;
  }
  for (auto& z : logits) z /= sum;
  return logits;
}

}  // namespace

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> input) {
  std::vector<double> current(input.begin(), input.end());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const bool hidden = l + 1 < model.layers.size();
    current = layer_forward(model.layers[l], current, hidden);
  }
  return softmax(std::move(current));
}

std::vector<double> flatten_mlp(const MlpModel& model) {
  std::vector<double> flat;
  for (const auto& layer : model.layers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void unflatten_mlp(MlpModel& model, std::span<const double> params_flat) {
  std::size_t offset = 0;
  for (auto& layer : model.layers) {
    std::copy_n(params_flat.begin() + static_cast<long>(offset), layer.weights.size(),
                layer.weights.begin());
    offset += layer.weights.size();
    std::copy_n(params_flat.begin() + static_cast<long>(offset), layer.bias.size(),
                layer.bias.begin());
    offset += layer.bias.size();
  }
  if (offset != params_flat.size()) {
    throw ContractError("unflatten_mlp: parameter count mismatch");
  }
}

MlpModel init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) {
    throw ConfigError("init_mlp: need input and output dimensions");
  }
  Rng rng(Rng::derive(seed, "mlp-init"));
  MlpModel model;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.weights.resize(layer.in * layer.out);
    layer.bias.assign(layer.out, 0.0);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (auto& w : layer.weights) w = (2.0 * rng.next_double() - 1.0) * limit;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

LossGrad mlp_loss_grad(const MlpModel& shape, std::span<const double> params_flat,
                       const NumericMatrix& matrix, std::span<const int> y) {
  MlpModel model = shape;
  unflatten_mlp(model, params_flat);
  const std::size_t n_layers = model.layers.size();
  const double n = static_cast<double>(matrix.rows);

  MlpModel grads = shape;
  for (auto& layer : grads.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }

  double nll = 0.0;
  std::vector<std::vector<double>> inputs(n_layers + 1);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    const auto row = matrix.row(r);
    inputs[0].assign(row.begin(), row.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
      const bool hidden = l + 1 < n_layers;
      inputs[l + 1] = layer_forward(model.layers[l], inputs[l], hidden);
    }
    const auto probs = softmax(inputs[n_layers]);
    const auto target = static_cast<std::size_t>(y[r]);
    nll += -std::log(std::max(probs[target], 1e-300));

    // delta at output: (p - onehot) / n
    std::vector<double> delta(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
      delta[k] = (probs[k] - (k == target ? 1.0 : 0.0)) / n;
    }
    for (std::size_t l = n_layers; l-- > 0;) {
      auto& layer = model.layers[l];
      auto& grad_layer = grads.layers[l];
      const auto& input = inputs[l];
      for (std::size_t i = 0; i < layer.out; ++i) {
        grad_layer.bias[i] += delta[i];
        double* gw = grad_layer.weights.data() + i * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) gw[j] += delta[i] * input[j];
      }
      if (l == 0) break;
      std::vector<double> prev_delta(layer.in, 0.0);
      for (std::size_t j = 0; j < layer.in; ++j) {
        if (inputs[l][j] <= 0.0) continue;  // rectifier gate
        double sum = 0.0;
        for (std::size_t i = 0; i < layer.out; ++i) {
          sum += layer.weights[i * layer.in + j] * delta[i];
        }
        prev_delta[j] = sum;
      }
      delta = std::move(prev_delta);
    }
  }

  LossGrad out;
  out.loss = nll / n;
  out.grad = flatten_mlp(grads);
  return out;
}

MlpModel fit_mlp(const NumericMatrix& matrix, std::span<const int> y,
                 std::size_t n_classes, const MlpParams& params, std::uint64_t seed,
                 TrainingMeta& meta) {
  std::vector<std::size_t> dims;
  dims.push_back(matrix.cols);
  for (const auto h : params.hidden) dims.push_back(h);
  dims.push_back(n_classes);
  MlpModel model = init_mlp(dims, seed);

  auto full_loss = [&](const MlpModel& m) {
    const auto flat = flatten_mlp(m);
    return mlp_loss_grad(m, flat, matrix, y).loss;
  };

  double loss = full_loss(model);
  meta.loss_checkpoints.push_back(loss);

  Rng shuffle_rng(Rng::derive(seed, "mlp-epochs"));
  std::vector<std::size_t> order(matrix.rows);
  std::iota(order.begin(), order.end(), 0);
  double lr = params.learning_rate;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    const MlpModel before = model;

    // If an epoch raises the full training loss, retry it from the same
    // starting point with a halved rate; the rate stays halved afterwards.
    bool accepted = false;
    for (int attempt = 0; attempt < 24 && !accepted; ++attempt) {
      model = before;
      for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
        const std::size_t end = std::min(order.size(), start + params.batch_size);
        NumericMatrix batch(end - start, matrix.cols);
        std::vector<int> batch_y(end - start);
        for (std::size_t i = start; i < end; ++i) {
          const auto row = matrix.row(order[i]);
          std::copy(row.begin(), row.end(), batch.data.begin() +
                                                static_cast<long>((i - start) * matrix.cols));
          batch_y[i - start] = y[order[i]];
        }
        auto flat = flatten_mlp(model);
        const auto lg = mlp_loss_grad(model, flat, batch, batch_y);
        for (std::size_t p = 0; p < flat.size(); ++p) flat[p] -= lr * lg.grad[p];
        unflatten_mlp(model, flat);
      }
      const double new_loss = full_loss(model);
      if (new_loss <= loss + 1e-9) {
        loss = new_loss;
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) {
      model = before;  // keep parameters and recorded loss in agreement
    }
    meta.loss_checkpoints.push_back(loss);
    meta.iterations = epoch + 1;
  }
  return model;
}

}  // namespace detail

TrainedModel train_mlp(const NumericMatrix& matrix,
                       std::span<const psych::TraitLabel> labels, const ModelSpec& spec,
                       std::vector<std::string> feature_names) {
  if (spec.family != ModelFamily::kMlp) {
    throw ConfigError("train_mlp: spec family mismatch");
  }
  validate_spec(spec);
  if (matrix.rows != labels.size()) {
    throw ContractError("train_mlp: rows/labels mismatch");
  }
  const auto classes = classes_for_scheme(spec.scheme);
  const auto y = encode_labels(labels, spec.scheme);

  TrainedModel model;
  model.spec = spec;
  model.classes = classes;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < matrix.cols; ++c) {
      feature_names.push_back("f" + std::to_string(c));
    }
  }
  model.feature_names = std::move(feature_names);
  model.payload =
      detail::fit_mlp(matrix, y, classes.size(), spec.mlp, *spec.seed, model.meta);
  return model;
}

}  // namespace traitpipe::learn
