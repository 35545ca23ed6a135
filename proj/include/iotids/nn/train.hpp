#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotids/dataset.hpp"
#include "iotids/error.hpp"
#include "iotids/nn/model.hpp"
#include "iotids/nn/optim.hpp"
#include "iotids/random.hpp"

namespace iotids::nn {

struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 42;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0))
      throw std::invalid_argument("TrainConfig: rmsprop_decay must be in (0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (!(rmsprop_epsilon > 0.0)) throw std::invalid_argument("TrainConfig: rmsprop_epsilon must be > 0");
  }

  RmsPropConfig optimizer() const { return {learning_rate, rmsprop_decay, rmsprop_epsilon}; }
};

struct EpochStats {
  double loss = 0.0;      // mean training loss over the epoch's batches
  double accuracy = 0.0;  // running accuracy of the pre-update predictions

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  bool single_class = false;
};

// Mini-batch RMSProp on mean BCE. Parameter init and per-epoch shuffling are
// seeded from config.seed; the last partial batch is kept.
inline TrainResult train(const ModelSpec& spec, const DatasetTable& table, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (table.rows() == 0) throw std::invalid_argument("train: empty table");
  if (spec.input_width() != table.cols()) {
    throw std::invalid_argument("train: model expects " + std::to_string(spec.input_width()) +
                                " inputs, table has " + std::to_string(table.cols()));
  }
  TrainResult result{Model::initialize(spec, cfg.seed), {}, false};
  const std::size_t pos = table.positives();
  result.single_class = pos == 0 || pos == table.rows();

  Model& model = result.model;
  RmsPropState state = RmsPropState::for_parameters(model.parameters());
  Rng rng(derive_seed(cfg.seed, 0x5f1e));
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> grads = model.zero_gradients();
  std::vector<double> probs;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      for (auto& g : grads) std::fill(g.values.begin(), g.values.end(), 0.0);
      probs.clear();
      const double loss = model.loss_and_gradient(table.features, table.labels, rows, grads, &probs);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch + 1));
      loss_sum += loss * static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i) correct += ((probs[i] >= 0.5) == (table.labels[rows[i]] == 1));
      rmsprop_step(model.parameters(), grads, state, cfg.optimizer());
    }
    const double n = static_cast<double>(order.size());
    result.history.push_back({loss_sum / n, static_cast<double>(correct) / n});
  }
  for (const auto& p : model.parameters())
    for (double v : p.tensor.values)
      if (!std::isfinite(v)) throw NumericError("train: non-finite parameter in '" + p.name + "'");
  return result;
}

inline double accuracy(const Model& model, const DatasetTable& table, double threshold = 0.5) {
  if (table.rows() == 0) throw std::invalid_argument("accuracy: empty table");
  const auto p = model.predict(table.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += ((p[i] >= threshold) == (table.labels[i] == 1));
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

inline constexpr std::size_t kGradientCheckMaxParams = 5000;

// Largest relative error between backprop gradients of the mean BCE and
// central differences, |ga - gn| / max(1e-8, |ga| + |gn|).
inline double gradient_check(const Model& model, const Matrix& batch, std::span<const int> labels,
                             double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("gradient_check: epsilon must be > 0");
  if (model.parameter_count() > kGradientCheckMaxParams)
    throw std::invalid_argument("gradient_check: model has more than 5000 parameters");
  std::vector<Tensor> analytic = model.zero_gradients();
  model.loss_and_gradient(batch, labels, {}, analytic);

  Model probe = model;
  auto loss_at = [&]() {
    const auto p = probe.predict(batch);
    return bce_loss(p, labels);
  };
  double worst = 0.0;
  for (std::size_t t = 0; t < probe.parameters().size(); ++t) {
    auto& values = probe.parameters()[t].tensor.values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = loss_at();
      values[i] = saved - epsilon;
      const double down = loss_at();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double ga = analytic[t].values[i];
      const double err = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace iotids::nn
