#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "iotids/nn/tensor.hpp"

namespace iotids::nn {

inline constexpr double kBceClamp = 1e-12;

// mean of -[y ln p + (1 - y) ln(1 - p)], p clamped to [1e-12, 1 - 1e-12]
inline double bce_loss(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size())
    throw std::invalid_argument("bce_loss: length mismatch");
  if (probabilities.empty()) throw std::invalid_argument("bce_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], kBceClamp, 1.0 - kBceClamp);
    const double y = labels[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(labels.size());
}

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
};

// s <- decay * s + (1 - decay) * g^2 ;  theta <- theta - lr * g / sqrt(s + eps)
inline void rmsprop_step(std::span<double> params, std::span<const double> grads,
                         std::span<double> mean_square, const RmsPropConfig& cfg) {
  if (params.size() != grads.size() || params.size() != mean_square.size())
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    mean_square[i] = cfg.decay * mean_square[i] + (1.0 - cfg.decay) * g * g;
    params[i] -= cfg.learning_rate * g / std::sqrt(mean_square[i] + cfg.epsilon);
  }
}

struct RmsPropState {
  std::vector<std::vector<double>> mean_square;

  static RmsPropState for_parameters(const std::vector<NamedTensor>& params) {
    RmsPropState s;
    for (const auto& p : params) s.mean_square.emplace_back(p.tensor.size(), 0.0);
    return s;
  }
};

inline void rmsprop_step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
                         RmsPropState& state, const RmsPropConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.mean_square.size())
    throw std::invalid_argument("rmsprop_step: parameter/gradient count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].tensor.shape != grads[t].shape)
      throw std::invalid_argument("rmsprop_step: shape mismatch for '" + params[t].name + "'");
    rmsprop_step(params[t].tensor.values, grads[t].values, state.mean_square[t], cfg);
  }
}

}  // namespace iotids::nn
