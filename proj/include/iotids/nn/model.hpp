#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "iotids/error.hpp"
#include "iotids/matrix.hpp"
#include "iotids/nn/lstm.hpp"
#include "iotids/nn/tensor.hpp"
#include "iotids/random.hpp"

namespace iotids::nn {

enum class Activation { linear, relu, sigmoid, tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return sigmoid(z);
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

// derivative expressed through the activation output
inline double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh: return 1.0 - y * y;
  }
  return 1.0;
}

// "same"-padded 1-D convolution over the length axis
struct Conv1dLayer {
  std::size_t filters = 16;
  std::size_t kernel = 3;
  Activation activation = Activation::relu;
};

struct DenseLayer {
  std::size_t units = 1;
  Activation activation = Activation::linear;
};

// Consumes (channels, length) as `length` steps of `channels` inputs and emits
// the final hidden state.
struct LstmLayer {
  std::size_t hidden_size = 64;
};

using LayerSpec = std::variant<Conv1dLayer, DenseLayer, LstmLayer>;

// Activations are laid out (channels, length), row-major.
struct LayerShape {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t size() const { return channels * length; }
};

struct ModelSpec {
  std::size_t input_channels = 1;
  std::size_t input_length = 0;
  std::vector<LayerSpec> layers;

  std::size_t input_width() const { return input_channels * input_length; }

  std::vector<LayerShape> shapes() const {
    std::vector<LayerShape> out{{input_channels, input_length}};
    for (const auto& layer : layers) {
      const LayerShape in = out.back();
      if (const auto* c = std::get_if<Conv1dLayer>(&layer)) {
        out.push_back({c->filters, in.length});
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        out.push_back({d->units, 1});
      } else {
        out.push_back({std::get<LstmLayer>(layer).hidden_size, 1});
      }
    }
    return out;
  }

  void validate() const {
    if (input_channels == 0 || input_length == 0)
      throw std::invalid_argument("ModelSpec: input must have non-zero width");
    if (layers.empty()) throw std::invalid_argument("ModelSpec: no layers");
    for (const auto& layer : layers) {
      if (const auto* c = std::get_if<Conv1dLayer>(&layer)) {
        if (c->filters == 0 || c->kernel == 0)
          throw std::invalid_argument("ModelSpec: conv1d needs filters and kernel >= 1");
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (d->units == 0) throw std::invalid_argument("ModelSpec: dense needs units >= 1");
      } else if (std::get<LstmLayer>(layer).hidden_size == 0) {
        throw std::invalid_argument("ModelSpec: lstm needs hidden_size >= 1");
      }
    }
    const auto* head = std::get_if<DenseLayer>(&layers.back());
    if (!head || head->units != 1 || head->activation != Activation::sigmoid)
      throw std::invalid_argument("ModelSpec: final layer must be dense(1, sigmoid)");
  }

  // Features enter as a length-n sequence of scalars.
  static ModelSpec lstm_classifier(std::size_t features, std::size_t hidden = 64) {
    return {1, features, {LstmLayer{hidden}, DenseLayer{1, Activation::sigmoid}}};
  }

  // Network used for ablation-based feature selection.
  static ModelSpec cnn_selector(std::size_t features) {
    return {1,
            features,
            {Conv1dLayer{16, 3, Activation::relu}, DenseLayer{32, Activation::relu},
             DenseLayer{1, Activation::sigmoid}}};
  }
};

class Model {
 public:
  static Model zeros(const ModelSpec& spec) {
    spec.validate();
    Model m;
    m.spec_ = spec;
    m.shapes_ = spec.shapes();
    m.mask_.assign(spec.input_width(), 1.0);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      m.first_param_.push_back(m.params_.size());
      const LayerShape in = m.shapes_[l];
      const std::string prefix = "L" + std::to_string(l) + ".";
      if (const auto* c = std::get_if<Conv1dLayer>(&spec.layers[l])) {
        m.params_.push_back({prefix + "conv1d.weight", Tensor({c->filters, in.channels, c->kernel})});
        m.params_.push_back({prefix + "conv1d.bias", Tensor({c->filters})});
      } else if (const auto* d = std::get_if<DenseLayer>(&spec.layers[l])) {
        m.params_.push_back({prefix + "dense.weight", Tensor({d->units, in.size()})});
        m.params_.push_back({prefix + "dense.bias", Tensor({d->units})});
      } else {
        const std::size_t h = std::get<LstmLayer>(spec.layers[l]).hidden_size;
        for (const char* gate : {"i", "f", "o", "c"}) {
          m.params_.push_back({prefix + "lstm.W" + gate, Tensor({h, in.channels})});
          m.params_.push_back({prefix + "lstm.U" + gate, Tensor({h, h})});
          m.params_.push_back({prefix + "lstm.b" + gate, Tensor({h})});
        }
      }
    }
    return m;
  }

  // Glorot-uniform weights, zero biases.
  static Model initialize(const ModelSpec& spec, std::uint64_t seed) {
    Model m = zeros(spec);
    Rng rng(seed);
    for (auto& p : m.params_) {
      const auto& shape = p.tensor.shape;
      if (shape.size() == 1) continue;
      std::size_t fan_in = shape[1];
      std::size_t fan_out = shape[0];
      if (shape.size() == 3) {
        fan_in = shape[1] * shape[2];
        fan_out = shape[0] * shape[2];
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : p.tensor.values) v = rng.uniform(-bound, bound);
    }
    return m;
  }

  const ModelSpec& spec() const { return spec_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  // Per-input multiplier: 0 disconnects that input element from the network.
  std::vector<double>& input_mask() { return mask_; }
  const std::vector<double>& input_mask() const { return mask_; }

  std::vector<Tensor> zero_gradients() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.tensor.shape);
    return g;
  }

  // Scratch buffers for one forward/backward pass; reuse across samples.
  struct Workspace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<LstmStepCache>> steps;
    std::vector<std::vector<double>> deltas;
    std::vector<double> scratch;
  };

  double forward(std::span<const double> x, Workspace& ws) const {
    if (x.size() != spec_.input_width()) {
      throw std::invalid_argument("Model::forward: input width " + std::to_string(x.size()) +
                                  " does not match model input " +
                                  std::to_string(spec_.input_width()));
    }
    const std::size_t nl = spec_.layers.size();
    ws.acts.resize(nl + 1);
    ws.steps.resize(nl);
    auto& in0 = ws.acts[0];
    in0.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) in0[i] = mask_[i] != 0.0 ? x[i] : 0.0;
    for (std::size_t l = 0; l < nl; ++l) forward_layer(l, ws);
    return ws.acts[nl][0];
  }

  double forward(std::span<const double> x) const {
    Workspace ws;
    return forward(x, ws);
  }

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    Workspace ws;
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = forward(x.row(r), ws);
    return out;
  }

  // Backpropagates from the (already run) forward pass in `ws`, given
  // dLoss/dLogit of the sigmoid head. Gradients are accumulated into `grads`.
  void backward(Workspace& ws, double d_logit, std::vector<Tensor>& grads) const {
    const std::size_t nl = spec_.layers.size();
    ws.deltas.resize(nl + 1);
    ws.deltas[nl].assign(1, d_logit);
    for (std::size_t l = nl; l-- > 0;) backward_layer(l, ws, grads, l == nl - 1);
  }

  // Mean binary cross-entropy over `rows` (all rows when empty); dLoss/dParams
  // accumulated into `grads`. Probabilities are clamped to [1e-12, 1 - 1e-12].
  double loss_and_gradient(const Matrix& x, std::span<const int> labels,
                           std::span<const std::size_t> rows, std::vector<Tensor>& grads,
                           std::vector<double>* probabilities = nullptr) const {
    const std::size_t n = rows.empty() ? x.rows() : rows.size();
    if (n == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
    if (labels.size() != x.rows()) throw std::invalid_argument("loss_and_gradient: label count mismatch");
    Workspace ws;
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = rows.empty() ? i : rows[i];
      const double p = forward(x.row(r), ws);
      if (probabilities) probabilities->push_back(p);
      const double y = labels[r];
      const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
      loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
      const double d_logit = (p == pc) ? (p - y) * scale : 0.0;
      backward(ws, d_logit, grads);
    }
    return loss * scale;
  }

  static constexpr double kProbClamp = 1e-12;

  // Parameters plus the input mask, in serialization order.
  std::vector<NamedTensor> to_tensors() const {
    std::vector<NamedTensor> out = params_;
    out.push_back({"input_mask", Tensor({mask_.size()}, mask_)});
    return out;
  }

  static Model from_tensors(const ModelSpec& spec, const std::vector<NamedTensor>& tensors) {
    Model m = zeros(spec);
    for (auto& p : m.params_) {
      auto it = std::find_if(tensors.begin(), tensors.end(),
                             [&](const NamedTensor& t) { return t.name == p.name; });
      if (it == tensors.end()) throw DataError("model file: missing tensor '" + p.name + "'");
      if (it->tensor.shape != p.tensor.shape)
        throw DataError("model file: tensor '" + p.name + "' has wrong shape");
      p.tensor = it->tensor;
    }
    auto mask = std::find_if(tensors.begin(), tensors.end(),
                             [](const NamedTensor& t) { return t.name == "input_mask"; });
    if (mask != tensors.end()) {
      if (mask->tensor.size() != m.mask_.size()) throw DataError("model file: input_mask has wrong length");
      m.mask_ = mask->tensor.values;
    }
    return m;
  }

  friend bool operator==(const Model& a, const Model& b) {
    return a.params_ == b.params_ && a.mask_ == b.mask_;
  }

 private:
  LstmWeights lstm_weights(std::size_t layer) const {
    const std::size_t first = first_param_[layer];
    LstmWeights w;
    w.input_size = shapes_[layer].channels;
    w.hidden_size = shapes_[layer + 1].channels;
    for (std::size_t g = 0; g < kGateCount; ++g) {
      w.w[g] = params_[first + 3 * g].tensor.values;
      w.u[g] = params_[first + 3 * g + 1].tensor.values;
      w.b[g] = params_[first + 3 * g + 2].tensor.values;
    }
    return w;
  }

  void forward_layer(std::size_t l, Workspace& ws) const {
    const auto& in = ws.acts[l];
    auto& out = ws.acts[l + 1];
    const LayerShape is = shapes_[l];
    const LayerShape os = shapes_[l + 1];
    out.assign(os.size(), 0.0);
    const std::size_t first = first_param_[l];

    if (const auto* conv = std::get_if<Conv1dLayer>(&spec_.layers[l])) {
      const auto& w = params_[first].tensor.values;
      const auto& b = params_[first + 1].tensor.values;
      const std::size_t k = conv->kernel;
      const std::size_t pad = (k - 1) / 2;
      const std::size_t len = is.length;
      for (std::size_t f = 0; f < conv->filters; ++f) {
        for (std::size_t t = 0; t < len; ++t) {
          double z = b[f];
          for (std::size_t c = 0; c < is.channels; ++c) {
            const double* wk = w.data() + (f * is.channels + c) * k;
            const double* xc = in.data() + c * len;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
              if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
              z += wk[j] * xc[pos];
            }
          }
          out[f * len + t] = activate(conv->activation, z);
        }
      }
      return;
    }
    if (const auto* dense = std::get_if<DenseLayer>(&spec_.layers[l])) {
      const auto& w = params_[first].tensor.values;
      const auto& b = params_[first + 1].tensor.values;
      const std::size_t width = is.size();
      for (std::size_t r = 0; r < dense->units; ++r) {
        double z = b[r];
        const double* wr = w.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) z += wr[c] * in[c];
        out[r] = activate(dense->activation, z);
      }
      return;
    }
    const LstmWeights weights = lstm_weights(l);
    const std::size_t len = is.length;
    auto& steps = ws.steps[l];
    steps.resize(len);
    ws.scratch.resize(is.channels);
    LstmState state = LstmState::zeros(weights.hidden_size);
    LstmState next;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < is.channels; ++c) ws.scratch[c] = in[c * len + t];
      lstm_step(weights, ws.scratch, state, next, &steps[t]);
      std::swap(state, next);
    }
    std::copy(state.h.begin(), state.h.end(), out.begin());
  }

  void backward_layer(std::size_t l, Workspace& ws, std::vector<Tensor>& grads, bool head) const {
    const auto& in = ws.acts[l];
    const auto& out = ws.acts[l + 1];
    const auto& dout = ws.deltas[l + 1];
    const LayerShape is = shapes_[l];
    const bool need_input_grad = l > 0;
    auto& din = ws.deltas[l];
    if (need_input_grad) din.assign(is.size(), 0.0);
    const std::size_t first = first_param_[l];

    if (const auto* conv = std::get_if<Conv1dLayer>(&spec_.layers[l])) {
      const auto& w = params_[first].tensor.values;
      auto& gw = grads[first].values;
      auto& gb = grads[first + 1].values;
      const std::size_t k = conv->kernel;
      const std::size_t pad = (k - 1) / 2;
      const std::size_t len = is.length;
      for (std::size_t f = 0; f < conv->filters; ++f) {
        for (std::size_t t = 0; t < len; ++t) {
          const double y = out[f * len + t];
          const double dz = dout[f * len + t] * activation_slope(conv->activation, y);
          if (dz == 0.0) continue;
          gb[f] += dz;
          for (std::size_t c = 0; c < is.channels; ++c) {
            const std::size_t wbase = (f * is.channels + c) * k;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
              if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
              gw[wbase + j] += dz * in[c * len + pos];
              if (need_input_grad) din[c * len + pos] += dz * w[wbase + j];
            }
          }
        }
      }
      return;
    }
    if (const auto* dense = std::get_if<DenseLayer>(&spec_.layers[l])) {
      const auto& w = params_[first].tensor.values;
      auto& gw = grads[first].values;
      auto& gb = grads[first + 1].values;
      const std::size_t width = is.size();
      for (std::size_t r = 0; r < dense->units; ++r) {
        const double dz = head ? dout[r] : dout[r] * activation_slope(dense->activation, out[r]);
        if (dz == 0.0) continue;
        gb[r] += dz;
        double* gwr = gw.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) gwr[c] += dz * in[c];
        if (need_input_grad) {
          const double* wr = w.data() + r * width;
          for (std::size_t c = 0; c < width; ++c) din[c] += dz * wr[c];
        }
      }
      return;
    }

    // backpropagation through time
    const LstmWeights weights = lstm_weights(l);
    const std::size_t d = weights.input_size;
    const std::size_t hs = weights.hidden_size;
    const std::size_t len = is.length;
    const auto& steps = ws.steps[l];
    std::vector<double> dh(dout.begin(), dout.end());
    std::vector<double> dc(hs, 0.0), dh_prev(hs), dc_prev(hs), dx(d);
    std::array<std::vector<double>, kGateCount> da;
    for (auto& v : da) v.resize(hs);
    for (std::size_t t = len; t-- > 0;) {
      const LstmStepCache& s = steps[t];
      for (std::size_t r = 0; r < hs; ++r) {
        const double i = s.gate[kInputGate][r];
        const double f = s.gate[kForgetGate][r];
        const double o = s.gate[kOutputGate][r];
        const double g = s.gate[kCandidate][r];
        const double tc = s.tanh_c[r];
        const double dcr = dc[r] + dh[r] * o * (1.0 - tc * tc);
        da[kInputGate][r] = dcr * g * i * (1.0 - i);
        da[kForgetGate][r] = dcr * s.c_prev[r] * f * (1.0 - f);
        da[kOutputGate][r] = dh[r] * tc * o * (1.0 - o);
        da[kCandidate][r] = dcr * i * (1.0 - g * g);
        dc_prev[r] = dcr * f;
      }
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::size_t g = 0; g < kGateCount; ++g) {
        auto& gw = grads[first + 3 * g].values;
        auto& gu = grads[first + 3 * g + 1].values;
        auto& gb = grads[first + 3 * g + 2].values;
        const auto& w = weights.w[g];
        const auto& u = weights.u[g];
        for (std::size_t r = 0; r < hs; ++r) {
          const double a = da[g][r];
          gb[r] += a;
          double* gwr = gw.data() + r * d;
          const double* wr = w.data() + r * d;
          for (std::size_t c = 0; c < d; ++c) {
            gwr[c] += a * s.x[c];
            dx[c] += a * wr[c];
          }
          double* gur = gu.data() + r * hs;
          const double* ur = u.data() + r * hs;
          for (std::size_t j = 0; j < hs; ++j) {
            gur[j] += a * s.h_prev[j];
            dh_prev[j] += a * ur[j];
          }
        }
      }
      if (need_input_grad)
        for (std::size_t c = 0; c < d; ++c) din[c * len + t] = dx[c];
      std::swap(dh, dh_prev);
      std::swap(dc, dc_prev);
    }
  }

  ModelSpec spec_;
  std::vector<LayerShape> shapes_;
  std::vector<NamedTensor> params_;
  std::vector<std::size_t> first_param_;
  std::vector<double> mask_;
};

}  // namespace iotids::nn
