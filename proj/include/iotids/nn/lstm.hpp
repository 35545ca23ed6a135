#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotids/error.hpp"
#include "iotids/matrix.hpp"

namespace iotids::nn {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };
inline constexpr std::size_t kGateCount = 4;

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

// Non-owning view of the gate parameters. Row-major W (hidden x input),
// U (hidden x hidden), b (hidden) per gate, indexed by Gate.
struct LstmWeights {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::array<std::span<const double>, kGateCount> w;
  std::array<std::span<const double>, kGateCount> u;
  std::array<std::span<const double>, kGateCount> b;
};

// Owning parameter set of a single LSTM cell.
struct LstmCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Matrix wi, ui;
  std::vector<double> bi;
  Matrix wf, uf;
  std::vector<double> bf;
  Matrix wo, uo;
  std::vector<double> bo;
  Matrix wc, uc;
  std::vector<double> bc;

  static LstmCell zeros(std::size_t input_size, std::size_t hidden_size) {
    LstmCell cell;
    cell.input_size = input_size;
    cell.hidden_size = hidden_size;
    for (Matrix* w : {&cell.wi, &cell.wf, &cell.wo, &cell.wc}) *w = Matrix(hidden_size, input_size);
    for (Matrix* u : {&cell.ui, &cell.uf, &cell.uo, &cell.uc}) *u = Matrix(hidden_size, hidden_size);
    for (auto* b : {&cell.bi, &cell.bf, &cell.bo, &cell.bc}) b->assign(hidden_size, 0.0);
    return cell;
  }

  void validate() const {
    for (const Matrix* w : {&wi, &wf, &wo, &wc})
      if (w->rows() != hidden_size || w->cols() != input_size)
        throw std::invalid_argument("LstmCell: W has wrong shape");
    for (const Matrix* u : {&ui, &uf, &uo, &uc})
      if (u->rows() != hidden_size || u->cols() != hidden_size)
        throw std::invalid_argument("LstmCell: U has wrong shape");
    for (const auto* b : {&bi, &bf, &bo, &bc})
      if (b->size() != hidden_size) throw std::invalid_argument("LstmCell: b has wrong length");
  }

  LstmWeights weights() const {
    return {input_size,
            hidden_size,
            {wi.values(), wf.values(), wo.values(), wc.values()},
            {ui.values(), uf.values(), uo.values(), uc.values()},
            {bi, bf, bo, bc}};
  }
};

// Per-step values kept for backpropagation through time.
struct LstmStepCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::array<std::vector<double>, kGateCount> gate;  // activated i, f, o, candidate
  std::vector<double> c;
  std::vector<double> tanh_c;
};

// One step:
//   i = sig(Wi x + Ui h' + bi), f = sig(Wf x + Uf h' + bf), o = sig(Wo x + Uo h' + bo)
//   c = f * c' + i * tanh(Wc x + Uc h' + bc),  h = o * tanh(c)
inline void lstm_step(const LstmWeights& p, std::span<const double> x, const LstmState& prev,
                      LstmState& next, LstmStepCache* cache = nullptr) {
  const std::size_t d = p.input_size;
  const std::size_t hs = p.hidden_size;
  std::array<std::vector<double>, kGateCount> local;
  auto& gate = cache ? cache->gate : local;
  for (std::size_t g = 0; g < kGateCount; ++g) {
    gate[g].resize(hs);
    for (std::size_t r = 0; r < hs; ++r) {
      double z = p.b[g][r];
      const double* wrow = p.w[g].data() + r * d;
      for (std::size_t c = 0; c < d; ++c) z += wrow[c] * x[c];
      const double* urow = p.u[g].data() + r * hs;
      for (std::size_t j = 0; j < hs; ++j) z += urow[j] * prev.h[j];
      gate[g][r] = g == kCandidate ? std::tanh(z) : sigmoid(z);
    }
  }
  next.c.resize(hs);
  next.h.resize(hs);
  if (cache) cache->tanh_c.resize(hs);
  for (std::size_t r = 0; r < hs; ++r) {
    next.c[r] = gate[kForgetGate][r] * prev.c[r] + gate[kInputGate][r] * gate[kCandidate][r];
    const double tc = std::tanh(next.c[r]);
    next.h[r] = gate[kOutputGate][r] * tc;
    if (cache) cache->tanh_c[r] = tc;
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->c = next.c;
  }
}

inline LstmState lstm_cell_forward(std::span<const double> x, const LstmState& prev,
                                   const LstmCell& cell) {
  cell.validate();
  if (x.size() != cell.input_size)
    throw std::invalid_argument("lstm_cell_forward: input has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(cell.input_size));
  if (prev.h.size() != cell.hidden_size || prev.c.size() != cell.hidden_size)
    throw std::invalid_argument("lstm_cell_forward: state has wrong length");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("lstm_cell_forward: non-finite input");
  LstmState next;
  lstm_step(cell.weights(), x, prev, next);
  return next;
}

// Runs the cell over the sequence from a zero state and returns the final state.
inline LstmState lstm_forward(const std::vector<std::vector<double>>& sequence, const LstmCell& cell) {
  if (sequence.empty()) throw std::invalid_argument("lstm_forward: empty sequence");
  LstmState state = LstmState::zeros(cell.hidden_size);
  for (const auto& x : sequence) state = lstm_cell_forward(x, state, cell);
  return state;
}

}  // namespace iotids::nn
