#pragma once

#include <utility>

#include "ctxtag/autodiff.hpp"
#include "ctxtag/rng.hpp"

namespace ctxtag {

// Fused LSTM cell parameters. Gate order within the 4H rows is fixed as
// [input, forget, cell, output] so serialized checkpoints stay portable.
struct LstmCellParams {
  int input_dim = 0;
  int hidden_dim = 0;
  ParamNode W;  // 4H x input_dim
  ParamNode U;  // 4H x H
  ParamNode b;  // 4H x 1, forget slice initialized to 1

  std::vector<ParamNode*> params() { return {&W, &U, &b}; }
};

// uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights; zero biases except the
// forget-gate slice at 1.0.
LstmCellParams make_lstm(const std::string& name_prefix, int input_dim,
                         int hidden_dim, Rng& rng);

Matrix init_uniform(int rows, int cols, int fan_in, Rng& rng);

struct LstmState {
  Var h;
  Var c;
};

// One differentiable step: gates = split4(W*x + U*h + b),
// c' = sigm(f)*c + sigm(i)*tanh(g), h' = sigm(o)*tanh(c').
LstmState lstm_cell(const Var& x, const Var& h, const Var& c,
                    LstmCellParams& p);

// Inference-only step over frozen weights (no tape).
std::pair<Matrix, Matrix> lstm_cell_plain(const Matrix& x, const Matrix& h,
                                          const Matrix& c, const Matrix& W,
                                          const Matrix& U, const Matrix& b);

}  // namespace ctxtag
