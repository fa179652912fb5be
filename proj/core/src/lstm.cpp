#include "ctxtag/lstm.hpp"

#include <cmath>

namespace ctxtag {

Matrix init_uniform(int rows, int cols, int fan_in, Rng& rng) {
  Matrix m(rows, cols);
  const double bound = std::sqrt(1.0 / fan_in);
  for (auto& v : m.data()) v = static_cast<real>(rng.uniform(-bound, bound));
  return m;
}

LstmCellParams make_lstm(const std::string& name_prefix, int input_dim,
                         int hidden_dim, Rng& rng) {
  LstmCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.W = make_param(name_prefix + ".W",
                   init_uniform(4 * hidden_dim, input_dim, input_dim, rng));
  p.U = make_param(name_prefix + ".U",
                   init_uniform(4 * hidden_dim, hidden_dim, hidden_dim, rng));
  Matrix b(4 * hidden_dim, 1);
  for (int r = hidden_dim; r < 2 * hidden_dim; ++r) b.at(r, 0) = 1;  // forget
  p.b = make_param(name_prefix + ".b", std::move(b));
  return p;
}

LstmState lstm_cell(const Var& x, const Var& h, const Var& c,
                    LstmCellParams& p) {
  const int H = p.hidden_dim;
  if (x->value.rows() != p.input_dim || h->value.rows() != H ||
      c->value.rows() != H) {
    throw DimensionError("lstm_cell: state/input dims do not match params");
  }
  Var pre = vadd(vadd(mm(p.W.node, x), mm(p.U.node, h)), p.b.node);
  Var i = vsigmoid(slice_rows(pre, 0, H));
  Var f = vsigmoid(slice_rows(pre, H, 2 * H));
  Var g = vtanh(slice_rows(pre, 2 * H, 3 * H));
  Var o = vsigmoid(slice_rows(pre, 3 * H, 4 * H));
  Var c_next = vadd(vmul(f, c), vmul(i, g));
  Var h_next = vmul(o, vtanh(c_next));
  return {h_next, c_next};
}

std::pair<Matrix, Matrix> lstm_cell_plain(const Matrix& x, const Matrix& h,
                                          const Matrix& c, const Matrix& W,
                                          const Matrix& U, const Matrix& b) {
  const int H = U.cols();
  if (x.rows() != W.cols() || h.rows() != H || c.rows() != H)
    throw DimensionError("lstm_cell_plain: state/input dims do not match params");
  Matrix pre = add(add(matmul(W, x), matmul(U, h)), b);
  Matrix c_next(H, 1), h_next(H, 1);
  for (int r = 0; r < H; ++r) {
    const real ig = sigmoid(pre.at(r, 0));
    const real fg = sigmoid(pre.at(H + r, 0));
    const real gg = std::tanh(pre.at(2 * H + r, 0));
    const real og = sigmoid(pre.at(3 * H + r, 0));
    c_next.at(r, 0) = fg * c.at(r, 0) + ig * gg;
    h_next.at(r, 0) = og * std::tanh(c_next.at(r, 0));
  }
  return {h_next, c_next};
}

}  // namespace ctxtag
