#include "ctxtag/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxtag/rng.hpp"

namespace ctxtag {

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log() is finite.
  double u = next_double();
  if (u < 1e-300) u = 1e-300;
  const double v = next_double();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
}

Matrix::Matrix(int rows, int cols, std::vector<real> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<size_t>(rows) * cols) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](real v) { return std::isfinite(v); });
}

static std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const real aik = a.at(i, k);
      if (aik == 0) continue;
      for (int j = 0; j < b.cols(); ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add: " + shape_str(a) + " vs " + shape_str(b));
  }
  Matrix out = a;
  for (size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard: " + shape_str(a) + " vs " + shape_str(b));
  }
  Matrix out = a;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

real sigmoid(real x) {
  if (x >= 0) {
    return 1 / (1 + std::exp(-x));
  }
  const real e = std::exp(x);
  return e / (1 + e);
}

Matrix activations(const Matrix& x, Activation kind) {
  if (!x.all_finite()) throw NumericError("activations: non-finite input");
  Matrix out = x;
  switch (kind) {
    case Activation::Sigmoid:
      for (auto& v : out.data()) v = sigmoid(v);
      break;
    case Activation::Tanh:
      for (auto& v : out.data()) v = std::tanh(v);
      break;
    case Activation::SoftmaxRows:
    case Activation::LogSoftmaxRows:
      for (int r = 0; r < out.rows(); ++r) {
        real mx = out.at(r, 0);
        for (int c = 1; c < out.cols(); ++c) mx = std::max(mx, out.at(r, c));
        real sum = 0;
        for (int c = 0; c < out.cols(); ++c) sum += std::exp(out.at(r, c) - mx);
        const real log_sum = std::log(sum) + mx;
        for (int c = 0; c < out.cols(); ++c) {
          const real ls = out.at(r, c) - log_sum;
          out.at(r, c) = kind == Activation::SoftmaxRows ? std::exp(ls) : ls;
        }
      }
      break;
  }
  return out;
}

}  // namespace ctxtag
