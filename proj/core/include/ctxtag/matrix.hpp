#pragma once

#include <cstddef>
#include <vector>

#include "ctxtag/errors.hpp"

namespace ctxtag {

#ifdef CTXTAG_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

// Dense row-major matrix. Column vectors are N x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, real fill = 0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}
  Matrix(int rows, int cols, std::vector<real> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  real& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  real at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  real& operator[](size_t i) { return data_[i]; }
  real operator[](size_t i) const { return data_[i]; }

  std::vector<real>& data() { return data_; }
  const std::vector<real>& data() const { return data_; }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  void fill(real v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  bool operator==(const Matrix& o) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<real> data_;
};

// Plain (non-differentiating) kernels; the tape ops in autodiff.hpp wrap
// these for training.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

enum class Activation { Sigmoid, Tanh, SoftmaxRows, LogSoftmaxRows };
Matrix activations(const Matrix& x, Activation kind);

real sigmoid(real x);

}  // namespace ctxtag
