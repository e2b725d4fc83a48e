#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stancekit/random.hpp"

namespace stancekit::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Mask = std::vector<std::uint8_t>;  // 1 = active position

// A named trainable tensor with its gradient accumulator. Names follow the
// checkpoint layout ("encoder.layer.0.attention.self.query.weight").
template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix<T>::Zero(rows, cols)), grad(Matrix<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
void init_normal(Param<T>& p, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.normal(0.0, stddev));
}

template <typename T>
void init_constant(Param<T>& p, T value) {
  p.value.setConstant(value);
}

// Row-wise softmax, numerically stabilized.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename T>
RowVector<T> softmax(const RowVector<T>& x) {
  RowVector<T> out = (x.array() - x.maxCoeff()).exp();
  return out / out.sum();
}

// Inverted dropout mask: entries are 0 or 1/(1-p).
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.bernoulli(p) ? T(0) : keep;
  return mask;
}

}  // namespace stancekit::nn
