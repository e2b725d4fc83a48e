#pragma once

#include <optional>
#include <span>

#include "stancekit/nn/tensor.hpp"

// Layers keep parameters and gradients; activations needed for the
// backward pass live in caller-owned cache structs so a const forward can
// run concurrently for inference.
namespace stancekit::nn {

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out);

  Matrix<T> forward(const Matrix<T>& x) const;
  // Accumulates weight gradients and returns dL/dx.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy);
  void init(Rng& rng, double stddev);
  void parameters(ParamRefs<T>& out);

  Param<T> weight;  // [out, in]
  Param<T> bias;    // [1, out]
};

template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Matrix<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim, double eps);

  Matrix<T> forward(const Matrix<T>& x, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy);
  void parameters(ParamRefs<T>& out);

  Param<T> gamma;
  Param<T> beta;
  double eps = 1e-12;
};

// Exact (erf) GELU and its derivative.
template <typename T>
Matrix<T> gelu(const Matrix<T>& x);
template <typename T>
Matrix<T> gelu_grad(const Matrix<T>& x);

// 1-D convolution over time with `filters` kernels of `window` rows,
// ReLU, then max-pooling over the windows that lie entirely on active
// positions.
template <typename T>
class Conv1dMaxPool {
 public:
  struct Cache {
    Matrix<T> unfolded;                // [windows, window * dim]
    Matrix<T> activation;              // [windows, filters] after ReLU
    std::vector<Eigen::Index> argmax;  // per filter, -1 when no window is valid
    Eigen::Index length = 0;
  };

  Conv1dMaxPool() = default;
  Conv1dMaxPool(const std::string& name, Eigen::Index dim, Eigen::Index window, Eigen::Index filters);

  // Returns the pooled [1, filters] vector, or nullopt when no window is
  // fully active.
  std::optional<RowVector<T>> forward(const Matrix<T>& x, std::span<const std::uint8_t> mask, Cache* cache) const;
  // Accumulates parameter gradients; adds dL/dx into `dx` when non-null.
  void backward(const Cache& cache, const RowVector<T>& dpooled, Matrix<T>* dx);
  void init(Rng& rng, double stddev);
  void parameters(ParamRefs<T>& out);

  Eigen::Index window() const { return window_; }
  Eigen::Index filters() const { return filters_; }

  Param<T> weight;  // [filters, window * dim]
  Param<T> bias;    // [1, filters]

 private:
  Eigen::Index dim_ = 0;
  Eigen::Index window_ = 0;
  Eigen::Index filters_ = 0;
};

// Single-direction LSTM (gate order i, f, g, o) over a dense sequence.
template <typename T>
class Lstm {
 public:
  struct Cache {
    Matrix<T> x;      // [steps, in]
    Matrix<T> gates;  // [steps, 4H] post-activation
    Matrix<T> c;      // [steps, H]
    Matrix<T> h;      // [steps, H]
  };

  Lstm() = default;
  Lstm(const std::string& name, Eigen::Index in, Eigen::Index hidden);

  // Final hidden state [1, H]; zeros for an empty sequence.
  RowVector<T> forward(const Matrix<T>& x, Cache* cache) const;
  // Backward from dL/dh_final; returns dL/dx.
  Matrix<T> backward(const Cache& cache, const RowVector<T>& dh_final);
  void init(Rng& rng, double stddev);
  void parameters(ParamRefs<T>& out);

  Eigen::Index hidden() const { return hidden_; }

  Param<T> w_ih;  // [4H, in]
  Param<T> w_hh;  // [4H, H]
  Param<T> bias;  // [1, 4H]

 private:
  Eigen::Index hidden_ = 0;
};

}  // namespace stancekit::nn
