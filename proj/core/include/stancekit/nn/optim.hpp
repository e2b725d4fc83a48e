#pragma once

#include <unordered_map>

#include "stancekit/nn/tensor.hpp"

namespace stancekit::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created lazily per
// trainable parameter.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(const ParamRefs<T>& params);
  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    Matrix<T> m, v;
  };
  AdamOptions options_;
  std::unordered_map<const Param<T>*, Moments> moments_;
  std::size_t t_ = 0;
};

}  // namespace stancekit::nn
