#include "stancekit/nn/optim.hpp"

#include <cmath>

namespace stancekit::nn {

template <typename T>
void Adam<T>::step(const ParamRefs<T>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
  const T lr = static_cast<T>(options_.learning_rate * std::sqrt(c2) / c1);
  const T eps = static_cast<T>(options_.eps * std::sqrt(c2));
  for (Param<T>* p : params) {
    if (!p->trainable) continue;
    auto [it, inserted] = moments_.try_emplace(p);
    if (inserted) {
      it->second.m = Matrix<T>::Zero(p->value.rows(), p->value.cols());
      it->second.v = Matrix<T>::Zero(p->value.rows(), p->value.cols());
    }
    auto& m = it->second.m;
    auto& v = it->second.v;
    m = b1 * m + (T(1) - b1) * p->grad;
    v = b2 * v + (T(1) - b2) * p->grad.cwiseAbs2();
    p->value.array() -= lr * m.array() / (v.array().sqrt() + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace stancekit::nn
