#include "stancekit/nn/layers.hpp"

#include <limits>

namespace stancekit::nn {

template <typename T>
Linear<T>::Linear(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) const {
  Matrix<T> y = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Matrix<T>& x, const Matrix<T>& dy) {
  if (weight.trainable) weight.grad.noalias() += dy.transpose() * x;
  if (bias.trainable) bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value;
}

template <typename T>
void Linear<T>::init(Rng& rng, double stddev) {
  init_normal(weight, rng, stddev);
  bias.value.setZero();
}

template <typename T>
void Linear<T>::parameters(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
LayerNorm<T>::LayerNorm(const std::string& name, Eigen::Index dim, double eps_)
    : gamma(name + ".weight", 1, dim), beta(name + ".bias", 1, dim), eps(eps_) {
  gamma.value.setOnes();
}

template <typename T>
Matrix<T> LayerNorm<T>::forward(const Matrix<T>& x, Cache* cache) const {
  const auto n = x.rows();
  const T d = static_cast<T>(x.cols());
  Matrix<T> xhat(x.rows(), x.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mean = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mean).eval();
    const T var = centered.square().sum() / d;
    inv_std(r) = T(1) / std::sqrt(var + static_cast<T>(eps));
    xhat.row(r) = centered * inv_std(r);
  }
  Matrix<T> y = (xhat.array().rowwise() * gamma.value.row(0).array()).matrix();
  y.rowwise() += beta.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Matrix<T> LayerNorm<T>::backward(const Cache& cache, const Matrix<T>& dy) {
  if (gamma.trainable) gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  if (beta.trainable) beta.grad.row(0) += dy.colwise().sum();
  const Matrix<T> dxhat = (dy.array().rowwise() * gamma.value.row(0).array()).matrix();
  const T d = static_cast<T>(dy.cols());
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).sum() / d;
    const T mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / d;
    dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

template <typename T>
void LayerNorm<T>::parameters(ParamRefs<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename T>
Matrix<T> gelu(const Matrix<T>& x) {
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  return x.unaryExpr([inv_sqrt2](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); });
}

template <typename T>
Matrix<T> gelu_grad(const Matrix<T>& x) {
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const T inv_sqrt_2pi = static_cast<T>(0.39894228040143267794);
  return x.unaryExpr([=](T v) {
    return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
  });
}

template <typename T>
Conv1dMaxPool<T>::Conv1dMaxPool(const std::string& name, Eigen::Index dim, Eigen::Index window,
                                Eigen::Index filters)
    : weight(name + ".weight", filters, window * dim),
      bias(name + ".bias", 1, filters),
      dim_(dim),
      window_(window),
      filters_(filters) {}

template <typename T>
std::optional<RowVector<T>> Conv1dMaxPool<T>::forward(const Matrix<T>& x, std::span<const std::uint8_t> mask,
                                                      Cache* cache) const {
  const Eigen::Index length = x.rows();
  if (length < window_) return std::nullopt;
  const Eigen::Index windows = length - window_ + 1;
  std::vector<bool> valid(static_cast<std::size_t>(windows), true);
  bool any = false;
  for (Eigen::Index i = 0; i < windows; ++i) {
    if (!mask.empty()) {
      for (Eigen::Index j = i; j < i + window_; ++j) valid[i] = valid[i] && mask[static_cast<std::size_t>(j)];
    }
    any = any || valid[i];
  }
  if (!any) return std::nullopt;

  // Rows of a row-major matrix are contiguous, so window i is a flat slice.
  Matrix<T> unfolded(windows, window_ * dim_);
  for (Eigen::Index i = 0; i < windows; ++i) {
    unfolded.row(i) = Eigen::Map<const RowVector<T>>(x.data() + i * dim_, window_ * dim_);
  }
  Matrix<T> act = unfolded * weight.value.transpose();
  act.rowwise() += bias.value.row(0);
  act = act.cwiseMax(T(0));

  RowVector<T> pooled(filters_);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(filters_), -1);
  for (Eigen::Index f = 0; f < filters_; ++f) {
    T best = -std::numeric_limits<T>::infinity();
    for (Eigen::Index i = 0; i < windows; ++i) {
      if (valid[i] && act(i, f) > best) {
        best = act(i, f);
        argmax[f] = i;
      }
    }
    pooled(f) = best;
  }
  if (cache) {
    cache->unfolded = std::move(unfolded);
    cache->activation = std::move(act);
    cache->argmax = std::move(argmax);
    cache->length = length;
  }
  return pooled;
}

template <typename T>
void Conv1dMaxPool<T>::backward(const Cache& cache, const RowVector<T>& dpooled, Matrix<T>* dx) {
  const Eigen::Index windows = cache.unfolded.rows();
  Matrix<T> dz = Matrix<T>::Zero(windows, filters_);
  for (Eigen::Index f = 0; f < filters_; ++f) {
    const Eigen::Index i = cache.argmax[f];
    if (i >= 0 && cache.activation(i, f) > T(0)) dz(i, f) = dpooled(f);
  }
  if (weight.trainable) weight.grad.noalias() += dz.transpose() * cache.unfolded;
  if (bias.trainable) bias.grad.row(0) += dz.colwise().sum();
  if (dx) {
    const Matrix<T> du = dz * weight.value;
    for (Eigen::Index i = 0; i < windows; ++i) {
      Eigen::Map<RowVector<T>>(dx->data() + i * dim_, window_ * dim_) += du.row(i);
    }
  }
}

template <typename T>
void Conv1dMaxPool<T>::init(Rng& rng, double stddev) {
  init_normal(weight, rng, stddev);
  bias.value.setZero();
}

template <typename T>
void Conv1dMaxPool<T>::parameters(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
Lstm<T>::Lstm(const std::string& name, Eigen::Index in, Eigen::Index hidden)
    : w_ih(name + ".weight_ih", 4 * hidden, in),
      w_hh(name + ".weight_hh", 4 * hidden, hidden),
      bias(name + ".bias", 1, 4 * hidden),
      hidden_(hidden) {}

namespace {
template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}
}  // namespace

template <typename T>
RowVector<T> Lstm<T>::forward(const Matrix<T>& x, Cache* cache) const {
  const Eigen::Index steps = x.rows(), H = hidden_;
  RowVector<T> h = RowVector<T>::Zero(H), c = RowVector<T>::Zero(H);
  Matrix<T> gates_all(steps, 4 * H), c_all(steps, H), h_all(steps, H);
  const Matrix<T> input_proj = x * w_ih.value.transpose();
  for (Eigen::Index t = 0; t < steps; ++t) {
    RowVector<T> z = input_proj.row(t) + h * w_hh.value.transpose() + bias.value.row(0);
    for (Eigen::Index k = 0; k < H; ++k) {
      z(k) = sigmoid(z(k));
      z(H + k) = sigmoid(z(H + k));
      z(2 * H + k) = std::tanh(z(2 * H + k));
      z(3 * H + k) = sigmoid(z(3 * H + k));
    }
    c = z.segment(H, H).cwiseProduct(c) + z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
    h = z.segment(3 * H, H).cwiseProduct(c.unaryExpr([](T v) { return std::tanh(v); }));
    gates_all.row(t) = z;
    c_all.row(t) = c;
    h_all.row(t) = h;
  }
  if (cache) {
    cache->x = x;
    cache->gates = std::move(gates_all);
    cache->c = std::move(c_all);
    cache->h = std::move(h_all);
  }
  return h;
}

template <typename T>
Matrix<T> Lstm<T>::backward(const Cache& cache, const RowVector<T>& dh_final) {
  const Eigen::Index steps = cache.x.rows(), H = hidden_;
  Matrix<T> dx = Matrix<T>::Zero(steps, cache.x.cols());
  RowVector<T> dh = dh_final, dc = RowVector<T>::Zero(H), dz(4 * H);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto g = cache.gates.row(t);
    const RowVector<T> c_prev = t > 0 ? RowVector<T>(cache.c.row(t - 1)) : RowVector<T>::Zero(H);
    const RowVector<T> h_prev = t > 0 ? RowVector<T>(cache.h.row(t - 1)) : RowVector<T>::Zero(H);
    for (Eigen::Index k = 0; k < H; ++k) {
      const T i = g(k), f = g(H + k), gg = g(2 * H + k), o = g(3 * H + k);
      const T tc = std::tanh(cache.c(t, k));
      dc(k) += dh(k) * o * (T(1) - tc * tc);
      dz(k) = dc(k) * gg * i * (T(1) - i);
      dz(H + k) = dc(k) * c_prev(k) * f * (T(1) - f);
      dz(2 * H + k) = dc(k) * i * (T(1) - gg * gg);
      dz(3 * H + k) = dh(k) * tc * o * (T(1) - o);
      dc(k) *= f;
    }
    if (w_ih.trainable) w_ih.grad.noalias() += dz.transpose() * cache.x.row(t);
    if (w_hh.trainable) w_hh.grad.noalias() += dz.transpose() * h_prev;
    if (bias.trainable) bias.grad.row(0) += dz;
    dx.row(t) = dz * w_ih.value;
    dh = dz * w_hh.value;
  }
  return dx;
}

template <typename T>
void Lstm<T>::init(Rng& rng, double stddev) {
  init_normal(w_ih, rng, stddev);
  init_normal(w_hh, rng, stddev);
  bias.value.setZero();
}

template <typename T>
void Lstm<T>::parameters(ParamRefs<T>& out) {
  out.push_back(&w_ih);
  out.push_back(&w_hh);
  out.push_back(&bias);
}

#define STANCEKIT_INSTANTIATE(T)                          \
  template class Linear<T>;                               \
  template class LayerNorm<T>;                            \
  template class Conv1dMaxPool<T>;                        \
  template class Lstm<T>;                                 \
  template Matrix<T> gelu<T>(const Matrix<T>&);           \
  template Matrix<T> gelu_grad<T>(const Matrix<T>&);

STANCEKIT_INSTANTIATE(float)
STANCEKIT_INSTANTIATE(double)
#undef STANCEKIT_INSTANTIATE

}  // namespace stancekit::nn
