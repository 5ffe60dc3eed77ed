#pragma once

#include "ewe/linalg.hpp"
#include "ewe/rng.hpp"

#include <cmath>

namespace ewe {

// ---------------------------------------------------------------------------
// Row-wise layer normalization. The plain variant (no scale/bias) is used on
// embeddings so they contribute no parameters; the affine variant is the
// encoder's.
// ---------------------------------------------------------------------------

template <class S>
struct LnCache {
  Mat<S> xhat;
  Vec<S> inv_std;
};

template <class S>
Mat<S> layer_norm_rows(const Mat<S>& x, double eps, LnCache<S>* cache) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  Mat<S> y(rows, cols);
  if (cache) {
    cache->xhat.resize(rows, cols);
    cache->inv_std.resize(rows);
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    const S inv_std = S(1) / std::sqrt(var + static_cast<S>(eps));
    y.row(i) = (x.row(i).array() - mean) * inv_std;
    if (cache) {
      cache->xhat.row(i) = y.row(i);
      cache->inv_std(i) = inv_std;
    }
  }
  return y;
}

template <class S>
Mat<S> layer_norm_rows_backward(const Mat<S>& dy, const LnCache<S>& cache) {
  const Eigen::Index rows = dy.rows(), cols = dy.cols();
  Mat<S> dx(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const S m1 = dy.row(i).mean();
    const S m2 = (dy.row(i).array() * cache.xhat.row(i).array()).mean();
    dx.row(i) = ((dy.row(i).array() - m1) - cache.xhat.row(i).array() * m2) * cache.inv_std(i);
  }
  return dx;
}

template <class S>
Mat<S> layer_norm_affine(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta, double eps,
                         LnCache<S>* cache) {
  Mat<S> xhat = layer_norm_rows(x, eps, cache);
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    y.row(i) = xhat.row(i).cwiseProduct(gamma.row(0)) + beta.row(0);
  return y;
}

// Accumulates dgamma/dbeta, returns dx.
template <class S>
Mat<S> layer_norm_affine_backward(const Mat<S>& dy, const Mat<S>& gamma, const LnCache<S>& cache,
                                  Mat<S>& dgamma, Mat<S>& dbeta) {
  Mat<S> dxhat(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    dgamma.row(0) += dy.row(i).cwiseProduct(cache.xhat.row(i));
    dbeta.row(0) += dy.row(i);
    dxhat.row(i) = dy.row(i).cwiseProduct(gamma.row(0));
  }
  return layer_norm_rows_backward(dxhat, cache);
}

// ---------------------------------------------------------------------------
// Inverted dropout.
// ---------------------------------------------------------------------------

template <class S>
struct DropoutMask {
  Mat<S> scale;  // entries 0 or 1/keep
  bool active = false;
};

template <class S>
Mat<S> dropout(const Mat<S>& x, double rate, Rng& rng, DropoutMask<S>* mask) {
  if (rate <= 0.0) {
    if (mask) mask->active = false;
    return x;
  }
  const S inv_keep = static_cast<S>(1.0 / (1.0 - rate));
  Mat<S> scale(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      scale(i, j) = rng.uniform() < rate ? S(0) : inv_keep;
  if (mask) {
    mask->scale = scale;
    mask->active = true;
  }
  return x.cwiseProduct(scale);
}

template <class S>
Mat<S> dropout_backward(const Mat<S>& dy, const DropoutMask<S>& mask) {
  return mask.active ? dy.cwiseProduct(mask.scale).eval() : dy;
}

// ---------------------------------------------------------------------------
// Activations and softmax.
// ---------------------------------------------------------------------------

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * 0.70710678118654752440));
  const double pdf = std::exp(-0.5 * x * x) * 0.39894228040143267794;
  return cdf + x * pdf;
}

// In-place softmax over n entries; max-shifted, sum accumulated in double.
// Entries equal to -infinity come out exactly zero. All -infinity -> all zero.
template <class S>
void softmax_span(S* x, int n) {
  S max_val = -std::numeric_limits<S>::infinity();
  for (int i = 0; i < n; ++i) max_val = std::max(max_val, x[i]);
  if (!(max_val > -std::numeric_limits<S>::infinity())) {
    for (int i = 0; i < n; ++i) x[i] = S(0);
    return;
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - max_val);
    sum += static_cast<double>(x[i]);
  }
  const S inv = static_cast<S>(1.0 / sum);
  for (int i = 0; i < n; ++i) x[i] *= inv;
}

}  // namespace ewe
