#pragma once

#include "ewe/linalg.hpp"
#include "ewe/nn.hpp"
#include "ewe/rng.hpp"

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ewe {

struct EncoderConfig {
  int layers = 12;
  int hidden = 768;       // w
  int heads = 12;         // h; elementwise models pair h = v so head_dim = c
  int ffn_dim = 0;        // 0 -> 4 * hidden
  double dropout_rate = 0.1;
  double ln_epsilon = 1e-5;

  int head_dim() const { return hidden / heads; }
  int resolved_ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * hidden; }

  void validate() const {
    if (layers < 0) throw std::invalid_argument("encoder: layers must be >= 0");
    if (hidden < 1) throw std::invalid_argument("encoder: hidden width must be >= 1");
    if (heads < 1) throw std::invalid_argument("encoder: heads must be >= 1");
    if (hidden % heads != 0) throw std::invalid_argument("encoder: hidden width not divisible by heads");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::invalid_argument("encoder: dropout_rate must be in [0, 1)");
    if (ln_epsilon <= 0.0) throw std::invalid_argument("encoder: ln_epsilon must be > 0");
  }
};

// One post-LN transformer layer; the struct doubles as its gradient
// accumulator (zeros_like).
template <class S>
struct LayerWeights {
  Mat<S> wq, bq, wk, bk, wv, bv, wo, bo;  // w x w projections, 1 x w biases
  Mat<S> ln1_gamma, ln1_beta;             // 1 x w
  Mat<S> w1, b1;                          // w x ffn, 1 x ffn
  Mat<S> w2, b2;                          // ffn x w, 1 x w
  Mat<S> ln2_gamma, ln2_beta;             // 1 x w

  static LayerWeights random(int w, int ffn, double std, Rng& rng) {
    LayerWeights lw = zeros(w, ffn);
    const auto fill = [&](Mat<S>& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(rng.normal() * std);
    };
    fill(lw.wq);
    fill(lw.wk);
    fill(lw.wv);
    fill(lw.wo);
    fill(lw.w1);
    fill(lw.w2);
    lw.ln1_gamma.setOnes();
    lw.ln2_gamma.setOnes();
    return lw;
  }

  void set_zero() {
    for (Mat<S>* m : {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gamma, &ln1_beta, &w1, &b1,
                      &w2, &b2, &ln2_gamma, &ln2_beta})
      m->setZero();
  }

  static LayerWeights zeros(int w, int ffn) {
    LayerWeights lw;
    lw.wq = Mat<S>::Zero(w, w);
    lw.bq = Mat<S>::Zero(1, w);
    lw.wk = Mat<S>::Zero(w, w);
    lw.bk = Mat<S>::Zero(1, w);
    lw.wv = Mat<S>::Zero(w, w);
    lw.bv = Mat<S>::Zero(1, w);
    lw.wo = Mat<S>::Zero(w, w);
    lw.bo = Mat<S>::Zero(1, w);
    lw.ln1_gamma = Mat<S>::Zero(1, w);
    lw.ln1_beta = Mat<S>::Zero(1, w);
    lw.w1 = Mat<S>::Zero(w, ffn);
    lw.b1 = Mat<S>::Zero(1, ffn);
    lw.w2 = Mat<S>::Zero(ffn, w);
    lw.b2 = Mat<S>::Zero(1, w);
    lw.ln2_gamma = Mat<S>::Zero(1, w);
    lw.ln2_beta = Mat<S>::Zero(1, w);
    return lw;
  }
};

// Head n, position i = columns [n*d, (n+1)*d) of row i. With h = v and no
// focus/normalization this slice is exactly the element embedding of
// character n of material i.
template <class S>
std::vector<Mat<S>> split_heads(const Mat<S>& x, int h) {
  if (x.cols() % h != 0) throw std::invalid_argument("split_heads: width not divisible by heads");
  const int d = static_cast<int>(x.cols()) / h;
  std::vector<Mat<S>> heads;
  heads.reserve(static_cast<std::size_t>(h));
  for (int n = 0; n < h; ++n) heads.push_back(x.middleCols(static_cast<Eigen::Index>(n) * d, d));
  return heads;
}

template <class S>
struct MhaCache {
  Mat<S> x;                    // layer input
  Mat<S> q, k, v;              // u x w
  std::vector<Mat<S>> probs;   // per head, u x u attention weights
  Mat<S> concat;               // u x w, heads concatenated before Wo
};

// Scaled dot-product attention; masked materials get a -inf key score so
// their weight is exactly zero. Query rows are computed for every position;
// masked rows are ignored downstream (loss/pooling), not here.
template <class S>
Mat<S> mha_forward(const Mat<S>& x, const LayerWeights<S>& lw,
                   const std::vector<std::uint8_t>& mask, const EncoderConfig& cfg,
                   MhaCache<S>* cache) {
  const int u = static_cast<int>(x.rows());
  const int d = cfg.head_dim();
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d)));
  const S neg_inf = -std::numeric_limits<S>::infinity();

  Mat<S> q = x * lw.wq;
  q.rowwise() += lw.bq.row(0);
  Mat<S> k = x * lw.wk;
  k.rowwise() += lw.bk.row(0);
  Mat<S> v = x * lw.wv;
  v.rowwise() += lw.bv.row(0);

  Mat<S> concat(u, cfg.hidden);
  std::vector<Mat<S>> probs;
  probs.reserve(static_cast<std::size_t>(cfg.heads));
  for (int n = 0; n < cfg.heads; ++n) {
    const Eigen::Index off = static_cast<Eigen::Index>(n) * d;
    Mat<S> scores = q.middleCols(off, d) * k.middleCols(off, d).transpose() * scale;
    for (int j = 0; j < u; ++j)
      if (!mask[static_cast<std::size_t>(j)]) scores.col(j).setConstant(neg_inf);
    for (int i = 0; i < u; ++i) softmax_span(scores.row(i).data(), u);
    concat.middleCols(off, d) = scores * v.middleCols(off, d);
    probs.push_back(std::move(scores));
  }

  Mat<S> out = concat * lw.wo;
  out.rowwise() += lw.bo.row(0);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

// Accumulates into grads, returns dX.
template <class S>
Mat<S> mha_backward(const Mat<S>& dout, const MhaCache<S>& cache, const LayerWeights<S>& lw,
                    const EncoderConfig& cfg, LayerWeights<S>& grads) {
  const int u = static_cast<int>(cache.x.rows());
  const int d = cfg.head_dim();
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d)));

  grads.wo += cache.concat.transpose() * dout;
  grads.bo.row(0) += dout.colwise().sum();
  Mat<S> dconcat = dout * lw.wo.transpose();

  Mat<S> dq(u, cfg.hidden), dk(u, cfg.hidden), dv(u, cfg.hidden);
  for (int n = 0; n < cfg.heads; ++n) {
    const Eigen::Index off = static_cast<Eigen::Index>(n) * d;
    const Mat<S>& p = cache.probs[static_cast<std::size_t>(n)];
    const auto qn = cache.q.middleCols(off, d);
    const auto kn = cache.k.middleCols(off, d);
    const auto vn = cache.v.middleCols(off, d);
    const auto don = dconcat.middleCols(off, d);

    Mat<S> dp = don * vn.transpose();
    dv.middleCols(off, d) = p.transpose() * don;

    // softmax rows: ds = p .* (dp - rowdot(p, dp)); zero weights stay zero.
    Mat<S> ds(u, u);
    for (int i = 0; i < u; ++i) {
      const S dot = p.row(i).dot(dp.row(i));
      ds.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
    }
    ds *= scale;
    dq.middleCols(off, d) = ds * kn;
    dk.middleCols(off, d) = ds.transpose() * qn;
  }

  grads.wq += cache.x.transpose() * dq;
  grads.bq.row(0) += dq.colwise().sum();
  grads.wk += cache.x.transpose() * dk;
  grads.bk.row(0) += dk.colwise().sum();
  grads.wv += cache.x.transpose() * dv;
  grads.bv.row(0) += dv.colwise().sum();

  Mat<S> dx = dq * lw.wq.transpose();
  dx += dk * lw.wk.transpose();
  dx += dv * lw.wv.transpose();
  return dx;
}

template <class S>
struct LayerCache {
  MhaCache<S> mha;
  DropoutMask<S> drop1, drop2;
  LnCache<S> ln1, ln2;
  Mat<S> x_mid;    // after first residual + LN
  Mat<S> ffn_pre;  // u x ffn, before GELU
  Mat<S> ffn_act;  // u x ffn, after GELU
};

template <class S>
struct EncoderCache {
  std::vector<LayerCache<S>> layers;
};

// L repetitions of X <- LN(X + Drop(MHA(X))), X <- LN(X + Drop(FFN(X))),
// GELU activation. Deterministic when train_mode is false.
template <class S>
Mat<S> encoder_forward(Mat<S> x, const std::vector<LayerWeights<S>>& layers,
                       const std::vector<std::uint8_t>& mask, const EncoderConfig& cfg,
                       bool train_mode, Rng* rng, EncoderCache<S>* cache) {
  if (cache) cache->layers.resize(layers.size());
  const bool drop = train_mode && cfg.dropout_rate > 0.0;
  if (drop && !rng) throw std::invalid_argument("encoder: train mode with dropout needs an rng");

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerWeights<S>& lw = layers[l];
    LayerCache<S>* lc = cache ? &cache->layers[l] : nullptr;

    Mat<S> attn = mha_forward(x, lw, mask, cfg, lc ? &lc->mha : nullptr);
    if (drop) attn = dropout(attn, cfg.dropout_rate, *rng, lc ? &lc->drop1 : nullptr);
    else if (lc) lc->drop1.active = false;
    Mat<S> x_mid = layer_norm_affine<S>(x + attn, lw.ln1_gamma, lw.ln1_beta, cfg.ln_epsilon,
                                        lc ? &lc->ln1 : nullptr);

    Mat<S> pre = x_mid * lw.w1;
    pre.rowwise() += lw.b1.row(0);
    Mat<S> act(pre.rows(), pre.cols());
    for (Eigen::Index i = 0; i < pre.rows(); ++i)
      for (Eigen::Index j = 0; j < pre.cols(); ++j)
        act(i, j) = static_cast<S>(gelu(static_cast<double>(pre(i, j))));
    Mat<S> ffn = act * lw.w2;
    ffn.rowwise() += lw.b2.row(0);
    if (drop) ffn = dropout(ffn, cfg.dropout_rate, *rng, lc ? &lc->drop2 : nullptr);
    else if (lc) lc->drop2.active = false;
    x = layer_norm_affine<S>(x_mid + ffn, lw.ln2_gamma, lw.ln2_beta, cfg.ln_epsilon,
                             lc ? &lc->ln2 : nullptr);
    if (lc) {
      lc->x_mid = std::move(x_mid);
      lc->ffn_pre = std::move(pre);
      lc->ffn_act = std::move(act);
    }
  }
  return x;
}

// Accumulates into grads (parallel vector of layer accumulators), returns dX.
template <class S>
Mat<S> encoder_backward(Mat<S> dy, const EncoderCache<S>& cache,
                        const std::vector<LayerWeights<S>>& layers, const EncoderConfig& cfg,
                        std::vector<LayerWeights<S>>& grads) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerWeights<S>& lw = layers[li];
    const LayerCache<S>& lc = cache.layers[li];
    LayerWeights<S>& lg = grads[li];

    Mat<S> dr2 = layer_norm_affine_backward(dy, lw.ln2_gamma, lc.ln2, lg.ln2_gamma, lg.ln2_beta);
    Mat<S> dffn = dropout_backward(dr2, lc.drop2);

    lg.b2.row(0) += dffn.colwise().sum();
    lg.w2 += lc.ffn_act.transpose() * dffn;
    Mat<S> dact = dffn * lw.w2.transpose();
    Mat<S> dpre(dact.rows(), dact.cols());
    for (Eigen::Index i = 0; i < dact.rows(); ++i)
      for (Eigen::Index j = 0; j < dact.cols(); ++j)
        dpre(i, j) = dact(i, j) * static_cast<S>(gelu_grad(static_cast<double>(lc.ffn_pre(i, j))));
    lg.b1.row(0) += dpre.colwise().sum();
    lg.w1 += lc.x_mid.transpose() * dpre;

    Mat<S> dx_mid = dr2;  // residual
    dx_mid += dpre * lw.w1.transpose();

    Mat<S> dr1 = layer_norm_affine_backward(dx_mid, lw.ln1_gamma, lc.ln1, lg.ln1_gamma, lg.ln1_beta);
    Mat<S> dattn = dropout_backward(dr1, lc.drop1);
    dy = dr1;  // residual
    dy += mha_backward(dattn, lc.mha, lw, cfg, lg);
  }
  return dy;
}

// QK^T and attention-times-V multiply-accumulate pairs: 4*L*u^2*w. The count
// has no dependence on v: v times more characters ride through the same
// attention budget.
inline std::int64_t attention_flops(int u, int w, int L) {
  return 4LL * L * static_cast<std::int64_t>(u) * u * w;
}

}  // namespace ewe
