#pragma once

#include "ewe/checkpoint.hpp"
#include "ewe/codec.hpp"
#include "ewe/embedding.hpp"
#include "ewe/encoder.hpp"
#include "ewe/rng.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ewe {

struct ModelConfig {
  codec::CodecConfig codec;
  int c = 48;                  // element embedding width
  bool focus_enabled = true;
  bool vgram_enabled = false;  // soft v-gram pooling over byte streams
  int vgram_window = 0;        // 0 -> v
  VgramScope vgram_scope = VgramScope::sliding;
  EmbedderConfig embed;
  EncoderConfig encoder;       // encoder.hidden must equal codec.v * c
  int n_labels = 1;

  int w() const { return codec.v * c; }
  int resolved_window() const { return vgram_window > 0 ? vgram_window : codec.v; }

  void validate() const {
    codec.validate();
    if (c < 1) throw std::invalid_argument("model: c must be >= 1");
    if (encoder.hidden != w())
      throw std::invalid_argument("model: encoder width must equal v*c");
    encoder.validate();
    embed.validate();
    if (n_labels < 1) throw std::invalid_argument("model: n_labels must be >= 1");
    if (vgram_window < 0) throw std::invalid_argument("model: vgram_window must be >= 0");
    if (vgram_enabled && codec.mode != codec::Mode::byte_stream)
      throw std::invalid_argument("model: gradient tokenization requires byte_stream elements");
  }
};

template <class S>
struct Grads {
  Mat<S> elements;
  Mat<S> focus_g, focus_f;
  Mat<S> scorer;
  std::vector<LayerWeights<S>> layers;
  Mat<S> pool_w, pool_b, out_w, out_b;

  void set_zero() {
    elements.setZero();
    focus_g.setZero();
    focus_f.setZero();
    scorer.setZero();
    for (auto& lw : layers) lw.set_zero();
    pool_w.setZero();
    pool_b.setZero();
    out_w.setZero();
    out_b.setZero();
  }
};

template <class S>
struct FwdCache {
  EmbedCache<S> embed;
  EncoderCache<S> enc;
  Mat<S> enc_out;     // u x w
  Mat<S> pooled_pre;  // 1 x w, before tanh
  Mat<S> pooled;      // 1 x w
};

namespace detail {
template <class S>
Mat<S> random_mat(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.normal() * std);
  return m;
}
}  // namespace detail

// Byte-level classifier: elementwise embedding -> transformer encoder ->
// tanh pooler over the first material -> per-label logits.
template <class S>
class Classifier {
 public:
  ModelConfig cfg;
  ElementTable<S> elements;
  FocusTables<S> focus;
  GradScorer<S> scorer;
  std::vector<LayerWeights<S>> layers;
  Mat<S> pool_w, pool_b, out_w, out_b;

  Classifier(const ModelConfig& config, std::uint64_t seed) : cfg(config) {
    cfg.validate();
    const double std = cfg.embed.init_std;
    Rng rng(derive_seed(seed, kStreamInit));
    elements = ElementTable<S>::random(cfg.c, std, rng);
    focus = cfg.focus_enabled
                ? FocusTables<S>::random(cfg.codec.u, cfg.codec.v, cfg.c, std, rng)
                : FocusTables<S>::disabled();
    if (cfg.vgram_enabled)
      scorer = GradScorer<S>::random(cfg.c, cfg.resolved_window(), cfg.vgram_scope, std, rng);
    const int w = cfg.w(), ffn = cfg.encoder.resolved_ffn();
    layers.reserve(static_cast<std::size_t>(cfg.encoder.layers));
    for (int l = 0; l < cfg.encoder.layers; ++l)
      layers.push_back(LayerWeights<S>::random(w, ffn, std, rng));
    pool_w = detail::random_mat<S>(w, w, std, rng);
    pool_b = Mat<S>::Zero(1, w);
    out_w = detail::random_mat<S>(w, cfg.n_labels, std, rng);
    out_b = Mat<S>::Zero(1, cfg.n_labels);
  }

  // Embedding + encoder only (what the latency benchmark times).
  Mat<S> encode(const codec::EncodedSample& sample, bool train_mode, Rng* rng,
                FwdCache<S>& cache) const {
    Mat<S> x = embed(sample, elements, focus, cfg.vgram_enabled ? &scorer : nullptr, cfg.embed,
                     train_mode, rng, cache.embed);
    return encoder_forward(std::move(x), layers, sample.mask, cfg.encoder, train_mode, rng,
                           &cache.enc);
  }

  Vec<S> forward(const codec::EncodedSample& sample, bool train_mode, Rng* rng,
                 FwdCache<S>& cache) const {
    cache.enc_out = encode(sample, train_mode, rng, cache);
    cache.pooled_pre = cache.enc_out.row(0) * pool_w;
    cache.pooled_pre += pool_b;
    cache.pooled = cache.pooled_pre.array().tanh().matrix();
    Mat<S> logit_row = cache.pooled * out_w;
    logit_row += out_b;
    return logit_row.row(0).transpose();
  }

  Vec<S> logits(const codec::EncodedSample& sample) const {
    FwdCache<S> cache;
    return forward(sample, false, nullptr, cache);
  }

  Vec<S> predict_probs(const codec::EncodedSample& sample) const {
    Vec<S> z = logits(sample);
    Vec<S> p(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      p(i) = static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(z(i)))));
    return p;
  }

  // Accumulates into grads; the model itself is untouched.
  void backward(const Vec<S>& dlogits, const FwdCache<S>& cache, Grads<S>& grads) const {
    const Mat<S> dlrow = dlogits.transpose();
    grads.out_b += dlrow;
    grads.out_w += cache.pooled.transpose() * dlrow;
    Mat<S> dpooled = dlrow * out_w.transpose();
    Mat<S> dpre =
        dpooled.cwiseProduct((Mat<S>::Ones(1, cfg.w()) - cache.pooled.cwiseProduct(cache.pooled)));
    grads.pool_b += dpre;
    grads.pool_w += cache.enc_out.row(0).transpose() * dpre;

    Mat<S> dy = Mat<S>::Zero(cache.enc_out.rows(), cache.enc_out.cols());
    dy.row(0) = dpre * pool_w.transpose();
    dy = encoder_backward(std::move(dy), cache.enc, layers, cfg.encoder, grads.layers);
    embed_backward(dy, cache.embed, focus, cfg.vgram_enabled ? &scorer : nullptr, grads.elements,
                   cfg.focus_enabled ? &grads.focus_g : nullptr,
                   cfg.focus_enabled ? &grads.focus_f : nullptr,
                   cfg.vgram_enabled ? &grads.scorer : nullptr);
  }

  Grads<S> zero_grads() const {
    Grads<S> g;
    g.elements = Mat<S>::Zero(codec::kIdCount, cfg.c);
    if (cfg.focus_enabled) {
      g.focus_g = Mat<S>::Zero(focus.g.rows(), focus.g.cols());
      g.focus_f = Mat<S>::Zero(focus.f.rows(), focus.f.cols());
    }
    if (cfg.vgram_enabled) g.scorer = Mat<S>::Zero(1, cfg.c);
    g.layers.reserve(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
      g.layers.push_back(LayerWeights<S>::zeros(cfg.w(), cfg.encoder.resolved_ffn()));
    g.pool_w = Mat<S>::Zero(cfg.w(), cfg.w());
    g.pool_b = Mat<S>::Zero(1, cfg.w());
    g.out_w = Mat<S>::Zero(cfg.w(), cfg.n_labels);
    g.out_b = Mat<S>::Zero(1, cfg.n_labels);
    return g;
  }

  // Fixed parameter order; f(name, tensor, grad_or_null, decays). The same
  // order drives the optimizer, checkpoints, and gradient checks.
  template <class F>
  void visit_params(Grads<S>* grads, F&& f) {
    visit_impl(*this, grads, f);
  }
  template <class F>
  void visit_params(F&& f) const {
    visit_impl(*this, static_cast<Grads<S>*>(nullptr), f);
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    visit_params([&](const std::string&, const Mat<S>& m, Mat<S>*, bool) { n += m.size(); });
    return n;
  }

  void save(const std::string& path) const {
    checkpoint::TensorList tensors;
    visit_params([&](const std::string& name, const Mat<S>& m, Mat<S>*, bool) {
      tensors.emplace_back(name, m.template cast<float>());
    });
    checkpoint::save_tensors(path, tensors);
  }

  void load(const std::string& path) {
    const checkpoint::TensorList tensors = checkpoint::load_tensors(path);
    std::unordered_map<std::string, const Mat<float>*> by_name;
    for (const auto& [name, m] : tensors) by_name.emplace(name, &m);
    std::size_t used = 0;
    visit_params(nullptr, [&](const std::string& name, Mat<S>& m, Mat<S>*, bool) {
      const auto it = by_name.find(name);
      if (it == by_name.end())
        throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
      if (it->second->rows() != m.rows() || it->second->cols() != m.cols())
        throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "'");
      m = it->second->template cast<S>();
      ++used;
    });
    if (used != tensors.size())
      throw std::runtime_error("checkpoint: file carries tensors this model does not have");
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, Grads<S>* g, F&& f) {
    const auto layer_grad = [&](std::size_t l) -> LayerWeights<S>* {
      return g ? &g->layers[l] : nullptr;
    };
    f("embed.elements", self.elements.weights, g ? &g->elements : nullptr, false);
    if (self.cfg.focus_enabled) {
      f("embed.focus_g", self.focus.g, g ? &g->focus_g : nullptr, false);
      f("embed.focus_f", self.focus.f, g ? &g->focus_f : nullptr, false);
    }
    if (self.cfg.vgram_enabled) f("embed.scorer", self.scorer.s, g ? &g->scorer : nullptr, false);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      auto& lw = self.layers[l];
      LayerWeights<S>* lg = layer_grad(l);
      f(p + "wq", lw.wq, lg ? &lg->wq : nullptr, true);
      f(p + "bq", lw.bq, lg ? &lg->bq : nullptr, false);
      f(p + "wk", lw.wk, lg ? &lg->wk : nullptr, true);
      f(p + "bk", lw.bk, lg ? &lg->bk : nullptr, false);
      f(p + "wv", lw.wv, lg ? &lg->wv : nullptr, true);
      f(p + "bv", lw.bv, lg ? &lg->bv : nullptr, false);
      f(p + "wo", lw.wo, lg ? &lg->wo : nullptr, true);
      f(p + "bo", lw.bo, lg ? &lg->bo : nullptr, false);
      f(p + "ln1_gamma", lw.ln1_gamma, lg ? &lg->ln1_gamma : nullptr, false);
      f(p + "ln1_beta", lw.ln1_beta, lg ? &lg->ln1_beta : nullptr, false);
      f(p + "w1", lw.w1, lg ? &lg->w1 : nullptr, true);
      f(p + "b1", lw.b1, lg ? &lg->b1 : nullptr, false);
      f(p + "w2", lw.w2, lg ? &lg->w2 : nullptr, true);
      f(p + "b2", lw.b2, lg ? &lg->b2 : nullptr, false);
      f(p + "ln2_gamma", lw.ln2_gamma, lg ? &lg->ln2_gamma : nullptr, false);
      f(p + "ln2_beta", lw.ln2_beta, lg ? &lg->ln2_beta : nullptr, false);
    }
    f("head.pool_w", self.pool_w, g ? &g->pool_w : nullptr, true);
    f("head.pool_b", self.pool_b, g ? &g->pool_b : nullptr, false);
    f("head.out_w", self.out_w, g ? &g->out_w : nullptr, true);
    f("head.out_b", self.out_b, g ? &g->out_b : nullptr, false);
  }
};

}  // namespace ewe
