#pragma once

#include "ewe/codec.hpp"
#include "ewe/linalg.hpp"
#include "ewe/nn.hpp"
#include "ewe/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ewe {

// 260 x c table: rows 0..3 are the special tokens, rows 4..259 the bytes.
template <class S>
struct ElementTable {
  Mat<S> weights;

  int c() const { return static_cast<int>(weights.cols()); }

  static ElementTable random(int c, double std, Rng& rng) {
    ElementTable t;
    t.weights.resize(codec::kIdCount, c);
    for (Eigen::Index i = 0; i < t.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < t.weights.cols(); ++j)
        t.weights(i, j) = static_cast<S>(rng.normal() * std);
    return t;
  }
};

// Focus position tables: g indexes global element positions p = i*v + j,
// f indexes material positions i.
template <class S>
struct FocusTables {
  Mat<S> g;  // (u_max*v) x c
  Mat<S> f;  // u_max x w
  bool enabled = false;

  static FocusTables random(int u_max, int v, int c, double std, Rng& rng) {
    FocusTables t;
    t.enabled = true;
    t.g.resize(static_cast<Eigen::Index>(u_max) * v, c);
    t.f.resize(u_max, static_cast<Eigen::Index>(v) * c);
    for (Eigen::Index i = 0; i < t.g.rows(); ++i)
      for (Eigen::Index j = 0; j < t.g.cols(); ++j) t.g(i, j) = static_cast<S>(rng.normal() * std);
    for (Eigen::Index i = 0; i < t.f.rows(); ++i)
      for (Eigen::Index j = 0; j < t.f.cols(); ++j) t.f(i, j) = static_cast<S>(rng.normal() * std);
    return t;
  }

  static FocusTables zeros(int u_max, int v, int c) {
    FocusTables t;
    t.enabled = true;
    t.g = Mat<S>::Zero(static_cast<Eigen::Index>(u_max) * v, c);
    t.f = Mat<S>::Zero(u_max, static_cast<Eigen::Index>(v) * c);
    return t;
  }

  static FocusTables disabled() { return FocusTables{}; }
};

enum class VgramScope { sliding, material_local };

// Learned scoring vector for gradient-based (soft v-gram) tokenization.
template <class S>
struct GradScorer {
  Mat<S> s;  // 1 x c
  int window = 1;
  VgramScope scope = VgramScope::sliding;

  static GradScorer random(int c, int window, VgramScope scope, double std, Rng& rng) {
    GradScorer sc;
    sc.window = window;
    sc.scope = scope;
    sc.s.resize(1, c);
    for (Eigen::Index j = 0; j < c; ++j) sc.s(0, j) = static_cast<S>(rng.normal() * std);
    return sc;
  }
};

struct EmbedderConfig {
  double dropout_rate = 0.1;
  double ln_epsilon = 1e-5;
  double init_std = 0.02;

  void validate() const {
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::invalid_argument("embedder: dropout_rate must be in [0, 1)");
    if (ln_epsilon <= 0.0) throw std::invalid_argument("embedder: ln_epsilon must be > 0");
    if (init_std <= 0.0) throw std::invalid_argument("embedder: init_std must be > 0");
  }
};

// ---------------------------------------------------------------------------
// lookup / reshape / focus
// ---------------------------------------------------------------------------

// Row i*v+j of the result is the table row for ids(i, j).
template <class S>
Mat<S> lookup_elements(const IdGrid& ids, const ElementTable<S>& table) {
  const int u = static_cast<int>(ids.rows()), v = static_cast<int>(ids.cols());
  Mat<S> e(static_cast<Eigen::Index>(u) * v, table.c());
  for (int i = 0; i < u; ++i) {
    for (int j = 0; j < v; ++j) {
      const std::int32_t id = ids(i, j);
      if (id < 0 || id >= codec::kIdCount)
        throw std::out_of_range("lookup_elements: id out of range [0, 259]");
      e.row(static_cast<Eigen::Index>(i) * v + j) = table.weights.row(id);
    }
  }
  return e;
}

template <class S>
void lookup_backward(const IdGrid& ids, const Mat<S>& de, Mat<S>& dweights) {
  const int u = static_cast<int>(ids.rows()), v = static_cast<int>(ids.cols());
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < v; ++j)
      dweights.row(ids(i, j)) += de.row(static_cast<Eigen::Index>(i) * v + j);
}

// (u*v, c) -> (u, w=v*c): row i is the horizontal concatenation of element
// rows i*v .. i*v+v-1. With row-major storage this is a pure view change.
template <class S>
Mat<S> reshape_materials(const Mat<S>& e, int u, int v) {
  const int c = static_cast<int>(e.cols());
  if (e.rows() != static_cast<Eigen::Index>(u) * v)
    throw std::invalid_argument("reshape_materials: row count != u*v");
  Mat<S> m(u, static_cast<Eigen::Index>(v) * c);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < v; ++j)
      m.row(i).segment(static_cast<Eigen::Index>(j) * c, c) =
          e.row(static_cast<Eigen::Index>(i) * v + j);
  return m;
}

// Inverse of reshape_materials.
template <class S>
Mat<S> split_materials(const Mat<S>& m, int v) {
  const int u = static_cast<int>(m.rows());
  if (m.cols() % v != 0) throw std::invalid_argument("split_materials: width not divisible by v");
  const int c = static_cast<int>(m.cols()) / v;
  Mat<S> e(static_cast<Eigen::Index>(u) * v, c);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < v; ++j)
      e.row(static_cast<Eigen::Index>(i) * v + j) =
          m.row(i).segment(static_cast<Eigen::Index>(j) * c, c);
  return e;
}

// Output row i = concat_j(E[i*v+j] + g[i*v+j]) + f[i]; plain reshape when the
// tables are disabled.
template <class S>
Mat<S> add_focus(const Mat<S>& e, const FocusTables<S>& focus, int u, int v) {
  if (!focus.enabled) return reshape_materials(e, u, v);
  const int c = static_cast<int>(e.cols());
  if (focus.g.rows() < static_cast<Eigen::Index>(u) * v || focus.f.rows() < u)
    throw std::invalid_argument("add_focus: focus tables smaller than (u, v)");
  if (focus.g.cols() != c || focus.f.cols() != static_cast<Eigen::Index>(v) * c)
    throw std::invalid_argument("add_focus: focus table width mismatch");
  Mat<S> m(u, static_cast<Eigen::Index>(v) * c);
  for (int i = 0; i < u; ++i) {
    for (int j = 0; j < v; ++j) {
      const Eigen::Index p = static_cast<Eigen::Index>(i) * v + j;
      m.row(i).segment(static_cast<Eigen::Index>(j) * c, c) = e.row(p) + focus.g.row(p);
    }
    m.row(i) += focus.f.row(i);
  }
  return m;
}

// Returns dE; accumulates into dg/df when the tables are enabled.
template <class S>
Mat<S> add_focus_backward(const Mat<S>& dm, const FocusTables<S>& focus, int u, int v,
                          Mat<S>* dg, Mat<S>* df) {
  if (!focus.enabled) return split_materials(dm, v);
  const int c = static_cast<int>(dm.cols()) / v;
  Mat<S> de(static_cast<Eigen::Index>(u) * v, c);
  for (int i = 0; i < u; ++i) {
    if (df) df->row(i) += dm.row(i);
    for (int j = 0; j < v; ++j) {
      const Eigen::Index p = static_cast<Eigen::Index>(i) * v + j;
      const auto slice = dm.row(i).segment(static_cast<Eigen::Index>(j) * c, c);
      de.row(p) = slice;
      if (dg) dg->row(p) += slice;
    }
  }
  return de;
}

// ---------------------------------------------------------------------------
// soft v-gram pooling
// ---------------------------------------------------------------------------

template <class S>
struct VgramCache {
  Mat<S> input;            // E as seen by the pooling
  Mat<S> alphas;           // sliding: T x window; local: n_materials x v
  std::vector<int> valid;  // sliding: window length per row
  int v = 0;               // local scope material width
};

// Sliding: out[t] = sum_k alpha_k E[t+k], softmax over the in-range window of
// E[t+k]·s. Material-local: every row of material i becomes the same pooled
// sum over the material's v rows.
template <class S>
Mat<S> soft_vgram(const Mat<S>& e, const GradScorer<S>& scorer, int v_material,
                  VgramCache<S>* cache = nullptr) {
  if (scorer.window < 1) throw std::invalid_argument("soft_vgram: window must be >= 1");
  const Eigen::Index t_total = e.rows();
  const int c = static_cast<int>(e.cols());
  if (scorer.s.cols() != c) throw std::invalid_argument("soft_vgram: scorer width mismatch");
  Mat<S> out(t_total, c);

  Vec<S> scores = e * scorer.s.row(0).transpose();  // z_t = E[t]·s

  if (scorer.scope == VgramScope::sliding) {
    const int window = scorer.window;
    Mat<S> alphas = Mat<S>::Zero(t_total, window);
    std::vector<int> valid(static_cast<std::size_t>(t_total));
    std::vector<S> buf(static_cast<std::size_t>(window));
    for (Eigen::Index t = 0; t < t_total; ++t) {
      const int k_max = static_cast<int>(std::min<Eigen::Index>(window, t_total - t));
      valid[static_cast<std::size_t>(t)] = k_max;
      for (int k = 0; k < k_max; ++k) buf[static_cast<std::size_t>(k)] = scores(t + k);
      softmax_span(buf.data(), k_max);
      out.row(t).setZero();
      for (int k = 0; k < k_max; ++k) {
        alphas(t, k) = buf[static_cast<std::size_t>(k)];
        out.row(t) += buf[static_cast<std::size_t>(k)] * e.row(t + k);
      }
    }
    if (cache) {
      cache->input = e;
      cache->alphas = std::move(alphas);
      cache->valid = std::move(valid);
      cache->v = v_material;
    }
  } else {
    if (v_material < 1 || t_total % v_material != 0)
      throw std::invalid_argument("soft_vgram: rows not divisible by v");
    const Eigen::Index n_materials = t_total / v_material;
    Mat<S> alphas(n_materials, v_material);
    std::vector<S> buf(static_cast<std::size_t>(v_material));
    for (Eigen::Index i = 0; i < n_materials; ++i) {
      for (int j = 0; j < v_material; ++j) buf[static_cast<std::size_t>(j)] = scores(i * v_material + j);
      softmax_span(buf.data(), v_material);
      Eigen::RowVectorX<S> pooled = Eigen::RowVectorX<S>::Zero(c);
      for (int j = 0; j < v_material; ++j) {
        alphas(i, j) = buf[static_cast<std::size_t>(j)];
        pooled += buf[static_cast<std::size_t>(j)] * e.row(i * v_material + j);
      }
      for (int j = 0; j < v_material; ++j) out.row(i * v_material + j) = pooled;
    }
    if (cache) {
      cache->input = e;
      cache->alphas = std::move(alphas);
      cache->valid.clear();
      cache->v = v_material;
    }
  }
  return out;
}

// Returns dE; accumulates the scorer gradient into ds (1 x c).
template <class S>
Mat<S> soft_vgram_backward(const Mat<S>& dout, const GradScorer<S>& scorer,
                           const VgramCache<S>& cache, Mat<S>* ds) {
  const Mat<S>& e = cache.input;
  const Eigen::Index t_total = e.rows();
  Mat<S> de = Mat<S>::Zero(t_total, e.cols());

  const auto pool_backward = [&](Eigen::Index base, int count, int stride_row,
                                 const Eigen::RowVectorX<S>& dpool,
                                 const Eigen::Ref<const Eigen::RowVectorX<S>>& alpha) {
    // dz_k = a_k (dpool·v_k - sum_m a_m dpool·v_m)
    Eigen::RowVectorX<S> dots(count);
    S mixed = S(0);
    for (int k = 0; k < count; ++k) {
      dots(k) = dpool.dot(e.row(base + k * stride_row));
      mixed += alpha(k) * dots(k);
    }
    for (int k = 0; k < count; ++k) {
      const S dz = alpha(k) * (dots(k) - mixed);
      de.row(base + k * stride_row) += alpha(k) * dpool + dz * scorer.s.row(0);
      if (ds) ds->row(0) += dz * e.row(base + k * stride_row);
    }
  };

  if (scorer.scope == VgramScope::sliding) {
    for (Eigen::Index t = 0; t < t_total; ++t) {
      const int k_max = cache.valid[static_cast<std::size_t>(t)];
      const Eigen::RowVectorX<S> dpool = dout.row(t);
      pool_backward(t, k_max, 1, dpool, cache.alphas.row(t).head(k_max));
    }
  } else {
    const int v = cache.v;
    const Eigen::Index n_materials = t_total / v;
    for (Eigen::Index i = 0; i < n_materials; ++i) {
      Eigen::RowVectorX<S> dsum = Eigen::RowVectorX<S>::Zero(e.cols());
      for (int j = 0; j < v; ++j) dsum += dout.row(i * v + j);
      pool_backward(i * v, v, 1, dsum, cache.alphas.row(i));
    }
  }
  return de;
}

// ---------------------------------------------------------------------------
// embed: lookup -> (soft v-gram) -> focus/reshape -> layer norm -> dropout
// ---------------------------------------------------------------------------

template <class S>
struct EmbedCache {
  IdGrid ids;
  Mat<S> elements;
  VgramCache<S> vgram;
  bool used_vgram = false;
  LnCache<S> ln;
  DropoutMask<S> drop;
};

template <class S>
Mat<S> embed(const codec::EncodedSample& sample, const ElementTable<S>& table,
             const FocusTables<S>& focus, const GradScorer<S>* scorer, const EmbedderConfig& cfg,
             bool train_mode, Rng* rng, EmbedCache<S>& cache) {
  const int u = sample.u(), v = sample.v();
  cache.ids = sample.ids;
  cache.elements = lookup_elements(sample.ids, table);
  Mat<S> e = cache.elements;
  cache.used_vgram = scorer != nullptr;
  if (scorer) e = soft_vgram(e, *scorer, v, &cache.vgram);
  Mat<S> x = add_focus(e, focus, u, v);
  x = layer_norm_rows(x, cfg.ln_epsilon, &cache.ln);
  if (train_mode && cfg.dropout_rate > 0.0) {
    if (!rng) throw std::invalid_argument("embed: train mode with dropout needs an rng");
    x = dropout(x, cfg.dropout_rate, *rng, &cache.drop);
  } else {
    cache.drop.active = false;
  }
  return x;
}

// Accumulates parameter gradients; d_g/d_f/d_s may be null when the
// corresponding component is disabled.
template <class S>
void embed_backward(const Mat<S>& dy, const EmbedCache<S>& cache, const FocusTables<S>& focus,
                    const GradScorer<S>* scorer, Mat<S>& d_elements, Mat<S>* d_g, Mat<S>* d_f,
                    Mat<S>* d_s) {
  const int u = static_cast<int>(cache.ids.rows()), v = static_cast<int>(cache.ids.cols());
  Mat<S> dx = dropout_backward(dy, cache.drop);
  dx = layer_norm_rows_backward(dx, cache.ln);
  Mat<S> de = add_focus_backward(dx, focus, u, v, d_g, d_f);
  if (cache.used_vgram) de = soft_vgram_backward(de, *scorer, cache.vgram, d_s);
  lookup_backward(cache.ids, de, d_elements);
}

// 260*c element entries plus, when focus is enabled, u_max*v*c for g and
// u_max*w = u_max*v*c for f.
inline std::int64_t embedding_param_count(int c, int u_max, int v, bool focus_enabled) {
  std::int64_t count = static_cast<std::int64_t>(codec::kIdCount) * c;
  if (focus_enabled) count += 2LL * u_max * v * c;
  return count;
}

}  // namespace ewe
