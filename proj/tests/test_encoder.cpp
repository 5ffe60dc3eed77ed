#include "ewe/encoder.hpp"

#include <cmath>
#include <vector>

#include <doctest/doctest.h>

using namespace ewe;

namespace {

EncoderCache<double>* const no_cache = nullptr;

Mat<double> random_mat(Rng& rng, int rows, int cols, double std = 1.0) {
  Mat<double> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal() * std;
  return m;
}

EncoderConfig tiny_cfg(int layers, int hidden, int heads, double dropout = 0.0) {
  EncoderConfig cfg;
  cfg.layers = layers;
  cfg.hidden = hidden;
  cfg.heads = heads;
  cfg.ffn_dim = 2 * hidden;
  cfg.dropout_rate = dropout;
  return cfg;
}

std::vector<LayerWeights<double>> random_layers(const EncoderConfig& cfg, Rng& rng,
                                                double std = 0.4) {
  std::vector<LayerWeights<double>> layers;
  for (int l = 0; l < cfg.layers; ++l)
    layers.push_back(LayerWeights<double>::random(cfg.hidden, cfg.resolved_ffn(), std, rng));
  return layers;
}

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
}

// Flattened view over every tensor in a layer stack, for finite differencing.
std::vector<Mat<double>*> layer_tensors(std::vector<LayerWeights<double>>& layers) {
  std::vector<Mat<double>*> out;
  for (auto& lw : layers)
    for (Mat<double>* m : {&lw.wq, &lw.bq, &lw.wk, &lw.bk, &lw.wv, &lw.bv, &lw.wo, &lw.bo,
                           &lw.ln1_gamma, &lw.ln1_beta, &lw.w1, &lw.b1, &lw.w2, &lw.b2,
                           &lw.ln2_gamma, &lw.ln2_beta})
      out.push_back(m);
  return out;
}

}  // namespace

TEST_CASE("split_heads slices contiguous column groups") {
  Mat<double> x(1, 4);
  x << 1, 2, 3, 4;
  auto heads = split_heads(x, 2);
  REQUIRE(heads.size() == 2);
  CHECK(heads[0](0, 0) == 1);
  CHECK(heads[0](0, 1) == 2);
  CHECK(heads[1](0, 0) == 3);
  CHECK(heads[1](0, 1) == 4);

  Rng rng(1);
  Mat<double> y = random_mat(rng, 3, 6);
  auto one = split_heads(y, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == y);
  CHECK_THROWS_AS(split_heads(y, 4), std::invalid_argument);
}

TEST_CASE("config validation and deriveds") {
  EncoderConfig cfg = tiny_cfg(2, 12, 3);
  CHECK(cfg.head_dim() == 4);
  CHECK(cfg.resolved_ffn() == 24);
  cfg.ffn_dim = 0;
  CHECK(cfg.resolved_ffn() == 48);
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.heads = 3;
  cfg.layers = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("single position attends only to itself") {
  Rng rng(2);
  EncoderConfig cfg = tiny_cfg(1, 6, 2);
  LayerWeights<double> lw = LayerWeights<double>::random(6, 12, 0.5, rng);
  Mat<double> x = random_mat(rng, 1, 6);
  MhaCache<double> cache;
  mha_forward(x, lw, {1}, cfg, &cache);
  for (const auto& p : cache.probs) {
    REQUIRE(p.rows() == 1);
    CHECK(p(0, 0) == 1.0);
  }
}

TEST_CASE("identical keys spread attention uniformly") {
  Rng rng(3);
  EncoderConfig cfg = tiny_cfg(1, 4, 2);
  LayerWeights<double> lw = LayerWeights<double>::random(4, 8, 0.5, rng);
  Mat<double> row = random_mat(rng, 1, 4);
  Mat<double> x(5, 4);
  for (int i = 0; i < 5; ++i) x.row(i) = row;
  MhaCache<double> cache;
  mha_forward(x, lw, {1, 1, 1, 1, 1}, cfg, &cache);
  for (const auto& p : cache.probs)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(p(i, j) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("attention rows are distributions over unmasked keys") {
  Rng rng(4);
  EncoderConfig cfg = tiny_cfg(1, 8, 4);
  LayerWeights<double> lw = LayerWeights<double>::random(8, 16, 0.6, rng);
  Mat<double> x = random_mat(rng, 6, 8, 1.5);
  std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 1};
  MhaCache<double> cache;
  mha_forward(x, lw, mask, cfg, &cache);
  for (const auto& p : cache.probs) {
    for (int i = 0; i < 6; ++i) {
      double sum = 0;
      for (int j = 0; j < 6; ++j) {
        CHECK(p(i, j) >= 0.0);
        if (!mask[static_cast<std::size_t>(j)]) CHECK(p(i, j) == 0.0);
        sum += p(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("masked materials cannot influence unmasked outputs") {
  Rng rng(5);
  EncoderConfig cfg = tiny_cfg(2, 8, 2);
  auto layers = random_layers(cfg, rng);
  Mat<double> x = random_mat(rng, 4, 8);
  std::vector<std::uint8_t> mask = {1, 1, 1, 0};

  Mat<double> base = encoder_forward(x, layers, mask, cfg, false, nullptr, no_cache);
  Mat<double> x2 = x;
  x2.row(3).setConstant(42.0);  // garbage in the padded material
  Mat<double> altered = encoder_forward(x2, layers, mask, cfg, false, nullptr, no_cache);
  for (int i = 0; i < 3; ++i)
    CHECK((base.row(i) - altered.row(i)).cwiseAbs().maxCoeff() == 0.0);
  // the masked row itself does change (its query still runs)
  CHECK((base.row(3) - altered.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero layers is the identity") {
  Rng rng(6);
  EncoderConfig cfg = tiny_cfg(0, 10, 2);
  std::vector<LayerWeights<double>> none;
  Mat<double> x = random_mat(rng, 3, 10);
  Mat<double> y = encoder_forward(x, none, {1, 1, 1}, cfg, false, nullptr, no_cache);
  CHECK(x == y);
}

TEST_CASE("forward is deterministic in eval mode and keeps shape") {
  Rng rng(7);
  EncoderConfig cfg = tiny_cfg(3, 12, 3, 0.2);
  auto layers = random_layers(cfg, rng);
  Mat<double> x = random_mat(rng, 5, 12);
  std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0};
  Mat<double> a = encoder_forward(x, layers, mask, cfg, false, nullptr, no_cache);
  Mat<double> b = encoder_forward(x, layers, mask, cfg, false, nullptr, no_cache);
  CHECK(a == b);
  CHECK(a.rows() == 5);
  CHECK(a.cols() == 12);
  CHECK(a.allFinite());
  // train mode without an rng must refuse when dropout is live
  CHECK_THROWS_AS(encoder_forward(x, layers, mask, cfg, true, nullptr, no_cache),
                  std::invalid_argument);
}

TEST_CASE("encoder gradients match central differences") {
  Rng rng(8);
  EncoderConfig cfg = tiny_cfg(2, 8, 2);
  auto layers = random_layers(cfg, rng, 0.35);
  Mat<double> x0 = random_mat(rng, 4, 8, 0.8);
  std::vector<std::uint8_t> mask = {1, 1, 1, 0};
  Mat<double> r = random_mat(rng, 4, 8);  // fixed projection defines the loss

  auto loss_of = [&](const Mat<double>& x) {
    Mat<double> y = encoder_forward(x, layers, mask, cfg, false, nullptr, no_cache);
    return (y.cwiseProduct(r)).sum();
  };

  EncoderCache<double> cache;
  encoder_forward(x0, layers, mask, cfg, false, nullptr, &cache);
  std::vector<LayerWeights<double>> grads(2, LayerWeights<double>::zeros(8, cfg.resolved_ffn()));
  Mat<double> dx = encoder_backward(r, cache, layers, cfg, grads);

  const double eps = 1e-5;
  double worst = 0;

  Mat<double> xp = x0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) {
      xp(i, j) = x0(i, j) + eps;
      double up = loss_of(xp);
      xp(i, j) = x0(i, j) - eps;
      double dn = loss_of(xp);
      xp(i, j) = x0(i, j);
      worst = std::max(worst, rel_err(dx(i, j), (up - dn) / (2 * eps)));
    }
  CHECK(worst < 1e-6);

  worst = 0;
  auto tensors = layer_tensors(layers);
  auto grad_tensors = layer_tensors(grads);
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Mat<double>& m = *tensors[t];
    // probe a handful of entries per tensor to keep the test quick
    Rng pick(100 + static_cast<std::uint64_t>(t));
    for (int probe = 0; probe < 6; ++probe) {
      int i = static_cast<int>(pick.below(static_cast<std::uint64_t>(m.rows())));
      int j = static_cast<int>(pick.below(static_cast<std::uint64_t>(m.cols())));
      double keep = m(i, j);
      m(i, j) = keep + eps;
      double up = loss_of(x0);
      m(i, j) = keep - eps;
      double dn = loss_of(x0);
      m(i, j) = keep;
      worst = std::max(worst, rel_err((*grad_tensors[t])(i, j), (up - dn) / (2 * eps)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("attention flop count") {
  CHECK(attention_flops(128, 768, 12) == 603979776);
  CHECK(attention_flops(1, 1, 1) == 4);
  CHECK(attention_flops(256, 768, 12) == 4 * attention_flops(128, 768, 12));
  CHECK(attention_flops(128, 768, 24) == 2 * attention_flops(128, 768, 12));
  // no v anywhere: same u, w, L means same count no matter how many
  // characters each material packs
}
