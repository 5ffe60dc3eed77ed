#include "ewe/model.hpp"
#include "ewe/train.hpp"

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <doctest/doctest.h>

using namespace ewe;

namespace {

ModelConfig tiny_config(int u, int v, int c, int layers, int heads,
                        codec::Mode mode = codec::Mode::whitespace, bool focus = true,
                        bool vgram = false, int n_labels = 3) {
  ModelConfig mc;
  mc.codec.u = u;
  mc.codec.v = v;
  mc.codec.mode = mode;
  mc.codec.prepend_cls = mode == codec::Mode::whitespace;
  mc.c = c;
  mc.focus_enabled = focus;
  mc.vgram_enabled = vgram;
  mc.encoder.layers = layers;
  mc.encoder.hidden = v * c;
  mc.encoder.heads = heads;
  mc.encoder.ffn_dim = 0;
  mc.encoder.dropout_rate = 0.0;
  mc.embed.dropout_rate = 0.0;
  mc.embed.init_std = 0.3;  // keep activations and gradients well out of the noise
  mc.n_labels = n_labels;
  return mc;
}

data::Example grad_example(const ModelConfig& mc, const std::string& text) {
  data::Example ex;
  ex.sample = codec::encode(text, mc.codec);
  ex.targets = {1, 0, 1};
  return ex;
}

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("config validation ties encoder width to v*c") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2);
  CHECK_NOTHROW(mc.validate());
  mc.encoder.hidden = 9;
  CHECK_THROWS_AS(mc.validate(), std::invalid_argument);
  mc = tiny_config(4, 2, 4, 1, 2, codec::Mode::whitespace, true, true);
  CHECK_THROWS_AS(mc.validate(), std::invalid_argument);  // soft pooling needs byte streams
  mc.codec.mode = codec::Mode::byte_stream;
  mc.codec.prepend_cls = false;
  CHECK_NOTHROW(mc.validate());
  CHECK(mc.resolved_window() == 2);
  mc.vgram_window = 3;
  CHECK(mc.resolved_window() == 3);
}

TEST_CASE("construction is seed-deterministic") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2);
  Classifier<float> a(mc, 11), b(mc, 11), other(mc, 12);
  codec::EncodedSample sample = codec::encode("hello there", mc.codec);
  Vec<float> za = a.logits(sample);
  CHECK(za == b.logits(sample));
  CHECK(za != other.logits(sample));
  CHECK(a.param_count() == other.param_count());
}

TEST_CASE("probabilities are sigmoids of logits") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2);
  Classifier<double> model(mc, 3);
  codec::EncodedSample sample = codec::encode("ab cd", mc.codec);
  Vec<double> z = model.logits(sample);
  Vec<double> p = model.predict_probs(sample);
  REQUIRE(z.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(p(i) == doctest::Approx(1.0 / (1.0 + std::exp(-z(i)))).epsilon(1e-12));
    CHECK(p(i) > 0.0);
    CHECK(p(i) < 1.0);
  }
}

TEST_CASE("parameter names are unique and sized consistently") {
  ModelConfig mc = tiny_config(4, 2, 4, 2, 2, codec::Mode::byte_stream, true, true);
  mc.codec.prepend_cls = false;
  Classifier<float> model(mc, 5);
  std::set<std::string> names;
  std::int64_t total = 0;
  model.visit_params([&](const std::string& name, const Mat<float>& m, Mat<float>*, bool) {
    CHECK(names.insert(name).second);
    total += m.size();
  });
  CHECK(total == model.param_count());
  CHECK(names.count("embed.elements") == 1);
  CHECK(names.count("embed.focus_g") == 1);
  CHECK(names.count("embed.scorer") == 1);
  CHECK(names.count("enc.1.w2") == 1);
  CHECK(names.count("head.out_b") == 1);
  // the embedding block alone matches the closed-form count
  std::int64_t embed_total = 0;
  model.visit_params([&](const std::string& name, const Mat<float>& m, Mat<float>*, bool) {
    if (name == "embed.elements" || name == "embed.focus_g" || name == "embed.focus_f")
      embed_total += m.size();
  });
  CHECK(embed_total == embedding_param_count(4, 4, 2, true));
}

TEST_CASE("analytic gradients match central differences in double") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2, codec::Mode::byte_stream, true, true);
  mc.codec.prepend_cls = false;
  Classifier<double> model(mc, 21);
  data::Example ex = grad_example(mc, "abcdef");
  GradCheckReport report = grad_check(model, ex, 1e-5);
  CHECK(report.max_err < 1e-6);
  std::set<std::string> seen;
  for (const auto& entry : report.tensors) seen.insert(entry.name);
  CHECK(seen.count("embed.scorer") == 1);
  CHECK(seen.count("embed.focus_f") == 1);
  CHECK(seen.count("enc.0.wq") == 1);
}

TEST_CASE("analytic gradients match central differences in float") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2, codec::Mode::byte_stream, true, true);
  mc.codec.prepend_cls = false;
  Classifier<float> model(mc, 21);
  data::Example ex = grad_example(mc, "abcdef");
  GradCheckReport report = grad_check(model, ex, 1e-2);
  CHECK(report.max_err < 1e-3);
}

TEST_CASE("material-local pooling grads also check out") {
  ModelConfig mc = tiny_config(3, 2, 3, 1, 2, codec::Mode::byte_stream, false, true);
  mc.codec.prepend_cls = false;
  mc.vgram_scope = VgramScope::material_local;
  Classifier<double> model(mc, 9);
  data::Example ex = grad_example(mc, "hello");
  GradCheckReport report = grad_check(model, ex, 1e-5);
  CHECK(report.max_err < 1e-6);
}

TEST_CASE("only mentioned elements receive gradient") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2, codec::Mode::whitespace, false, false);
  Classifier<double> model(mc, 33);
  data::Example ex = grad_example(mc, "ab");
  // materials: [CLS PAD], [a b], PAD, PAD -> ids 1, 0, 101, 102
  FwdCache<double> cache;
  Vec<double> z = model.forward(ex.sample, false, nullptr, cache);
  Grads<double> grads = model.zero_grads();
  model.backward(bce_backward(z, ex.targets), cache, grads);

  std::set<int> touched = {codec::kPadId, codec::kClsId, 'a' + codec::kByteOffset,
                           'b' + codec::kByteOffset};
  for (int row = 0; row < codec::kIdCount; ++row) {
    double mag = grads.elements.row(row).cwiseAbs().maxCoeff();
    if (touched.count(row))
      CHECK(mag > 0.0);
    else
      CHECK(mag == 0.0);
  }
}

TEST_CASE("an all-padding sample credits only the pad element") {
  ModelConfig mc = tiny_config(2, 2, 4, 1, 2, codec::Mode::byte_stream, false, false);
  mc.codec.prepend_cls = false;
  Classifier<double> model(mc, 17);
  data::Example ex = grad_example(mc, "");
  FwdCache<double> cache;
  Vec<double> z = model.forward(ex.sample, false, nullptr, cache);
  CHECK(z.allFinite());
  Grads<double> grads = model.zero_grads();
  model.backward(bce_backward(z, ex.targets), cache, grads);
  for (int row = 1; row < codec::kIdCount; ++row)
    CHECK(grads.elements.row(row).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.elements.row(codec::kPadId).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoints restore the model bit for bit") {
  ModelConfig mc = tiny_config(4, 2, 4, 2, 2);
  Classifier<float> source(mc, 1);
  codec::EncodedSample sample = codec::encode("round trip", mc.codec);
  Vec<float> want = source.logits(sample);

  std::string path = temp_path("ewe_model_ckpt.bin");
  source.save(path);
  Classifier<float> target(mc, 999);  // different seed, then overwritten by load
  CHECK(target.logits(sample) != want);
  target.load(path);
  CHECK(target.logits(sample) == want);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint shape and inventory mismatches are runtime errors") {
  std::string path = temp_path("ewe_model_ckpt2.bin");

  ModelConfig with_focus = tiny_config(4, 2, 4, 1, 2);
  ModelConfig no_focus = tiny_config(4, 2, 4, 1, 2, codec::Mode::whitespace, false);
  Classifier<float>(no_focus, 1).save(path);
  Classifier<float> wants_focus(with_focus, 2);
  CHECK_THROWS_WITH_AS(wants_focus.load(path), doctest::Contains("missing tensor"),
                       std::runtime_error);

  Classifier<float>(with_focus, 1).save(path);
  Classifier<float> no_focus_model(no_focus, 2);
  CHECK_THROWS_AS(no_focus_model.load(path), std::runtime_error);

  ModelConfig wide = tiny_config(4, 2, 4, 1, 2);
  wide.n_labels = 5;
  Classifier<float> wide_model(wide, 2);
  CHECK_THROWS_WITH_AS(wide_model.load(path), doctest::Contains("shape mismatch"),
                       std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("double models save to float checkpoints losslessly enough") {
  ModelConfig mc = tiny_config(4, 2, 4, 1, 2);
  Classifier<double> source(mc, 4);
  std::string path = temp_path("ewe_model_ckpt3.bin");
  source.save(path);
  Classifier<double> target(mc, 5);
  target.load(path);
  codec::EncodedSample sample = codec::encode("precision", mc.codec);
  Vec<double> a = source.logits(sample);
  Vec<double> b = target.logits(sample);
  for (int i = 0; i < 3; ++i) CHECK(a(i) == doctest::Approx(b(i)).epsilon(1e-4));
  std::filesystem::remove(path);
}
