#include "ewe/model.hpp"

#include <benchmark/benchmark.h>

#include <cstdint>

namespace {

ewe::codec::EncodedSample random_sample(int u, int v, std::uint64_t seed) {
  ewe::Rng rng(seed);
  ewe::codec::EncodedSample sample;
  sample.ids = ewe::IdGrid(u, v);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < v; ++j)
      sample.ids(i, j) = static_cast<std::int32_t>(rng.below(ewe::codec::kIdCount));
  sample.mask.assign(static_cast<std::size_t>(u), 1);
  return sample;
}

ewe::ModelConfig sweep_config(int v, int hidden, int layers) {
  ewe::ModelConfig mc;
  mc.codec.u = 64;
  mc.codec.v = v;
  mc.codec.mode = ewe::codec::Mode::byte_stream;
  mc.codec.prepend_cls = false;
  mc.c = hidden / v;
  mc.encoder.hidden = hidden;
  mc.encoder.layers = layers;
  mc.encoder.heads = v;
  mc.encoder.dropout_rate = 0.0;
  mc.embed.dropout_rate = 0.0;
  mc.n_labels = 2;
  return mc;
}

// Embedding + encoder forward at fixed width: v only changes how many
// characters fit, not the attention cost.
void encode_forward(benchmark::State& state) {
  const int v = static_cast<int>(state.range(0));
  const ewe::ModelConfig mc = sweep_config(v, 256, 2);
  const ewe::Classifier<float> model(mc, 42);
  const ewe::codec::EncodedSample sample = random_sample(mc.codec.u, v, 7);
  ewe::FwdCache<float> cache;
  for (auto _ : state) {
    ewe::Mat<float> out = model.encode(sample, false, nullptr, cache);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * mc.codec.u * v);
}
BENCHMARK(encode_forward)->Arg(1)->Arg(4)->Arg(16);

void embed_only(benchmark::State& state) {
  const int v = static_cast<int>(state.range(0));
  const int c = 256 / v, u = 64;
  ewe::Rng rng(11);
  const auto table = ewe::ElementTable<float>::random(c, 0.02, rng);
  const auto focus = ewe::FocusTables<float>::random(u, v, c, 0.02, rng);
  ewe::EmbedderConfig cfg;
  cfg.dropout_rate = 0.0;
  const ewe::codec::EncodedSample sample = random_sample(u, v, 7);
  const ewe::GradScorer<float>* no_scorer = nullptr;
  ewe::EmbedCache<float> cache;
  for (auto _ : state) {
    ewe::Mat<float> x = ewe::embed(sample, table, focus, no_scorer, cfg, false, nullptr, cache);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * u * v);
}
BENCHMARK(embed_only)->Arg(1)->Arg(4)->Arg(16);

void soft_vgram_sliding(benchmark::State& state) {
  const int window = static_cast<int>(state.range(0));
  const int c = 16, rows = 512;
  ewe::Rng rng(13);
  ewe::Mat<float> e(rows, c);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < c; ++j) e(i, j) = static_cast<float>(rng.normal());
  const auto scorer =
      ewe::GradScorer<float>::random(c, window, ewe::VgramScope::sliding, 0.02, rng);
  ewe::VgramCache<float> cache;
  for (auto _ : state) {
    ewe::Mat<float> out = ewe::soft_vgram(e, scorer, 8, &cache);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(soft_vgram_sliding)->Arg(2)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
