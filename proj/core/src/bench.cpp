#include "ewe/bench.hpp"

#include "ewe/model.hpp"
#include "ewe/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ewe::bench {

BenchResult time_forward(const EncoderConfig& enc, const codec::CodecConfig& codec_cfg, int reps,
                         int warmup, std::uint64_t seed) {
  if (reps < 5) throw std::invalid_argument("bench: reps must be >= 5");
  if (warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  if (enc.hidden % codec_cfg.v != 0)
    throw std::invalid_argument("bench: hidden width not divisible by v");

  ModelConfig mc;
  mc.codec = codec_cfg;
  mc.c = enc.hidden / codec_cfg.v;
  mc.focus_enabled = true;
  mc.embed.dropout_rate = 0.0;
  mc.encoder = enc;
  mc.n_labels = 2;
  const Classifier<float> model(mc, seed);

  Rng rng(derive_seed(seed, kStreamBench));
  codec::EncodedSample sample;
  sample.ids.resize(codec_cfg.u, codec_cfg.v);
  for (Eigen::Index i = 0; i < sample.ids.rows(); ++i)
    for (Eigen::Index j = 0; j < sample.ids.cols(); ++j)
      sample.ids(i, j) = codec::kByteOffset + static_cast<std::int32_t>(rng.below(256));
  sample.mask.assign(static_cast<std::size_t>(codec_cfg.u), 1);

  FwdCache<float> cache;
  double sink = 0.0;
  for (int r = 0; r < warmup; ++r) sink += model.encode(sample, false, nullptr, cache)(0, 0);

  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    sink += model.encode(sample, false, nullptr, cache)(0, 0);
    const auto stop = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(stop - start).count());
  }
  static volatile double observable;  // keep the forward passes live
  observable = sink;

  double mean = 0.0;
  for (const double t : times) mean += t;
  mean /= static_cast<double>(reps);
  double var = 0.0;
  for (const double t : times) var += (t - mean) * (t - mean);
  var /= static_cast<double>(reps);

  BenchResult result;
  result.u = codec_cfg.u;
  result.v = codec_cfg.v;
  result.w = enc.hidden;
  result.layers = enc.layers;
  result.mean_s = mean;
  result.std_s = std::sqrt(var);
  result.chars = static_cast<std::int64_t>(codec_cfg.u) * codec_cfg.v;
  result.flops = attention_flops(codec_cfg.u, enc.hidden, enc.layers);
  return result;
}

std::vector<BenchResult> sweep(
    const std::vector<std::pair<EncoderConfig, codec::CodecConfig>>& grid, int reps, int warmup,
    std::uint64_t seed) {
  std::vector<BenchResult> results;
  results.reserve(grid.size());
  for (const auto& [enc, codec_cfg] : grid) {
    try {
      results.push_back(time_forward(enc, codec_cfg, reps, warmup, seed));
    } catch (const std::exception& e) {
      BenchResult bad;
      bad.u = codec_cfg.u;
      bad.v = codec_cfg.v;
      bad.w = enc.hidden;
      bad.layers = enc.layers;
      bad.ok = false;
      bad.error = e.what();
      results.push_back(std::move(bad));
    }
  }
  return results;
}

std::string to_json(const BenchResult& result) {
  char buf[320];
  if (result.ok) {
    std::snprintf(buf, sizeof(buf),
                  "{\"u\": %d, \"v\": %d, \"w\": %d, \"L\": %d, \"mean_s\": %.9f, "
                  "\"std_s\": %.9f, \"chars\": %lld, \"flops\": %lld}",
                  result.u, result.v, result.w, result.layers, result.mean_s, result.std_s,
                  static_cast<long long>(result.chars), static_cast<long long>(result.flops));
    return buf;
  }
  std::string msg = result.error;
  for (char& ch : msg)
    if (ch == '"' || ch == '\\' || ch == '\n') ch = ' ';
  std::snprintf(buf, sizeof(buf), "{\"u\": %d, \"v\": %d, \"w\": %d, \"L\": %d, \"error\": \"%s\"}",
                result.u, result.v, result.w, result.layers, msg.c_str());
  return buf;
}

}  // namespace ewe::bench
