#pragma once

#include "ewe/codec.hpp"
#include "ewe/encoder.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ewe::bench {

struct BenchResult {
  int u = 0, v = 0, w = 0, layers = 0;
  double mean_s = 0.0;
  double std_s = 0.0;
  std::int64_t chars = 0;  // u*v
  std::int64_t flops = 0;  // attention_flops(u, w, layers)
  bool ok = true;
  std::string error;
};

// Embedding + encoder forward in eval mode on one random sample, reused
// across reps; warmup runs are excluded from the statistics. Timing is
// strictly single-threaded. reps must be >= 5.
BenchResult time_forward(const EncoderConfig& enc, const codec::CodecConfig& codec_cfg, int reps,
                         int warmup, std::uint64_t seed);

// Deterministic order; a failing config becomes an error row, the sweep keeps
// going.
std::vector<BenchResult> sweep(
    const std::vector<std::pair<EncoderConfig, codec::CodecConfig>>& grid, int reps, int warmup,
    std::uint64_t seed);

// One line per result: u, v, w, L, mean_s, std_s, chars, flops (+ error).
std::string to_json(const BenchResult& result);

}  // namespace ewe::bench
