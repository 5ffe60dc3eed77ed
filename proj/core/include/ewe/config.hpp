#pragma once

#include "ewe/model.hpp"
#include "ewe/train.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ewe::config {

enum class Tokenization { whitespace, byte_stream, gradient };

// Flat key=value configuration. Derived quantities (w from v*c, h from v,
// ffn_dim from 4w, focus default per tokenization) stay unset unless the
// file or a flag pins them.
struct AppConfig {
  int u = 128;
  int v = 16;
  int c = 48;
  std::optional<int> w;        // must equal v*c when given
  std::optional<int> h;        // defaults to v
  std::optional<int> ffn_dim;  // defaults to 4*v*c
  int layers = 12;
  Tokenization tokenization = Tokenization::whitespace;
  bool prepend_cls = true;
  std::optional<bool> focus;   // defaults to on, except in gradient mode
  std::optional<int> vgram_window;  // defaults to v
  VgramScope vgram_scope = VgramScope::sliding;
  double dropout = 0.1;
  double ln_epsilon = 1e-5;
  double init_std = 0.02;

  int epochs = 10;
  int batch_size = 32;
  double lr0 = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double threshold = 0.3;
  std::uint64_t seed = 42;
  Precision precision = Precision::f32;

  int bench_reps = 10;
  int bench_warmup = 3;
  std::vector<int> bench_v = {16, 1};

  std::string corpus, val_corpus, vocab, checkpoint, output, pred, gold, text;
  bool strict = true;

  bool focus_enabled() const { return focus.value_or(tokenization != Tokenization::gradient); }
  int resolved_w() const { return v * c; }
  int resolved_h() const { return h.value_or(v); }
  int resolved_ffn() const { return ffn_dim.value_or(4 * v * c); }

  void validate() const;  // throws std::invalid_argument naming the field

  codec::CodecConfig codec_config() const;
  EmbedderConfig embedder_config() const;
  EncoderConfig encoder_config() const;
  ModelConfig model_config(int n_labels) const;
  RunConfig run_config() const;
};

bool operator==(const AppConfig& a, const AppConfig& b);
inline bool operator!=(const AppConfig& a, const AppConfig& b) { return !(a == b); }

// '#' starts a comment; blank lines are skipped; later assignments win.
// Overrides are applied after the text, in order.
AppConfig parse_config(const std::string& text,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

// File, then EWE_SEED from the environment, then flag overrides.
AppConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

// parse_config(serialize_config(cfg)) == cfg; derived fields stay implicit.
std::string serialize_config(const AppConfig& cfg);

}  // namespace ewe::config
