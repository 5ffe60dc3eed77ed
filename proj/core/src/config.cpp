#include "ewe/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ewe::config {
namespace {

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw std::invalid_argument("config: " + key + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_ll(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long n = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
    fail(key, "expected an integer, got '" + value + "'");
  return n;
}

int parse_int(const std::string& key, const std::string& value) {
  const long long n = parse_ll(key, value);
  if (n < -2147483648LL || n > 2147483647LL) fail(key, "integer out of range: '" + value + "'");
  return static_cast<int>(n);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long n = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || value[0] == '-' || end != value.c_str() + value.size() || errno == ERANGE)
    fail(key, "expected a non-negative integer, got '" + value + "'");
  return n;
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
    fail(key, "expected a number, got '" + value + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(key, "expected true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) fail(key, "expected a comma-separated integer list, got '" + value + "'");
  return out;
}

void set_field(AppConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "u") cfg.u = parse_int(key, value);
  else if (key == "v") cfg.v = parse_int(key, value);
  else if (key == "c") cfg.c = parse_int(key, value);
  else if (key == "w") cfg.w = parse_int(key, value);
  else if (key == "h") cfg.h = parse_int(key, value);
  else if (key == "ffn_dim") cfg.ffn_dim = parse_int(key, value);
  else if (key == "layers") cfg.layers = parse_int(key, value);
  else if (key == "tokenization") {
    if (value == "whitespace") cfg.tokenization = Tokenization::whitespace;
    else if (value == "byte_stream") cfg.tokenization = Tokenization::byte_stream;
    else if (value == "gradient") cfg.tokenization = Tokenization::gradient;
    else fail(key, "expected whitespace|byte_stream|gradient, got '" + value + "'");
  } else if (key == "prepend_cls") cfg.prepend_cls = parse_bool(key, value);
  else if (key == "focus") cfg.focus = parse_bool(key, value);
  else if (key == "vgram_window") cfg.vgram_window = parse_int(key, value);
  else if (key == "vgram_scope") {
    if (value == "sliding") cfg.vgram_scope = VgramScope::sliding;
    else if (value == "material_local") cfg.vgram_scope = VgramScope::material_local;
    else fail(key, "expected sliding|material_local, got '" + value + "'");
  } else if (key == "dropout") cfg.dropout = parse_double(key, value);
  else if (key == "ln_epsilon") cfg.ln_epsilon = parse_double(key, value);
  else if (key == "init_std") cfg.init_std = parse_double(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "lr0") cfg.lr0 = parse_double(key, value);
  else if (key == "beta1") cfg.beta1 = parse_double(key, value);
  else if (key == "beta2") cfg.beta2 = parse_double(key, value);
  else if (key == "adam_eps") cfg.adam_eps = parse_double(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
  else if (key == "threshold") cfg.threshold = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "precision") {
    if (value == "f32") cfg.precision = Precision::f32;
    else if (value == "f64") cfg.precision = Precision::f64;
    else fail(key, "expected f32|f64, got '" + value + "'");
  } else if (key == "bench_reps") cfg.bench_reps = parse_int(key, value);
  else if (key == "bench_warmup") cfg.bench_warmup = parse_int(key, value);
  else if (key == "bench_v") cfg.bench_v = parse_int_list(key, value);
  else if (key == "corpus") cfg.corpus = value;
  else if (key == "val_corpus") cfg.val_corpus = value;
  else if (key == "vocab") cfg.vocab = value;
  else if (key == "checkpoint") cfg.checkpoint = value;
  else if (key == "output") cfg.output = value;
  else if (key == "pred") cfg.pred = value;
  else if (key == "gold") cfg.gold = value;
  else if (key == "text") cfg.text = value;
  else if (key == "strict") cfg.strict = parse_bool(key, value);
  else fail(key, "unknown key");
}

}  // namespace

void AppConfig::validate() const {
  if (u < 1) fail("u", "must be >= 1");
  if (v < 1) fail("v", "must be >= 1");
  if (c < 1) fail("c", "must be >= 1");
  if (w && *w != v * c)
    fail("w", "w=" + std::to_string(*w) + " violates w = v*c = " + std::to_string(v * c));
  if (h) {
    if (*h < 1) fail("h", "must be >= 1");
    if (resolved_w() % *h != 0)
      fail("h", "w=" + std::to_string(resolved_w()) + " is not divisible by h=" + std::to_string(*h));
  } else if (resolved_w() % v != 0) {
    fail("h", "default h=v=" + std::to_string(v) + " does not divide w");
  }
  if (ffn_dim && *ffn_dim < 1) fail("ffn_dim", "must be >= 1");
  if (layers < 0) fail("layers", "must be >= 0");
  if (vgram_window && *vgram_window < 1) fail("vgram_window", "must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout", "must be in [0, 1)");
  if (ln_epsilon <= 0.0) fail("ln_epsilon", "must be > 0");
  if (init_std <= 0.0) fail("init_std", "must be > 0");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (lr0 < 0.0) fail("lr0", "must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0) fail("beta1", "must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) fail("beta2", "must be in [0, 1)");
  if (adam_eps <= 0.0) fail("adam_eps", "must be > 0");
  if (weight_decay < 0.0) fail("weight_decay", "must be >= 0");
  if (threshold <= 0.0 || threshold >= 1.0) fail("threshold", "must be in (0, 1)");
  if (bench_reps < 1) fail("bench_reps", "must be >= 1");
  if (bench_warmup < 0) fail("bench_warmup", "must be >= 0");
  for (const int bv : bench_v)
    if (bv < 1) fail("bench_v", "entries must be >= 1");
}

codec::CodecConfig AppConfig::codec_config() const {
  codec::CodecConfig cc;
  cc.u = u;
  cc.v = v;
  cc.mode = tokenization == Tokenization::whitespace ? codec::Mode::whitespace
                                                     : codec::Mode::byte_stream;
  // byte-stream elements never carry a [CLS] material
  cc.prepend_cls = prepend_cls && tokenization == Tokenization::whitespace;
  return cc;
}

EmbedderConfig AppConfig::embedder_config() const {
  EmbedderConfig ec;
  ec.dropout_rate = dropout;
  ec.ln_epsilon = ln_epsilon;
  ec.init_std = init_std;
  return ec;
}

EncoderConfig AppConfig::encoder_config() const {
  EncoderConfig ec;
  ec.layers = layers;
  ec.hidden = resolved_w();
  ec.heads = resolved_h();
  ec.ffn_dim = resolved_ffn();
  ec.dropout_rate = dropout;
  ec.ln_epsilon = ln_epsilon;
  return ec;
}

ModelConfig AppConfig::model_config(int n_labels) const {
  ModelConfig mc;
  mc.codec = codec_config();
  mc.c = c;
  mc.focus_enabled = focus_enabled();
  mc.vgram_enabled = tokenization == Tokenization::gradient;
  mc.vgram_window = vgram_window.value_or(0);
  mc.vgram_scope = vgram_scope;
  mc.embed = embedder_config();
  mc.encoder = encoder_config();
  mc.n_labels = n_labels;
  return mc;
}

RunConfig AppConfig::run_config() const {
  RunConfig rc;
  rc.epochs = epochs;
  rc.batch_size = batch_size;
  rc.lr0 = lr0;
  rc.beta1 = beta1;
  rc.beta2 = beta2;
  rc.adam_eps = adam_eps;
  rc.weight_decay = weight_decay;
  rc.threshold = threshold;
  rc.seed = seed;
  rc.precision = precision;
  return rc;
}

bool operator==(const AppConfig& a, const AppConfig& b) {
  return a.u == b.u && a.v == b.v && a.c == b.c && a.w == b.w && a.h == b.h &&
         a.ffn_dim == b.ffn_dim && a.layers == b.layers && a.tokenization == b.tokenization &&
         a.prepend_cls == b.prepend_cls && a.focus == b.focus &&
         a.vgram_window == b.vgram_window && a.vgram_scope == b.vgram_scope &&
         a.dropout == b.dropout && a.ln_epsilon == b.ln_epsilon && a.init_std == b.init_std &&
         a.epochs == b.epochs && a.batch_size == b.batch_size && a.lr0 == b.lr0 &&
         a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.adam_eps == b.adam_eps &&
         a.weight_decay == b.weight_decay && a.threshold == b.threshold && a.seed == b.seed &&
         a.precision == b.precision && a.bench_reps == b.bench_reps &&
         a.bench_warmup == b.bench_warmup && a.bench_v == b.bench_v && a.corpus == b.corpus &&
         a.val_corpus == b.val_corpus && a.vocab == b.vocab && a.checkpoint == b.checkpoint &&
         a.output == b.output && a.pred == b.pred && a.gold == b.gold && a.text == b.text &&
         a.strict == b.strict;
}

AppConfig parse_config(const std::string& text,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  AppConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    set_field(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [key, value] : overrides) set_field(cfg, key, value);
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();

  std::vector<std::pair<std::string, std::string>> effective;
  if (const char* env_seed = std::getenv("EWE_SEED")) effective.emplace_back("seed", env_seed);
  effective.insert(effective.end(), overrides.begin(), overrides.end());
  return parse_config(ss.str(), effective);
}

std::string serialize_config(const AppConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  out << "u = " << cfg.u << "\n";
  out << "v = " << cfg.v << "\n";
  out << "c = " << cfg.c << "\n";
  if (cfg.w) out << "w = " << *cfg.w << "\n";
  if (cfg.h) out << "h = " << *cfg.h << "\n";
  if (cfg.ffn_dim) out << "ffn_dim = " << *cfg.ffn_dim << "\n";
  out << "layers = " << cfg.layers << "\n";
  out << "tokenization = "
      << (cfg.tokenization == Tokenization::whitespace
              ? "whitespace"
              : cfg.tokenization == Tokenization::byte_stream ? "byte_stream" : "gradient")
      << "\n";
  out << "prepend_cls = " << (cfg.prepend_cls ? "true" : "false") << "\n";
  if (cfg.focus) out << "focus = " << (*cfg.focus ? "true" : "false") << "\n";
  if (cfg.vgram_window) out << "vgram_window = " << *cfg.vgram_window << "\n";
  out << "vgram_scope = "
      << (cfg.vgram_scope == VgramScope::sliding ? "sliding" : "material_local") << "\n";
  out << "dropout = " << num(cfg.dropout) << "\n";
  out << "ln_epsilon = " << num(cfg.ln_epsilon) << "\n";
  out << "init_std = " << num(cfg.init_std) << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lr0 = " << num(cfg.lr0) << "\n";
  out << "beta1 = " << num(cfg.beta1) << "\n";
  out << "beta2 = " << num(cfg.beta2) << "\n";
  out << "adam_eps = " << num(cfg.adam_eps) << "\n";
  out << "weight_decay = " << num(cfg.weight_decay) << "\n";
  out << "threshold = " << num(cfg.threshold) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "precision = " << (cfg.precision == Precision::f32 ? "f32" : "f64") << "\n";
  out << "bench_reps = " << cfg.bench_reps << "\n";
  out << "bench_warmup = " << cfg.bench_warmup << "\n";
  out << "bench_v = ";
  for (std::size_t i = 0; i < cfg.bench_v.size(); ++i)
    out << (i ? "," : "") << cfg.bench_v[i];
  out << "\n";
  const auto str = [&](const char* key, const std::string& value) {
    if (!value.empty()) out << key << " = " << value << "\n";
  };
  str("corpus", cfg.corpus);
  str("val_corpus", cfg.val_corpus);
  str("vocab", cfg.vocab);
  str("checkpoint", cfg.checkpoint);
  str("output", cfg.output);
  str("pred", cfg.pred);
  str("gold", cfg.gold);
  str("text", cfg.text);
  out << "strict = " << (cfg.strict ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace ewe::config
