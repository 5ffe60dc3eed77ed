// ewe: elementwise language representation toolkit.
//
//   ewe <encode|train|eval|bench|stats|relabel> --config <path> [--key value]...
//
// Flag overrides beat the config file; EWE_SEED in the environment beats the
// file's seed but not an explicit --seed flag. Logs go to stderr, artifacts to
// the files named in the config (stdout when output is unset). Failures print
// a single-line {"error": ...} record to stderr and exit nonzero.

#include "ewe/bench.hpp"
#include "ewe/config.hpp"
#include "ewe/data.hpp"
#include "ewe/labels.hpp"
#include "ewe/model.hpp"
#include "ewe/train.hpp"

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace {

using json = nlohmann::json;
using ewe::config::AppConfig;

std::vector<std::pair<std::string, std::string>> pair_extras(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0)
      throw std::invalid_argument("expected --key, got '" + token + "'");
    if (i + 1 == extras.size())
      throw std::invalid_argument("missing value for " + token);
    out.emplace_back(token.substr(2), extras[++i]);
  }
  return out;
}

// Artifact destination: the config's output path, or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

json sample_record(const std::string& id, const ewe::codec::EncodedSample& sample) {
  json rec;
  rec["id"] = id;
  rec["u"] = sample.u();
  rec["v"] = sample.v();
  json rows = json::array();
  for (int i = 0; i < sample.u(); ++i) {
    json row = json::array();
    for (int j = 0; j < sample.v(); ++j) row.push_back(sample.ids(i, j));
    rows.push_back(std::move(row));
  }
  rec["ids"] = std::move(rows);
  rec["mask"] = sample.mask;
  return rec;
}

int cmd_encode(const AppConfig& cfg) {
  const ewe::codec::CodecConfig cc = cfg.codec_config();
  Sink sink(cfg.output);
  if (!cfg.text.empty()) {
    sink.stream() << sample_record("text", ewe::codec::encode(cfg.text, cc)).dump() << '\n';
    return 0;
  }
  require(!cfg.corpus.empty(), "encode: config needs text=... or corpus=<path>");
  ewe::data::LoadReport report;
  const auto docs = ewe::data::load_corpus(cfg.corpus, cfg.strict, &report);
  for (const std::string& w : report.warnings) std::cerr << w << '\n';
  for (const auto& doc : docs)
    sink.stream() << sample_record(doc.id, ewe::codec::encode(ewe::data::document_text(doc), cc))
                         .dump()
                  << '\n';
  std::cerr << "encoded " << docs.size() << " documents\n";
  return 0;
}

template <class S>
int cmd_train(const AppConfig& cfg) {
  require(!cfg.corpus.empty(), "train: config needs corpus=<path>");
  require(!cfg.checkpoint.empty(), "train: config needs checkpoint=<path>");

  ewe::data::LoadReport report;
  const auto docs = ewe::data::load_corpus(cfg.corpus, cfg.strict, &report);
  for (const std::string& w : report.warnings) std::cerr << w << '\n';
  require(!docs.empty(), "train: corpus is empty");
  const ewe::labels::LabelVocab vocab = ewe::data::build_vocab(docs);
  require(vocab.size() > 0, "train: corpus has no codes");

  ewe::data::DatasetReport ds;
  const auto train_set = ewe::data::make_examples(docs, vocab, cfg.codec_config(), &ds);
  std::optional<std::vector<ewe::data::Example>> val_set;
  if (!cfg.val_corpus.empty()) {
    const auto val_docs = ewe::data::load_corpus(cfg.val_corpus, cfg.strict, &report);
    val_set = ewe::data::make_examples(val_docs, vocab, cfg.codec_config(), &ds);
  }
  if (ds.dropped_labels > 0)
    std::cerr << "dropped " << ds.dropped_labels << " labels missing from the vocabulary\n";

  ewe::Classifier<S> model(cfg.model_config(vocab.size()), cfg.seed);
  std::cerr << "training on " << train_set.size() << " documents, " << vocab.size() << " labels, "
            << model.param_count() << " parameters\n";
  const ewe::TrainLog log =
      ewe::train_classifier(model, train_set, val_set ? &*val_set : nullptr, cfg.run_config(),
                            &std::cerr);

  model.save(cfg.checkpoint);
  vocab.save(cfg.vocab.empty() ? cfg.checkpoint + ".vocab" : cfg.vocab);
  std::ofstream snap(cfg.checkpoint + ".config", std::ios::trunc);
  snap << ewe::config::serialize_config(cfg);
  if (!snap) throw std::runtime_error("cannot write '" + cfg.checkpoint + ".config'");

  json rec;
  rec["checkpoint"] = cfg.checkpoint;
  rec["epochs"] = static_cast<int>(log.epochs.size());
  rec["final_loss"] = log.epochs.back().train_loss;
  if (log.epochs.back().has_val) {
    rec["val_precision"] = log.epochs.back().val.precision;
    rec["val_recall"] = log.epochs.back().val.recall;
    rec["val_f1"] = log.epochs.back().val.f1;
  }
  Sink sink(cfg.output);
  sink.stream() << rec.dump() << '\n';
  return 0;
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> read_bits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("bits") ||
        !rec.at("bits").is_array())
      throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) +
                               ": expected {\"id\": ..., \"bits\": [...]}");
    std::vector<std::uint8_t> bits;
    for (const json& b : rec.at("bits")) {
      const int x = b.get<int>();
      if (x != 0 && x != 1)
        throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) +
                                 ": bits must be 0/1");
      bits.push_back(static_cast<std::uint8_t>(x));
    }
    out.emplace_back(rec.at("id").get<std::string>(), std::move(bits));
  }
  return out;
}

json scores_record(const ewe::labels::MetricCounts& counts) {
  const ewe::labels::Scores s = ewe::labels::micro_scores(counts);
  json rec;
  rec["precision"] = s.precision;
  rec["recall"] = s.recall;
  rec["f1"] = s.f1;
  rec["tp"] = counts.total_tp();
  rec["fp"] = counts.total_fp();
  rec["fn"] = counts.total_fn();
  return rec;
}

int eval_streams(const AppConfig& cfg) {
  const auto pred = read_bits(cfg.pred);
  const auto gold = read_bits(cfg.gold);
  require(pred.size() == gold.size(), "eval: pred and gold document counts differ");
  require(!pred.empty(), "eval: empty prediction stream");
  ewe::labels::MetricCounts counts(static_cast<int>(pred.front().second.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].first != gold[i].first)
      throw std::runtime_error("eval: document order mismatch at row " + std::to_string(i + 1) +
                               " ('" + pred[i].first + "' vs '" + gold[i].first + "')");
    counts.add(pred[i].second, gold[i].second);
  }
  json rec = scores_record(counts);
  rec["docs"] = pred.size();
  Sink sink(cfg.output);
  sink.stream() << rec.dump() << '\n';
  return 0;
}

template <class S>
int eval_checkpoint(const AppConfig& cfg) {
  require(!cfg.corpus.empty(), "eval: config needs corpus=<path>");
  const AppConfig snap = ewe::config::parse_config(read_file(cfg.checkpoint + ".config"));
  const ewe::labels::LabelVocab vocab = ewe::labels::LabelVocab::load(
      cfg.vocab.empty() ? cfg.checkpoint + ".vocab" : cfg.vocab);

  ewe::Classifier<S> model(snap.model_config(vocab.size()), snap.seed);
  model.load(cfg.checkpoint);

  ewe::data::LoadReport report;
  const auto docs = ewe::data::load_corpus(cfg.corpus, cfg.strict, &report);
  for (const std::string& w : report.warnings) std::cerr << w << '\n';
  ewe::data::DatasetReport ds;
  const auto examples = ewe::data::make_examples(docs, vocab, snap.codec_config(), &ds);
  require(!examples.empty(), "eval: corpus is empty");

  ewe::labels::MetricCounts counts(vocab.size());
  ewe::evaluate(model, examples, cfg.threshold, &counts);
  json rec = scores_record(counts);
  rec["docs"] = examples.size();
  rec["threshold"] = cfg.threshold;
  Sink sink(cfg.output);
  sink.stream() << rec.dump() << '\n';
  return 0;
}

int cmd_bench(const AppConfig& cfg) {
  std::vector<std::pair<ewe::EncoderConfig, ewe::codec::CodecConfig>> grid;
  for (const int v : cfg.bench_v) {
    ewe::EncoderConfig enc = cfg.encoder_config();
    enc.heads = cfg.h ? *cfg.h : v;
    ewe::codec::CodecConfig cc = cfg.codec_config();
    cc.v = v;
    grid.emplace_back(enc, cc);
  }
  const auto results = ewe::bench::sweep(grid, cfg.bench_reps, cfg.bench_warmup, cfg.seed);
  Sink sink(cfg.output);
  for (const auto& r : results) sink.stream() << ewe::bench::to_json(r) << '\n';
  return 0;
}

int cmd_stats(const AppConfig& cfg) {
  require(!cfg.corpus.empty(), "stats: config needs corpus=<path>");
  ewe::data::LoadReport report;
  const auto docs = ewe::data::load_corpus(cfg.corpus, cfg.strict, &report);
  for (const std::string& w : report.warnings) std::cerr << w << '\n';

  const auto emit = [&](const char* scope, const std::map<std::string, std::int64_t>& counts,
                        std::ostream& out) {
    std::vector<std::string> names;
    std::vector<std::int64_t> values;
    for (const auto& [name, count] : counts) {
      names.push_back(name);
      values.push_back(count);
    }
    const ewe::labels::LabelStats stats = ewe::labels::label_stats(values);
    json rec;
    rec["scope"] = scope;
    rec["docs"] = docs.size();
    rec["n_labels"] = names.size();
    std::int64_t total = 0;
    for (const std::int64_t v : values) total += v;
    rec["total_mentions"] = total;
    rec["std"] = stats.std_total;
    rec["std_majors"] = stats.std_majors;
    json majors = json::array();
    for (const int idx : stats.majors) {
      json m;
      m["label"] = names[static_cast<std::size_t>(idx)];
      m["count"] = values[static_cast<std::size_t>(idx)];
      majors.push_back(std::move(m));
    }
    rec["majors"] = std::move(majors);
    out << rec.dump() << '\n';
  };

  std::map<std::string, std::int64_t> raw, prefixed;
  for (const auto& doc : docs) {
    for (const std::string& code : doc.codes) ++raw[code];
    if (!doc.codes.empty())
      for (const std::string& lab : ewe::labels::relabel(doc.codes)) ++prefixed[lab];
  }
  Sink sink(cfg.output);
  emit("codes", raw, sink.stream());
  emit("relabeled", prefixed, sink.stream());
  return 0;
}

int cmd_relabel(const AppConfig& cfg) {
  require(!cfg.corpus.empty(), "relabel: config needs corpus=<path>");
  ewe::data::LoadReport report;
  auto docs = ewe::data::load_corpus(cfg.corpus, cfg.strict, &report);
  for (const std::string& w : report.warnings) std::cerr << w << '\n';
  Sink sink(cfg.output);
  for (auto& doc : docs) {
    if (!doc.codes.empty()) doc.codes = ewe::labels::relabel(doc.codes);
    json rec;
    rec["id"] = doc.id;
    rec["claims"] = doc.claims;
    rec["codes"] = doc.codes;
    sink.stream() << rec.dump() << '\n';
  }
  return 0;
}

int dispatch(const std::string& name, const AppConfig& cfg) {
  const bool f64 = cfg.precision == ewe::Precision::f64;
  if (name == "encode") return cmd_encode(cfg);
  if (name == "train") return f64 ? cmd_train<double>(cfg) : cmd_train<float>(cfg);
  if (name == "eval") {
    if (!cfg.pred.empty() || !cfg.gold.empty()) {
      require(!cfg.pred.empty() && !cfg.gold.empty(),
              "eval: pred and gold must be set together");
      return eval_streams(cfg);
    }
    require(!cfg.checkpoint.empty(), "eval: config needs checkpoint=<path> or pred=/gold=");
    return f64 ? eval_checkpoint<double>(cfg) : eval_checkpoint<float>(cfg);
  }
  if (name == "bench") return cmd_bench(cfg);
  if (name == "stats") return cmd_stats(cfg);
  if (name == "relabel") return cmd_relabel(cfg);
  throw std::invalid_argument("unknown subcommand '" + name + "'");
}

void print_error(const std::string& msg) {
  json rec;
  rec["error"] = msg;
  std::cerr << rec.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elementwise language representation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  for (const char* name : {"encode", "train", "eval", "bench", "stats", "relabel"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key=value configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(std::string("usage: ") + e.what());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const AppConfig cfg = ewe::config::load_config(config_path, pair_extras(sub->remaining()));
    return dispatch(sub->get_name(), cfg);
  } catch (const std::exception& e) {
    print_error(e.what());
    return 1;
  }
}
