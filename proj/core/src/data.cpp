#include "ewe/data.hpp"

#include "ewe/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ewe::data {
namespace {

using json = nlohmann::json;

std::vector<std::string> string_array(const json& j, const char* key, bool required) {
  if (!j.contains(key)) {
    if (required) throw std::runtime_error(std::string("missing field '") + key + "'");
    return {};
  }
  const json& arr = j.at(key);
  if (!arr.is_array()) throw std::runtime_error(std::string("field '") + key + "' is not an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const json& item : arr) {
    if (!item.is_string())
      throw std::runtime_error(std::string("field '") + key + "' holds a non-string entry");
    out.push_back(item.get<std::string>());
  }
  return out;
}

Document parse_document(const json& j) {
  if (!j.is_object()) throw std::runtime_error("document is not a JSON object");
  if (!j.contains("id") || !j.at("id").is_string())
    throw std::runtime_error("missing or non-string field 'id'");
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.claims = string_array(j, "claims", true);
  if (doc.claims.empty()) throw std::runtime_error("field 'claims' is empty");
  doc.codes = string_array(j, "codes", false);
  return doc;
}

}  // namespace

std::vector<Document> load_corpus(const std::string& path, bool strict, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("corpus: cannot open '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(parse_document(json::parse(line)));
    } catch (const std::exception& e) {
      const std::string msg =
          "corpus '" + path + "' line " + std::to_string(line_no) + ": " + e.what();
      if (strict) throw std::runtime_error(msg);
      if (report) {
        report->warnings.push_back(msg);
        ++report->skipped;
      }
    }
  }
  return docs;
}

void save_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("corpus: cannot open '" + path + "' for writing");
  for (const Document& doc : docs) {
    json j;
    j["id"] = doc.id;
    j["claims"] = doc.claims;
    j["codes"] = doc.codes;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("corpus: write failed for '" + path + "'");
}

std::string document_text(const Document& doc, int max_claims) {
  const std::size_t n = std::min(doc.claims.size(), static_cast<std::size_t>(max_claims));
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += doc.claims[i];
  }
  return text;
}

labels::LabelVocab build_vocab(const std::vector<Document>& docs) {
  std::vector<std::string> all;
  for (const Document& doc : docs) {
    if (doc.codes.empty()) continue;
    for (std::string& lab : labels::relabel(doc.codes)) all.push_back(std::move(lab));
  }
  return labels::LabelVocab::from_labels(std::move(all));
}

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw std::invalid_argument("synthetic: n_classes must be >= 2");
  if (n_docs < 1) throw std::invalid_argument("synthetic: n_docs must be >= 1");
  if (vocab_size < 1) throw std::invalid_argument("synthetic: vocab_size must be >= 1");
  if (tokens_per_doc < 1) throw std::invalid_argument("synthetic: tokens_per_doc must be >= 1");
  if (max_labels < 1 || max_labels > n_classes)
    throw std::invalid_argument("synthetic: max_labels must be in [1, n_classes]");
  if (keyword_repeats < 1) throw std::invalid_argument("synthetic: keyword_repeats must be >= 1");
  if (zipf_exponent < 0.0) throw std::invalid_argument("synthetic: zipf_exponent must be >= 0");
  if (keyword_strength < 0.0 || keyword_strength > 1.0)
    throw std::invalid_argument("synthetic: keyword_strength must be in [0, 1]");
}

std::string class_code(int k) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%c%02d%c", 'A' + k % 26, k % 100, 'A' + (k / 26) % 26);
  return buf;
}

std::string class_keyword(int k, bool first) {
  std::string code = class_code(k);
  for (char& ch : code) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return (first ? "kf" : "kl") + code;
}

std::vector<Document> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, kStreamSynth));

  std::vector<double> cum(static_cast<std::size_t>(spec.n_classes));
  double total = 0.0;
  for (int k = 0; k < spec.n_classes; ++k) {
    total += std::pow(static_cast<double>(k + 1), -spec.zipf_exponent);
    cum[static_cast<std::size_t>(k)] = total;
  }
  const auto draw_class = [&]() {
    const double r = rng.uniform() * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), r);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), spec.n_classes - 1));
  };

  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(spec.n_docs));
  char buf[16];
  for (int d = 0; d < spec.n_docs; ++d) {
    const int n_codes = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_labels)));
    std::vector<int> classes;
    while (static_cast<int>(classes.size()) < n_codes) {
      const int k = draw_class();
      if (std::find(classes.begin(), classes.end(), k) == classes.end()) classes.push_back(k);
    }

    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(spec.tokens_per_doc) +
                   static_cast<std::size_t>(n_codes) * spec.keyword_repeats);
    for (int t = 0; t < spec.tokens_per_doc; ++t) {
      std::snprintf(buf, sizeof(buf), "w%03d",
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.vocab_size))));
      tokens.emplace_back(buf);
    }
    for (std::size_t q = 0; q < classes.size(); ++q) {
      for (int rep = 0; rep < spec.keyword_repeats; ++rep) {
        if (rng.uniform() < spec.keyword_strength) {
          const std::size_t pos = static_cast<std::size_t>(rng.below(tokens.size() + 1));
          tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                        class_keyword(classes[q], q == 0));
        }
      }
    }

    Document doc;
    std::snprintf(buf, sizeof(buf), "syn%05d", d);
    doc.id = buf;
    const auto join = [&](std::size_t lo, std::size_t hi) {
      std::string text;
      for (std::size_t i = lo; i < hi; ++i) {
        if (i > lo) text += ' ';
        text += tokens[i];
      }
      return text;
    };
    if (tokens.size() >= 2) {
      const std::size_t half = tokens.size() / 2;
      doc.claims.push_back(join(0, half));
      doc.claims.push_back(join(half, tokens.size()));
    } else {
      doc.claims.push_back(join(0, tokens.size()));
    }
    for (const int k : classes) doc.codes.push_back(class_code(k));
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Example> make_examples(const std::vector<Document>& docs,
                                   const labels::LabelVocab& vocab,
                                   const codec::CodecConfig& codec_cfg, DatasetReport* report) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const Document& doc : docs) {
    if (doc.codes.empty())
      throw std::invalid_argument("document '" + doc.id + "' has no codes");
    Example ex;
    ex.sample = codec::encode(document_text(doc), codec_cfg);
    ex.targets.assign(static_cast<std::size_t>(vocab.size()), 0);
    for (const std::string& lab : labels::relabel(doc.codes)) {
      if (const auto idx = vocab.try_index(lab))
        ex.targets[static_cast<std::size_t>(*idx)] = 1;
      else if (report)
        ++report->dropped_labels;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace ewe::data
