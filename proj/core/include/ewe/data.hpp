#pragma once

#include "ewe/codec.hpp"
#include "ewe/labels.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ewe::data {

struct Document {
  std::string id;
  std::vector<std::string> claims;
  std::vector<std::string> codes;  // order matters: codes[0] is the first-listed code
};

struct LoadReport {
  std::vector<std::string> warnings;
  int skipped = 0;
};

// JSONL, one document per line: {"id": ..., "claims": [...], "codes": [...]}.
// strict: any malformed line throws (message carries the line number).
// lenient: malformed lines are skipped and recorded in the report.
std::vector<Document> load_corpus(const std::string& path, bool strict = true,
                                  LoadReport* report = nullptr);
void save_corpus(const std::string& path, const std::vector<Document>& docs);

// The text a classifier sees: the first max_claims claims joined by a space.
std::string document_text(const Document& doc, int max_claims = 20);

// First/Later vocabulary over every code mentioned in the corpus.
labels::LabelVocab build_vocab(const std::vector<Document>& docs);

struct SyntheticSpec {
  int n_classes = 8;
  int n_docs = 1000;
  int vocab_size = 50;      // filler token pool
  int tokens_per_doc = 20;  // filler tokens before keyword insertion
  int max_labels = 3;       // classes per document, uniform in [1, max_labels]
  int keyword_repeats = 2;  // independent insertion attempts per (doc, class)
  double zipf_exponent = 1.0;
  double keyword_strength = 0.9;  // per-attempt insertion probability
  std::uint64_t seed = 1;

  void validate() const;
};

// Class popularity follows a Zipf law. Each document draws 1..max_labels
// distinct classes; the first draw becomes the first-listed code. Every
// (doc, class) pair tries keyword_repeats independent insertions of that
// class's position-specific keyword, each succeeding with probability
// keyword_strength, at a uniform position in the token list.
std::vector<Document> gen_synthetic(const SyntheticSpec& spec);

std::string class_code(int k);                  // "C00A", "C01B", ...
std::string class_keyword(int k, bool first);   // "kf"/"kl" + class code, lowercased

struct Example {
  codec::EncodedSample sample;
  std::vector<std::uint8_t> targets;
};

struct DatasetReport {
  std::int64_t dropped_labels = 0;  // relabeled codes missing from the vocabulary
};

// Encode documents and one-hot their relabeled codes. Documents must carry at
// least one code; labels outside the vocabulary are dropped and counted.
std::vector<Example> make_examples(const std::vector<Document>& docs,
                                   const labels::LabelVocab& vocab,
                                   const codec::CodecConfig& codec_cfg,
                                   DatasetReport* report = nullptr);

}  // namespace ewe::data
