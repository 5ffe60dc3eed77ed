#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ewe::labels {

inline constexpr const char* kFirstPrefix = "First-";
inline constexpr const char* kLaterPrefix = "Later-";

// Ordered label space of prefixed codes ("First-XXXX" / "Later-XXXX"),
// sorted lexicographically.
class LabelVocab {
 public:
  LabelVocab() = default;

  // Sorts and deduplicates.
  static LabelVocab from_labels(std::vector<std::string> prefixed);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& at(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& all() const { return labels_; }

  // Throws std::out_of_range for unknown labels.
  int index_of(const std::string& label) const;
  std::optional<int> try_index(const std::string& label) const;

  void save(const std::string& path) const;
  static LabelVocab load(const std::string& path);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

// First-listed code gets "First-", the rest "Later-"; duplicates after
// prefixing collapse, first-occurrence order preserved. Throws
// std::invalid_argument on an empty list.
std::vector<std::string> relabel(const std::vector<std::string>& codes);

// Bit vector over the vocab; throws std::out_of_range on unknown codes.
std::vector<std::uint8_t> one_hot(const std::vector<std::string>& prefixed, const LabelVocab& vocab);

// Per-label confusion counts for micro-averaged scores.
struct MetricCounts {
  std::vector<std::int64_t> tp, fp, fn;

  explicit MetricCounts(int n_labels = 0)
      : tp(static_cast<std::size_t>(n_labels), 0),
        fp(static_cast<std::size_t>(n_labels), 0),
        fn(static_cast<std::size_t>(n_labels), 0) {}

  int n_labels() const { return static_cast<int>(tp.size()); }
  void add(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& gold);
  void merge(const MetricCounts& other);

  std::int64_t total_tp() const;
  std::int64_t total_fp() const;
  std::int64_t total_fn() const;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2/(P^-1 + R^-1), with 0/0 -> 0.
Scores micro_scores(const MetricCounts& counts);

struct LabelStats {
  double std_total = 0.0;
  double std_majors = 0.0;
  std::vector<int> majors;  // label indices, descending count
};

// Population standard deviation over all counts, and over the smallest
// descending-count prefix covering >= 90% of the total.
LabelStats label_stats(const std::vector<std::int64_t>& counts);

}  // namespace ewe::labels
