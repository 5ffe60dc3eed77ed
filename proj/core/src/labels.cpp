#include "ewe/labels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace ewe::labels {

LabelVocab LabelVocab::from_labels(std::vector<std::string> prefixed) {
  std::sort(prefixed.begin(), prefixed.end());
  prefixed.erase(std::unique(prefixed.begin(), prefixed.end()), prefixed.end());
  LabelVocab vocab;
  vocab.labels_ = std::move(prefixed);
  for (int i = 0; i < vocab.size(); ++i) vocab.index_[vocab.labels_[static_cast<std::size_t>(i)]] = i;
  return vocab;
}

int LabelVocab::index_of(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) throw std::out_of_range("label vocab: unknown label '" + label + "'");
  return it->second;
}

std::optional<int> LabelVocab::try_index(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void LabelVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("label vocab: cannot open '" + path + "' for writing");
  for (const std::string& label : labels_) out << label << '\n';
}

LabelVocab LabelVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("label vocab: cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return from_labels(std::move(lines));
}

std::vector<std::string> relabel(const std::vector<std::string>& codes) {
  if (codes.empty()) throw std::invalid_argument("relabel: code list is empty");
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    std::string prefixed = (i == 0 ? kFirstPrefix : kLaterPrefix) + codes[i];
    if (seen.insert(prefixed).second) out.push_back(std::move(prefixed));
  }
  return out;
}

std::vector<std::uint8_t> one_hot(const std::vector<std::string>& prefixed, const LabelVocab& vocab) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(vocab.size()), 0);
  for (const std::string& label : prefixed) bits[static_cast<std::size_t>(vocab.index_of(label))] = 1;
  return bits;
}

void MetricCounts::add(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& gold) {
  if (predicted.size() != tp.size() || gold.size() != tp.size())
    throw std::invalid_argument("metric counts: bit vector size mismatch");
  for (std::size_t l = 0; l < tp.size(); ++l) {
    if (predicted[l] && gold[l]) ++tp[l];
    else if (predicted[l] && !gold[l]) ++fp[l];
    else if (!predicted[l] && gold[l]) ++fn[l];
  }
}

void MetricCounts::merge(const MetricCounts& other) {
  if (other.tp.size() != tp.size()) throw std::invalid_argument("metric counts: size mismatch in merge");
  for (std::size_t l = 0; l < tp.size(); ++l) {
    tp[l] += other.tp[l];
    fp[l] += other.fp[l];
    fn[l] += other.fn[l];
  }
}

std::int64_t MetricCounts::total_tp() const { return std::accumulate(tp.begin(), tp.end(), std::int64_t{0}); }
std::int64_t MetricCounts::total_fp() const { return std::accumulate(fp.begin(), fp.end(), std::int64_t{0}); }
std::int64_t MetricCounts::total_fn() const { return std::accumulate(fn.begin(), fn.end(), std::int64_t{0}); }

Scores micro_scores(const MetricCounts& counts) {
  const double tp = static_cast<double>(counts.total_tp());
  const double fp = static_cast<double>(counts.total_fp());
  const double fn = static_cast<double>(counts.total_fn());
  Scores s;
  s.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision > 0.0 && s.recall > 0.0 ? 2.0 / (1.0 / s.precision + 1.0 / s.recall) : 0.0;
  return s;
}

namespace {

double population_std(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) return 0.0;
  const double n = static_cast<double>(counts.size());
  double mean = 0.0;
  for (const std::int64_t c : counts) mean += static_cast<double>(c);
  mean /= n;
  double var = 0.0;
  for (const std::int64_t c : counts) {
    const double d = static_cast<double>(c) - mean;
    var += d * d;
  }
  return std::sqrt(var / n);
}

}  // namespace

LabelStats label_stats(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("label stats: empty counts");
  LabelStats stats;
  stats.std_total = population_std(counts);

  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });

  const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  std::int64_t covered = 0;
  std::vector<std::int64_t> major_counts;
  for (const int idx : order) {
    stats.majors.push_back(idx);
    major_counts.push_back(counts[static_cast<std::size_t>(idx)]);
    covered += counts[static_cast<std::size_t>(idx)];
    // 10 * covered >= 9 * total <=> covered >= 0.9 * total, exact in integers
    if (covered * 10 >= total * 9) break;
  }
  stats.std_majors = population_std(major_counts);
  return stats;
}

}  // namespace ewe::labels
