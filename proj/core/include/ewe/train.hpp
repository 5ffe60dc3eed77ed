#pragma once

#include "ewe/data.hpp"
#include "ewe/labels.hpp"
#include "ewe/model.hpp"
#include "ewe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewe {

enum class Precision { f32, f64 };

struct RunConfig {
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

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (lr0 < 0.0) throw std::invalid_argument("train: lr0 must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("train: beta1 must be in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("train: beta2 must be in [0, 1)");
    if (adam_eps <= 0.0) throw std::invalid_argument("train: adam_eps must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be >= 0");
    if (threshold <= 0.0 || threshold >= 1.0)
      throw std::invalid_argument("train: threshold must be in (0, 1)");
  }
};

// Linear decay from lr0 to zero across the whole run.
inline double lr_at(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (total_steps < 1) throw std::invalid_argument("lr_at: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step out of range");
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

// Mean over labels of t*softplus(-z) + (1-t)*softplus(z); softplus evaluated
// in double via log1p so large logits cannot overflow.
template <class S>
double bce_loss(const Vec<S>& logits, const std::vector<std::uint8_t>& targets) {
  if (static_cast<std::size_t>(logits.size()) != targets.size())
    throw std::invalid_argument("bce: logit/target size mismatch");
  if (targets.empty()) throw std::invalid_argument("bce: no labels");
  const auto softplus = [](double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); };
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = static_cast<double>(logits(i));
    total += targets[static_cast<std::size_t>(i)] ? softplus(-z) : softplus(z);
  }
  return total / static_cast<double>(targets.size());
}

// d(loss)/d(logit_i) = (sigmoid(z_i) - t_i) / n_labels.
template <class S>
Vec<S> bce_backward(const Vec<S>& logits, const std::vector<std::uint8_t>& targets) {
  if (static_cast<std::size_t>(logits.size()) != targets.size())
    throw std::invalid_argument("bce: logit/target size mismatch");
  Vec<S> dz(logits.size());
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = static_cast<double>(logits(i));
    const double sig = 1.0 / (1.0 + std::exp(-z));
    dz(i) = static_cast<S>((sig - static_cast<double>(targets[static_cast<std::size_t>(i)])) * inv_n);
  }
  return dz;
}

// A probability exactly at the threshold counts as predicted.
template <class S>
std::vector<std::uint8_t> predict(const Vec<S>& probs, double threshold) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    bits[static_cast<std::size_t>(i)] = static_cast<double>(probs(i)) >= threshold ? 1 : 0;
  return bits;
}

template <class S>
struct ParamSlot {
  Mat<S>* value;
  const Mat<S>* grad;
  bool decay;
};

template <class S>
std::vector<ParamSlot<S>> param_slots(Classifier<S>& model, Grads<S>& grads) {
  std::vector<ParamSlot<S>> slots;
  model.visit_params(&grads, [&](const std::string&, Mat<S>& m, Mat<S>* g, bool decay) {
    slots.push_back({&m, g, decay});
  });
  return slots;
}

// AdamW: bias-corrected moments, decoupled weight decay applied only to
// slots flagged decay (weight matrices; never embeddings, biases, or LN).
template <class S>
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  explicit AdamW(const RunConfig& rc)
      : AdamW(rc.beta1, rc.beta2, rc.adam_eps, rc.weight_decay) {}

  std::int64_t step_count() const { return t_; }

  void step(const std::vector<ParamSlot<S>>& slots, double lr, double grad_scale = 1.0) {
    if (m_.empty()) {
      for (const ParamSlot<S>& slot : slots) {
        m_.push_back(Mat<S>::Zero(slot.value->rows(), slot.value->cols()));
        v_.push_back(Mat<S>::Zero(slot.value->rows(), slot.value->cols()));
      }
    }
    if (slots.size() != m_.size())
      throw std::invalid_argument("adamw: slot count changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t s = 0; s < slots.size(); ++s) {
      Mat<S>& p = *slots[s].value;
      const Mat<S>& gm = *slots[s].grad;
      Mat<S>& m = m_[s];
      Mat<S>& v = v_[s];
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
          const double g = static_cast<double>(gm(i, j)) * grad_scale;
          const double mi = beta1_ * static_cast<double>(m(i, j)) + (1.0 - beta1_) * g;
          const double vi = beta2_ * static_cast<double>(v(i, j)) + (1.0 - beta2_) * g * g;
          m(i, j) = static_cast<S>(mi);
          v(i, j) = static_cast<S>(vi);
          double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
          if (slots[s].decay) update += weight_decay_ * static_cast<double>(p(i, j));
          p(i, j) -= static_cast<S>(lr * update);
        }
      }
    }
  }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

template <class S>
labels::Scores evaluate(const Classifier<S>& model, const std::vector<data::Example>& examples,
                        double threshold, labels::MetricCounts* out_counts = nullptr) {
  labels::MetricCounts counts(model.cfg.n_labels);
  FwdCache<S> cache;
  for (const data::Example& ex : examples) {
    Vec<S> z = model.forward(ex.sample, false, nullptr, cache);
    Vec<S> p(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      p(i) = static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(z(i)))));
    counts.add(predict(p, threshold), ex.targets);
  }
  if (out_counts) *out_counts = counts;
  return labels::micro_scores(counts);
}

struct EpochLog {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean per-sample loss
  bool has_val = false;
  labels::Scores val;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::int64_t total_steps = 0;
};

// Deterministic for a fixed (model seed, rc.seed, corpus, machine): shuffles
// and per-sample dropout draw from derived sub-streams, so the schedule never
// depends on evaluation or logging. `on_epoch` may return true to stop early;
// the LR schedule is still laid out over the full requested epoch count.
template <class S>
TrainLog train_classifier(Classifier<S>& model, const std::vector<data::Example>& train_set,
                          const std::vector<data::Example>* val_set, const RunConfig& rc,
                          std::ostream* log = nullptr,
                          const std::function<bool(const EpochLog&)>& on_epoch = {}) {
  rc.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  for (const data::Example& ex : train_set)
    if (static_cast<int>(ex.targets.size()) != model.cfg.n_labels)
      throw std::invalid_argument("train: example target width does not match model");

  const std::int64_t n = static_cast<std::int64_t>(train_set.size());
  const std::int64_t batches = (n + rc.batch_size - 1) / rc.batch_size;
  TrainLog tl;
  tl.total_steps = batches * rc.epochs;

  AdamW<S> opt(rc);
  Grads<S> grads = model.zero_grads();
  const std::vector<ParamSlot<S>> slots = param_slots(model, grads);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  FwdCache<S> cache;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < rc.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(rc.seed, kStreamShuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::int64_t b = 0; b < batches; ++b) {
      const std::int64_t begin = b * rc.batch_size;
      const std::int64_t end = std::min(n, begin + rc.batch_size);
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::int64_t pos = begin; pos < end; ++pos) {
        const data::Example& ex = train_set[order[static_cast<std::size_t>(pos)]];
        Rng drop_rng(derive_seed(rc.seed, kStreamDropout,
                                 static_cast<std::uint64_t>(epoch) * static_cast<std::uint64_t>(n) +
                                     static_cast<std::uint64_t>(pos)));
        Vec<S> z = model.forward(ex.sample, true, &drop_rng, cache);
        batch_loss += bce_loss(z, ex.targets);
        model.backward(bce_backward(z, ex.targets), cache, grads);
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 " step " + std::to_string(step));
      opt.step(slots, lr_at(step, tl.total_steps, rc.lr0), 1.0 / static_cast<double>(end - begin));
      ++step;
      epoch_loss += batch_loss;
    }

    EpochLog el;
    el.epoch = epoch + 1;
    el.train_loss = epoch_loss / static_cast<double>(n);
    if (val_set) {
      el.val = evaluate(model, *val_set, rc.threshold);
      el.has_val = true;
    }
    if (log) {
      char buf[160];
      if (el.has_val)
        std::snprintf(buf, sizeof(buf),
                      "epoch %d/%d loss %.6f val_precision %.4f val_recall %.4f val_f1 %.4f",
                      el.epoch, rc.epochs, el.train_loss, el.val.precision, el.val.recall,
                      el.val.f1);
      else
        std::snprintf(buf, sizeof(buf), "epoch %d/%d loss %.6f", el.epoch, rc.epochs,
                      el.train_loss);
      (*log) << buf << std::endl;
    }
    tl.epochs.push_back(el);
    if (on_epoch && on_epoch(el)) break;
  }
  return tl;
}

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_err = 0;
  };
  std::vector<Entry> tensors;
  double max_err = 0;
};

// Central differences against the analytic gradient of the BCE loss on one
// example. Error metric per element: |a - n| / max(|a|, |n|, 1).
template <class S>
GradCheckReport grad_check(Classifier<S>& model, const data::Example& ex, double epsilon) {
  FwdCache<S> cache;
  Vec<S> z = model.forward(ex.sample, false, nullptr, cache);
  Grads<S> grads = model.zero_grads();
  model.backward(bce_backward(z, ex.targets), cache, grads);

  const auto loss_now = [&]() {
    FwdCache<S> tmp;
    return bce_loss(model.forward(ex.sample, false, nullptr, tmp), ex.targets);
  };

  GradCheckReport report;
  model.visit_params(&grads, [&](const std::string& name, Mat<S>& m, Mat<S>* g, bool) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const S orig = m(i, j);
        m(i, j) = static_cast<S>(static_cast<double>(orig) + epsilon);
        const double up = loss_now();
        m(i, j) = static_cast<S>(static_cast<double>(orig) - epsilon);
        const double down = loss_now();
        m(i, j) = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = static_cast<double>((*g)(i, j));
        const double err =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0});
        worst = std::max(worst, err);
      }
    }
    report.tensors.push_back({name, worst});
    report.max_err = std::max(report.max_err, worst);
  });
  return report;
}

}  // namespace ewe
