#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "msana/learners/factory.hpp"
#include "msana/parallel.hpp"

namespace msana {

struct EnsembleConfig {
  double epsilon = 0.001;
  double alpha_ratio = 0.1;
  std::size_t replay_buffer = 2000;
  std::size_t replay_min = 500;
  bool eq10_literal = false;
};

/// Model slots, leaders first. The four followers form the selection pool.
inline constexpr std::array<LearnerKind, 6> kEnsembleModels = {
    LearnerKind::arf_adwin, LearnerKind::arf_eddm, LearnerKind::efdt,
    LearnerKind::knn_adwin, LearnerKind::sam_knn,  LearnerKind::opa,
};
inline constexpr std::size_t kLeaderCount = 2;
inline constexpr std::size_t kPoolSize = 4;
inline constexpr std::size_t kActiveCount = 4;

/// Window length over which recent model errors are measured. Without any
/// drift it is the most recent alpha share of the N processed samples;
/// otherwise it spans the samples since the last drift (N - last drift).
/// `literal` uses the last drift index itself as the size. Clamped to [1, N].
inline std::uint64_t window_size(std::span<const std::uint64_t> drift_arr, std::uint64_t n, double alpha,
                                 bool literal = false) {
  if (n < 1) throw std::invalid_argument("window_size needs N >= 1");
  std::uint64_t s;
  if (drift_arr.empty()) {
    const double a = std::floor(alpha * static_cast<double>(n));
    s = a < 1.0 ? 1 : static_cast<std::uint64_t>(a);
  } else {
    const auto last = drift_arr.back();
    s = literal ? last : (n > last ? n - last : 0);
  }
  return std::clamp<std::uint64_t>(s, 1, n);
}

/// Per-model 0/1 loss history stored as prefix sums so any trailing window
/// mean is O(1).
class LossHistory {
 public:
  void push(bool error) { prefix_.push_back(prefix_.back() + (error ? 1 : 0)); }
  std::uint64_t size() const noexcept { return prefix_.size() - 1; }
  void clear() { prefix_.assign(1, 0); }

  /// Mean loss over the last min(s, size) entries; 0.5 with no history.
  double window_error(std::uint64_t s) const {
    const auto n = std::min<std::uint64_t>(s, size());
    if (n == 0) return 0.5;
    return static_cast<double>(prefix_.back() - prefix_[prefix_.size() - 1 - n]) / static_cast<double>(n);
  }

  void save(BinaryWriter& w) const { w.put_vector(prefix_); }

 private:
  std::vector<std::uint64_t> prefix_{0};
};

/// Reciprocal-error weight 1 / (error + epsilon).
inline double model_weight(double error_rate, double epsilon) {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw std::invalid_argument("error rate must be in [0,1]");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  return 1.0 / (error_rate + epsilon);
}

/// Weighted probability averaging: score_i = sum_j w_j p_ji / b, prediction
/// argmax (lowest index on ties), reported probabilities are the scores
/// normalized to 1. All-zero weights fall back to uniform with a warning.
inline ClassProbabilities combine(std::span<const ClassProbabilities> probas, std::span<const double> weights,
                                  Warnings* warnings = nullptr) {
  if (probas.empty() || probas.size() != weights.size())
    throw std::invalid_argument("combine needs one weight per model");
  const std::size_t c = probas.front().num_classes();
  const double b = static_cast<double>(probas.size());
  bool any = false;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("combine: negative weight");
    any = any || w > 0.0;
  }
  if (!any) {
    warn(warnings, "combine_zero_weights");
    return ClassProbabilities::uniform(c);
  }
  std::vector<double> scores(c, 0.0);
  for (std::size_t j = 0; j < probas.size(); ++j) {
    if (probas[j].num_classes() != c) throw DimensionMismatch(c, probas[j].num_classes());
    for (std::size_t i = 0; i < c; ++i) scores[i] += weights[j] * probas[j][i] / b;
  }
  return ClassProbabilities::from_scores(std::move(scores));
}

/// The two pool members with the lowest errors, ties by pool order.
/// Returned as pool positions in ascending order.
inline std::array<std::size_t, 2> select_followers(std::span<const double> pool_errors) {
  if (pool_errors.size() != kPoolSize) throw std::invalid_argument("select_followers needs 4 error estimates");
  std::array<std::size_t, kPoolSize> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool_errors[a] < pool_errors[b]; });
  std::array<std::size_t, 2> out{order[0], order[1]};
  std::sort(out.begin(), out.end());
  return out;
}

/// Two fixed leaders plus two followers chosen from a pool of four. All six
/// models predict and learn every sample; only the active four are combined.
class Ensemble {
 public:
  struct Prediction {
    ClassProbabilities combined;
    std::array<ClassProbabilities, kEnsembleModels.size()> each;
    std::array<double, kActiveCount> weights{};
    std::array<double, kActiveCount> errors{};
  };

  Ensemble(std::size_t num_classes, EnsembleConfig config, const LearnerParams& params, std::uint64_t seed,
           WorkerPool* pool = nullptr)
      : num_classes_(num_classes), config_(config), pool_(pool) {
    if (!(config_.epsilon > 0.0)) throw std::invalid_argument("ensemble epsilon must be > 0");
    if (!(config_.alpha_ratio > 0.0 && config_.alpha_ratio <= 1.0))
      throw std::invalid_argument("alpha_ratio must be in (0,1]");
    for (std::size_t i = 0; i < models_.size(); ++i)
      models_[i] = make_learner(kEnsembleModels[i], num_classes, params, mix_seed(seed, i));
  }

  const EnsembleConfig& config() const noexcept { return config_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  /// Model slots of the active four: both leaders then the followers.
  std::array<std::size_t, kActiveCount> active() const {
    return {0, 1, kLeaderCount + followers_[0], kLeaderCount + followers_[1]};
  }
  std::array<std::size_t, 2> followers() const noexcept { return followers_; }
  void set_followers(std::array<std::size_t, 2> f) {
    if (f[0] >= kPoolSize || f[1] >= kPoolSize || f[0] == f[1]) throw std::invalid_argument("bad follower set");
    if (f[0] > f[1]) std::swap(f[0], f[1]);
    followers_ = f;
  }

  OnlineClassifier& model(std::size_t slot) { return *models_.at(slot); }
  const OnlineClassifier& model(std::size_t slot) const { return *models_.at(slot); }
  const LossHistory& history(std::size_t slot) const { return histories_.at(slot); }

  std::uint64_t processed() const noexcept { return n_; }
  const std::vector<std::uint64_t>& drift_arr() const noexcept { return drift_arr_; }

  std::uint64_t current_window() const {
    return n_ == 0 ? 0 : window_size(drift_arr_, n_, config_.alpha_ratio, config_.eq10_literal);
  }

  /// Every model predicts; the base predictions can run on the pool.
  void predict_all(std::span<const double> x, Prediction& out) const {
    run(models_.size(), [&](std::size_t i) { out.each[i] = models_[i]->predict_proba(x); });
  }

  /// Weights from the window errors of the active models, then the weighted vote.
  void combine_active(Prediction& out) {
    const auto act = active();
    const auto s = current_window();
    std::array<ClassProbabilities, kActiveCount> probs;
    for (std::size_t j = 0; j < kActiveCount; ++j) {
      out.errors[j] = histories_[act[j]].window_error(s);
      out.weights[j] = model_weight(out.errors[j], config_.epsilon);
      probs[j] = out.each[act[j]];
    }
    out.combined = combine(probs, out.weights, &warnings_);
  }

  Prediction predict(std::span<const double> x) {
    Prediction p;
    predict_all(x, p);
    combine_active(p);
    return p;
  }

  /// Logs each model's 0/1 loss for a prediction made before learning.
  void record(const Prediction& p, ClassId label) {
    for (std::size_t i = 0; i < models_.size(); ++i) histories_[i].push(p.each[i].predicted != label);
    ++n_;
  }

  void learn(std::span<const double> x, ClassId label, double weight = 1.0) {
    run(models_.size(), [&](std::size_t i) { models_[i]->learn_one(x, label, weight); });
  }

  /// Confirmed drift bookkeeping: measures the window that just ended,
  /// appends N to the drift array and re-selects followers on that window.
  /// Returns the ended window's length.
  std::uint64_t on_drift() {
    const std::uint64_t s_prev = current_window();
    if (!drift_arr_.empty() && n_ <= drift_arr_.back()) throw std::logic_error("drift indices must increase");
    drift_arr_.push_back(n_);
    std::array<double, kPoolSize> errs{};
    for (std::size_t j = 0; j < kPoolSize; ++j) errs[j] = histories_[kLeaderCount + j].window_error(s_prev);
    last_pool_errors_ = errs;
    set_followers(select_followers(errs));
    return s_prev;
  }

  const std::array<double, kPoolSize>& last_pool_errors() const noexcept { return last_pool_errors_; }

  /// Replays samples in order on the chosen model slots.
  void retrain(std::span<const std::vector<double>> xs, std::span<const ClassId> ys,
               std::span<const std::size_t> slots, bool reset_first) {
    run(slots.size(), [&](std::size_t k) {
      auto& m = *models_[slots[k]];
      if (reset_first) m.reset();
      for (std::size_t i = 0; i < xs.size(); ++i) m.learn_one(xs[i], ys[i]);
    });
  }

  const Warnings& warnings() const noexcept { return warnings_; }

  std::uint64_t state_hash() const {
    BinaryWriter w;
    for (const auto& m : models_) w.put(m->state_hash());
    for (const auto& h : histories_) h.save(w);
    w.put_vector(drift_arr_);
    w.put_size(followers_[0]);
    w.put_size(followers_[1]);
    w.put(n_);
    return fnv1a64(w.bytes());
  }

 private:
  void run(std::size_t n, const std::function<void(std::size_t)>& fn) const {
    if (pool_) {
      pool_->parallel_for(n, fn);
    } else {
      for (std::size_t i = 0; i < n; ++i) fn(i);
    }
  }

  std::size_t num_classes_;
  EnsembleConfig config_;
  WorkerPool* pool_;
  std::array<std::unique_ptr<OnlineClassifier>, kEnsembleModels.size()> models_;
  std::array<LossHistory, kEnsembleModels.size()> histories_;
  std::array<std::size_t, 2> followers_{0, 1};
  std::array<double, kPoolSize> last_pool_errors_{0.5, 0.5, 0.5, 0.5};
  std::vector<std::uint64_t> drift_arr_;
  std::uint64_t n_ = 0;
  Warnings warnings_;
};

}  // namespace msana
