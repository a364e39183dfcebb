#pragma once

#include <cmath>
#include <vector>

#include "msana/learners/classifier.hpp"

namespace msana {

struct PaConfig {
  double C = 1.0;
};

struct PaStep {
  double loss = 0.0;
  double tau = 0.0;
  bool skipped = false;  // positive loss but ||x|| == 0
};

/// One PA-I step on a single linear scorer with label y in {-1, +1}:
/// loss = max(0, 1 - y (w.x + b)), tau = min(C, loss / ||x||^2),
/// w += tau y x, b += tau y. The bias is not part of ||x||.
inline PaStep pa_update(std::vector<double>& w, double& b, std::span<const double> x, int y, double C) {
  double margin = b;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    margin += w[i] * x[i];
    norm2 += x[i] * x[i];
  }
  PaStep step;
  step.loss = std::max(0.0, 1.0 - static_cast<double>(y) * margin);
  if (step.loss <= 0.0) return step;
  if (!(norm2 > 0.0)) {
    step.skipped = true;
    return step;
  }
  step.tau = std::min(C, step.loss / norm2);
  for (std::size_t i = 0; i < x.size(); ++i) w[i] += step.tau * y * x[i];
  b += step.tau * y;
  return step;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Online passive-aggressive classifier (PA-I). Binary problems use one
/// scorer for class 1 against class 0; more classes use one-vs-rest.
/// Probabilities come from a logistic link on the margin.
class PassiveAggressive final : public OnlineClassifier {
 public:
  using Config = PaConfig;

  explicit PassiveAggressive(std::size_t num_classes, Config config = {}) : num_classes_(num_classes), config_(config) {
    if (num_classes_ < 2) throw std::invalid_argument("pa needs >= 2 classes");
    if (!(config_.C > 0.0)) throw std::invalid_argument("pa: C must be > 0");
    const std::size_t scorers = num_classes_ == 2 ? 1 : num_classes_;
    weights_.resize(scorers);
    bias_.assign(scorers, 0.0);
  }

  LearnerKind kind() const override { return LearnerKind::opa; }
  std::size_t num_classes() const override { return num_classes_; }

  using OnlineClassifier::learn_one;
  using OnlineClassifier::predict_proba;

  ClassProbabilities predict_proba(std::span<const double> x) const override {
    if (dim_ == 0) return ClassProbabilities::uniform(num_classes_);
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    if (num_classes_ == 2) {
      const double p1 = logistic(margin(0, x));
      return ClassProbabilities::from_scores({1.0 - p1, p1});
    }
    std::vector<double> s(num_classes_);
    for (std::size_t c = 0; c < num_classes_; ++c) s[c] = logistic(margin(c, x));
    return ClassProbabilities::from_scores(std::move(s));
  }

  void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) override {
    if (label >= num_classes_) throw std::out_of_range("label out of range");
    if (!(weight > 0.0)) return;
    if (dim_ == 0) {
      dim_ = x.size();
      for (auto& w : weights_) w.assign(dim_, 0.0);
    }
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) {
      const bool positive = num_classes_ == 2 ? label == 1 : label == c;
      const auto step = pa_update(weights_[c], bias_[c], x, positive ? 1 : -1, config_.C);
      if (step.skipped) warnings_.add("pa_zero_norm");
    }
  }

  void reset() override {
    dim_ = 0;
    for (auto& w : weights_) w.clear();
    bias_.assign(bias_.size(), 0.0);
    warnings_ = {};
  }

  const std::vector<double>& weights(std::size_t scorer = 0) const { return weights_.at(scorer); }
  double bias(std::size_t scorer = 0) const { return bias_.at(scorer); }
  const Warnings& warnings() const noexcept { return warnings_; }

  void save(BinaryWriter& w) const override {
    w.put_size(num_classes_);
    w.put(config_.C);
    w.put_size(dim_);
    w.put_size(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) {
      w.put_vector(weights_[c]);
      w.put(bias_[c]);
    }
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get_size();
    config_.C = r.get<double>();
    dim_ = r.get_size();
    weights_.resize(r.get_size());
    bias_.resize(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) {
      weights_[c] = r.get_vector<double>();
      bias_[c] = r.get<double>();
    }
  }

 private:
  double margin(std::size_t c, std::span<const double> x) const {
    double m = bias_[c];
    for (std::size_t i = 0; i < dim_; ++i) m += weights_[c][i] * x[i];
    return m;
  }

  std::size_t num_classes_;
  Config config_;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
  Warnings warnings_;
};

}  // namespace msana
