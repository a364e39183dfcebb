#pragma once

#include <algorithm>
#include <deque>
#include <vector>

#include "msana/drift.hpp"
#include "msana/learners/classifier.hpp"

namespace msana {

struct StoredSample {
  std::vector<double> x;
  ClassId label = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Vote counts of the k nearest stored samples across one or more memories.
/// Equal distances keep insertion order, so the older sample wins.
template <class... Ranges>
std::vector<double> knn_votes(std::span<const double> x, std::size_t k, std::size_t num_classes,
                              const Ranges&... memories) {
  std::vector<std::pair<double, std::size_t>> dist;
  std::vector<ClassId> labels;
  auto collect = [&](const auto& memory) {
    for (const auto& s : memory) {
      dist.emplace_back(squared_distance(s.x, x), dist.size());
      labels.push_back(s.label);
    }
  };
  (collect(memories), ...);
  const std::size_t kk = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<double> votes(num_classes, 0.0);
  for (std::size_t i = 0; i < kk; ++i) votes[labels[dist[i].second]] += 1.0;
  return votes;
}

struct KnnConfig {
  std::size_t k = 5;
  std::size_t window = 500;
  bool use_adwin = true;
  Adwin::Config adwin{};
};

/// k-nearest-neighbours over a sliding window of the last w samples. With
/// ADWIN attached, the learner's own 0/1 error feeds a two-sided ADWIN and
/// the window is cut back to ADWIN's width whenever it reports a change.
class KnnAdwin final : public OnlineClassifier {
 public:
  using Config = KnnConfig;

  explicit KnnAdwin(std::size_t num_classes, Config config = {})
      : num_classes_(num_classes), config_(config), adwin_(config.adwin) {
    if (num_classes_ < 2) throw std::invalid_argument("knn needs >= 2 classes");
    if (config_.k == 0 || config_.window == 0) throw std::invalid_argument("knn: k and window must be >= 1");
  }

  LearnerKind kind() const override { return LearnerKind::knn_adwin; }
  std::size_t num_classes() const override { return num_classes_; }

  using OnlineClassifier::learn_one;
  using OnlineClassifier::predict_proba;

  ClassProbabilities predict_proba(std::span<const double> x) const override {
    if (buffer_.empty()) return ClassProbabilities::uniform(num_classes_);
    if (x.size() != buffer_.front().x.size()) throw DimensionMismatch(buffer_.front().x.size(), x.size());
    return ClassProbabilities::from_scores(knn_votes(x, config_.k, num_classes_, buffer_));
  }

  void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) override {
    if (label >= num_classes_) throw std::out_of_range("label out of range");
    if (!(weight > 0.0)) return;
    const bool error = predict_proba(x).predicted != label;
    buffer_.push_back({std::vector<double>(x.begin(), x.end()), label});
    while (buffer_.size() > config_.window) buffer_.pop_front();
    ++seen_;
    if (config_.use_adwin && adwin_.update(error ? 1.0 : 0.0, seen_).is_drift()) {
      const std::size_t keep = std::max<std::size_t>(1, adwin_.width());
      if (buffer_.size() > keep) {
        buffer_.erase(buffer_.begin(), buffer_.end() - static_cast<std::ptrdiff_t>(keep));
        ++truncations_;
      }
    }
  }

  void reset() override {
    buffer_.clear();
    adwin_ = Adwin(config_.adwin);
    seen_ = 0;
    truncations_ = 0;
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }
  std::uint64_t truncations() const noexcept { return truncations_; }
  const Config& config() const noexcept { return config_; }

  /// Inserts a sample without prediction or detector update (test setup).
  void insert(std::span<const double> x, ClassId label) {
    buffer_.push_back({std::vector<double>(x.begin(), x.end()), label});
    while (buffer_.size() > config_.window) buffer_.pop_front();
  }

  void save(BinaryWriter& w) const override {
    w.put_size(num_classes_);
    w.put_size(config_.k);
    w.put_size(config_.window);
    w.put(config_.use_adwin);
    w.put(config_.adwin.delta);
    w.put_size(config_.adwin.max_buckets);
    w.put_size(config_.adwin.clock);
    w.put_size(config_.adwin.min_subwindow);
    w.put_size(config_.adwin.grace);
    adwin_.save(w);
    w.put(seen_);
    w.put(truncations_);
    w.put_size(buffer_.size());
    for (const auto& s : buffer_) {
      w.put_vector(s.x);
      w.put(s.label);
    }
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get_size();
    config_.k = r.get_size();
    config_.window = r.get_size();
    config_.use_adwin = r.get<bool>();
    config_.adwin.delta = r.get<double>();
    config_.adwin.max_buckets = r.get_size();
    config_.adwin.clock = r.get_size();
    config_.adwin.min_subwindow = r.get_size();
    config_.adwin.grace = r.get_size();
    adwin_ = Adwin(config_.adwin);
    adwin_.load(r);
    seen_ = r.get<std::uint64_t>();
    truncations_ = r.get<std::uint64_t>();
    buffer_.resize(r.get_size());
    for (auto& s : buffer_) {
      s.x = r.get_vector<double>();
      s.label = r.get<ClassId>();
    }
  }

 private:
  std::size_t num_classes_;
  Config config_;
  Adwin adwin_;
  std::deque<StoredSample> buffer_;
  std::uint64_t seen_ = 0;
  std::uint64_t truncations_ = 0;
};

}  // namespace msana
