#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <vector>

#include "msana/learners/knn.hpp"

namespace msana {

enum class SamMemory : std::uint8_t { combined = 0, stm = 1, ltm = 2 };

inline std::string_view to_string(SamMemory m) {
  switch (m) {
    case SamMemory::combined: return "combined";
    case SamMemory::stm: return "stm";
    default: return "ltm";
  }
}

struct SamKnnConfig {
  std::size_t k = 5;
  std::size_t stm_max = 500;
  std::size_t ltm_max = 500;
  std::size_t kmeans_iterations = 5;
};

/// Self-adjusting memory kNN. The short-term memory (STM) keeps the most
/// recent samples; samples leaving it move to the long-term memory (LTM) if
/// they agree with what is left in STM. Each prediction uses whichever of
/// STM, LTM or their union was most accurate over the last |STM| samples.
class SamKnn final : public OnlineClassifier {
 public:
  using Config = SamKnnConfig;

  explicit SamKnn(std::size_t num_classes, Config config = {}) : num_classes_(num_classes), config_(config) {
    if (num_classes_ < 2) throw std::invalid_argument("sam-knn needs >= 2 classes");
    if (config_.k == 0 || config_.stm_max == 0 || config_.ltm_max < 2)
      throw std::invalid_argument("sam-knn: bad capacities");
  }

  LearnerKind kind() const override { return LearnerKind::sam_knn; }
  std::size_t num_classes() const override { return num_classes_; }

  using OnlineClassifier::learn_one;
  using OnlineClassifier::predict_proba;

  ClassProbabilities predict_proba(std::span<const double> x) const override {
    if (stm_.empty() && ltm_.empty()) return ClassProbabilities::uniform(num_classes_);
    return ClassProbabilities::from_scores(votes(best_memory(), x));
  }

  void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) override {
    if (label >= num_classes_) throw std::out_of_range("label out of range");
    if (!(weight > 0.0)) return;
    if (!stm_.empty() && x.size() != stm_.front().x.size()) throw DimensionMismatch(stm_.front().x.size(), x.size());
    if (!stm_.empty() || !ltm_.empty()) {
      for (std::size_t m = 0; m < 3; ++m) {
        const auto mem = static_cast<SamMemory>(m);
        if (!available(mem)) continue;
        auto& h = history_[m];
        h.push_back(argmax(votes(mem, x)) == label);
        if (h.size() > config_.stm_max) h.pop_front();
      }
    }
    clean_ltm(x, label);
    stm_.push_back({std::vector<double>(x.begin(), x.end()), label});
    while (stm_.size() > config_.stm_max) {
      StoredSample old = std::move(stm_.front());
      stm_.pop_front();
      if (argmax(knn_votes(old.x, config_.k, num_classes_, stm_)) == old.label) {
        ltm_.push_back(std::move(old));
        if (ltm_.size() > config_.ltm_max) compress_ltm();
      } else {
        ++discarded_;
      }
    }
    const SamMemory now = best_memory();
    if (now != current_) {
      ++switches_;
      if (now == SamMemory::stm) ++switches_to_stm_;
      current_ = now;
    }
  }

  void reset() override {
    const Config c = config_;
    *this = SamKnn(num_classes_, c);
  }

  /// Memory the next prediction will use.
  SamMemory best_memory() const {
    SamMemory best = SamMemory::combined;
    double best_acc = -1.0;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto mem = static_cast<SamMemory>(m);
      if (!available(mem)) continue;
      const double acc = accuracy(m);
      if (acc > best_acc) {
        best_acc = acc;
        best = mem;
      }
    }
    return best;
  }

  std::size_t stm_size() const noexcept { return stm_.size(); }
  std::size_t ltm_size() const noexcept { return ltm_.size(); }
  std::uint64_t switches() const noexcept { return switches_; }
  std::uint64_t switches_to_stm() const noexcept { return switches_to_stm_; }
  std::uint64_t discarded() const noexcept { return discarded_; }
  std::uint64_t compressions() const noexcept { return compressions_; }
  SamMemory current_memory() const noexcept { return current_; }

  void save(BinaryWriter& w) const override {
    w.put_size(num_classes_);
    w.put_size(config_.k);
    w.put_size(config_.stm_max);
    w.put_size(config_.ltm_max);
    w.put_size(config_.kmeans_iterations);
    save_memory(w, stm_);
    save_memory(w, ltm_);
    for (const auto& h : history_) {
      w.put_size(h.size());
      for (bool b : h) w.put(b);
    }
    w.put(current_);
    w.put(switches_);
    w.put(switches_to_stm_);
    w.put(discarded_);
    w.put(compressions_);
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get_size();
    config_.k = r.get_size();
    config_.stm_max = r.get_size();
    config_.ltm_max = r.get_size();
    config_.kmeans_iterations = r.get_size();
    load_memory(r, stm_);
    load_memory(r, ltm_);
    for (auto& h : history_) {
      h.resize(r.get_size());
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = r.get<bool>();
    }
    current_ = r.get<SamMemory>();
    switches_ = r.get<std::uint64_t>();
    switches_to_stm_ = r.get<std::uint64_t>();
    discarded_ = r.get<std::uint64_t>();
    compressions_ = r.get<std::uint64_t>();
  }

 private:
  bool available(SamMemory m) const {
    switch (m) {
      case SamMemory::stm: return !stm_.empty();
      case SamMemory::ltm: return !ltm_.empty();
      default: return !stm_.empty() || !ltm_.empty();
    }
  }

  double accuracy(std::size_t m) const {
    const auto& h = history_[m];
    const std::size_t n = std::min(h.size(), std::max<std::size_t>(1, stm_.size()));
    if (n == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = h.size() - n; i < h.size(); ++i) hits += h[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(n);
  }

  std::vector<double> votes(SamMemory m, std::span<const double> x) const {
    if (m == SamMemory::stm) return knn_votes(x, config_.k, num_classes_, stm_);
    if (m == SamMemory::ltm) return knn_votes(x, config_.k, num_classes_, ltm_);
    return knn_votes(x, config_.k, num_classes_, stm_, ltm_);
  }

  // Removes LTM samples that contradict the new sample: those of another
  // class lying within the distance of its k-th nearest same-class STM
  // neighbour.
  void clean_ltm(std::span<const double> x, ClassId label) {
    if (ltm_.empty()) return;
    std::vector<double> d;
    for (const auto& s : stm_)
      if (s.label == label) d.push_back(squared_distance(s.x, x));
    if (d.empty()) return;
    const std::size_t kk = std::min(config_.k, d.size());
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk - 1), d.end());
    const double radius = d[kk - 1];
    std::erase_if(ltm_, [&](const StoredSample& s) { return s.label != label && squared_distance(s.x, x) <= radius; });
  }

  // Class-wise k-means down to half the LTM capacity.
  void compress_ltm() {
    ++compressions_;
    const std::size_t target_total = config_.ltm_max / 2;
    std::vector<StoredSample> out;
    for (std::size_t c = 0; c < num_classes_; ++c) {
      std::vector<const StoredSample*> members;
      for (const auto& s : ltm_)
        if (s.label == c) members.push_back(&s);
      if (members.empty()) continue;
      const std::size_t share = (members.size() * target_total + ltm_.size() - 1) / ltm_.size();
      const std::size_t kc = std::clamp<std::size_t>(share, 1, members.size());
      std::vector<std::vector<double>> centers;
      for (std::size_t j = 0; j < kc; ++j) centers.push_back(members[j * members.size() / kc]->x);
      std::vector<std::size_t> assign(members.size(), 0);
      for (std::size_t it = 0; it < config_.kmeans_iterations; ++it) {
        for (std::size_t i = 0; i < members.size(); ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < kc; ++j) {
            const double dd = squared_distance(members[i]->x, centers[j]);
            if (dd < best) {
              best = dd;
              assign[i] = j;
            }
          }
        }
        std::vector<std::vector<double>> sums(kc, std::vector<double>(centers[0].size(), 0.0));
        std::vector<std::size_t> counts(kc, 0);
        for (std::size_t i = 0; i < members.size(); ++i) {
          ++counts[assign[i]];
          for (std::size_t f = 0; f < sums[0].size(); ++f) sums[assign[i]][f] += members[i]->x[f];
        }
        for (std::size_t j = 0; j < kc; ++j) {
          if (counts[j] == 0) continue;
          for (std::size_t f = 0; f < sums[j].size(); ++f) centers[j][f] = sums[j][f] / static_cast<double>(counts[j]);
        }
      }
      for (auto& ctr : centers) out.push_back({std::move(ctr), static_cast<ClassId>(c)});
    }
    ltm_ = std::move(out);
  }

  template <class Mem>
  static void save_memory(BinaryWriter& w, const Mem& m) {
    w.put_size(m.size());
    for (const auto& s : m) {
      w.put_vector(s.x);
      w.put(s.label);
    }
  }

  template <class Mem>
  static void load_memory(BinaryReader& r, Mem& m) {
    m.clear();
    const auto n = r.get_size();
    for (std::size_t i = 0; i < n; ++i) {
      StoredSample s;
      s.x = r.get_vector<double>();
      s.label = r.get<ClassId>();
      m.push_back(std::move(s));
    }
  }

  std::size_t num_classes_;
  Config config_;
  std::deque<StoredSample> stm_;
  std::vector<StoredSample> ltm_;
  std::array<std::deque<bool>, 3> history_;
  SamMemory current_ = SamMemory::combined;
  std::uint64_t switches_ = 0;
  std::uint64_t switches_to_stm_ = 0;
  std::uint64_t discarded_ = 0;
  std::uint64_t compressions_ = 0;
};

}  // namespace msana
