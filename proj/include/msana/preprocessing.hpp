#pragma once

#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "msana/core.hpp"
#include "msana/rng.hpp"
#include "msana/serialize.hpp"

namespace msana {

// ---------------------------------------------------------------------------
// Running per-feature statistics (Welford mean/M2, elementwise min/max)
// ---------------------------------------------------------------------------

class RunningStats {
 public:
  explicit RunningStats(std::size_t dim = 0) { resize(dim); }

  std::size_t dim() const noexcept { return mean_.size(); }
  std::uint64_t count() const noexcept { return count_; }

  void update(std::span<const double> x) {
    if (count_ == 0 && dim() == 0) resize(x.size());
    if (x.size() != dim()) throw DimensionMismatch(dim(), x.size());
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / n;
      m2_[i] += delta * (x[i] - mean_[i]);
      min_[i] = std::min(min_[i], x[i]);
      max_[i] = std::max(max_[i], x[i]);
    }
  }

  double mean(std::size_t i) const { return mean_[i]; }
  /// Population variance m2 / n.
  double variance(std::size_t i) const {
    return count_ == 0 ? 0.0 : std::max(0.0, m2_[i] / static_cast<double>(count_));
  }
  double stddev(std::size_t i) const { return std::sqrt(variance(i)); }
  double min(std::size_t i) const { return min_[i]; }
  double max(std::size_t i) const { return max_[i]; }

  /// (x - min) / (max - min) per feature; 0.0 where max == min. Not clipped.
  std::vector<double> minmax_scale(std::span<const double> x) const {
    if (count_ == 0) throw InsufficientStatistics("min-max scaling needs at least one sample");
    if (x.size() != dim()) throw DimensionMismatch(dim(), x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double range = max_[i] - min_[i];
      out[i] = range > 0.0 ? (x[i] - min_[i]) / range : 0.0;
    }
    return out;
  }

  /// (x - mean) / stddev per feature; 0.0 where stddev == 0.
  std::vector<double> zscore_scale(std::span<const double> x) const {
    if (count_ < 2) throw InsufficientStatistics("z-score scaling needs at least two samples");
    if (x.size() != dim()) throw DimensionMismatch(dim(), x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sd = stddev(i);
      out[i] = sd > 0.0 ? (x[i] - mean_[i]) / sd : 0.0;
    }
    return out;
  }

  void save(BinaryWriter& w) const {
    w.put(count_);
    w.put_vector(mean_);
    w.put_vector(m2_);
    w.put_vector(min_);
    w.put_vector(max_);
  }
  void load(BinaryReader& r) {
    count_ = r.get<std::uint64_t>();
    mean_ = r.get_vector<double>();
    m2_ = r.get_vector<double>();
    min_ = r.get_vector<double>();
    max_ = r.get_vector<double>();
  }

 private:
  void resize(std::size_t dim) {
    mean_.assign(dim, 0.0);
    m2_.assign(dim, 0.0);
    min_.assign(dim, std::numeric_limits<double>::infinity());
    max_.assign(dim, -std::numeric_limits<double>::infinity());
  }

  std::uint64_t count_ = 0;
  std::vector<double> mean_, m2_, min_, max_;
};

inline void stats_update(RunningStats& stats, const Sample& x) { stats.update(x.features); }

inline Sample minmax_scale(const RunningStats& stats, const Sample& x) {
  return {stats.minmax_scale(x.features), x.feature_names, x.index};
}

inline Sample zscore_scale(const RunningStats& stats, const Sample& x) {
  return {stats.zscore_scale(x.features), x.feature_names, x.index};
}

enum class ScalerKind { minmax, zscore };

inline std::string_view to_string(ScalerKind k) { return k == ScalerKind::minmax ? "minmax" : "zscore"; }

// ---------------------------------------------------------------------------
// Class balancing
// ---------------------------------------------------------------------------

struct ClassCounter {
  std::vector<std::uint64_t> counts;
  double ratio_threshold = 0.30;

  ClassCounter() = default;
  ClassCounter(std::vector<std::uint64_t> c, double threshold) : counts(std::move(c)), ratio_threshold(threshold) {}

  std::uint64_t majority_count() const {
    return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  }
  std::uint64_t minority_count() const {
    return counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
  }
  /// min_count / max_count, 1.0 when nothing has been counted yet.
  double minority_ratio() const {
    const auto mx = majority_count();
    return mx == 0 ? 1.0 : static_cast<double>(minority_count()) / static_cast<double>(mx);
  }
  bool needs_balancing() const { return minority_ratio() < ratio_threshold; }
};

namespace detail {

inline std::uint64_t oversample_amount(std::uint64_t minority, std::uint64_t majority, double threshold) {
  // Smallest d with (m + d) / M >= threshold. Start just under the closed form
  // and walk up so the comparison is made in the same arithmetic as the check.
  const double guess = std::floor(threshold * static_cast<double>(majority)) - static_cast<double>(minority) - 1.0;
  std::uint64_t d = guess > 0.0 ? static_cast<std::uint64_t>(guess) : 0;
  while (static_cast<double>(minority + d) / static_cast<double>(majority) < threshold) ++d;
  return d;
}

inline std::uint64_t undersample_cap(std::uint64_t minority, double threshold) {
  // Largest C with m / C >= threshold.
  const double guess = std::floor(static_cast<double>(minority) / threshold) + 1.0;
  auto cap = static_cast<std::uint64_t>(guess);
  while (cap > minority && static_cast<double>(minority) / static_cast<double>(cap) < threshold) --cap;
  return cap;
}

}  // namespace detail

/// Random over-sampling. When the minority/majority ratio is below the
/// threshold, returns verbatim copies of buffered samples of each
/// under-represented class, drawn uniformly with replacement, until that
/// class reaches the threshold. Classes with no buffered sample are skipped
/// with a "rebalance_no_minority" warning.
inline std::vector<LabeledSample> dros_rebalance(const ClassCounter& counter,
                                                 std::span<const LabeledSample> buffer,
                                                 std::uint64_t rng_seed, Warnings* warnings = nullptr) {
  std::vector<LabeledSample> out;
  if (!counter.needs_balancing()) return out;
  const auto majority = counter.majority_count();
  Rng rng(rng_seed);
  for (std::size_t c = 0; c < counter.counts.size(); ++c) {
    const auto m = counter.counts[c];
    if (static_cast<double>(m) / static_cast<double>(majority) >= counter.ratio_threshold) continue;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < buffer.size(); ++i)
      if (buffer[i].label == c) pool.push_back(i);
    if (pool.empty()) {
      warn(warnings, "rebalance_no_minority");
      continue;
    }
    const auto d = detail::oversample_amount(m, majority, counter.ratio_threshold);
    for (std::uint64_t j = 0; j < d; ++j) out.push_back(buffer[pool[rng.below(pool.size())]]);
  }
  return out;
}

/// Random under-sampling. Returns ascending buffer indices of over-represented
/// class samples to discard, chosen uniformly without replacement, so that
/// minority / remaining >= threshold.
inline std::vector<std::size_t> drus_rebalance(const ClassCounter& counter,
                                               std::span<const LabeledSample> buffer,
                                               std::uint64_t rng_seed, Warnings* warnings = nullptr) {
  std::vector<std::size_t> drops;
  if (!counter.needs_balancing()) return drops;
  const auto minority = counter.minority_count();
  if (minority == 0) {
    warn(warnings, "rebalance_no_minority");
    return drops;
  }
  const auto cap = detail::undersample_cap(minority, counter.ratio_threshold);
  Rng rng(rng_seed);
  for (std::size_t c = 0; c < counter.counts.size(); ++c) {
    if (counter.counts[c] <= cap) continue;
    auto need = counter.counts[c] - cap;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < buffer.size(); ++i)
      if (buffer[i].label == c) pool.push_back(i);
    if (pool.size() < need) {
      warn(warnings, "rebalance_short_pool");
      need = pool.size();
    }
    // Partial Fisher-Yates: first `need` slots become the sample.
    for (std::size_t j = 0; j < need; ++j) {
      const auto k = j + rng.below(pool.size() - j);
      std::swap(pool[j], pool[k]);
      drops.push_back(pool[j]);
    }
  }
  std::sort(drops.begin(), drops.end());
  return drops;
}

enum class BalanceMethod { dros, drus, off };

inline std::string_view to_string(BalanceMethod m) {
  switch (m) {
    case BalanceMethod::dros: return "dros";
    case BalanceMethod::drus: return "drus";
    default: return "off";
  }
}

struct BalancerConfig {
  BalanceMethod method = BalanceMethod::dros;
  double threshold = 0.30;
  std::size_t buffer = 1000;
};

/// Streaming wrapper over dros/drus: keeps a bounded buffer of recent labeled
/// samples (duplicates included) and its class counts, and rebalances after
/// every observation.
class DynamicBalancer {
 public:
  struct Outcome {
    std::vector<LabeledSample> extra;  // DROS duplicates to learn
    bool drop_current = false;         // DRUS discarded the newest sample
  };

  DynamicBalancer(std::size_t num_classes, BalancerConfig config, std::uint64_t seed)
      : config_(config), counter_(std::vector<std::uint64_t>(num_classes, 0), config.threshold), rng_(seed) {}

  Outcome observe(const LabeledSample& s) {
    Outcome out;
    if (config_.method == BalanceMethod::off) return out;
    push(s);
    if (!counter_.needs_balancing()) return out;
    if (config_.method == BalanceMethod::dros) {
      out.extra = dros_rebalance(counter_, buffer_, rng_.next(), &warnings_);
      for (const auto& dup : out.extra) push(dup);
    } else {
      const auto drops = drus_rebalance(counter_, buffer_, rng_.next(), &warnings_);
      if (!drops.empty() && drops.back() == buffer_.size() - 1) out.drop_current = true;
      for (auto it = drops.rbegin(); it != drops.rend(); ++it) {
        --counter_.counts[buffer_[*it].label];
        buffer_.erase(buffer_.begin() + static_cast<std::ptrdiff_t>(*it));
      }
    }
    return out;
  }

  const ClassCounter& counter() const noexcept { return counter_; }
  std::size_t buffered() const noexcept { return buffer_.size(); }
  const Warnings& warnings() const noexcept { return warnings_; }

  void save(BinaryWriter& w) const {
    w.put_vector(counter_.counts);
    w.put_size(buffer_.size());
    for (const auto& s : buffer_) {
      w.put(s.label);
      w.put_vector(s.sample.features);
    }
    w.put_string(rng_.state());
  }

 private:
  void push(const LabeledSample& s) {
    buffer_.push_back(s);
    ++counter_.counts[s.label];
    if (buffer_.size() > config_.buffer) {
      --counter_.counts[buffer_.front().label];
      buffer_.erase(buffer_.begin());
    }
  }

  BalancerConfig config_;
  ClassCounter counter_;
  std::vector<LabeledSample> buffer_;
  Rng rng_;
  Warnings warnings_;
};

}  // namespace msana
