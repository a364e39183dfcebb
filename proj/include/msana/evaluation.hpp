#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "msana/core.hpp"

namespace msana {

// ---------------------------------------------------------------------------
// Hold-out split
// ---------------------------------------------------------------------------

/// Number of leading samples used for initial fitting: floor(f * n).
inline std::size_t holdout_size(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0,1)", "train_fraction");
  const auto train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (train == 0 || train >= n)
    throw StreamError("hold-out split of " + std::to_string(n) + " samples leaves an empty partition");
  return train;
}

template <class T>
struct HoldoutSplit {
  std::span<const T> train;
  std::span<const T> test;
};

template <class T>
HoldoutSplit<T> holdout_split(std::span<const T> stream, double train_fraction) {
  const auto k = holdout_size(stream.size(), train_fraction);
  return {stream.first(k), stream.subspan(k)};
}

// ---------------------------------------------------------------------------
// Confusion counts and metrics
// ---------------------------------------------------------------------------

class ConfusionCounts {
 public:
  explicit ConfusionCounts(std::size_t num_classes = 2) : c_(num_classes), m_(num_classes * num_classes, 0) {}

  void add(ClassId truth, ClassId predicted) {
    if (truth >= c_ || predicted >= c_) throw std::out_of_range("confusion: class out of range");
    ++m_[truth * c_ + predicted];
    ++total_;
    if (truth == predicted) ++correct_;
  }

  std::size_t num_classes() const noexcept { return c_; }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t correct() const noexcept { return correct_; }
  std::uint64_t at(ClassId truth, ClassId predicted) const { return m_[truth * c_ + predicted]; }

  double accuracy() const { return total_ == 0 ? 0.0 : static_cast<double>(correct_) / static_cast<double>(total_); }

  std::uint64_t tp(ClassId c) const { return at(c, c); }
  std::uint64_t fp(ClassId c) const {
    std::uint64_t s = 0;
    for (ClassId t = 0; t < c_; ++t)
      if (t != c) s += at(t, c);
    return s;
  }
  std::uint64_t fn(ClassId c) const {
    std::uint64_t s = 0;
    for (ClassId p = 0; p < c_; ++p)
      if (p != c) s += at(c, p);
    return s;
  }
  std::uint64_t tn(ClassId c) const { return total_ - tp(c) - fp(c) - fn(c); }

 private:
  std::size_t c_;
  std::vector<std::uint64_t> m_;
  std::uint64_t total_ = 0;
  std::uint64_t correct_ = 0;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Accuracy plus precision/recall/F1 with `positive` as the positive class
/// (attack = 1). Zero denominators give 0 and a warning.
inline Metrics binary_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn,
                              Warnings* warnings = nullptr) {
  Metrics m;
  const auto total = tp + fp + fn + tn;
  if (total == 0) throw std::invalid_argument("metrics need at least one evaluated sample");
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  if (tp + fp == 0) {
    warn(warnings, "precision_undefined");
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    warn(warnings, "recall_undefined");
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

inline Metrics metrics(const ConfusionCounts& counts, ClassId positive = 1, Warnings* warnings = nullptr) {
  Metrics m = binary_metrics(counts.tp(positive), counts.fp(positive), counts.fn(positive), counts.tn(positive),
                             warnings);
  m.accuracy = counts.accuracy();
  return m;
}

// ---------------------------------------------------------------------------
// Latency instrumentation
// ---------------------------------------------------------------------------

enum class Component : std::size_t {
  balancing = 0,
  normalization,
  drift_detection,
  feature_selection,
  base_learning,
  model_selection,
  ensemble_combine,
};
inline constexpr std::size_t kComponentCount = 7;

inline std::string_view to_string(Component c) {
  static constexpr std::array<std::string_view, kComponentCount> names = {
      "balancing", "normalization", "drift_detection", "feature_selection",
      "base_learning", "model_selection", "ensemble_combine"};
  return names[static_cast<std::size_t>(c)];
}

/// Per-sample wall-clock totals and per-component sums. The first `warmup`
/// samples are timed but not kept.
class LatencyRecorder {
 public:
  using Clock = std::chrono::steady_clock;

  explicit LatencyRecorder(std::size_t warmup = 100) : warmup_(warmup) {}

  void begin_sample() {
    current_.fill(0);
    start_ = Clock::now();
  }

  void add(Component c, std::chrono::nanoseconds d) { current_[static_cast<std::size_t>(c)] += d.count(); }

  void end_sample() {
    const auto total = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
    ++samples_;
    if (samples_ <= warmup_) return;
    totals_ms_.push_back(static_cast<double>(total) / 1e6);
    for (std::size_t i = 0; i < kComponentCount; ++i) component_ns_[i] += current_[i];
  }

  /// Records a sample with a known total and component split (tests).
  void record(double total_ms, const std::array<double, kComponentCount>& component_ms = {}) {
    ++samples_;
    if (samples_ <= warmup_) return;
    totals_ms_.push_back(total_ms);
    for (std::size_t i = 0; i < kComponentCount; ++i)
      component_ns_[i] += static_cast<std::int64_t>(std::llround(component_ms[i] * 1e6));
  }

  std::size_t warmup() const noexcept { return warmup_; }
  std::uint64_t samples() const noexcept { return samples_; }
  const std::vector<double>& totals_ms() const noexcept { return totals_ms_; }

  double component_mean_ms(Component c) const {
    return totals_ms_.empty() ? 0.0
                              : static_cast<double>(component_ns_[static_cast<std::size_t>(c)]) / 1e6 /
                                    static_cast<double>(totals_ms_.size());
  }

 private:
  std::size_t warmup_;
  std::uint64_t samples_ = 0;
  Clock::time_point start_{};
  std::array<std::int64_t, kComponentCount> current_{};
  std::array<std::int64_t, kComponentCount> component_ns_{};
  std::vector<double> totals_ms_;
};

/// Adds the lifetime of the scope to one component. A null recorder makes
/// it a no-op.
class ScopedTimer {
 public:
  ScopedTimer(LatencyRecorder* rec, Component c) : rec_(rec), c_(c) {
    if (rec_) start_ = LatencyRecorder::Clock::now();
  }
  ~ScopedTimer() {
    if (rec_) rec_->add(c_, LatencyRecorder::Clock::now() - start_);
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  LatencyRecorder* rec_;
  Component c_;
  LatencyRecorder::Clock::time_point start_{};
};

struct HistogramBin {
  double lo_ms = 0.0;
  double hi_ms = 0.0;
  std::uint64_t count = 0;
  double density = 0.0;  // count / (n * width); 0 for zero-width bins
};

struct QosReport {
  double mean_latency_ms = 0.0;
  double throughput_sps = 0.0;
  std::uint64_t timed_samples = 0;
  std::vector<HistogramBin> latency_pdf;
  std::array<double, kComponentCount> breakdown_ms{};
};

/// Equal-width histogram over [min, max]. When all values coincide every
/// count lands in the first bin.
inline std::vector<HistogramBin> latency_histogram(std::span<const double> values, std::size_t bins = 50) {
  std::vector<HistogramBin> out;
  if (values.empty() || bins == 0) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);
  out.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo_ms = lo + width * static_cast<double>(b);
    out[b].hi_ms = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : values) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
    ++out[std::min(b, bins - 1)].count;
  }
  const double n = static_cast<double>(values.size());
  for (auto& bin : out) bin.density = width > 0.0 ? static_cast<double>(bin.count) / (n * width) : 0.0;
  return out;
}

inline QosReport qos_report(const LatencyRecorder& rec, double wall_seconds, std::uint64_t evaluated,
                            std::size_t bins = 50) {
  QosReport q;
  const auto& t = rec.totals_ms();
  q.timed_samples = t.size();
  if (!t.empty()) {
    double s = 0.0;
    for (double v : t) s += v;
    q.mean_latency_ms = s / static_cast<double>(t.size());
  }
  q.throughput_sps = wall_seconds > 0.0 ? static_cast<double>(evaluated) / wall_seconds : 0.0;
  q.latency_pdf = latency_histogram(t, bins);
  for (std::size_t i = 0; i < kComponentCount; ++i) q.breakdown_ms[i] = rec.component_mean_ms(static_cast<Component>(i));
  return q;
}

// ---------------------------------------------------------------------------
// Prequential (test-then-train) evaluation
// ---------------------------------------------------------------------------

/// Anything evaluated prequentially: predict on the features, then learn the
/// labeled sample given that prediction.
template <class M>
concept PrequentialMethod = requires(M& m, const LabeledSample& s, const ClassProbabilities& p, LatencyRecorder* r) {
  { m.predict(s.sample, r) } -> std::same_as<ClassProbabilities>;
  m.learn(s, p, r);
};

struct PrequentialConfig {
  std::size_t curve_stride = 50;
  std::size_t warmup = 100;
};

struct CurvePoint {
  std::uint64_t index = 0;
  double accuracy = 0.0;
};

struct PrequentialResult {
  ConfusionCounts counts;
  std::vector<CurvePoint> curve;
  LatencyRecorder latency;
  double wall_seconds = 0.0;
  std::vector<ClassId> predictions;
  std::vector<ClassId> truths;
  std::optional<std::string> fault;  // set when the method threw mid-stream

  /// Accuracy over the last `n` evaluated samples.
  double tail_accuracy(std::size_t n) const {
    const std::size_t k = std::min(n, predictions.size());
    if (k == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = predictions.size() - k; i < predictions.size(); ++i) hit += predictions[i] == truths[i];
    return static_cast<double>(hit) / static_cast<double>(k);
  }
};

template <PrequentialMethod M>
PrequentialResult prequential_run(M& method, std::span<const LabeledSample> stream, std::size_t num_classes,
                                  PrequentialConfig config = {}) {
  PrequentialResult res{ConfusionCounts(num_classes), {}, LatencyRecorder(config.warmup), 0.0, {}, {}, {}};
  res.predictions.reserve(stream.size());
  res.truths.reserve(stream.size());
  const auto t0 = LatencyRecorder::Clock::now();
  try {
    for (const auto& s : stream) {
      res.latency.begin_sample();
      const ClassProbabilities p = method.predict(s.sample, &res.latency);
      res.counts.add(s.label, static_cast<ClassId>(p.predicted));
      res.predictions.push_back(static_cast<ClassId>(p.predicted));
      res.truths.push_back(s.label);
      method.learn(s, p, &res.latency);
      res.latency.end_sample();
      if (config.curve_stride > 0 && res.counts.total() % config.curve_stride == 0)
        res.curve.push_back({s.sample.index, res.counts.accuracy()});
    }
  } catch (const std::exception& e) {
    res.fault = e.what();
  }
  res.wall_seconds = std::chrono::duration<double>(LatencyRecorder::Clock::now() - t0).count();
  return res;
}

}  // namespace msana
