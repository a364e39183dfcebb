#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "msana/core.hpp"
#include "msana/serialize.hpp"

namespace msana {

enum class DriftStatus : std::uint8_t { none = 0, warning = 1, drift = 2 };

inline std::string_view to_string(DriftStatus s) {
  switch (s) {
    case DriftStatus::warning: return "warning";
    case DriftStatus::drift: return "drift";
    default: return "none";
  }
}

struct DriftSignal {
  DriftStatus status = DriftStatus::none;
  std::uint64_t at_index = 0;

  bool is_drift() const noexcept { return status == DriftStatus::drift; }
  bool is_warning() const noexcept { return status == DriftStatus::warning; }
};

// ---------------------------------------------------------------------------
// ADWIN
//
// Exponential histogram of buckets: row r holds up to max_buckets buckets of
// 2^r observations each; row 0 is the newest. Every `clock` insertions (once
// the window exceeds `grace`) all bucket boundaries are tested as cut points
// between an old sub-window W0 and a new one W1; on a cut the oldest bucket
// is dropped and the scan restarts.
// ---------------------------------------------------------------------------

class Adwin {
 public:
  struct Config {
    double delta = 0.002;
    std::size_t max_buckets = 5;
    std::size_t clock = 32;
    std::size_t min_subwindow = 5;
    std::size_t grace = 10;
  };

  Adwin() : Adwin(Config{}) {}
  explicit Adwin(Config config) : config_(config) {
    if (!(config_.delta > 0.0 && config_.delta < 1.0)) throw std::invalid_argument("adwin delta must be in (0,1)");
    if (config_.max_buckets < 2 || config_.clock == 0) throw std::invalid_argument("bad adwin bucket/clock config");
  }

  /// Inserts a value in [0, 1]. Returns drift when a cut shrank the window.
  DriftSignal update(double value, std::uint64_t index = 0) {
    if (!(value >= 0.0 && value <= 1.0)) throw std::out_of_range("adwin value must be in [0,1]");
    insert(value);
    compress();
    ++ticks_;
    DriftSignal sig{DriftStatus::none, index};
    if (ticks_ % config_.clock == 0 && width_ > config_.grace && detect_cut()) {
      sig.status = DriftStatus::drift;
      ++detections_;
    }
    return sig;
  }

  void reset() {
    rows_.clear();
    width_ = 0;
    total_ = 0.0;
    variance_ = 0.0;
    ticks_ = 0;
  }

  std::uint64_t width() const noexcept { return width_; }
  double estimation() const noexcept { return width_ ? total_ / static_cast<double>(width_) : 0.0; }
  /// Population variance of the window.
  double variance() const noexcept { return width_ ? variance_ / static_cast<double>(width_) : 0.0; }
  std::size_t bucket_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
  }
  std::uint64_t detections() const noexcept { return detections_; }
  const Config& config() const noexcept { return config_; }

  /// Sum of the bucket sizes, which must equal width().
  std::uint64_t bucket_width_total() const noexcept {
    std::uint64_t n = 0;
    for (std::size_t r = 0; r < rows_.size(); ++r) n += rows_[r].size() * (std::uint64_t{1} << r);
    return n;
  }

  void save(BinaryWriter& w) const {
    w.put(config_.delta);
    w.put_size(config_.max_buckets);
    w.put_size(config_.clock);
    w.put(width_);
    w.put(total_);
    w.put(variance_);
    w.put(ticks_);
    w.put(detections_);
    w.put_size(rows_.size());
    for (const auto& row : rows_) {
      w.put_size(row.size());
      for (const auto& b : row) {
        w.put(b.total);
        w.put(b.variance);
      }
    }
  }

  void load(BinaryReader& r) {
    config_.delta = r.get<double>();
    config_.max_buckets = r.get_size();
    config_.clock = r.get_size();
    width_ = r.get<std::uint64_t>();
    total_ = r.get<double>();
    variance_ = r.get<double>();
    ticks_ = r.get<std::uint64_t>();
    detections_ = r.get<std::uint64_t>();
    rows_.assign(r.get_size(), {});
    for (auto& row : rows_) {
      const auto n = r.get_size();
      for (std::size_t i = 0; i < n; ++i) {
        Bucket b;
        b.total = r.get<double>();
        b.variance = r.get<double>();
        row.push_back(b);
      }
    }
  }

 private:
  struct Bucket {
    double total = 0.0;
    double variance = 0.0;  // sum of squared deviations inside the bucket
  };

  static double row_size(std::size_t r) { return static_cast<double>(std::uint64_t{1} << r); }

  void insert(double value) {
    if (rows_.empty()) rows_.emplace_back();
    rows_[0].push_back({value, 0.0});
    if (width_ > 0) {
      const double n = static_cast<double>(width_);
      const double diff = value - total_ / n;
      variance_ += n * diff * diff / (n + 1.0);
    }
    ++width_;
    total_ += value;
  }

  void compress() {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r].size() <= config_.max_buckets) break;
      if (r + 1 == rows_.size()) rows_.emplace_back();
      // Front of each row is its oldest bucket.
      const Bucket a = rows_[r][0];
      const Bucket b = rows_[r][1];
      rows_[r].pop_front();
      rows_[r].pop_front();
      const double n = row_size(r);
      const double mean_a = a.total / n;
      const double mean_b = b.total / n;
      const double merged_var = a.variance + b.variance + n * n * (mean_a - mean_b) * (mean_a - mean_b) / (2.0 * n);
      rows_[r + 1].push_back({a.total + b.total, merged_var});
    }
  }

  void drop_oldest() {
    auto& row = rows_.back();
    const std::size_t r = rows_.size() - 1;
    const Bucket b = row.front();
    const double n1 = row_size(r);
    width_ -= static_cast<std::uint64_t>(n1);
    total_ -= b.total;
    if (width_ > 0) {
      const double n = static_cast<double>(width_);
      const double diff = b.total / n1 - total_ / n;
      variance_ -= b.variance + n1 * n * diff * diff / (n1 + n);
      if (variance_ < 0.0) variance_ = 0.0;
    } else {
      variance_ = 0.0;
      total_ = 0.0;
    }
    row.pop_front();
    while (!rows_.empty() && rows_.back().empty()) rows_.pop_back();
  }

  bool cut_expression(double n0, double n1, double u0, double u1) const {
    const double n = static_cast<double>(width_);
    const double diff = std::abs(u0 / n0 - u1 / n1);
    const double v = variance();
    const double dd = std::log(2.0 * std::log(n) / config_.delta);
    const double m0 = n0 - static_cast<double>(config_.min_subwindow) + 1.0;
    const double m1 = n1 - static_cast<double>(config_.min_subwindow) + 1.0;
    const double m = 1.0 / m0 + 1.0 / m1;
    const double eps = std::sqrt(2.0 * m * v * dd) + 2.0 / 3.0 * dd * m;
    return diff >= eps;
  }

  bool detect_cut() {
    bool changed = false;
    bool again = true;
    const double min_sub = static_cast<double>(config_.min_subwindow);
    while (again && width_ > 0) {
      again = false;
      double n0 = 0.0, u0 = 0.0;
      double n1 = static_cast<double>(width_), u1 = total_;
      // Walk from the oldest bucket towards the newest, stopping before the
      // newest bucket so W1 is never empty.
      for (std::size_t r = rows_.size(); r-- > 0 && !again;) {
        const auto& row = rows_[r];
        for (std::size_t k = 0; k < row.size(); ++k) {
          if (r == 0 && k + 1 == row.size()) break;
          const double sz = row_size(r);
          n0 += sz;
          n1 -= sz;
          u0 += row[k].total;
          u1 -= row[k].total;
          if (n0 >= min_sub && n1 >= min_sub && cut_expression(n0, n1, u0, u1)) {
            drop_oldest();
            changed = true;
            again = true;
            break;
          }
        }
      }
    }
    return changed;
  }

  Config config_;
  std::vector<std::deque<Bucket>> rows_;
  std::uint64_t width_ = 0;
  double total_ = 0.0;
  double variance_ = 0.0;
  std::uint64_t ticks_ = 0;
  std::uint64_t detections_ = 0;
};

inline DriftSignal adwin_update(Adwin& state, double value, std::uint64_t index = 0) {
  return state.update(value, index);
}

// ---------------------------------------------------------------------------
// EDDM
//
// Tracks the running mean p' and standard deviation s' of the distance (in
// samples) between consecutive errors. Once min_errors errors have been seen,
// (p' + 2s') / (p'max + 2s'max) below alpha is a warning and below beta a
// drift; a drift resets all statistics.
// ---------------------------------------------------------------------------

/// The EDDM test statistic for given current and maximal (mean, std) pairs.
inline double eddm_ratio(double p_avg, double s_avg, double p_max, double s_max) {
  const double denom = p_max + 2.0 * s_max;
  return denom > 0.0 ? (p_avg + 2.0 * s_avg) / denom : 1.0;
}

class Eddm {
 public:
  struct Config {
    double alpha = 0.95;
    double beta = 0.90;
    std::uint64_t min_errors = 30;
  };

  Eddm() : Eddm(Config{}) {}
  explicit Eddm(Config config) : config_(config) {
    if (!(config_.beta > 0.0 && config_.beta < config_.alpha && config_.alpha <= 1.0))
      throw std::invalid_argument("eddm thresholds must satisfy 0 < beta < alpha <= 1");
  }

  DriftSignal update(bool prediction_correct, std::uint64_t index) {
    if (last_index_ && index <= *last_index_) throw std::invalid_argument("eddm indices must strictly increase");
    if (!origin_) origin_ = index;
    last_index_ = index;
    DriftSignal sig{DriftStatus::none, index};
    if (prediction_correct) return sig;

    // The first error after a (re)start is measured from the sample before
    // the origin, so an error on the very first sample has distance 1.
    const double distance =
        static_cast<double>(last_error_ ? index - *last_error_ : index - *origin_ + 1);
    last_error_ = index;
    ++errors_;
    const double n = static_cast<double>(errors_);
    const double old_mean = p_avg_;
    p_avg_ += (distance - p_avg_) / n;
    m2_ += (distance - p_avg_) * (distance - old_mean);
    s_avg_ = std::sqrt(std::max(0.0, m2_ / n));

    if (errors_ < config_.min_errors) return sig;
    const double level = p_avg_ + 2.0 * s_avg_;
    if (level > p_max_ + 2.0 * s_max_) {
      p_max_ = p_avg_;
      s_max_ = s_avg_;
    }
    ratio_ = eddm_ratio(p_avg_, s_avg_, p_max_, s_max_);
    if (ratio_ < config_.beta) {
      sig.status = DriftStatus::drift;
      ++detections_;
      reset_statistics(index);
    } else if (ratio_ < config_.alpha) {
      sig.status = DriftStatus::warning;
    }
    return sig;
  }

  /// Full reset; the next observed index starts a fresh distance origin.
  void reset() {
    reset_statistics(0);
    origin_.reset();
    last_index_.reset();
  }

  double p_avg() const noexcept { return p_avg_; }
  double s_avg() const noexcept { return s_avg_; }
  double p_max() const noexcept { return p_max_; }
  double s_max() const noexcept { return s_max_; }
  double ratio() const noexcept { return ratio_; }
  std::uint64_t error_count() const noexcept { return errors_; }
  std::uint64_t detections() const noexcept { return detections_; }
  const Config& config() const noexcept { return config_; }

  void save(BinaryWriter& w) const {
    w.put(config_.alpha);
    w.put(config_.beta);
    w.put(config_.min_errors);
    w.put(p_avg_);
    w.put(m2_);
    w.put(s_avg_);
    w.put(p_max_);
    w.put(s_max_);
    w.put(ratio_);
    w.put(errors_);
    w.put(detections_);
    w.put(origin_.value_or(UINT64_MAX));
    w.put(last_error_.value_or(UINT64_MAX));
    w.put(last_index_.value_or(UINT64_MAX));
  }

  void load(BinaryReader& r) {
    config_.alpha = r.get<double>();
    config_.beta = r.get<double>();
    config_.min_errors = r.get<std::uint64_t>();
    p_avg_ = r.get<double>();
    m2_ = r.get<double>();
    s_avg_ = r.get<double>();
    p_max_ = r.get<double>();
    s_max_ = r.get<double>();
    ratio_ = r.get<double>();
    errors_ = r.get<std::uint64_t>();
    detections_ = r.get<std::uint64_t>();
    auto opt = [](std::uint64_t v) { return v == UINT64_MAX ? std::nullopt : std::optional<std::uint64_t>(v); };
    origin_ = opt(r.get<std::uint64_t>());
    last_error_ = opt(r.get<std::uint64_t>());
    last_index_ = opt(r.get<std::uint64_t>());
  }

 private:
  void reset_statistics(std::uint64_t index) {
    p_avg_ = m2_ = s_avg_ = p_max_ = s_max_ = 0.0;
    ratio_ = 1.0;
    errors_ = 0;
    last_error_.reset();
    origin_ = index + 1;
  }

  Config config_;
  double p_avg_ = 0.0, m2_ = 0.0, s_avg_ = 0.0;
  double p_max_ = 0.0, s_max_ = 0.0;
  double ratio_ = 1.0;
  std::uint64_t errors_ = 0;
  std::uint64_t detections_ = 0;
  std::optional<std::uint64_t> origin_;
  std::optional<std::uint64_t> last_error_;
  std::optional<std::uint64_t> last_index_;
};

inline DriftSignal eddm_update(Eddm& state, bool prediction_correct, std::uint64_t index) {
  return state.update(prediction_correct, index);
}

// ---------------------------------------------------------------------------
// Error-rate ADWIN: a cut only counts as drift when the error estimate went
// up. A falling error rate (a model still learning) is not a concept change.
// ---------------------------------------------------------------------------

class ErrorAdwin {
 public:
  ErrorAdwin() = default;
  explicit ErrorAdwin(Adwin::Config config) : adwin_(config) {}

  DriftSignal update(bool error, std::uint64_t index) {
    const double before = adwin_.estimation();
    auto sig = adwin_.update(error ? 1.0 : 0.0, index);
    if (sig.is_drift() && !(adwin_.estimation() > before)) sig.status = DriftStatus::none;
    return sig;
  }

  void reset() { adwin_.reset(); }
  const Adwin& adwin() const noexcept { return adwin_; }
  void save(BinaryWriter& w) const { adwin_.save(w); }
  void load(BinaryReader& r) { adwin_.load(r); }

 private:
  Adwin adwin_;
};

// ---------------------------------------------------------------------------
// Dual detector: drift only when ADWIN and EDDM both fire within `window`
// samples of each other (window 0 = same sample). Both reset afterwards.
// ---------------------------------------------------------------------------

class DualDetector {
 public:
  struct Config {
    Adwin::Config adwin{};
    Eddm::Config eddm{};
    std::uint64_t window = 100;
  };

  struct Result {
    DriftSignal adwin;
    DriftSignal eddm;
    DriftSignal combined;
  };

  DualDetector() : DualDetector(Config{}) {}
  explicit DualDetector(Config config) : config_(config), adwin_(config.adwin), eddm_(config.eddm) {}

  Result update(bool prediction_correct, std::uint64_t index) {
    Result res;
    res.adwin = adwin_.update(!prediction_correct, index);
    res.eddm = eddm_.update(prediction_correct, index);
    res.combined = {DriftStatus::none, index};
    if (res.adwin.is_drift()) {
      ++adwin_drifts_;
      last_adwin_ = index;
    }
    if (res.eddm.is_drift()) {
      ++eddm_drifts_;
      last_eddm_ = index;
    }
    if (last_adwin_ && index - *last_adwin_ > config_.window) last_adwin_.reset();
    if (last_eddm_ && index - *last_eddm_ > config_.window) last_eddm_.reset();
    if (last_adwin_ && last_eddm_ && (res.adwin.is_drift() || res.eddm.is_drift())) {
      res.combined.status = DriftStatus::drift;
      ++combined_drifts_;
      adwin_.reset();
      eddm_.reset();
      last_adwin_.reset();
      last_eddm_.reset();
    }
    return res;
  }

  std::uint64_t adwin_drifts() const noexcept { return adwin_drifts_; }
  std::uint64_t eddm_drifts() const noexcept { return eddm_drifts_; }
  std::uint64_t combined_drifts() const noexcept { return combined_drifts_; }
  const Config& config() const noexcept { return config_; }
  const Adwin& adwin() const noexcept { return adwin_.adwin(); }
  const Eddm& eddm() const noexcept { return eddm_; }

  void save(BinaryWriter& w) const {
    adwin_.save(w);
    eddm_.save(w);
    w.put(last_adwin_.value_or(UINT64_MAX));
    w.put(last_eddm_.value_or(UINT64_MAX));
    w.put(adwin_drifts_);
    w.put(eddm_drifts_);
    w.put(combined_drifts_);
  }

 private:
  Config config_;
  ErrorAdwin adwin_;
  Eddm eddm_;
  std::optional<std::uint64_t> last_adwin_;
  std::optional<std::uint64_t> last_eddm_;
  std::uint64_t adwin_drifts_ = 0;
  std::uint64_t eddm_drifts_ = 0;
  std::uint64_t combined_drifts_ = 0;
};

}  // namespace msana
