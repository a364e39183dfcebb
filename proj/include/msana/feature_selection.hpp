#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "msana/core.hpp"
#include "msana/serialize.hpp"

namespace msana {

/// Active feature subset, indices into the original feature space in
/// ascending order.
struct FeatureMask {
  std::vector<std::size_t> selected;
  std::uint64_t fitted_at = 0;
  std::size_t k = 0;
  double var_threshold = 0.0;

  static FeatureMask all(std::size_t d) {
    FeatureMask m;
    m.selected.resize(d);
    std::iota(m.selected.begin(), m.selected.end(), std::size_t{0});
    m.k = d;
    return m;
  }

  bool operator==(const FeatureMask& o) const { return selected == o.selected; }
};

struct FeatureScores {
  std::vector<double> variances;     // per original feature
  std::vector<double> correlations;  // per candidate feature, 0 when undefined
};

namespace detail {

template <class GetValue>
double population_variance(std::size_t n, GetValue&& value) {
  double sum = 0.0;
  double lo = value(0), hi = lo;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = value(i);
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dv = value(i) - mean;
    ss += dv * dv;
  }
  return ss / static_cast<double>(n);
}

}  // namespace detail

/// Population variance (denominator n) of every feature over the batch.
inline std::vector<double> feature_variances(std::span<const LabeledSample> data) {
  if (data.empty()) throw std::invalid_argument("feature variance needs a non-empty batch");
  const std::size_t d = data.front().sample.size();
  std::vector<double> out(d);
  for (std::size_t f = 0; f < d; ++f)
    out[f] = detail::population_variance(data.size(), [&](std::size_t i) { return data[i].sample.features[f]; });
  return out;
}

/// Features whose population variance exceeds `threshold`, in original order.
inline std::vector<std::size_t> fit_variance_threshold(std::span<const LabeledSample> data, double threshold) {
  const auto vars = feature_variances(data);
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < vars.size(); ++f)
    if (vars[f] > threshold) keep.push_back(f);
  return keep;
}

/// Pearson correlation between feature `f` and the numeric class label.
/// Returns 0 when either side has zero variance.
inline double pearson_with_label(std::span<const LabeledSample> data, std::size_t f) {
  const double n = static_cast<double>(data.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : data) {
    mx += s.sample.features[f];
    my += static_cast<double>(s.label);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& s : data) {
    const double dx = s.sample.features[f] - mx;
    const double dy = static_cast<double>(s.label) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Keeps the k candidates with the largest |Pearson| against the label;
/// ties go to the lower feature index. Output is in ascending index order.
inline FeatureMask fit_select_k_best(std::span<const LabeledSample> data, std::span<const std::size_t> candidates,
                                     std::size_t k, FeatureScores* scores = nullptr) {
  if (candidates.empty()) throw std::invalid_argument("select-k-best: no candidate features");
  if (data.size() < 2) throw std::invalid_argument("select-k-best needs at least two samples");
  if (k == 0) throw std::invalid_argument("select-k-best: k must be >= 1");
  std::vector<double> abs_corr(candidates.size());
  if (scores) scores->correlations.assign(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double r = pearson_with_label(data, candidates[i]);
    abs_corr[i] = std::abs(r);
    if (scores) scores->correlations[i] = r;
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (abs_corr[a] != abs_corr[b]) return abs_corr[a] > abs_corr[b];
    return candidates[a] < candidates[b];
  });
  FeatureMask mask;
  mask.k = k;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) mask.selected.push_back(candidates[order[i]]);
  std::sort(mask.selected.begin(), mask.selected.end());
  return mask;
}

/// Variance filter followed by select-k-best over the full feature space.
/// If no feature passes the variance filter, every feature is kept as a
/// candidate so the mask never ends up empty.
inline FeatureMask fit_feature_mask(std::span<const LabeledSample> data, std::size_t k, double var_threshold,
                                    std::uint64_t fitted_at = 0) {
  auto candidates = fit_variance_threshold(data, var_threshold);
  if (candidates.empty()) {
    candidates.resize(data.front().sample.size());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }
  auto mask = fit_select_k_best(data, candidates, k);
  mask.fitted_at = fitted_at;
  mask.var_threshold = var_threshold;
  return mask;
}

inline std::vector<double> transform(const FeatureMask& mask, std::span<const double> x, std::size_t original_dim) {
  if (x.size() != original_dim) throw DimensionMismatch(original_dim, x.size());
  std::vector<double> out;
  out.reserve(mask.selected.size());
  for (std::size_t f : mask.selected) out.push_back(x[f]);
  return out;
}

/// Restricts a sample (and its feature names) to the mask.
inline Sample transform(const FeatureMask& mask, const Sample& x, std::size_t original_dim) {
  Sample out;
  out.features = transform(mask, x.features, original_dim);
  out.index = x.index;
  if (x.feature_names) {
    std::vector<std::string> names;
    for (std::size_t f : mask.selected) names.push_back((*x.feature_names)[f]);
    out.feature_names = make_feature_names(std::move(names));
  }
  return out;
}

/// Drift-triggered re-selection over the original feature space. A window
/// with fewer than two samples keeps the current mask.
inline FeatureMask ddfs_on_drift(const FeatureMask& current, std::span<const LabeledSample> recent_window,
                                 std::uint64_t index, Warnings* warnings = nullptr) {
  if (recent_window.size() < 2) {
    warn(warnings, "ddfs_window_too_small");
    return current;
  }
  return fit_feature_mask(recent_window, current.k, current.var_threshold, index);
}

inline void save(BinaryWriter& w, const FeatureMask& m) {
  w.put_size(m.selected.size());
  for (auto f : m.selected) w.put_size(f);
  w.put(m.fitted_at);
  w.put_size(m.k);
  w.put(m.var_threshold);
}

}  // namespace msana
