#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msana {

using ClassId = std::uint32_t;
using FeatureNames = std::shared_ptr<const std::vector<std::string>>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data problem (bad CSV row, unreadable file). Carries the 1-based
/// data row number when one applies, 0 otherwise.
class StreamError : public Error {
 public:
  StreamError(const std::string& what, std::size_t row = 0)
      : Error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {}) : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class InsufficientStatistics : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Warning tally. Non-fatal conditions (dirty cells, skipped updates, empty
// rebalancing pools) are counted here instead of aborting the stream.
// ---------------------------------------------------------------------------

class Warnings {
 public:
  void add(std::string_view key, std::uint64_t n = 1) { counts_[std::string(key)] += n; }
  std::uint64_t count(std::string_view key) const {
    auto it = counts_.find(std::string(key));
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [_, n] : counts_) t += n;
    return t;
  }
  const std::map<std::string, std::uint64_t>& all() const noexcept { return counts_; }
  void merge(const Warnings& other) {
    for (const auto& [k, n] : other.counts_) counts_[k] += n;
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

inline void warn(Warnings* sink, std::string_view key) {
  if (sink) sink->add(key);
}

// ---------------------------------------------------------------------------
// Stream records
// ---------------------------------------------------------------------------

struct Sample {
  std::vector<double> features;
  FeatureNames feature_names;
  std::uint64_t index = 0;

  std::size_t size() const noexcept { return features.size(); }
  std::span<const double> view() const noexcept { return features; }
};

struct LabeledSample {
  Sample sample;
  ClassId label = 0;
};

inline FeatureNames make_feature_names(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

inline FeatureNames default_feature_names(std::size_t d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t i = 0; i < d; ++i) names.push_back("f" + std::to_string(i));
  return make_feature_names(std::move(names));
}

// Index of the largest entry, lowest index on ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Per-class probability vector plus its argmax.
struct ClassProbabilities {
  std::vector<double> probs;
  ClassId predicted = 0;

  static ClassProbabilities uniform(std::size_t num_classes) {
    ClassProbabilities p;
    p.probs.assign(num_classes, 1.0 / static_cast<double>(num_classes));
    p.predicted = 0;
    return p;
  }

  /// Normalizes non-negative scores. An all-zero (or empty-mass) score vector
  /// becomes uniform.
  static ClassProbabilities from_scores(std::vector<double> scores) {
    double total = 0.0;
    for (double& s : scores) {
      if (!(s > 0.0)) s = 0.0;
      total += s;
    }
    if (!(total > 0.0)) return uniform(scores.size());
    for (double& s : scores) s /= total;
    ClassProbabilities p;
    p.predicted = static_cast<ClassId>(argmax(scores));
    p.probs = std::move(scores);
    return p;
  }

  std::size_t num_classes() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

inline bool is_valid(const ClassProbabilities& p, double tol = 1e-6) {
  if (p.probs.empty()) return false;
  double total = 0.0;
  for (double v : p.probs) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tol && p.predicted == argmax(p.probs);
}

struct StreamSchema {
  std::size_t num_classes = 2;
  std::vector<std::string> feature_names;
  std::string label_column = "label";
  /// Optional string-label mapping; empty means labels are integer ids.
  std::map<std::string, ClassId> label_map;
  /// Columns ignored during ingestion (identifiers, timestamps).
  std::vector<std::string> drop_columns;

  void validate() const {
    if (num_classes < 2) throw SchemaError("schema: class_count must be >= 2");
    if (label_column.empty()) throw SchemaError("schema: label_column must be set");
    for (const auto& [name, id] : label_map)
      if (id >= num_classes)
        throw SchemaError("schema: label_map entry '" + name + "' exceeds class_count");
  }
};

}  // namespace msana
