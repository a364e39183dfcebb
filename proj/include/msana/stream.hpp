#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msana/core.hpp"
#include "msana/kv.hpp"
#include "msana/rng.hpp"

namespace msana {

// ---------------------------------------------------------------------------
// Schema files
// ---------------------------------------------------------------------------

/// Parses a schema file body. Keys: label_column, class_count, label_map
/// ("name:id, name:id"), drop_columns ("a, b"), features ("a, b").
inline StreamSchema parse_schema(std::string_view text) {
  StreamSchema schema;
  bool have_label = false;
  bool have_count = false;
  for (const auto& kv : parse_key_values(text)) {
    if (kv.key == "label_column") {
      schema.label_column = kv.value;
      have_label = true;
    } else if (kv.key == "class_count") {
      if (!parse_integer(kv.value, schema.num_classes))
        throw SchemaError("schema: class_count is not an integer");
      have_count = true;
    } else if (kv.key == "label_map") {
      for (const auto& entry : split_list(kv.value)) {
        const auto colon = entry.rfind(':');
        ClassId id = 0;
        if (colon == std::string::npos || !parse_integer(entry.substr(colon + 1), id))
          throw SchemaError("schema: bad label_map entry '" + entry + "'");
        schema.label_map[std::string(trim(std::string_view(entry).substr(0, colon)))] = id;
      }
    } else if (kv.key == "drop_columns") {
      schema.drop_columns = split_list(kv.value);
    } else if (kv.key == "features") {
      schema.feature_names = split_list(kv.value);
    } else {
      throw SchemaError("schema: unknown key '" + kv.key + "'");
    }
  }
  if (!have_label) throw SchemaError("schema: label_column missing");
  if (!have_count) throw SchemaError("schema: class_count missing");
  schema.validate();
  return schema;
}

inline StreamSchema load_schema(const std::string& path) { return parse_schema(read_text_file(path)); }

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace detail

/// Single-consumer CSV reader. Non-numeric or non-finite feature cells are
/// replaced by 0.0 and tallied under "non_numeric_cell".
class CsvStreamReader {
 public:
  CsvStreamReader(const std::string& path, StreamSchema schema)
      : schema_(std::move(schema)), in_(path, std::ios::binary) {
    schema_.validate();
    if (!in_) throw StreamError("cannot open CSV: " + path);
    std::string header;
    if (!std::getline(in_, header)) throw SchemaError("CSV has no header row: " + path);
    ++line_;
    strip_cr(header);
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    const auto cols = detail::split_csv_line(header);
    num_columns_ = cols.size();
    std::vector<std::string> names;
    std::optional<std::size_t> label_col;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::string name(trim(cols[i]));
      if (name == schema_.label_column) {
        label_col = i;
      } else if (std::find(schema_.drop_columns.begin(), schema_.drop_columns.end(), name) ==
                 schema_.drop_columns.end()) {
        feature_cols_.push_back(i);
        names.push_back(name);
      }
    }
    if (!label_col) throw SchemaError("label column '" + schema_.label_column + "' not in header");
    label_col_ = *label_col;
    if (!schema_.feature_names.empty() && schema_.feature_names != names)
      throw SchemaError("CSV header does not match schema feature list");
    schema_.feature_names = names;
    names_ = make_feature_names(std::move(names));
  }

  /// Next record, or nullopt at end of file. Throws StreamError on a
  /// malformed row (wrong column count, unparseable label).
  std::optional<LabeledSample> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      strip_cr(line);
      if (trim(line).empty()) continue;
      const auto cells = detail::split_csv_line(line);
      if (cells.size() != num_columns_)
        throw StreamError("expected " + std::to_string(num_columns_) + " columns, got " +
                              std::to_string(cells.size()),
                          line_);
      LabeledSample out;
      out.label = parse_label(cells[label_col_]);
      out.sample.features.reserve(feature_cols_.size());
      for (std::size_t col : feature_cols_) {
        double v = 0.0;
        if (!parse_double(cells[col], v) || !std::isfinite(v)) {
          v = 0.0;
          warnings_.add("non_numeric_cell");
        }
        out.sample.features.push_back(v);
      }
      out.sample.feature_names = names_;
      out.sample.index = next_index_++;
      return out;
    }
    return std::nullopt;
  }

  const StreamSchema& schema() const noexcept { return schema_; }
  const FeatureNames& feature_names() const noexcept { return names_; }
  const Warnings& warnings() const noexcept { return warnings_; }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  ClassId parse_label(const std::string& raw) const {
    const std::string cell(trim(raw));
    if (!schema_.label_map.empty()) {
      auto it = schema_.label_map.find(cell);
      if (it == schema_.label_map.end()) throw StreamError("label '" + cell + "' not in label_map", line_);
      return it->second;
    }
    ClassId id = 0;
    if (!parse_integer(cell, id)) {
      // Tolerate integral floats such as "1.0".
      double d = 0.0;
      if (!parse_double(cell, d) || d < 0 || d != std::floor(d))
        throw StreamError("label '" + cell + "' is not a class id", line_);
      id = static_cast<ClassId>(d);
    }
    if (id >= schema_.num_classes)
      throw StreamError("label " + std::to_string(id) + " >= class_count", line_);
    return id;
  }

  StreamSchema schema_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::size_t num_columns_ = 0;
  std::size_t label_col_ = 0;
  std::vector<std::size_t> feature_cols_;
  FeatureNames names_;
  std::uint64_t next_index_ = 0;
  Warnings warnings_;
};

struct CsvStream {
  std::vector<LabeledSample> samples;
  StreamSchema schema;
  Warnings warnings;
};

inline CsvStream read_csv_stream(const std::string& path, const StreamSchema& schema) {
  CsvStreamReader reader(path, schema);
  CsvStream out;
  while (auto s = reader.next()) out.samples.push_back(std::move(*s));
  out.schema = reader.schema();
  out.warnings = reader.warnings();
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic drift streams
//
// Three uniform [0,1) features; each concept is a linear threshold rule
// sum(w_i * x_i) > 0.5. Concept A leans on x0, concept B on x2, so the
// relevant feature set changes at the drift. Optional extra features are
// pure noise.
// ---------------------------------------------------------------------------

enum class Concept : std::uint8_t { a = 0, b = 1 };

inline constexpr std::size_t kConceptFeatures = 3;
inline constexpr std::array<double, kConceptFeatures> kConceptAWeights{0.7, 0.2, 0.1};
inline constexpr std::array<double, kConceptFeatures> kConceptBWeights{0.1, 0.2, 0.7};
inline constexpr double kConceptThreshold = 0.5;

inline ClassId concept_label(Concept c, std::span<const double> x) {
  const auto& w = c == Concept::a ? kConceptAWeights : kConceptBWeights;
  double s = 0.0;
  for (std::size_t i = 0; i < kConceptFeatures; ++i) s += w[i] * x[i];
  return s > kConceptThreshold ? 1 : 0;
}

struct SyntheticStream {
  std::vector<LabeledSample> samples;
  std::vector<Concept> concepts;  // generating concept per sample
  std::vector<bool> flipped;      // label noise applied per sample
};

namespace detail {

inline void check_noise(double noise) {
  if (!(noise >= 0.0 && noise < 0.5)) throw std::invalid_argument("noise must be in [0, 0.5)");
}

template <class ConceptOf>
SyntheticStream generate(std::uint64_t seed, std::size_t n, double noise, std::size_t extra_features,
                         ConceptOf&& concept_of) {
  Rng rng(seed);
  const std::size_t d = kConceptFeatures + extra_features;
  auto names = default_feature_names(d);
  SyntheticStream out;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    s.sample.features.resize(d);
    for (double& v : s.sample.features) v = rng.uniform();
    s.sample.feature_names = names;
    s.sample.index = i;
    const Concept c = concept_of(i, rng);
    ClassId label = concept_label(c, s.sample.features);
    const bool flip = noise > 0.0 && rng.bernoulli(noise);
    if (flip) label = 1 - label;
    s.label = label;
    out.samples.push_back(std::move(s));
    out.concepts.push_back(c);
    out.flipped.push_back(flip);
  }
  return out;
}

}  // namespace detail

/// Concept A for indices [0, n_pre), concept B for [n_pre, n_pre + n_post).
inline SyntheticStream generate_abrupt_drift_stream(std::uint64_t seed, std::size_t n_pre,
                                                    std::size_t n_post, double noise,
                                                    std::size_t extra_features = 0) {
  if (n_pre == 0 || n_post == 0) throw std::invalid_argument("n_pre and n_post must be > 0");
  detail::check_noise(noise);
  return detail::generate(seed, n_pre + n_post, noise, extra_features,
                          [n_pre](std::size_t i, Rng&) { return i < n_pre ? Concept::a : Concept::b; });
}

/// Probability of concept B rises linearly from 0 to 1 across
/// [drift_center - drift_width/2, drift_center + drift_width/2].
inline double gradual_concept_b_probability(std::size_t i, std::size_t drift_center,
                                            std::size_t drift_width) {
  const double start = static_cast<double>(drift_center) - static_cast<double>(drift_width) / 2.0;
  return std::clamp((static_cast<double>(i) - start) / static_cast<double>(drift_width), 0.0, 1.0);
}

inline SyntheticStream generate_gradual_drift_stream(std::uint64_t seed, std::size_t n_total,
                                                     std::size_t drift_center, std::size_t drift_width,
                                                     double noise, std::size_t extra_features = 0) {
  if (!(drift_center > 0 && drift_center < n_total))
    throw std::invalid_argument("drift_center must lie inside the stream");
  if (drift_width == 0) throw std::invalid_argument("drift_width must be > 0");
  detail::check_noise(noise);
  return detail::generate(seed, n_total, noise, extra_features, [&](std::size_t i, Rng& rng) {
    const double p = gradual_concept_b_probability(i, drift_center, drift_width);
    if (p <= 0.0) return Concept::a;
    if (p >= 1.0) return Concept::b;
    return rng.bernoulli(p) ? Concept::b : Concept::a;
  });
}

}  // namespace msana
