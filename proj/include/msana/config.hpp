#pragma once

#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <map>
#include <string>
#include <vector>

#include "msana/drift.hpp"
#include "msana/ensemble.hpp"
#include "msana/kv.hpp"
#include "msana/preprocessing.hpp"

namespace msana {

enum class SourceKind { synthetic_abrupt, synthetic_gradual, csv };

inline std::string_view to_string(SourceKind s) {
  switch (s) {
    case SourceKind::synthetic_abrupt: return "synthetic_abrupt";
    case SourceKind::synthetic_gradual: return "synthetic_gradual";
    default: return "csv";
  }
}

/// Every tunable of a run. Defaults are the documented ones; see README.
struct PipelineConfig {
  // source
  SourceKind source = SourceKind::synthetic_abrupt;
  std::string csv_path;
  std::string schema_path;
  std::size_t n_samples = 10000;
  std::size_t drift_at = 5000;
  std::size_t gradual_width = 1000;
  double noise = 0.05;
  std::size_t extra_features = 0;
  // protocol
  std::string method = "msana";
  double train_fraction = 0.1;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::size_t curve_stride = 50;
  std::size_t warmup = 100;
  std::size_t final_window = 2000;
  // preprocessing
  BalancerConfig balancer{};
  ScalerKind scaler = ScalerKind::minmax;
  // drift detection
  DualDetector::Config detector{};
  // feature selection
  std::size_t fs_k = 20;
  double fs_var_threshold = 0.0;
  // learners and ensemble
  LearnerParams learners{};
  EnsembleConfig ensemble{};
};

class ConfigSchema {
 public:
  struct Field {
    std::string key;
    std::string help;
    std::function<void(std::string_view)> set;
    std::function<std::string()> get;
  };

  explicit ConfigSchema(PipelineConfig& c) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    add_enum("source", "synthetic_abrupt | synthetic_gradual | csv", c.source,
             {{"synthetic_abrupt", SourceKind::synthetic_abrupt},
              {"synthetic_gradual", SourceKind::synthetic_gradual},
              {"csv", SourceKind::csv}});
    add_string("csv_path", "CSV stream (source = csv)", c.csv_path);
    add_string("schema_path", "schema file for the CSV", c.schema_path);
    add_size("n_samples", "synthetic stream length", c.n_samples, 2);
    add_size("drift_at", "abrupt drift index / gradual drift center", c.drift_at, 0);
    add_size("gradual_width", "gradual transition width", c.gradual_width, 1);
    add_double("noise", "label flip probability", c.noise, 0.0, 0.5, Bounds::closed_lo);
    add_size("extra_features", "uniform noise features appended", c.extra_features, 0);
    add_string("method", "msana or a single learner name", c.method);
    add_double("train_fraction", "hold-out share in (0,1)", c.train_fraction, 0.0, 1.0, Bounds::open);
    add_u64("seed", "master seed", c.seed);
    add_size("threads", "worker threads for the base models", c.threads, 1);
    add_size("curve_stride", "accuracy curve stride", c.curve_stride, 1);
    add_size("warmup", "samples excluded from latency statistics", c.warmup, 0);
    add_size("final_window", "samples in the final-window accuracy", c.final_window, 1);
    add_enum("balancer", "dros | drus | off", c.balancer.method,
             {{"dros", BalanceMethod::dros}, {"drus", BalanceMethod::drus}, {"off", BalanceMethod::off}});
    add_double("balance_threshold", "minority/majority ratio trigger in (0,1]", c.balancer.threshold, 0.0, 1.0,
               Bounds::closed_hi);
    add_size("balance_buffer", "balancing buffer size", c.balancer.buffer, 1);
    add_enum("scaler", "minmax | zscore", c.scaler, {{"minmax", ScalerKind::minmax}, {"zscore", ScalerKind::zscore}});
    add_double("adwin_delta", "ADWIN confidence in (0,1)", c.detector.adwin.delta, 0.0, 1.0, Bounds::open);
    add_double("eddm_alpha", "EDDM warning level", c.detector.eddm.alpha, 0.0, 1.0, Bounds::closed_hi);
    add_double("eddm_beta", "EDDM drift level", c.detector.eddm.beta, 0.0, 1.0, Bounds::open);
    add_u64("eddm_min_errors", "errors before EDDM tests apply", c.detector.eddm.min_errors);
    add_u64("dual_window", "AND-rule confirmation window", c.detector.window);
    add_size("fs_k", "features kept by select-k-best (capped at d)", c.fs_k, 1);
    add_double("fs_var_threshold", "variance filter threshold", c.fs_var_threshold, 0.0, kInf, Bounds::closed_lo);
    auto& L = c.learners;
    add_double("ht_grace_period", "tree grace period", L.tree.grace_period, 0.0, kInf, Bounds::open);
    add_double("ht_delta", "tree split confidence", L.tree.delta, 0.0, 1.0, Bounds::open);
    add_double("ht_tie_threshold", "tree tie threshold", L.tree.tie_threshold, 0.0, 1.0, Bounds::closed);
    add_double("efdt_reeval_period", "EFDT re-evaluation period", L.tree.efdt_reeval_period, 0.0, kInf, Bounds::open);
    add_size("arf_trees", "trees per forest", L.arf.trees, 1);
    add_double("arf_lambda", "online bagging Poisson rate", L.arf.lambda, 0.0, kInf, Bounds::open);
    add_size("arf_subspace", "features per leaf, 0 = ceil(sqrt(d))", L.arf.subspace, 0);
    add_double("arf_grace_period", "forest tree grace period", L.arf.tree.grace_period, 0.0, kInf, Bounds::open);
    add_double("arf_delta", "forest tree split confidence", L.arf.tree.delta, 0.0, 1.0, Bounds::open);
    add_double("arf_warning_delta", "forest ADWIN warning confidence", L.arf.warning_delta, 0.0, 1.0, Bounds::open);
    add_double("arf_drift_delta", "forest ADWIN drift confidence", L.arf.drift_delta, 0.0, 1.0, Bounds::open);
    add_size("knn_k", "neighbours", L.knn.k, 1);
    add_size("knn_window", "KNN window", L.knn.window, 1);
    add_size("sam_stm_max", "SAM-KNN short-term capacity", L.sam.stm_max, 1);
    add_size("sam_ltm_max", "SAM-KNN long-term capacity", L.sam.ltm_max, 2);
    add_double("pa_c", "PA aggressiveness", L.pa.C, 0.0, kInf, Bounds::open);
    add_double("epsilon", "weight smoothing constant", c.ensemble.epsilon, 0.0, kInf, Bounds::open);
    add_double("alpha_ratio", "window share before any drift", c.ensemble.alpha_ratio, 0.0, 1.0, Bounds::closed_hi);
    add_size("replay_buffer", "retained samples for re-fitting", c.ensemble.replay_buffer, 1);
    add_size("replay_min", "minimum replay length on drift", c.ensemble.replay_min, 1);
    add_bool("eq10_literal", "use the last drift index itself as window size", c.ensemble.eq10_literal);
  }

  const std::vector<Field>& fields() const noexcept { return fields_; }

  Field* find(std::string_view key) {
    for (auto& f : fields_)
      if (f.key == key) return &f;
    return nullptr;
  }

 private:
  [[noreturn]] static void bad(const std::string& key, std::string_view value, const std::string& expected) {
    throw ConfigError("invalid value '" + std::string(value) + "' for key '" + key + "': expected " + expected, key);
  }

  void add_string(std::string key, std::string help, std::string& ref) {
    fields_.push_back({key, std::move(help), [&ref](std::string_view v) { ref = std::string(trim(v)); },
                       [&ref] { return ref; }});
  }

  void add_size(std::string key, std::string help, std::size_t& ref, std::size_t min) {
    fields_.push_back({key, std::move(help),
                       [&ref, key, min](std::string_view v) {
                         std::size_t x = 0;
                         if (!parse_integer(v, x) || x < min) bad(key, v, "integer >= " + std::to_string(min));
                         ref = x;
                       },
                       [&ref] { return std::to_string(ref); }});
  }

  void add_u64(std::string key, std::string help, std::uint64_t& ref) {
    fields_.push_back({key, std::move(help),
                       [&ref, key](std::string_view v) {
                         std::uint64_t x = 0;
                         if (!parse_integer(v, x)) bad(key, v, "non-negative integer");
                         ref = x;
                       },
                       [&ref] { return std::to_string(ref); }});
  }

  enum class Bounds { open, closed_lo, closed_hi, closed };

  void add_double(std::string key, std::string help, double& ref, double lo, double hi, Bounds b) {
    fields_.push_back({key, std::move(help),
                       [=, &ref](std::string_view v) {
                         double x = 0.0;
                         if (!parse_double(v, x) || !std::isfinite(x)) bad(key, v, "a finite number");
                         const bool lo_in = b == Bounds::closed_lo || b == Bounds::closed;
                         const bool hi_in = b == Bounds::closed_hi || b == Bounds::closed;
                         const bool ok = (lo_in ? x >= lo : x > lo) && (hi_in ? x <= hi : x < hi);
                         if (!ok) bad(key, v, std::string("a number in ") + (lo_in ? "[" : "(") + fmt(lo) + ", " +
                                                  fmt(hi) + (hi_in ? "]" : ")"));
                         ref = x;
                       },
                       [&ref] { return fmt(ref); }});
  }

  static std::string fmt(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  void add_bool(std::string key, std::string help, bool& ref) {
    fields_.push_back({key, std::move(help),
                       [&ref, key](std::string_view v) {
                         const auto t = trim(v);
                         if (t == "true" || t == "1") {
                           ref = true;
                         } else if (t == "false" || t == "0") {
                           ref = false;
                         } else {
                           bad(key, v, "true or false");
                         }
                       },
                       [&ref] { return std::string(ref ? "true" : "false"); }});
  }

  template <class E>
  void add_enum(std::string key, std::string help, E& ref, std::vector<std::pair<std::string, E>> options) {
    fields_.push_back({key, std::move(help),
                       [&ref, key, options](std::string_view v) {
                         const auto t = trim(v);
                         for (const auto& [name, val] : options)
                           if (name == t) {
                             ref = val;
                             return;
                           }
                         std::string names;
                         for (const auto& o : options) names += (names.empty() ? "" : " | ") + o.first;
                         bad(key, v, names);
                       },
                       [&ref, options] {
                         for (const auto& [name, val] : options)
                           if (val == ref) return name;
                         return std::string("?");
                       }});
  }

  std::vector<Field> fields_;
};

inline std::string env_key(std::string_view key) {
  std::string out = "MSANA_";
  for (char ch : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

/// Cross-field checks, run after every key is applied.
inline void validate(const PipelineConfig& c) {
  if (c.source == SourceKind::csv) {
    if (c.csv_path.empty()) throw ConfigError("source = csv requires csv_path", "csv_path");
    if (c.schema_path.empty()) throw ConfigError("source = csv requires schema_path", "schema_path");
  } else {
    if (c.drift_at >= c.n_samples) throw ConfigError("drift_at must be < n_samples", "drift_at");
  }
  if (!(c.detector.eddm.beta < c.detector.eddm.alpha))
    throw ConfigError("eddm_beta must be < eddm_alpha", "eddm_beta");
  if (c.detector.adwin.delta <= 0.0) throw ConfigError("adwin_delta must be > 0", "adwin_delta");
}

/// Parses key=value text, applies MSANA_<KEY> environment overrides, and
/// validates. Unknown keys are rejected by name.
inline PipelineConfig parse_config(std::string_view text, bool use_env = true) {
  PipelineConfig c;
  ConfigSchema schema(c);
  std::map<std::string, std::size_t> seen;
  for (const auto& kv : parse_key_values(text)) {
    auto* f = schema.find(kv.key);
    if (!f) throw ConfigError("unknown config key '" + kv.key + "' (line " + std::to_string(kv.line) + ")", kv.key);
    if (seen.count(kv.key))
      throw ConfigError("duplicate config key '" + kv.key + "' (line " + std::to_string(kv.line) + ")", kv.key);
    seen[kv.key] = kv.line;
    f->set(kv.value);
  }
  if (use_env) {
    for (const auto& f : schema.fields())
      if (const char* v = std::getenv(env_key(f.key).c_str())) f.set(v);
  }
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::string& path, bool use_env = true) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const StreamError& e) {
    throw ConfigError(e.what(), "config");
  }
  return parse_config(text, use_env);
}

/// Effective configuration as ordered key/value pairs.
inline std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c) {
  PipelineConfig copy = c;
  ConfigSchema schema(copy);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : schema.fields()) out.emplace_back(f.key, f.get());
  return out;
}

}  // namespace msana
