#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msana/config.hpp"
#include "msana/drift.hpp"
#include "msana/ensemble.hpp"
#include "msana/evaluation.hpp"
#include "msana/feature_selection.hpp"
#include "msana/preprocessing.hpp"
#include "msana/stream.hpp"

namespace msana {

using json = nlohmann::json;

struct Event {
  std::uint64_t index = 0;
  std::string type;  // drift | reselect | refit_fs | retrain
  json payload;
};

struct LoadedStream {
  std::vector<LabeledSample> samples;
  StreamSchema schema;
  Warnings warnings;
};

/// Builds the configured stream. CSV problems surface as StreamError or
/// SchemaError.
inline LoadedStream load_stream(const PipelineConfig& c) {
  LoadedStream out;
  switch (c.source) {
    case SourceKind::synthetic_abrupt: {
      auto s = generate_abrupt_drift_stream(c.seed, c.drift_at, c.n_samples - c.drift_at, c.noise, c.extra_features);
      out.samples = std::move(s.samples);
      break;
    }
    case SourceKind::synthetic_gradual: {
      auto s = generate_gradual_drift_stream(c.seed, c.n_samples, c.drift_at, c.gradual_width, c.noise,
                                             c.extra_features);
      out.samples = std::move(s.samples);
      break;
    }
    case SourceKind::csv: {
      const auto schema = load_schema(c.schema_path);
      auto s = read_csv_stream(c.csv_path, schema);
      out.samples = std::move(s.samples);
      out.schema = std::move(s.schema);
      out.warnings = std::move(s.warnings);
      return out;
    }
  }
  out.schema.num_classes = 2;
  if (!out.samples.empty()) out.schema.feature_names = *out.samples.front().sample.feature_names;
  return out;
}

/// Methods accepted by `compare`, besides the ones that are named but not
/// provided.
inline bool is_out_of_scope_method(std::string_view m) { return m == "lb" || m == "srp" || m == "pwpae"; }

inline bool is_known_method(std::string_view m) {
  return m == "msana" || m == "ht-frozen" || parse_learner_kind(m).has_value();
}

/// Scaling, feature masking and class balancing shared by every method.
class Preprocessor {
 public:
  Preprocessor(const PipelineConfig& c, std::size_t num_classes, std::uint64_t seed)
      : scaler_(c.scaler), fs_k_(c.fs_k), fs_var_(c.fs_var_threshold),
        balancer_(num_classes, c.balancer, mix_seed(seed, 0xba1)) {}

  /// Batch-fits the scaler statistics and the initial feature mask.
  void fit(std::span<const LabeledSample> train) {
    if (train.empty()) throw StreamError("empty training batch");
    dim_ = train.front().sample.size();
    for (const auto& s : train) stats_.update(s.sample.features);
    const auto scaled = scale_batch(train);
    mask_ = fit_feature_mask(scaled, std::min(fs_k_, dim_), fs_var_, 0);
  }

  std::vector<double> scale(std::span<const double> x) const {
    return scaler_ == ScalerKind::minmax ? stats_.minmax_scale(x) : stats_.zscore_scale(x);
  }

  std::vector<double> mask(std::span<const double> scaled) const { return transform(mask_, scaled, dim_); }

  std::vector<double> prepare(std::span<const double> x) const { return mask(scale(x)); }

  std::vector<LabeledSample> scale_batch(std::span<const LabeledSample> batch) const {
    std::vector<LabeledSample> out;
    out.reserve(batch.size());
    for (const auto& s : batch) {
      LabeledSample t;
      t.sample.features = scale(s.sample.features);
      t.sample.index = s.sample.index;
      t.label = s.label;
      out.push_back(std::move(t));
    }
    return out;
  }

  void update_stats(std::span<const double> x) { stats_.update(x); }
  DynamicBalancer::Outcome balance(const LabeledSample& s) { return balancer_.observe(s); }

  const FeatureMask& current_mask() const noexcept { return mask_; }
  void set_mask(FeatureMask m) { mask_ = std::move(m); }
  std::size_t dim() const noexcept { return dim_; }
  const RunningStats& stats() const noexcept { return stats_; }
  const DynamicBalancer& balancer() const noexcept { return balancer_; }

  void save(BinaryWriter& w) const {
    stats_.save(w);
    msana::save(w, mask_);
    balancer_.save(w);
  }

 private:
  ScalerKind scaler_;
  std::size_t fs_k_;
  double fs_var_;
  std::size_t dim_ = 0;
  RunningStats stats_;
  FeatureMask mask_;
  DynamicBalancer balancer_;
};

/// A method under prequential evaluation.
class StreamMethod {
 public:
  virtual ~StreamMethod() = default;
  virtual std::string name() const = 0;
  virtual void initialize(std::span<const LabeledSample> train) = 0;
  virtual ClassProbabilities predict(const Sample& x, LatencyRecorder* rec) = 0;
  virtual void learn(const LabeledSample& s, const ClassProbabilities& prediction, LatencyRecorder* rec) = 0;
  virtual std::uint64_t state_hash() const = 0;
  /// Method-specific summary for results.json (deterministic content only).
  virtual json summary() const { return json::object(); }
  virtual const std::vector<Event>& events() const {
    static const std::vector<Event> none;
    return none;
  }
  virtual const std::vector<FeatureMask>& mask_history() const = 0;
  virtual Warnings warnings() const = 0;
};

/// Full pipeline: dynamic preprocessing, dual drift detection, drift-driven
/// feature re-selection and the leader/follower weighted ensemble.
class MsanaPipeline final : public StreamMethod {
 public:
  MsanaPipeline(const PipelineConfig& c, std::size_t num_classes, WorkerPool* pool = nullptr)
      : config_(c), num_classes_(num_classes), pre_(c, num_classes, c.seed), detector_(c.detector),
        ensemble_(num_classes, c.ensemble, c.learners, c.seed, pool) {}

  std::string name() const override { return "msana"; }

  void initialize(std::span<const LabeledSample> train) override {
    pre_.fit(train);
    masks_.push_back(pre_.current_mask());
    std::array<std::uint64_t, kEnsembleModels.size()> hits{};
    std::uint64_t seen = 0;
    auto learn_all = [&](const LabeledSample& s) {
      const auto x = pre_.prepare(s.sample.features);
      Ensemble::Prediction p;
      ensemble_.predict_all(x, p);
      for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += p.each[i].predicted == s.label;
      ++seen;
      ensemble_.learn(x, s.label);
    };
    for (const auto& s : train) {
      const auto out = pre_.balance(s);
      if (!out.drop_current) learn_all(s);
      for (const auto& dup : out.extra) learn_all(dup);
      push_replay(s);
    }
    std::array<double, kPoolSize> errs{};
    for (std::size_t j = 0; j < kPoolSize; ++j)
      errs[j] = seen == 0 ? 0.5 : 1.0 - static_cast<double>(hits[kLeaderCount + j]) / static_cast<double>(seen);
    holdout_errors_ = errs;
    ensemble_.set_followers(select_followers(errs));
    initial_followers_ = ensemble_.followers();
    ever_active_.fill(false);
    mark_active();
  }

  ClassProbabilities predict(const Sample& x, LatencyRecorder* rec) override {
    {
      ScopedTimer t(rec, Component::normalization);
      scaled_ = pre_.scale(x.features);
    }
    {
      ScopedTimer t(rec, Component::feature_selection);
      masked_ = pre_.mask(scaled_);
    }
    ScopedTimer t(rec, Component::ensemble_combine);
    last_ = Ensemble::Prediction{};
    ensemble_.predict_all(masked_, last_);
    ensemble_.combine_active(last_);
    return last_.combined;
  }

  void learn(const LabeledSample& s, const ClassProbabilities& prediction, LatencyRecorder* rec) override {
    const std::uint64_t index = s.sample.index;
    DualDetector::Result det;
    {
      ScopedTimer t(rec, Component::drift_detection);
      det = detector_.update(prediction.predicted == s.label, index);
    }
    {
      ScopedTimer t(rec, Component::model_selection);
      ensemble_.record(last_, s.label);
    }
    {
      ScopedTimer t(rec, Component::normalization);
      pre_.update_stats(s.sample.features);
    }
    DynamicBalancer::Outcome bal;
    {
      ScopedTimer t(rec, Component::balancing);
      bal = pre_.balance(s);
    }
    {
      ScopedTimer t(rec, Component::base_learning);
      if (!bal.drop_current) ensemble_.learn(masked_, s.label);
      for (const auto& dup : bal.extra) ensemble_.learn(pre_.prepare(dup.sample.features), dup.label);
      extras_learned_ += bal.extra.size();
      if (bal.drop_current) ++dropped_;
    }
    push_replay(s);
    if (det.combined.is_drift()) on_drift(index, rec);
  }

  std::uint64_t state_hash() const override {
    BinaryWriter w;
    w.put(ensemble_.state_hash());
    pre_.save(w);
    detector_.save(w);
    return fnv1a64(w.bytes());
  }

  const std::vector<Event>& events() const override { return events_; }
  const std::vector<FeatureMask>& mask_history() const override { return masks_; }
  const Ensemble& ensemble() const noexcept { return ensemble_; }
  const DualDetector& detector() const noexcept { return detector_; }
  const Preprocessor& preprocessor() const noexcept { return pre_; }
  std::array<std::size_t, 2> initial_followers() const noexcept { return initial_followers_; }

  /// Learner names that were part of the active four at any point.
  std::vector<std::string> ever_active() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ever_active_.size(); ++i)
      if (ever_active_[i]) out.emplace_back(to_string(kEnsembleModels[i]));
    return out;
  }

  Warnings warnings() const override {
    Warnings w;
    w.merge(pre_.balancer().warnings());
    w.merge(ensemble_.warnings());
    w.merge(warnings_);
    return w;
  }

  json summary() const override {
    json j;
    auto names = [](std::array<std::size_t, 2> f) {
      return json::array({to_string(kEnsembleModels[kLeaderCount + f[0]]),
                          to_string(kEnsembleModels[kLeaderCount + f[1]])});
    };
    j["leaders"] = json::array({to_string(kEnsembleModels[0]), to_string(kEnsembleModels[1])});
    j["initial_followers"] = names(initial_followers_);
    j["final_followers"] = names(ensemble_.followers());
    json he = json::object();
    for (std::size_t k = 0; k < kPoolSize; ++k) he[std::string(to_string(kEnsembleModels[kLeaderCount + k]))] = holdout_errors_[k];
    j["holdout_errors"] = he;
    j["ever_active"] = ever_active();
    j["drift_arr"] = ensemble_.drift_arr();
    j["adwin_drifts"] = detector_.adwin_drifts();
    j["eddm_drifts"] = detector_.eddm_drifts();
    j["combined_drifts"] = detector_.combined_drifts();
    j["final_mask"] = pre_.current_mask().selected;
    j["balancing_extra_samples"] = extras_learned_;
    j["balancing_dropped_samples"] = dropped_;
    json acc = json::object();
    for (std::size_t i = 0; i < kEnsembleModels.size(); ++i) {
      const auto& h = ensemble_.history(i);
      acc[std::string(to_string(kEnsembleModels[i]))] = 1.0 - h.window_error(h.size());
    }
    j["shadow_prequential_accuracy"] = acc;
    return j;
  }

 private:
  void push_replay(const LabeledSample& s) {
    replay_.push_back(s);
    while (replay_.size() > config_.ensemble.replay_buffer) replay_.pop_front();
  }

  void mark_active() {
    for (auto slot : ensemble_.active()) ever_active_[slot] = true;
  }

  void on_drift(std::uint64_t index, LatencyRecorder* rec) {
    events_.push_back({index, "drift",
                       {{"n", ensemble_.processed()},
                        {"adwin_drifts", detector_.adwin_drifts()},
                        {"eddm_drifts", detector_.eddm_drifts()}}});
    std::uint64_t s_prev;
    {
      ScopedTimer t(rec, Component::model_selection);
      s_prev = ensemble_.on_drift();
      mark_active();
    }
    const auto& errs = ensemble_.last_pool_errors();
    json ej = json::object();
    for (std::size_t k = 0; k < kPoolSize; ++k) ej[std::string(to_string(kEnsembleModels[kLeaderCount + k]))] = errs[k];
    const auto f = ensemble_.followers();
    events_.push_back({index, "reselect",
                       {{"window", s_prev},
                        {"errors", ej},
                        {"followers", json::array({to_string(kEnsembleModels[kLeaderCount + f[0]]),
                                                   to_string(kEnsembleModels[kLeaderCount + f[1]])})}}});

    const std::size_t len = std::min<std::size_t>(replay_.size(),
                                                  std::max<std::uint64_t>(s_prev, config_.ensemble.replay_min));
    std::vector<LabeledSample> window(replay_.end() - static_cast<std::ptrdiff_t>(len), replay_.end());
    bool changed;
    {
      ScopedTimer t(rec, Component::feature_selection);
      const auto scaled = pre_.scale_batch(window);
      const FeatureMask before = pre_.current_mask();
      pre_.set_mask(ddfs_on_drift(before, scaled, index, &warnings_));
      changed = !(pre_.current_mask() == before);
      if (changed || pre_.current_mask().fitted_at != before.fitted_at) masks_.push_back(pre_.current_mask());
    }
    events_.push_back({index, "refit_fs",
                       {{"window", len}, {"selected", pre_.current_mask().selected}, {"changed", changed}}});

    ScopedTimer t(rec, Component::base_learning);
    std::vector<std::vector<double>> xs;
    std::vector<ClassId> ys;
    xs.reserve(window.size());
    for (const auto& s : window) {
      xs.push_back(pre_.prepare(s.sample.features));
      ys.push_back(s.label);
    }
    std::vector<std::size_t> slots;
    if (changed) {
      for (std::size_t i = 0; i < kEnsembleModels.size(); ++i) slots.push_back(i);
    } else {
      for (auto a : ensemble_.active()) slots.push_back(a);
    }
    ensemble_.retrain(xs, ys, slots, changed);
    json models = json::array();
    for (auto sl : slots) models.push_back(to_string(kEnsembleModels[sl]));
    events_.push_back({index, "retrain", {{"samples", xs.size()}, {"models", models}, {"reset", changed}}});
  }

  PipelineConfig config_;
  std::size_t num_classes_;
  Preprocessor pre_;
  DualDetector detector_;
  Ensemble ensemble_;
  std::deque<LabeledSample> replay_;
  std::vector<double> scaled_, masked_;
  Ensemble::Prediction last_;
  std::vector<Event> events_;
  std::vector<FeatureMask> masks_;
  std::array<std::size_t, 2> initial_followers_{0, 1};
  std::array<double, kPoolSize> holdout_errors_{};
  std::array<bool, kEnsembleModels.size()> ever_active_{};
  std::uint64_t extras_learned_ = 0;
  std::uint64_t dropped_ = 0;
  Warnings warnings_;
};

/// One learner behind the same preprocessing (initial mask kept fixed).
/// Frozen mode trains on the hold-out batch only and never updates.
class SingleLearnerPipeline final : public StreamMethod {
 public:
  SingleLearnerPipeline(const PipelineConfig& c, std::size_t num_classes, LearnerKind kind, bool frozen = false)
      : pre_(c, num_classes, c.seed), frozen_(frozen) {
    std::size_t slot = 0;
    for (std::size_t i = 0; i < kEnsembleModels.size(); ++i)
      if (kEnsembleModels[i] == kind) slot = i;
    // Same seed as the ensemble's slot, so standalone and in-ensemble
    // instances start identical.
    const std::uint64_t seed = kind == LearnerKind::hoeffding_tree ? mix_seed(c.seed, 100) : mix_seed(c.seed, slot);
    learner_ = make_learner(kind, num_classes, c.learners, seed);
  }

  std::string name() const override {
    return frozen_ ? std::string(learner_->name()) + "-frozen" : std::string(learner_->name());
  }

  void initialize(std::span<const LabeledSample> train) override {
    pre_.fit(train);
    masks_.push_back(pre_.current_mask());
    for (const auto& s : train) {
      const auto out = pre_.balance(s);
      if (!out.drop_current) learner_->learn_one(pre_.prepare(s.sample.features), s.label);
      for (const auto& dup : out.extra) learner_->learn_one(pre_.prepare(dup.sample.features), dup.label);
    }
  }

  ClassProbabilities predict(const Sample& x, LatencyRecorder* rec) override {
    {
      ScopedTimer t(rec, Component::normalization);
      scaled_ = pre_.scale(x.features);
    }
    {
      ScopedTimer t(rec, Component::feature_selection);
      masked_ = pre_.mask(scaled_);
    }
    ScopedTimer t(rec, Component::ensemble_combine);
    return learner_->predict_proba(masked_);
  }

  void learn(const LabeledSample& s, const ClassProbabilities&, LatencyRecorder* rec) override {
    if (frozen_) return;
    {
      ScopedTimer t(rec, Component::normalization);
      pre_.update_stats(s.sample.features);
    }
    DynamicBalancer::Outcome bal;
    {
      ScopedTimer t(rec, Component::balancing);
      bal = pre_.balance(s);
    }
    ScopedTimer t(rec, Component::base_learning);
    if (!bal.drop_current) learner_->learn_one(masked_, s.label);
    for (const auto& dup : bal.extra) learner_->learn_one(pre_.prepare(dup.sample.features), dup.label);
  }

  std::uint64_t state_hash() const override {
    BinaryWriter w;
    w.put(learner_->state_hash());
    pre_.save(w);
    return fnv1a64(w.bytes());
  }

  const std::vector<FeatureMask>& mask_history() const override { return masks_; }
  Warnings warnings() const override { return pre_.balancer().warnings(); }
  const OnlineClassifier& learner() const { return *learner_; }

  json summary() const override {
    json j;
    j["learner"] = std::string(learner_->name());
    j["frozen"] = frozen_;
    j["final_mask"] = pre_.current_mask().selected;
    return j;
  }

 private:
  Preprocessor pre_;
  bool frozen_;
  std::unique_ptr<OnlineClassifier> learner_;
  std::vector<double> scaled_, masked_;
  std::vector<FeatureMask> masks_;
};

/// Method by name: "msana", a learner name, or "ht-frozen".
inline std::unique_ptr<StreamMethod> make_method(const std::string& name, const PipelineConfig& c,
                                                 std::size_t num_classes, WorkerPool* pool = nullptr) {
  if (is_out_of_scope_method(name))
    throw ConfigError("method '" + name + "': not implemented (out of scope baseline)", "method");
  if (name == "msana") return std::make_unique<MsanaPipeline>(c, num_classes, pool);
  if (name == "ht-frozen")
    return std::make_unique<SingleLearnerPipeline>(c, num_classes, LearnerKind::hoeffding_tree, true);
  if (auto k = parse_learner_kind(name)) return std::make_unique<SingleLearnerPipeline>(c, num_classes, *k);
  throw ConfigError("unknown method '" + name + "'", "method");
}

struct RunOutput {
  std::string method;
  std::size_t train_size = 0;
  std::size_t dim = 0;
  PrequentialResult result;
  Metrics metrics;
  QosReport qos;
  json summary;
  std::vector<Event> events;
  std::vector<FeatureMask> masks;
  Warnings warnings;
  std::uint64_t state_hash = 0;
};

/// Hold-out fit then prequential evaluation of one method over a stream.
inline RunOutput run_method(const std::string& method, const PipelineConfig& c, const LoadedStream& stream,
                            WorkerPool* pool = nullptr) {
  const auto split = holdout_split<LabeledSample>(stream.samples, c.train_fraction);
  auto m = make_method(method, c, stream.schema.num_classes, pool);
  m->initialize(split.train);
  RunOutput out{method, split.train.size(), split.train.front().sample.size(),
                prequential_run(*m, split.test, stream.schema.num_classes, {c.curve_stride, c.warmup}),
                {}, {}, {}, {}, {}, {}, 0};
  Warnings w = stream.warnings;
  w.merge(m->warnings());
  if (out.result.counts.total() > 0) out.metrics = metrics(out.result.counts, 1, &w);
  out.qos = qos_report(out.result.latency, out.result.wall_seconds, out.result.counts.total());
  out.summary = m->summary();
  out.events = m->events();
  out.masks = m->mask_history();
  out.warnings = std::move(w);
  out.state_hash = m->state_hash();
  return out;
}

}  // namespace msana
