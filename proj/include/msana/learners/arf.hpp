#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "msana/drift.hpp"
#include "msana/learners/hoeffding_tree.hpp"

namespace msana {

enum class ArfDetector : std::uint8_t { adwin = 0, eddm = 1, none = 2 };

inline TreeConfig arf_tree_defaults() {
  TreeConfig c;
  c.grace_period = 50.0;
  c.delta = 0.01;
  c.tie_threshold = 0.05;
  return c;
}

struct ArfConfig {
  std::size_t trees = 10;
  double lambda = 6.0;
  std::size_t subspace = 0;  // features per leaf; 0 = ceil(sqrt(d)), >= d = all
  ArfDetector detector = ArfDetector::adwin;
  double warning_delta = 0.01;
  double drift_delta = 0.001;
  Eddm::Config eddm{};
  bool background = true;
  TreeConfig tree = arf_tree_defaults();
};

/// Adaptive random forest: online bagging with Poisson(lambda) weights over
/// Hoeffding trees that split on random feature subspaces. Each tree has its
/// own detector on its own error; a warning starts a background tree and a
/// drift replaces the tree with it (or with a fresh tree).
class AdaptiveRandomForest final : public OnlineClassifier {
 public:
  using Config = ArfConfig;

  AdaptiveRandomForest(std::size_t num_classes, Config config, std::uint64_t seed)
      : num_classes_(num_classes), config_(config), seed_(seed), rng_(seed) {
    if (num_classes_ < 2) throw std::invalid_argument("arf needs >= 2 classes");
    if (config_.trees == 0) throw std::invalid_argument("arf needs >= 1 tree");
    if (!(config_.lambda > 0.0)) throw std::invalid_argument("arf lambda must be > 0");
  }

  LearnerKind kind() const override {
    return config_.detector == ArfDetector::eddm ? LearnerKind::arf_eddm : LearnerKind::arf_adwin;
  }
  std::size_t num_classes() const override { return num_classes_; }

  using OnlineClassifier::learn_one;
  using OnlineClassifier::predict_proba;

  ClassProbabilities predict_proba(std::span<const double> x) const override {
    if (members_.empty()) return ClassProbabilities::uniform(num_classes_);
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    std::vector<double> sum(num_classes_, 0.0);
    for (const auto& m : members_) {
      const auto p = m.tree->predict_proba(x);
      for (std::size_t c = 0; c < num_classes_; ++c) sum[c] += p[c];
    }
    for (auto& v : sum) v /= static_cast<double>(members_.size());
    return ClassProbabilities::from_scores(std::move(sum));
  }

  void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) override {
    if (label >= num_classes_) throw std::out_of_range("label out of range");
    if (!(weight > 0.0)) return;
    if (members_.empty()) init(x.size());
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    ++seen_;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      auto& m = members_[i];
      const bool correct = m.tree->predict_proba(x).predicted == label;
      const DriftStatus status = detect(m, correct);
      if (status == DriftStatus::warning && config_.background && !m.background) {
        m.background = new_tree(i, ++m.generation);
        ++backgrounds_;
      }
      if (status == DriftStatus::drift) {
        m.tree = m.background ? std::move(m.background) : new_tree(i, ++m.generation);
        m.background.reset();
        reset_detectors(m);
        ++replacements_;
      }
      const unsigned k = rng_.poisson(config_.lambda);
      if (k > 0) {
        m.tree->learn_one(x, label, weight * k);
        if (m.background) m.background->learn_one(x, label, weight * k);
      }
    }
  }

  void reset() override {
    members_.clear();
    dim_ = 0;
    seen_ = 0;
    replacements_ = 0;
    backgrounds_ = 0;
    rng_ = Rng(seed_);
  }

  std::uint64_t replacements() const noexcept { return replacements_; }
  std::uint64_t backgrounds_started() const noexcept { return backgrounds_; }
  std::size_t size() const noexcept { return members_.size(); }
  const HoeffdingTree& tree(std::size_t i) const { return *members_.at(i).tree; }
  const Config& config() const noexcept { return config_; }

  /// Seed of tree `index` in its `generation`-th incarnation.
  static std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t index, std::uint64_t generation) {
    return mix_seed(forest_seed, index, generation);
  }

  void save(BinaryWriter& w) const override {
    w.put_size(num_classes_);
    w.put_size(config_.trees);
    w.put(config_.lambda);
    w.put_size(config_.subspace);
    w.put(config_.detector);
    w.put(config_.warning_delta);
    w.put(config_.drift_delta);
    w.put(config_.eddm.alpha);
    w.put(config_.eddm.beta);
    w.put(config_.eddm.min_errors);
    w.put(config_.background);
    msana::save(w, config_.tree);
    w.put(seed_);
    w.put_size(dim_);
    w.put(seen_);
    w.put(replacements_);
    w.put(backgrounds_);
    w.put_size(members_.size());
    for (const auto& m : members_) {
      w.put(m.generation);
      m.tree->save(w);
      w.put_string(m.tree->rng_state());
      w.put<std::uint8_t>(m.background ? 1 : 0);
      if (m.background) {
        m.background->save(w);
        w.put_string(m.background->rng_state());
      }
      m.warning.save(w);
      m.drift.save(w);
      m.eddm.save(w);
    }
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get_size();
    config_.trees = r.get_size();
    config_.lambda = r.get<double>();
    config_.subspace = r.get_size();
    config_.detector = r.get<ArfDetector>();
    config_.warning_delta = r.get<double>();
    config_.drift_delta = r.get<double>();
    config_.eddm.alpha = r.get<double>();
    config_.eddm.beta = r.get<double>();
    config_.eddm.min_errors = r.get<std::uint64_t>();
    config_.background = r.get<bool>();
    msana::load(r, config_.tree);
    seed_ = r.get<std::uint64_t>();
    dim_ = r.get_size();
    seen_ = r.get<std::uint64_t>();
    replacements_ = r.get<std::uint64_t>();
    backgrounds_ = r.get<std::uint64_t>();
    members_.clear();
    members_.resize(r.get_size());
    for (auto& m : members_) {
      m.generation = r.get<std::uint64_t>();
      m.tree = load_tree(r);
      if (r.get<std::uint8_t>()) m.background = load_tree(r);
      m.warning = ErrorAdwin(adwin_config(config_.warning_delta));
      m.warning.load(r);
      m.drift = ErrorAdwin(adwin_config(config_.drift_delta));
      m.drift.load(r);
      m.eddm = Eddm(config_.eddm);
      m.eddm.load(r);
    }
  }

  std::string rng_state() const override { return rng_.state(); }
  void set_rng_state(const std::string& s) override { rng_.set_state(s); }

 private:
  struct Member {
    std::unique_ptr<HoeffdingTree> tree;
    std::unique_ptr<HoeffdingTree> background;
    ErrorAdwin warning;
    ErrorAdwin drift;
    Eddm eddm;
    std::uint64_t generation = 0;
  };

  static Adwin::Config adwin_config(double delta) {
    Adwin::Config c;
    c.delta = delta;
    return c;
  }

  std::size_t subspace_for(std::size_t d) const {
    const std::size_t m = config_.subspace == 0 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                                : config_.subspace;
    return m >= d ? 0 : m;
  }

  std::unique_ptr<HoeffdingTree> new_tree(std::size_t index, std::uint64_t generation) const {
    TreeConfig tc = config_.tree;
    tc.subspace_size = subspace_for(dim_);
    return std::make_unique<HoeffdingTree>(num_classes_, tc, HoeffdingTree::Mode::hoeffding,
                                           tree_seed(seed_, index, generation));
  }

  std::unique_ptr<HoeffdingTree> load_tree(BinaryReader& r) const {
    auto t = std::make_unique<HoeffdingTree>(num_classes_);
    t->load(r);
    t->set_rng_state(r.get_string());
    return t;
  }

  void init(std::size_t d) {
    dim_ = d;
    members_.resize(config_.trees);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      members_[i].tree = new_tree(i, 0);
      reset_detectors(members_[i]);
    }
  }

  void reset_detectors(Member& m) const {
    m.warning = ErrorAdwin(adwin_config(config_.warning_delta));
    m.drift = ErrorAdwin(adwin_config(config_.drift_delta));
    m.eddm = Eddm(config_.eddm);
  }

  DriftStatus detect(Member& m, bool correct) {
    switch (config_.detector) {
      case ArfDetector::adwin: {
        if (m.drift.update(!correct, seen_).is_drift()) return DriftStatus::drift;
        if (m.warning.update(!correct, seen_).is_drift()) {
          m.warning = ErrorAdwin(adwin_config(config_.warning_delta));
          return DriftStatus::warning;
        }
        return DriftStatus::none;
      }
      case ArfDetector::eddm:
        return m.eddm.update(correct, seen_).status;
      default:
        return DriftStatus::none;
    }
  }

  std::size_t num_classes_;
  Config config_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t dim_ = 0;
  std::uint64_t seen_ = 0;
  std::uint64_t replacements_ = 0;
  std::uint64_t backgrounds_ = 0;
  std::vector<Member> members_;
};

}  // namespace msana
