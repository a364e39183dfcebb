#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "msana/learners/classifier.hpp"
#include "msana/rng.hpp"

namespace msana {

/// Hoeffding bound: with probability 1 - delta the true mean of a variable
/// with range R lies within epsilon of the mean of n observations.
inline double hoeffding_bound(double range, double delta, double n) {
  if (!(range > 0.0)) throw std::invalid_argument("hoeffding_bound: range must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("hoeffding_bound: delta must be in (0,1)");
  if (!(n >= 1.0)) throw std::invalid_argument("hoeffding_bound: n must be >= 1");
  return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * n));
}

inline double entropy(std::span<const double> dist) {
  double total = 0.0;
  for (double v : dist) total += v;
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double v : dist) {
    if (v > 0.0) {
      const double p = v / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

namespace tree_detail {

/// Weighted Gaussian summary of one feature within one class.
struct GaussianEstimator {
  double weight = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x, double w) {
    weight += w;
    const double d = x - mean;
    mean += w * d / weight;
    m2 += w * d * (x - mean);
    min = std::min(min, x);
    max = std::max(max, x);
  }

  double stddev() const { return weight > 1.0 ? std::sqrt(std::max(0.0, m2 / (weight - 1.0))) : 0.0; }

  /// Estimated weight with value <= t.
  double mass_le(double t) const {
    if (weight <= 0.0 || t < min) return 0.0;
    if (t >= max) return weight;
    const double sd = stddev();
    if (!(sd > 0.0)) return t >= mean ? weight : 0.0;
    return weight * 0.5 * std::erfc(-(t - mean) / (sd * std::numbers::sqrt2));
  }
};

struct NumericObserver {
  std::vector<GaussianEstimator> per_class;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x, ClassId c, double w) {
    per_class[c].add(x, w);
    min = std::min(min, x);
    max = std::max(max, x);
  }
};

struct SplitCandidate {
  std::optional<std::size_t> feature;  // nullopt: the "do not split" option
  double threshold = 0.0;
  double merit = 0.0;
  std::vector<double> left, right;
};

struct Node {
  std::vector<double> observed;  // class weight routed here since creation
  std::vector<double> prior;     // class distribution estimated at creation
  std::vector<NumericObserver> observers;
  std::vector<std::size_t> subspace;  // empty: all features
  double weight_at_last_eval = 0.0;
  std::size_t depth = 0;
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::unique_ptr<Node> left, right;

  double total() const {
    double t = 0.0;
    for (double v : observed) t += v;
    return t;
  }
};

}  // namespace tree_detail

/// One installed (or replaced) split and the Hoeffding test that licensed it.
struct SplitRecord {
  std::uint64_t at_sample = 0;  // learn_one call count when installed
  double n = 0.0;               // weight observed at the node
  double range = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  double best_merit = 0.0;
  double second_merit = 0.0;
  std::size_t depth = 0;
  bool replacement = false;
};

struct TreeConfig {
  double grace_period = 200.0;
  double delta = 1e-7;
  double tie_threshold = 0.05;
  std::size_t num_thresholds = 10;
  double min_branch_fraction = 0.01;
  std::size_t max_depth = 20;
  std::size_t subspace_size = 0;  // features sampled per leaf, 0 = all
  double efdt_reeval_period = 200.0;
};

inline void save(BinaryWriter& w, const TreeConfig& c) {
  w.put(c.grace_period);
  w.put(c.delta);
  w.put(c.tie_threshold);
  w.put_size(c.num_thresholds);
  w.put(c.min_branch_fraction);
  w.put_size(c.max_depth);
  w.put_size(c.subspace_size);
  w.put(c.efdt_reeval_period);
}

inline void load(BinaryReader& r, TreeConfig& c) {
  c.grace_period = r.get<double>();
  c.delta = r.get<double>();
  c.tie_threshold = r.get<double>();
  c.num_thresholds = r.get_size();
  c.min_branch_fraction = r.get<double>();
  c.max_depth = r.get_size();
  c.subspace_size = r.get_size();
  c.efdt_reeval_period = r.get<double>();
}

/// Hoeffding tree over numeric features with Gaussian split estimators and
/// majority-class leaves. In EFDT mode a leaf splits as soon as its best
/// split beats not splitting, and internal nodes keep statistics and
/// periodically replace a split that is no longer the best.
class HoeffdingTree final : public OnlineClassifier {
 public:
  enum class Mode : std::uint8_t { hoeffding = 0, efdt = 1 };

  using Config = TreeConfig;

  HoeffdingTree(std::size_t num_classes, Config config = {}, Mode mode = Mode::hoeffding, std::uint64_t seed = 0)
      : num_classes_(num_classes), config_(config), mode_(mode), seed_(seed), rng_(seed) {
    if (num_classes_ < 2) throw std::invalid_argument("tree needs >= 2 classes");
    if (!(config_.grace_period > 0.0)) throw std::invalid_argument("grace_period must be > 0");
    if (!(config_.delta > 0.0 && config_.delta < 1.0)) throw std::invalid_argument("delta must be in (0,1)");
  }

  LearnerKind kind() const override { return mode_ == Mode::efdt ? LearnerKind::efdt : LearnerKind::hoeffding_tree; }
  std::size_t num_classes() const override { return num_classes_; }
  Mode mode() const noexcept { return mode_; }
  const Config& config() const noexcept { return config_; }

  using OnlineClassifier::learn_one;
  using OnlineClassifier::predict_proba;

  ClassProbabilities predict_proba(std::span<const double> x) const override {
    if (!root_) return ClassProbabilities::uniform(num_classes_);
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    const Node* node = root_.get();
    while (!node->leaf) node = x[node->feature] <= node->threshold ? node->left.get() : node->right.get();
    std::vector<double> scores(num_classes_);
    for (std::size_t c = 0; c < num_classes_; ++c) scores[c] = node->prior[c] + node->observed[c];
    return ClassProbabilities::from_scores(std::move(scores));
  }

  void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) override {
    if (label >= num_classes_) throw std::out_of_range("label out of range");
    if (!(weight > 0.0)) return;
    if (!root_) {
      dim_ = x.size();
      root_ = make_leaf(std::vector<double>(num_classes_, 0.0), 0);
    }
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    ++samples_;
    Node* node = root_.get();
    while (!node->leaf) {
      if (mode_ == Mode::efdt) {
        absorb(*node, x, label, weight);
        if (node->total() - node->weight_at_last_eval >= config_.efdt_reeval_period) reevaluate(*node);
      }
      node = x[node->feature] <= node->threshold ? node->left.get() : node->right.get();
    }
    absorb(*node, x, label, weight);
    if (node->total() - node->weight_at_last_eval >= config_.grace_period) {
      node->weight_at_last_eval = node->total();
      attempt_split(*node);
    }
  }

  void reset() override {
    root_.reset();
    dim_ = 0;
    samples_ = 0;
    splits_.clear();
    rng_ = Rng(seed_);
  }

  const std::vector<SplitRecord>& split_log() const noexcept { return splits_; }
  std::uint64_t samples_seen() const noexcept { return samples_; }
  std::size_t dim() const noexcept { return dim_; }

  std::optional<std::size_t> root_feature() const {
    if (!root_ || root_->leaf) return std::nullopt;
    return root_->feature;
  }

  std::size_t node_count() const { return count_nodes(root_.get(), false); }
  std::size_t leaf_count() const { return count_nodes(root_.get(), true); }

  void save(BinaryWriter& w) const override {
    w.put_size(num_classes_);
    msana::save(w, config_);
    w.put(mode_);
    w.put(seed_);
    w.put_size(dim_);
    w.put(samples_);
    w.put_size(splits_.size());
    for (const auto& s : splits_) {
      w.put(s.at_sample);
      w.put(s.n);
      w.put(s.range);
      w.put(s.delta);
      w.put(s.epsilon);
      w.put_size(s.feature);
      w.put(s.threshold);
      w.put(s.best_merit);
      w.put(s.second_merit);
      w.put_size(s.depth);
      w.put(s.replacement);
    }
    w.put<std::uint8_t>(root_ ? 1 : 0);
    if (root_) save_node(w, *root_);
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get_size();
    msana::load(r, config_);
    mode_ = r.get<Mode>();
    seed_ = r.get<std::uint64_t>();
    dim_ = r.get_size();
    samples_ = r.get<std::uint64_t>();
    splits_.resize(r.get_size());
    for (auto& s : splits_) {
      s.at_sample = r.get<std::uint64_t>();
      s.n = r.get<double>();
      s.range = r.get<double>();
      s.delta = r.get<double>();
      s.epsilon = r.get<double>();
      s.feature = r.get_size();
      s.threshold = r.get<double>();
      s.best_merit = r.get<double>();
      s.second_merit = r.get<double>();
      s.depth = r.get_size();
      s.replacement = r.get<bool>();
    }
    root_.reset();
    if (r.get<std::uint8_t>()) root_ = load_node(r);
  }

  std::string rng_state() const override { return rng_.state(); }
  void set_rng_state(const std::string& s) override { rng_.set_state(s); }

 private:
  using Node = tree_detail::Node;
  using Candidate = tree_detail::SplitCandidate;

  double range() const { return std::log2(static_cast<double>(num_classes_)); }

  std::unique_ptr<Node> make_leaf(std::vector<double> prior, std::size_t depth) {
    auto node = std::make_unique<Node>();
    node->observed.assign(num_classes_, 0.0);
    node->prior = std::move(prior);
    node->depth = depth;
    const std::size_t m = config_.subspace_size;
    if (m > 0 && m < dim_) {
      std::vector<std::size_t> all(dim_);
      for (std::size_t i = 0; i < dim_; ++i) all[i] = i;
      for (std::size_t j = 0; j < m; ++j) std::swap(all[j], all[j + rng_.below(dim_ - j)]);
      node->subspace.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(node->subspace.begin(), node->subspace.end());
    }
    return node;
  }

  void absorb(Node& node, std::span<const double> x, ClassId label, double weight) {
    node.observed[label] += weight;
    if (node.observers.empty()) {
      node.observers.resize(dim_);
      for (auto& o : node.observers) o.per_class.resize(num_classes_);
    }
    if (node.subspace.empty()) {
      for (std::size_t f = 0; f < dim_; ++f) node.observers[f].add(x[f], label, weight);
    } else {
      for (std::size_t f : node.subspace) node.observers[f].add(x[f], label, weight);
    }
  }

  Candidate best_split_for(const Node& node, std::size_t f) const {
    Candidate best;
    best.feature = f;
    best.merit = -std::numeric_limits<double>::infinity();
    const auto& obs = node.observers[f];
    if (!(obs.max > obs.min)) return best;
    const double parent_h = entropy(node.observed);
    const double total = node.total();
    const std::size_t bins = config_.num_thresholds;
    std::vector<double> left(num_classes_), right(num_classes_);
    for (std::size_t i = 1; i <= bins; ++i) {
      const double t = obs.min + (obs.max - obs.min) * static_cast<double>(i) / static_cast<double>(bins + 1);
      double wl = 0.0, wr = 0.0;
      for (std::size_t c = 0; c < num_classes_; ++c) {
        const auto& g = obs.per_class[c];
        left[c] = g.mass_le(t);
        right[c] = std::max(0.0, g.weight - left[c]);
        wl += left[c];
        wr += right[c];
      }
      if (wl < config_.min_branch_fraction * total || wr < config_.min_branch_fraction * total) continue;
      const double merit = parent_h - (wl * entropy(left) + wr * entropy(right)) / (wl + wr);
      if (merit > best.merit) {
        best.merit = merit;
        best.threshold = t;
        best.left = left;
        best.right = right;
      }
    }
    return best;
  }

  std::vector<Candidate> candidates(const Node& node) const {
    std::vector<Candidate> out;
    if (node.subspace.empty()) {
      for (std::size_t f = 0; f < dim_; ++f) out.push_back(best_split_for(node, f));
    } else {
      for (std::size_t f : node.subspace) out.push_back(best_split_for(node, f));
    }
    out.push_back(Candidate{});  // null split, merit 0
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.merit > b.merit; });
    return out;
  }

  void attempt_split(Node& node) {
    if (node.depth >= config_.max_depth) return;
    std::size_t present = 0;
    for (double v : node.observed) present += v > 0.0 ? 1 : 0;
    if (present < 2) return;
    const auto cands = candidates(node);
    const Candidate& best = cands[0];
    if (!best.feature || !(best.merit > 0.0)) return;
    const double n = node.total();
    const double eps = hoeffding_bound(range(), config_.delta, n);
    // The null split is in the list, so for HT second >= 0; EFDT only has to
    // beat not splitting.
    const double second = mode_ == Mode::efdt ? 0.0 : cands[1].merit;
    if (best.merit - second > eps || eps < config_.tie_threshold) {
      install(node, best, n, eps, second, false);
    }
  }

  void reevaluate(Node& node) {
    node.weight_at_last_eval = node.total();
    const auto cands = candidates(node);
    const Candidate& best = cands[0];
    if (!best.feature || *best.feature == node.feature || !(best.merit > 0.0)) return;
    double current = 0.0;
    for (const auto& c : cands)
      if (c.feature && *c.feature == node.feature) current = std::max(0.0, c.merit);
    const double n = node.total();
    const double eps = hoeffding_bound(range(), config_.delta, n);
    const double gain = best.merit - current;
    if (gain > eps || (eps < config_.tie_threshold && gain > config_.tie_threshold / 2.0)) {
      install(node, best, n, eps, current, true);
    }
  }

  void install(Node& node, const Candidate& c, double n, double eps, double second, bool replacement) {
    node.leaf = false;
    node.feature = *c.feature;
    node.threshold = c.threshold;
    node.left = make_leaf(c.left, node.depth + 1);
    node.right = make_leaf(c.right, node.depth + 1);
    if (mode_ == Mode::hoeffding) {
      node.observers.clear();
      node.observers.shrink_to_fit();
    }
    splits_.push_back({samples_, n, range(), config_.delta, eps, node.feature, node.threshold, c.merit, second,
                       node.depth, replacement});
  }

  static std::size_t count_nodes(const Node* n, bool leaves_only) {
    if (!n) return 0;
    if (n->leaf) return 1;
    return (leaves_only ? 0 : 1) + count_nodes(n->left.get(), leaves_only) + count_nodes(n->right.get(), leaves_only);
  }

  void save_node(BinaryWriter& w, const Node& n) const {
    w.put_vector(n.observed);
    w.put_vector(n.prior);
    w.put_size(n.observers.size());
    for (const auto& o : n.observers) {
      w.put(o.min);
      w.put(o.max);
      for (const auto& g : o.per_class) {
        w.put(g.weight);
        w.put(g.mean);
        w.put(g.m2);
        w.put(g.min);
        w.put(g.max);
      }
    }
    w.put_size(n.subspace.size());
    for (auto f : n.subspace) w.put_size(f);
    w.put(n.weight_at_last_eval);
    w.put_size(n.depth);
    w.put(n.leaf);
    if (!n.leaf) {
      w.put_size(n.feature);
      w.put(n.threshold);
      save_node(w, *n.left);
      save_node(w, *n.right);
    }
  }

  std::unique_ptr<Node> load_node(BinaryReader& r) const {
    auto n = std::make_unique<Node>();
    n->observed = r.get_vector<double>();
    n->prior = r.get_vector<double>();
    n->observers.resize(r.get_size());
    for (auto& o : n->observers) {
      o.min = r.get<double>();
      o.max = r.get<double>();
      o.per_class.resize(num_classes_);
      for (auto& g : o.per_class) {
        g.weight = r.get<double>();
        g.mean = r.get<double>();
        g.m2 = r.get<double>();
        g.min = r.get<double>();
        g.max = r.get<double>();
      }
    }
    n->subspace.resize(r.get_size());
    for (auto& f : n->subspace) f = r.get_size();
    n->weight_at_last_eval = r.get<double>();
    n->depth = r.get_size();
    n->leaf = r.get<bool>();
    if (!n->leaf) {
      n->feature = r.get_size();
      n->threshold = r.get<double>();
      n->left = load_node(r);
      n->right = load_node(r);
    }
    return n;
  }

  std::size_t num_classes_;
  Config config_;
  Mode mode_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t dim_ = 0;
  std::uint64_t samples_ = 0;
  std::unique_ptr<Node> root_;
  std::vector<SplitRecord> splits_;
};

}  // namespace msana
