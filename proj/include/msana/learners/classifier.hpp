#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "msana/core.hpp"
#include "msana/serialize.hpp"

namespace msana {

enum class LearnerKind : std::uint8_t {
  arf_adwin = 0,
  arf_eddm = 1,
  efdt = 2,
  knn_adwin = 3,
  sam_knn = 4,
  opa = 5,
  hoeffding_tree = 6,
};

inline std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::arf_adwin: return "arf-adwin";
    case LearnerKind::arf_eddm: return "arf-eddm";
    case LearnerKind::efdt: return "efdt";
    case LearnerKind::knn_adwin: return "knn-adwin";
    case LearnerKind::sam_knn: return "sam-knn";
    case LearnerKind::opa: return "opa";
    case LearnerKind::hoeffding_tree: return "ht";
  }
  return "?";
}

/// Incremental classifier contract. predict_proba is const and must not
/// change observable state; learn_one is deterministic given the learner's
/// seed and the sample sequence.
class OnlineClassifier {
 public:
  virtual ~OnlineClassifier() = default;

  virtual LearnerKind kind() const = 0;
  virtual std::size_t num_classes() const = 0;

  virtual ClassProbabilities predict_proba(std::span<const double> x) const = 0;
  virtual void learn_one(std::span<const double> x, ClassId label, double weight = 1.0) = 0;
  virtual void reset() = 0;

  /// Structure dump (configuration + learned state, excluding RNG state).
  virtual void save(BinaryWriter& w) const = 0;
  virtual void load(BinaryReader& r) = 0;

  /// Serialized engine state for learners that own an RNG; empty otherwise.
  virtual std::string rng_state() const { return {}; }
  virtual void set_rng_state(const std::string&) {}

  std::string_view name() const { return to_string(kind()); }

  ClassProbabilities predict_proba(const Sample& s) const { return predict_proba(s.view()); }
  void learn_one(const LabeledSample& s) { learn_one(s.sample.view(), s.label); }

  /// FNV-1a over the structure dump and RNG state.
  std::uint64_t state_hash() const {
    BinaryWriter w;
    save(w);
    w.put_string(rng_state());
    return fnv1a64(w.bytes());
  }
};

}  // namespace msana
