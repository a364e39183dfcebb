#pragma once

#include <fstream>
#include <memory>
#include <string>

#include "msana/learners/arf.hpp"
#include "msana/learners/hoeffding_tree.hpp"
#include "msana/learners/knn.hpp"
#include "msana/learners/passive_aggressive.hpp"
#include "msana/learners/sam_knn.hpp"

namespace msana {

/// Hyperparameters for every learner kind.
struct LearnerParams {
  TreeConfig tree{};
  ArfConfig arf{};
  KnnConfig knn{};
  SamKnnConfig sam{};
  PaConfig pa{};
};

inline std::unique_ptr<OnlineClassifier> make_learner(LearnerKind kind, std::size_t num_classes,
                                                      const LearnerParams& params, std::uint64_t seed) {
  switch (kind) {
    case LearnerKind::arf_adwin: {
      auto c = params.arf;
      c.detector = ArfDetector::adwin;
      return std::make_unique<AdaptiveRandomForest>(num_classes, c, seed);
    }
    case LearnerKind::arf_eddm: {
      auto c = params.arf;
      c.detector = ArfDetector::eddm;
      return std::make_unique<AdaptiveRandomForest>(num_classes, c, seed);
    }
    case LearnerKind::efdt:
      return std::make_unique<HoeffdingTree>(num_classes, params.tree, HoeffdingTree::Mode::efdt, seed);
    case LearnerKind::hoeffding_tree:
      return std::make_unique<HoeffdingTree>(num_classes, params.tree, HoeffdingTree::Mode::hoeffding, seed);
    case LearnerKind::knn_adwin:
      return std::make_unique<KnnAdwin>(num_classes, params.knn);
    case LearnerKind::sam_knn:
      return std::make_unique<SamKnn>(num_classes, params.sam);
    case LearnerKind::opa:
      return std::make_unique<PassiveAggressive>(num_classes, params.pa);
  }
  throw std::invalid_argument("unknown learner kind");
}

inline std::optional<LearnerKind> parse_learner_kind(std::string_view name) {
  for (auto k : {LearnerKind::arf_adwin, LearnerKind::arf_eddm, LearnerKind::efdt, LearnerKind::knn_adwin,
                 LearnerKind::sam_knn, LearnerKind::opa, LearnerKind::hoeffding_tree})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

inline constexpr char kSnapshotMagic[4] = {'M', 'S', 'N', 'A'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Snapshot layout: magic "MSNA", u32 version, u8 learner kind, RNG state
/// string, structure dump.
inline std::string snapshot_bytes(const OnlineClassifier& learner) {
  BinaryWriter w;
  for (char c : kSnapshotMagic) w.put(c);
  w.put(kSnapshotVersion);
  w.put(learner.kind());
  w.put_string(learner.rng_state());
  learner.save(w);
  return w.release();
}

inline std::unique_ptr<OnlineClassifier> learner_from_snapshot(std::string_view bytes) {
  BinaryReader r(bytes);
  for (char c : kSnapshotMagic)
    if (r.get<char>() != c) throw SnapshotError("not a learner snapshot (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) throw SnapshotError("unsupported snapshot version " + std::to_string(version));
  const auto kind = r.get<LearnerKind>();
  if (static_cast<std::uint8_t>(kind) > static_cast<std::uint8_t>(LearnerKind::hoeffding_tree))
    throw SnapshotError("unknown learner kind in snapshot");
  const std::string rng = r.get_string();
  auto learner = make_learner(kind, 2, LearnerParams{}, 0);
  learner->load(r);
  if (!r.done()) throw SnapshotError("trailing bytes in snapshot");
  learner->set_rng_state(rng);
  return learner;
}

inline void save_snapshot(const OnlineClassifier& learner, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError("cannot open snapshot for writing: " + path);
  const auto bytes = snapshot_bytes(learner);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SnapshotError("failed writing snapshot: " + path);
}

inline std::unique_ptr<OnlineClassifier> load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open snapshot: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return learner_from_snapshot(bytes);
}

}  // namespace msana
