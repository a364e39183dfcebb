#include <gtest/gtest.h>

#include <thread>

#include "msana/evaluation.hpp"
#include "msana/learners/factory.hpp"
#include "msana/stream.hpp"

using namespace msana;

namespace {

// Predicts the true label, read from a side table.
struct Oracle {
  const std::vector<LabeledSample>* stream;
  ClassProbabilities predict(const Sample& s, LatencyRecorder*) {
    std::vector<double> p(2, 0.0);
    p[(*stream)[s.index].label] = 1.0;
    return ClassProbabilities::from_scores(p);
  }
  void learn(const LabeledSample&, const ClassProbabilities&, LatencyRecorder*) {}
};

struct Constant {
  ClassProbabilities predict(const Sample&, LatencyRecorder*) { return ClassProbabilities::from_scores({1.0, 0.0}); }
  void learn(const LabeledSample&, const ClassProbabilities&, LatencyRecorder*) {}
};

// Wraps a learner and records the hash seen at predict time and after learn.
struct Tracked {
  std::unique_ptr<OnlineClassifier> model;
  std::vector<std::uint64_t> at_predict, after_learn;
  ClassProbabilities predict(const Sample& s, LatencyRecorder*) {
    at_predict.push_back(model->state_hash());
    return model->predict_proba(s.features);
  }
  void learn(const LabeledSample& s, const ClassProbabilities&, LatencyRecorder*) {
    model->learn_one(s.sample.features, s.label);
    after_learn.push_back(model->state_hash());
  }
};

// Sleeps a fixed time per sample.
struct Sleeper {
  std::chrono::microseconds nap;
  ClassProbabilities predict(const Sample&, LatencyRecorder* r) {
    ScopedTimer t(r, Component::base_learning);
    std::this_thread::sleep_for(nap);
    return ClassProbabilities::uniform(2);
  }
  void learn(const LabeledSample&, const ClassProbabilities&, LatencyRecorder*) {}
};

std::vector<LabeledSample> labeled(const std::vector<ClassId>& labels) {
  std::vector<LabeledSample> s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s[i].sample.features = {static_cast<double>(i)};
    s[i].sample.index = i;
    s[i].label = labels[i];
  }
  return s;
}

}  // namespace

TEST(Holdout, Sizes) {
  EXPECT_EQ(holdout_size(100, 0.1), 10u);
  EXPECT_EQ(holdout_size(1000, 0.1), 100u);
  EXPECT_THROW(holdout_size(7, 0.1), StreamError);
  EXPECT_THROW(holdout_size(100, 0.0), ConfigError);
  EXPECT_THROW(holdout_size(100, 1.0), ConfigError);
}

TEST(Holdout, PreservesOrderAndPartitions) {
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  const auto sp = holdout_split<int>(v, 0.1);
  ASSERT_EQ(sp.train.size(), 10u);
  ASSERT_EQ(sp.test.size(), 90u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sp.train[i], i);
  for (int i = 0; i < 90; ++i) EXPECT_EQ(sp.test[i], 10 + i);
}

TEST(Metrics, WorkedExample) {
  const auto m = binary_metrics(97, 2, 3, 898);
  EXPECT_NEAR(m.accuracy, 0.995, 1e-12);
  EXPECT_NEAR(m.precision, 97.0 / 99.0, 1e-12);
  EXPECT_NEAR(m.precision, 0.9798, 5e-5);
  EXPECT_NEAR(m.recall, 0.97, 1e-12);
  EXPECT_NEAR(m.f1, 0.9749, 5e-5);
}

TEST(Metrics, Perfect) {
  const auto m = binary_metrics(10, 0, 0, 10);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, NoPositivesWarns) {
  Warnings w;
  const auto m = binary_metrics(0, 0, 0, 50, &w);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(w.count("precision_undefined"), 1u);
  EXPECT_EQ(w.count("recall_undefined"), 1u);
  EXPECT_THROW(binary_metrics(0, 0, 0, 0), std::invalid_argument);
}

TEST(Metrics, ConfusionCountsAgreeWithDirectCount) {
  Rng rng(2);
  ConfusionCounts cc(3);
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0, hit = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto t = static_cast<ClassId>(rng.below(3)), p = static_cast<ClassId>(rng.below(3));
    cc.add(t, p);
    hit += t == p;
    if (t == 1 && p == 1) ++tp;
    else if (t != 1 && p == 1) ++fp;
    else if (t == 1 && p != 1) ++fn;
    else ++tn;
  }
  EXPECT_EQ(cc.tp(1), tp);
  EXPECT_EQ(cc.fp(1), fp);
  EXPECT_EQ(cc.fn(1), fn);
  EXPECT_EQ(cc.tn(1), tn);
  EXPECT_DOUBLE_EQ(cc.accuracy(), static_cast<double>(hit) / 5000.0);
}

TEST(Prequential, OraclePredictorScoresOne) {
  const auto s = generate_abrupt_drift_stream(1, 300, 300, 0.1).samples;
  Oracle o{&s};
  const auto r = prequential_run(o, std::span<const LabeledSample>(s), 2);
  EXPECT_EQ(r.counts.accuracy(), 1.0);
  EXPECT_FALSE(r.fault);
}

TEST(Prequential, ConstantPredictorScoresMajorityShare) {
  std::vector<ClassId> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10 < 7 ? 0 : 1;
  const auto s = labeled(labels);
  Constant c;
  const auto r = prequential_run(c, std::span<const LabeledSample>(s), 2);
  EXPECT_DOUBLE_EQ(r.counts.accuracy(), 0.7);
  EXPECT_EQ(r.curve.size(), 1000u / 50u);
}

TEST(Prequential, MetricsRecomputableFromLog) {
  const auto s = generate_abrupt_drift_stream(3, 500, 500, 0.1).samples;
  Tracked t{make_learner(LearnerKind::opa, 2, {}, 1), {}, {}};
  const auto r = prequential_run(t, std::span<const LabeledSample>(s), 2);
  ConfusionCounts cc(2);
  for (std::size_t i = 0; i < r.predictions.size(); ++i) cc.add(r.truths[i], r.predictions[i]);
  const auto a = metrics(cc), b = metrics(r.counts);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.precision, b.precision);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(a.f1, b.f1);
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_EQ(r.truths[i], s[i].label);
}

TEST(Prequential, PredictsBeforeLearning) {
  const auto s = generate_abrupt_drift_stream(4, 200, 1, 0.0).samples;
  Tracked t{make_learner(LearnerKind::efdt, 2, {}, 1), {}, {}};
  const auto pristine = t.model->state_hash();
  prequential_run(t, std::span<const LabeledSample>(s), 2);
  ASSERT_EQ(t.at_predict.size(), s.size());
  EXPECT_EQ(t.at_predict[0], pristine);
  for (std::size_t i = 1; i < s.size(); ++i) ASSERT_EQ(t.at_predict[i], t.after_learn[i - 1]);
}

TEST(Prequential, Deterministic) {
  const auto s = generate_abrupt_drift_stream(5, 400, 400, 0.1).samples;
  Tracked a{make_learner(LearnerKind::sam_knn, 2, {}, 7), {}, {}};
  Tracked b{make_learner(LearnerKind::sam_knn, 2, {}, 7), {}, {}};
  const auto ra = prequential_run(a, std::span<const LabeledSample>(s), 2);
  const auto rb = prequential_run(b, std::span<const LabeledSample>(s), 2);
  EXPECT_EQ(ra.predictions, rb.predictions);
  EXPECT_EQ(a.model->state_hash(), b.model->state_hash());
}

TEST(Prequential, FaultKeepsPartialResults) {
  struct Faulty {
    int n = 0;
    ClassProbabilities predict(const Sample&, LatencyRecorder*) {
      if (++n > 10) throw std::runtime_error("boom");
      return ClassProbabilities::uniform(2);
    }
    void learn(const LabeledSample&, const ClassProbabilities&, LatencyRecorder*) {}
  } f;
  const auto s = labeled(std::vector<ClassId>(50, 0));
  const auto r = prequential_run(f, std::span<const LabeledSample>(s), 2);
  ASSERT_TRUE(r.fault);
  EXPECT_EQ(*r.fault, "boom");
  EXPECT_EQ(r.counts.total(), 10u);
}

TEST(Qos, ThroughputFromWallClock) {
  LatencyRecorder rec(0);
  for (int i = 0; i < 100; ++i) rec.record(10.0);
  const auto q = qos_report(rec, 1.0, 100);
  EXPECT_DOUBLE_EQ(q.throughput_sps, 100.0);
  EXPECT_DOUBLE_EQ(q.mean_latency_ms, 10.0);
}

TEST(Qos, ConstantLatencySingleBin) {
  LatencyRecorder rec(0);
  for (int i = 0; i < 100; ++i) rec.record(2.0);
  const auto q = qos_report(rec, 0.2, 100);
  std::uint64_t nonzero = 0, total = 0;
  for (const auto& b : q.latency_pdf) {
    nonzero += b.count > 0;
    total += b.count;
  }
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(total, 100u);
}

TEST(Qos, HistogramDensityIntegratesToOne) {
  Rng rng(8);
  std::vector<double> v(1000);
  for (auto& x : v) x = 1.0 + rng.uniform() * 3.0;
  const auto h = latency_histogram(v, 20);
  double area = 0.0;
  for (const auto& b : h) area += b.density * (b.hi_ms - b.lo_ms);
  EXPECT_NEAR(area, 1.0, 1e-9);
}

TEST(Qos, WarmupExcluded) {
  LatencyRecorder rec(5);
  for (int i = 0; i < 5; ++i) rec.record(1000.0);
  for (int i = 0; i < 10; ++i) rec.record(1.0);
  EXPECT_EQ(rec.totals_ms().size(), 10u);
  EXPECT_DOUBLE_EQ(qos_report(rec, 1.0, 15).mean_latency_ms, 1.0);
}

TEST(Qos, BreakdownBoundedByMean) {
  LatencyRecorder rec(0);
  std::array<double, kComponentCount> parts{};
  parts[static_cast<std::size_t>(Component::base_learning)] = 1.5;
  parts[static_cast<std::size_t>(Component::normalization)] = 0.2;
  for (int i = 0; i < 50; ++i) rec.record(2.0, parts);
  const auto q = qos_report(rec, 0.1, 50);
  double sum = 0.0;
  for (double b : q.breakdown_ms) sum += b;
  EXPECT_LE(sum, q.mean_latency_ms * 1.05);
  EXPECT_NEAR(q.breakdown_ms[static_cast<std::size_t>(Component::base_learning)], 1.5, 1e-9);
}

TEST(Qos, MeasuredThroughputMatchesLatency) {
  const auto s = labeled(std::vector<ClassId>(300, 0));
  Sleeper sl{std::chrono::microseconds(2000)};
  const auto r = prequential_run(sl, std::span<const LabeledSample>(s), 2, {50, 20});
  const auto q = qos_report(r.latency, r.wall_seconds, r.counts.total());
  EXPECT_GE(q.mean_latency_ms, 2.0);
  EXPECT_NEAR(q.throughput_sps, 1000.0 / q.mean_latency_ms, 0.10 * 1000.0 / q.mean_latency_ms);
  double sum = 0.0;
  for (double b : q.breakdown_ms) sum += b;
  EXPECT_LE(sum, q.mean_latency_ms * 1.05);
  EXPECT_GT(q.breakdown_ms[static_cast<std::size_t>(Component::base_learning)], 0.9 * q.mean_latency_ms);
}
