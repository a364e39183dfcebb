#include <gtest/gtest.h>

#include "msana/ensemble.hpp"
#include "msana/stream.hpp"

using namespace msana;

namespace {

ClassProbabilities probs(std::vector<double> p) { return ClassProbabilities::from_scores(std::move(p)); }

LearnerParams fast_params() {
  LearnerParams p;
  p.arf.trees = 3;
  return p;
}

}  // namespace

TEST(WindowSize, Examples) {
  const std::vector<std::uint64_t> none;
  EXPECT_EQ(window_size(none, 500, 0.1), 50u);
  const std::vector<std::uint64_t> one{120};
  EXPECT_EQ(window_size(one, 200, 0.1), 80u);
  EXPECT_EQ(window_size(none, 1, 0.1), 1u);
  EXPECT_EQ(window_size(none, 9, 0.1), 1u);
  EXPECT_THROW(window_size(none, 0, 0.1), std::invalid_argument);
}

TEST(WindowSize, LiteralReadingUsesIndex) {
  const std::vector<std::uint64_t> one{120};
  EXPECT_EQ(window_size(one, 200, 0.1, true), 120u);
  const std::vector<std::uint64_t> late{300};
  EXPECT_EQ(window_size(late, 200, 0.1, true), 200u);
  EXPECT_EQ(window_size(late, 300, 0.1, false), 1u);
}

TEST(WindowSize, AlwaysWithinOneToN) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::uint64_t n = 1 + rng.below(10000);
    std::vector<std::uint64_t> arr;
    if (rng.bernoulli(0.5)) arr.push_back(rng.below(n + 1));
    const auto s = window_size(arr, n, 0.01 + rng.uniform() * 0.99, rng.bernoulli(0.5));
    EXPECT_GE(s, 1u);
    EXPECT_LE(s, n);
  }
}

TEST(LossHistory, WindowError) {
  LossHistory h;
  EXPECT_EQ(h.window_error(10), 0.5);
  for (int i = 0; i < 10; ++i) h.push(i == 2 || i == 5 || i == 9);
  EXPECT_DOUBLE_EQ(h.window_error(10), 0.3);
  EXPECT_DOUBLE_EQ(h.window_error(1), 1.0);
  EXPECT_DOUBLE_EQ(h.window_error(100), 0.3);
  LossHistory ok;
  for (int i = 0; i < 10; ++i) ok.push(false);
  EXPECT_EQ(ok.window_error(10), 0.0);
}

TEST(LossHistory, MatchesDirectSum) {
  Rng rng(3);
  LossHistory h;
  std::vector<bool> raw;
  for (int i = 0; i < 2000; ++i) {
    const bool e = rng.bernoulli(0.3);
    h.push(e);
    raw.push_back(e);
    const std::uint64_t s = 1 + rng.below(raw.size() + 10);
    const std::size_t n = std::min<std::size_t>(s, raw.size());
    std::size_t errs = 0;
    for (std::size_t k = raw.size() - n; k < raw.size(); ++k) errs += raw[k];
    ASSERT_DOUBLE_EQ(h.window_error(s), static_cast<double>(errs) / static_cast<double>(n));
  }
}

TEST(ModelWeight, Examples) {
  EXPECT_DOUBLE_EQ(model_weight(0.0, 0.001), 1000.0);
  EXPECT_NEAR(model_weight(0.5, 0.001), 1.0 / 0.501, 1e-15);
  EXPECT_NEAR(model_weight(0.5, 0.001), 1.9960, 5e-5);
  const double ratio = model_weight(0.25, 0.001) / model_weight(0.75, 0.001);
  EXPECT_NEAR(ratio, 0.751 / 0.251, 1e-12);
  EXPECT_NEAR(ratio, 2.992, 5e-4);
  EXPECT_THROW(model_weight(1.5, 0.001), std::invalid_argument);
  EXPECT_THROW(model_weight(0.5, 0.0), std::invalid_argument);
}

TEST(ModelWeight, MonotoneDecreasing) {
  for (int i = 0; i < 100; ++i) EXPECT_GT(model_weight(i / 100.0, 0.001), model_weight((i + 1) / 100.0, 0.001));
}

TEST(Combine, Consensus) {
  const std::vector<ClassProbabilities> p(4, probs({0.6, 0.4}));
  const std::vector<double> w(4, 2.5);
  const auto out = combine(p, w);
  EXPECT_EQ(out.predicted, 0u);
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.4, 1e-15);
}

TEST(Combine, HandExample) {
  const std::vector<ClassProbabilities> p{probs({0.6, 0.4}), probs({0.6, 0.4}), probs({0.2, 0.8}), probs({0.2, 0.8})};
  const std::vector<double> w{1, 1, 1, 1};
  const auto out = combine(p, w);
  EXPECT_EQ(out.predicted, 1u);
  EXPECT_NEAR(out[0], 0.4, 1e-15);
  EXPECT_NEAR(out[1], 0.6, 1e-15);
}

TEST(Combine, ZeroWeightsFallBackToUniform) {
  const std::vector<ClassProbabilities> p(4, probs({0.9, 0.1}));
  const std::vector<double> w(4, 0.0);
  Warnings warn;
  const auto out = combine(p, w, &warn);
  EXPECT_EQ(out[0], 0.5);
  EXPECT_EQ(warn.count("combine_zero_weights"), 1u);
}

TEST(Combine, ZeroErrorModelDominatesGrid) {
  const double heavy = model_weight(0.0, 0.001);
  for (double top = 0.6; top <= 1.0 + 1e-12; top += 0.05) {
    for (int pattern = 0; pattern < 8; ++pattern) {
      std::vector<ClassProbabilities> p{probs({top, 1.0 - top})};
      for (int j = 0; j < 3; ++j) p.push_back((pattern >> j) & 1 ? probs({0.0, 1.0}) : probs({0.3, 0.7}));
      const std::vector<double> w{heavy, model_weight(0.5, 0.001), model_weight(0.75, 0.001),
                                  model_weight(1.0, 0.001)};
      EXPECT_EQ(combine(p, w).predicted, 0u) << "top " << top << " pattern " << pattern;
    }
  }
}

TEST(CombineProperty, ArgmaxInvariantToWeightScale) {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t c = 2 + rng.below(4);
    std::vector<ClassProbabilities> p;
    std::vector<double> w, scaled;
    const double k = std::exp((rng.uniform() - 0.5) * 20.0);
    for (int j = 0; j < 4; ++j) {
      std::vector<double> v(c);
      for (auto& x : v) x = rng.uniform();
      p.push_back(probs(v));
      w.push_back(model_weight(rng.uniform(), 0.001));
      scaled.push_back(w.back() * k);
    }
    const auto a = combine(p, w), b = combine(p, scaled);
    EXPECT_EQ(a.predicted, b.predicted);
    EXPECT_TRUE(is_valid(a));
  }
}

TEST(CombineProperty, ZeroErrorDominance) {
  Rng rng(6);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t c = 2 + rng.below(3);
    const ClassId star = static_cast<ClassId>(rng.below(c));
    std::vector<ClassProbabilities> p;
    // Zero-error model: > 0.9 on its class.
    std::vector<double> v(c, 0.0);
    v[star] = 0.9 + 0.1 * rng.uniform() + 1e-9;
    double rest = 1.0 - std::min(1.0, v[star]);
    for (std::size_t i = 0; i < c; ++i)
      if (i != star) v[i] = rest / static_cast<double>(c - 1);
    p.push_back(probs(v));
    std::vector<double> w{model_weight(0.0, 0.001)};
    for (int j = 0; j < 3; ++j) {
      std::vector<double> o(c);
      o[star] = rng.uniform() * 0.6;
      double left = 1.0 - o[star];
      for (std::size_t i = 0; i < c; ++i)
        if (i != star) o[i] = left / static_cast<double>(c - 1);
      ClassId other = static_cast<ClassId>((star + 1) % c);
      o[other] += 0.0;
      p.push_back(probs(o));
      w.push_back(model_weight(0.5 + 0.5 * rng.uniform(), 0.001));
    }
    EXPECT_EQ(combine(p, w).predicted, star);
  }
}

TEST(SelectFollowers, Examples) {
  // Pool order: efdt, knn-adwin, sam-knn, opa.
  const std::vector<double> e1{0.1, 0.2, 0.05, 0.3};
  EXPECT_EQ(select_followers(e1), (std::array<std::size_t, 2>{0, 2}));
  const std::vector<double> e2{0.2, 0.2, 0.2, 0.2};
  EXPECT_EQ(select_followers(e2), (std::array<std::size_t, 2>{0, 1}));
  const std::vector<double> e3{0.5, 0.4, 0.4, 0.4};
  EXPECT_EQ(select_followers(e3), (std::array<std::size_t, 2>{1, 2}));
  const std::vector<double> bad{0.1};
  EXPECT_THROW(select_followers(bad), std::invalid_argument);
}

TEST(Ensemble, ActiveSetShape) {
  Ensemble e(2, {}, fast_params(), 1);
  for (auto f : {std::array<std::size_t, 2>{0, 1}, {2, 3}, {3, 0}, {1, 3}}) {
    e.set_followers(f);
    const auto a = e.active();
    EXPECT_EQ(a[0], 0u);
    EXPECT_EQ(a[1], 1u);
    EXPECT_NE(a[2], a[3]);
    EXPECT_GE(a[2], 2u);
    EXPECT_LT(a[3], 6u);
  }
  EXPECT_THROW(e.set_followers({1, 1}), std::invalid_argument);
  EXPECT_THROW(e.set_followers({0, 4}), std::invalid_argument);
}

TEST(Ensemble, ShadowLearningUpdatesAllSix) {
  Ensemble e(2, {}, fast_params(), 1);
  std::array<std::uint64_t, 6> before{};
  for (std::size_t i = 0; i < 6; ++i) before[i] = e.model(i).state_hash();
  for (const auto& s : generate_abrupt_drift_stream(1, 100, 1, 0.0).samples) e.learn(s.sample.view(), s.label);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NE(e.model(i).state_hash(), before[i]) << i;
}

TEST(Ensemble, OnDriftUsesEndedWindowAndKeepsArrayIncreasing) {
  Ensemble e(2, {}, fast_params(), 1);
  Ensemble::Prediction p;
  p.each.fill(ClassProbabilities::uniform(2));
  // 1000 records: slot 2 (efdt) always wrong, slot 5 (opa) wrong on the
  // last 100 only.
  for (int i = 0; i < 1000; ++i) {
    for (std::size_t k = 0; k < 6; ++k) p.each[k] = probs({0.9, 0.1});
    p.each[2] = probs({0.1, 0.9});
    if (i >= 900) p.each[5] = probs({0.1, 0.9});
    e.record(p, 0);
  }
  EXPECT_EQ(e.current_window(), 100u);
  const auto s_prev = e.on_drift();
  EXPECT_EQ(s_prev, 100u);
  EXPECT_EQ(e.drift_arr(), (std::vector<std::uint64_t>{1000}));
  EXPECT_EQ(e.last_pool_errors()[0], 1.0);
  EXPECT_EQ(e.last_pool_errors()[3], 1.0);
  EXPECT_EQ(e.followers(), (std::array<std::size_t, 2>{1, 2}));
  EXPECT_THROW(e.on_drift(), std::logic_error);
  e.record(p, 0);
  EXPECT_EQ(e.current_window(), 1u);
  e.on_drift();
  EXPECT_EQ(e.drift_arr(), (std::vector<std::uint64_t>{1000, 1001}));
}

TEST(Ensemble, CombineWeightsFromWindowErrors) {
  Ensemble e(2, {}, fast_params(), 1);
  Ensemble::Prediction p;
  for (int i = 0; i < 100; ++i) {
    for (std::size_t k = 0; k < 6; ++k) p.each[k] = probs({0.9, 0.1});
    p.each[1] = probs({0.1, 0.9});
    e.record(p, 0);
  }
  Ensemble::Prediction q;
  for (std::size_t k = 0; k < 6; ++k) q.each[k] = probs({0.3, 0.7});
  q.each[0] = probs({0.95, 0.05});
  e.combine_active(q);
  EXPECT_EQ(q.errors[0], 0.0);
  EXPECT_EQ(q.errors[1], 1.0);
  EXPECT_DOUBLE_EQ(q.weights[0], 1000.0);
  EXPECT_EQ(q.combined.predicted, 0u);
}

TEST(Ensemble, ParallelMatchesSequential) {
  const auto s = generate_abrupt_drift_stream(2, 600, 600, 0.05).samples;
  WorkerPool pool(4);
  Ensemble a(2, {}, fast_params(), 9), b(2, {}, fast_params(), 9, &pool);
  for (const auto& r : s) {
    auto pa = a.predict(r.sample.view());
    auto pb = b.predict(r.sample.view());
    ASSERT_EQ(pa.combined.probs, pb.combined.probs);
    a.record(pa, r.label);
    b.record(pb, r.label);
    a.learn(r.sample.view(), r.label);
    b.learn(r.sample.view(), r.label);
  }
  EXPECT_EQ(a.state_hash(), b.state_hash());
}

TEST(Ensemble, RetrainResetsOnlyRequestedSlots) {
  const auto s = generate_abrupt_drift_stream(3, 300, 1, 0.0).samples;
  Ensemble e(2, {}, fast_params(), 4);
  for (const auto& r : s) e.learn(r.sample.view(), r.label);
  std::array<std::uint64_t, 6> before{};
  for (std::size_t i = 0; i < 6; ++i) before[i] = e.model(i).state_hash();
  std::vector<std::vector<double>> xs{s[0].sample.features};
  std::vector<ClassId> ys{s[0].label};
  const std::vector<std::size_t> slots{5};
  e.retrain(xs, ys, slots, true);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(e.model(i).state_hash(), before[i]);
  auto fresh = make_learner(LearnerKind::opa, 2, fast_params(), mix_seed(4, 5));
  fresh->learn_one(xs[0], ys[0]);
  EXPECT_EQ(e.model(5).state_hash(), fresh->state_hash());
}
