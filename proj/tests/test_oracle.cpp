#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "oracle.hpp"
#include "oracles.hpp"
#include "toy_model.hpp"

using namespace markovlm;

TEST(Oracle, SoftmaxMatchesDirectFormula) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int c = 0; c < 100; ++c) {
    std::vector<double> x(5);
    for (double& v : x) v = z(rng);
    const double tau = 0.1 + 0.05 * c;
    const auto p = apply_temperature(x, tau);
    const auto e = ref::softmax(x, tau);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(p[i], e[i], 1e-14);
  }
}

// Property: the smallest softmax entry never decreases as tau grows.
TEST(Oracle, MinEntryNondecreasingInTemperature) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int c = 0; c < 300; ++c) {
    std::vector<double> x(2 + c % 6);
    for (double& v : x) v = z(rng);
    double prev = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const auto p = apply_temperature(x, 0.1 * k);
      const double m = *std::min_element(p.begin(), p.end());
      EXPECT_GE(m, prev);
      prev = m;
    }
  }
}

TEST(Oracle, SoftmaxLowerBound) {
  EXPECT_DOUBLE_EQ(softmax_lower_bound(4, 0.0), 0.25);
  EXPECT_DOUBLE_EQ(softmax_lower_bound(2, 1.0), 1.0 / (2.0 * std::exp(2.0)));
}

TEST(Oracle, TemperatureRejectsBadInput) {
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(apply_temperature(x, 0.0), Error);
  EXPECT_THROW(apply_temperature(x, -1.0), Error);
  const std::vector<double> inf{1.0, INFINITY};
  EXPECT_THROW(apply_temperature(inf, 1.0), Error);
}

TEST(Oracle, QueryFrontTruncates) {
  const VocabSpec spec{3, 2};
  auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 2));
  TemperedOracle o(table, 1.0);
  const std::vector<int> longctx{2, 0, 1, 1, 2};
  const std::vector<int> tail{1, 2};
  EXPECT_EQ(o.query(longctx), o.query(tail));
}

TEST(Oracle, QueryValidatesTokens) {
  UniformOracle o(3, 2);
  const std::vector<int> bad{0, 3};
  EXPECT_THROW(o.query(bad), Error);
  EXPECT_THROW(o.query(std::vector<int>{}), Error);
}

TEST(Oracle, ChainOracleUsesLastToken) {
  const auto q = TransitionMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  ChainOracle o(q);
  EXPECT_EQ(o.query(std::vector<int>{0, 0, 1}), (Distribution{0.2, 0.8}));
  EXPECT_EQ(o.query(std::vector<int>{1, 0}), (Distribution{0.9, 0.1}));
}

TEST(Oracle, NgramCounts) {
  const std::vector<int> seq{0, 1, 0, 1, 1};
  const auto o = fit_ngram(seq, 2, 1, 0.0);
  EXPECT_EQ(o->query(std::vector<int>{0}), (Distribution{0.0, 1.0}));
  EXPECT_EQ(o->query(std::vector<int>{1}), (Distribution{0.5, 0.5}));
  const auto s = fit_ngram(seq, 2, 1, 1.0);
  // (0 + 1) / (2 + 2) and (2 + 1) / (2 + 2)
  EXPECT_EQ(s->query(std::vector<int>{0}), (Distribution{0.25, 0.75}));
}

TEST(Oracle, NgramUnseenContextIsUniform) {
  const std::vector<int> seq{0, 0, 0};
  const auto o = fit_ngram(seq, 3, 2, 0.0);
  EXPECT_EQ(o->query(std::vector<int>{2, 2}), (Distribution{1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(ToyModel, ParitySequenceDefinition) {
  const auto seq = parity_sequence(40, {0, 0, 1});
  ASSERT_EQ(seq.size(), 40u);
  EXPECT_EQ(seq[0], 0);
  EXPECT_EQ(seq[1], 0);
  EXPECT_EQ(seq[2], 1);
  for (std::size_t i = 3; i < seq.size(); ++i)
    EXPECT_EQ(seq[i], (seq[i - 1] + seq[i - 2] + seq[i - 3]) % 2);
}

TEST(ToyModel, ThirtySevenExamples) {
  const auto seq = parity_sequence(40, {0, 0, 1});
  const auto ex = sliding_examples(seq, 3);
  ASSERT_EQ(ex.size(), 37u);
  EXPECT_EQ(ex[0].context, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(ex[0].next, 1);
  EXPECT_EQ(parity_truth_table(3).size(), 8u);
}

TEST(ToyModel, TrainingLowersLossAndRoundTrips) {
  const auto seq = parity_sequence(40, {0, 0, 1});
  ToyModelConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 3;
  const auto trained = train_toy(sliding_examples(seq, 3), 2, cfg);
  const auto& losses = trained.model->epoch_losses();
  ASSERT_EQ(losses.size(), 200u);
  EXPECT_LT(losses.back(), losses.front());
  // Every training context is predicted correctly.
  for (const auto& ex : sliding_examples(seq, 3)) {
    const auto p = trained.oracle->query(ex.context);
    EXPECT_GT(p[static_cast<std::size_t>(ex.next)], 0.5);
  }
  const auto back = ToyModel::from_json(trained.model->to_json());
  for (const auto& s : ref::states(2, 3))
    EXPECT_EQ(back->logits(s), trained.model->logits(s));
}

TEST(ToyModel, SameSeedSameModel) {
  ToyModelConfig cfg;
  cfg.epochs = 20;
  const auto a = train_toy(parity_truth_table(3), 2, cfg);
  const auto b = train_toy(parity_truth_table(3), 2, cfg);
  EXPECT_EQ(a.model->to_json(), b.model->to_json());
}

TEST(ToyModel, DivergingTrainingIsReported) {
  ToyModelConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 50;
  try {
    train_toy(parity_truth_table(3), 2, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
  }
}
