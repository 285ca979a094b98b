#include <gtest/gtest.h>

#include "common.hpp"
#include "chain_builder.hpp"
#include "generators.hpp"
#include "oracle.hpp"
#include "oracles.hpp"
#include "spectral.hpp"

using namespace markovlm;

namespace {

ref::Mat dense(const TransitionMatrix& q) {
  ref::Mat m(q.n());
  for (std::size_t i = 0; i < q.n(); ++i) m[i] = q.dense_row(i);
  return m;
}

const TransitionMatrix& two_state() {
  static const auto q = TransitionMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  return q;
}

}  // namespace

TEST(Spectral, StationaryMatchesLinearSolve) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto q = random_chain(6, 0.01, seed);
    const auto st = stationary(q);
    ASSERT_TRUE(st.converged);
    const auto pi = ref::stationary(dense(q));
    for (std::size_t i = 0; i < pi.size(); ++i) EXPECT_NEAR(st.pi[i], pi[i], 1e-10);
  }
}

TEST(Spectral, TwoStateDistanceCurve) {
  const auto& q = two_state();
  const auto st = stationary(q);
  EXPECT_NEAR(st.pi[0], 2.0 / 3.0, 1e-10);
  const std::vector<double> pi{2.0 / 3.0, 1.0 / 3.0};
  const auto d = distance_curve(q, pi, 20);
  ASSERT_EQ(d.size(), 20u);
  for (int t = 1; t <= 20; ++t)
    EXPECT_NEAR(d[t - 1], (2.0 / 3.0) * std::pow(0.7, t), 1e-12);
}

TEST(Spectral, TwoStateMixingTimesMatchBruteForce) {
  const auto& q = two_state();
  const std::vector<double> pi{2.0 / 3.0, 1.0 / 3.0};
  const std::vector<std::pair<double, int>> expect{{0.01, 12}, {0.05, 8}, {0.1, 6}, {0.25, 3}};
  for (auto [eps, t] : expect) {
    EXPECT_EQ(ref::mixing_time(dense(q), pi, eps, 100), t);
    EXPECT_EQ(mixing_time(q, pi, eps, 100), t);
  }
}

TEST(Spectral, UniformTwoStateTmin) {
  const auto q = TransitionMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  const std::vector<double> pi{0.5, 0.5};
  for (double e : default_tmin_grid()) EXPECT_EQ(mixing_time(q, pi, e / 2, 100), 1);
  const auto grid = default_tmin_grid();
  const auto r = t_min(q, pi, grid, 100);
  EXPECT_EQ(r.value, 4.0);
  ASSERT_TRUE(r.argmin.has_value());
  EXPECT_EQ(*r.argmin, 0.0);
}

TEST(Spectral, PolygonalWalkIsPeriodic) {
  const auto q = polygonal_walk(4);
  const auto cls = classify_states(q);
  EXPECT_EQ(cls.recurrent_count(), 1u);
  EXPECT_EQ(cls.chain_period(), 2);
  const auto st = stationary(q);
  EXPECT_TRUE(st.periodic);
  for (double p : st.pi) EXPECT_NEAR(p, 0.25, 1e-12);
  const auto grid = default_tmin_grid();
  const auto r = t_min(q, st.pi, grid, 200);
  EXPECT_TRUE(std::isinf(r.value));
  EXPECT_FALSE(r.argmin.has_value());
}

TEST(Spectral, OracleChainIsUnichainAperiodic) {
  for (auto spec : {VocabSpec{2, 3}, VocabSpec{3, 2}}) {
    auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 9));
    const auto q = build_qf(TemperedOracle(table, 1.0), spec);
    const auto cls = classify_states(q);
    ASSERT_EQ(cls.recurrent_count(), 1u);
    const auto rec = cls.recurrent_states();
    EXPECT_EQ(rec.size(), static_cast<std::size_t>(std::pow(spec.T, spec.K)));
    EXPECT_EQ(rec.front(), q.blocks()->recurrent_begin);
    EXPECT_EQ(cls.chain_period(), 1);
  }
}

TEST(Spectral, ClassifyReducibleChain) {
  // 0 -> {0,1}, 1 -> 1 (absorbing), 2 <-> 3 closed pair with period 2.
  const auto q = TransitionMatrix::from_rows(
      {{0.5, 0.5, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}});
  const auto cls = classify_states(q);
  EXPECT_EQ(cls.classes.size(), 3u);
  EXPECT_EQ(cls.recurrent_count(), 2u);
  EXPECT_EQ(cls.recurrent_states(), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(cls.chain_period(), 2);
  EXPECT_FALSE(cls.recurrent[static_cast<std::size_t>(cls.class_of[0])]);
}

TEST(Spectral, EpsilonMatchesDensePower) {
  const VocabSpec spec{2, 3};
  auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 4));
  const auto q = build_qf(TemperedOracle(table, 1.0), spec);
  const auto qk = ref::power(dense(q), 3);
  double m = 1.0;
  for (std::size_t i = 6; i < 14; ++i)
    for (std::size_t j = 6; j < 14; ++j) m = std::min(m, qk[i][j]);
  EXPECT_NEAR(epsilon_of(q, 3), m, 1e-15);
  EXPECT_EQ(epsilon_of(q, 3, 1), epsilon_of(q, 3, 3));
}

TEST(Spectral, EnvelopeFormula) {
  EXPECT_DOUBLE_EQ(envelope(0.1, 3, 3), 1.0);
  EXPECT_DOUBLE_EQ(envelope(0.1, 3, 8), 0.8);
  EXPECT_DOUBLE_EQ(envelope(0.1, 3, 9), 0.8 * 0.8);
  EXPECT_EQ(envelope(0.7, 1, 5), 0.0);  // base clamped at 0
  EXPECT_EQ(envelope(0.0, 2, 100), 1.0);
}

// Property: the convergence envelope holds for seeded random oracles.
TEST(Spectral, EnvelopeHoldsOnRandomOracles) {
  const VocabSpec spec{2, 3};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, seed));
    const auto q = build_qf(TemperedOracle(table, 1.0), spec);
    const auto prof = convergence_profile(q, 3, 300);
    EXPECT_EQ(prof.violations, 0u) << "seed " << seed;
    EXPECT_FALSE(prof.vacuous);
    EXPECT_EQ(prof.points.size(), 298u);
  }
}

TEST(Spectral, TemperatureSweepMinEntryMonotone) {
  const VocabSpec spec{2, 2};
  auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 2.0, 1));
  std::vector<double> taus;
  for (int i = 1; i <= 20; ++i) taus.push_back(0.1 * i);
  const auto pts = temperature_sweep(table, spec, taus);
  ASSERT_EQ(pts.size(), 20u);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].min_oracle_entry, pts[i - 1].min_oracle_entry);
    EXPECT_GE(pts[i].epsilon, pts[i - 1].epsilon);
  }
  const std::vector<double> one{1.0};
  EXPECT_EQ(temperature_sweep(table, spec, one).size(), 1u);
}

TEST(Spectral, RejectsBadArguments) {
  const auto& q = two_state();
  EXPECT_THROW(convergence_profile(q, 3, 2), Error);
  EXPECT_THROW(stationary(q, 0.0), Error);
  const std::vector<double> bad_grid{1.0};
  const std::vector<double> pi{2.0 / 3, 1.0 / 3};
  EXPECT_THROW(t_min(q, pi, bad_grid, 10), Error);
}
