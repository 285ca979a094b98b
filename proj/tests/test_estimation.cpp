#include <gtest/gtest.h>

#include "common.hpp"
#include "estimation.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "spectral.hpp"

using namespace markovlm;

namespace {

const TransitionMatrix& two_state() {
  static const auto q = TransitionMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  return q;
}

Trajectory traj_of(std::vector<int> s, int d) {
  Trajectory t;
  t.states = std::move(s);
  t.d = d;
  return t;
}

}  // namespace

TEST(Estimation, TrajectoryIsSeededAndFollowsSupport) {
  const auto q = polygonal_walk(5);
  const std::vector<double> start{1, 0, 0, 0, 0};
  const auto a = sample_trajectory(q, start, 1000, 3);
  EXPECT_EQ(a.states, sample_trajectory(q, start, 1000, 3).states);
  EXPECT_EQ(a.states[0], 0);
  for (std::size_t i = 0; i + 1 < a.states.size(); ++i) {
    const int step = (a.states[i + 1] - a.states[i] + 5) % 5;
    EXPECT_TRUE(step == 1 || step == 4);
  }
}

TEST(Estimation, OccupationApproachesStationary) {
  const auto& q = two_state();
  const std::vector<double> start{0.5, 0.5};
  const auto t = sample_trajectory(q, start, 200000, 1);
  double zeros = 0;
  for (int s : t.states) zeros += s == 0;
  EXPECT_NEAR(zeros / t.states.size(), 2.0 / 3.0, 0.01);
}

TEST(Estimation, FrequentistCounts) {
  const auto est = frequentist_estimate(traj_of({0, 1, 1, 0, 1}, 3), 3);
  EXPECT_EQ(est.q.dense_row(0), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(est.q.dense_row(1), (std::vector<double>{0.5, 0.5, 0}));
  EXPECT_EQ(est.q.dense_row(2), (std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}));
  EXPECT_EQ(est.unvisited, (std::vector<bool>{false, false, true}));
  EXPECT_THROW(frequentist_estimate(traj_of({0}, 2), 2), Error);
  EXPECT_THROW(frequentist_estimate(traj_of({0, 4}, 2), 2), Error);
}

TEST(Estimation, TvRiskByHand) {
  const auto& q = two_state();
  UniformOracle u(2, 1);
  // Row 0 is 0.4 from uniform in TV, row 1 is 0.3.
  const auto t = traj_of({0, 0, 1, 0}, 2);
  EXPECT_NEAR(tv_risk(q, u, t), (0.4 + 0.4 + 0.3 + 0.4) / 4.0, 1e-15);
  ChainOracle truth(q);
  EXPECT_EQ(tv_risk(q, truth, t), 0.0);
}

TEST(Estimation, KlRiskInfiniteOnZeroMass) {
  const auto& q = two_state();
  ChainOracle bad(TransitionMatrix::from_rows({{1.0, 0.0}, {0.5, 0.5}}));
  EXPECT_TRUE(std::isinf(kl_risk(q, bad, traj_of({0, 1}, 2))));
  ChainOracle truth(q);
  EXPECT_EQ(kl_risk(q, truth, traj_of({0, 1}, 2)), 0.0);
}

TEST(Estimation, TheoreticalRiskMatchesMonteCarlo) {
  const auto& q = two_state();
  const auto p = TransitionMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  const std::vector<double> start{1.0, 0.0};
  const double exact = theoretical_tv_risk(q, p, start, 10);
  UniformOracle u(2, 1);
  double mc = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) mc += tv_risk(q, u, sample_trajectory(q, start, 10, r));
  EXPECT_NEAR(mc / reps, exact, 0.002);
}

TEST(Estimation, RiskCurveDeterministicAndJobsInvariant) {
  const auto q = random_chain(3, 0.0, 7);
  RiskCurveOptions opt;
  opt.reps = 5;
  opt.seed = 11;
  const auto a = icl_risk_curve(q, frequentist_predictor(3), {10, 100, 1000}, opt);
  opt.jobs = 3;
  const auto b = icl_risk_curve(q, frequentist_predictor(3), {10, 100, 1000}, opt);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  for (const auto& r : a.rows) {
    EXPECT_LE(r.lo, r.mean);
    EXPECT_LE(r.mean, r.hi);
    EXPECT_GE(r.lo, 0.0);
    EXPECT_LE(r.hi, 1.0);
  }
  EXPECT_EQ(a.to_csv().substr(0, a.to_csv().find('\n')), "N,mean,lo,hi,reps,metric,estimator");
}

TEST(Estimation, GroundTruthCurveIsZero) {
  const auto q = random_chain(4, 0.0, 1);
  RiskCurveOptions opt;
  opt.reps = 3;
  const auto c = icl_risk_curve(
      q, fixed_predictor(std::make_shared<ChainOracle>(q), "truth"), {10, 50}, opt);
  for (const auto& r : c.rows) EXPECT_EQ(r.mean, 0.0);
}

TEST(Estimation, NgramPredictorLearns) {
  const auto q = random_chain(3, 0.05, 2);
  RiskCurveOptions opt;
  opt.reps = 10;
  const auto c = icl_risk_curve(q, ngram_predictor(3, 1, 0.5), {50, 5000}, opt);
  EXPECT_EQ(c.estimator, "ngram1");
  EXPECT_GT(c.rows[0].mean, c.rows[1].mean);
}

TEST(Estimation, RiskCurveRejectsBadLists) {
  const auto q = random_chain(3, 0.0, 7);
  RiskCurveOptions opt;
  EXPECT_THROW(icl_risk_curve(q, frequentist_predictor(3), {}, opt), Error);
  EXPECT_THROW(icl_risk_curve(q, frequentist_predictor(3), {100, 10}, opt), Error);
  opt.reps = 1;
  EXPECT_THROW(icl_risk_curve(q, frequentist_predictor(3), {10}, opt), Error);
}

TEST(Estimation, PowerLawFitExact) {
  std::vector<double> x, y;
  for (double n : {10.0, 100.0, 1000.0, 10000.0}) {
    x.push_back(n);
    y.push_back(3.0 * std::pow(n, -0.5));
  }
  const auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  const std::vector<double> flat{0.2, 0.2, 0.2, 0.2};
  EXPECT_EQ(fit_power_law(x, flat).slope, 0.0);
  const std::vector<double> two{1, 2};
  EXPECT_THROW(fit_power_law(two, two), Error);
}

TEST(Estimation, OracleDivergence) {
  const auto& q = two_state();
  ChainOracle a(q);
  UniformOracle u(2, 1);
  const std::vector<Trajectory> ts{traj_of({0, 1, 0}, 2), traj_of({1, 1}, 2)};
  EXPECT_EQ(oracle_divergence(a, a, ts), 0.0);
  EXPECT_NEAR(oracle_divergence(a, u, ts), ((0.4 + 0.3 + 0.4) / 3 + 0.3) / 2, 1e-15);
}
