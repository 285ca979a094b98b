#include <gtest/gtest.h>

#include <numeric>

#include "common.hpp"
#include "generators.hpp"

using namespace markovlm;

TEST(Generators, RandomChainIsStochasticWithFloor) {
  for (int d : {2, 3, 10, 50}) {
    const auto q = random_chain(d, 0.1 / d, 42);
    EXPECT_LE(q.max_row_sum_error(), 1e-12);
    for (std::size_t i = 0; i < q.n(); ++i)
      for (double v : q.dense_row(i)) EXPECT_GE(v, 0.1 / d - 1e-15);
  }
  EXPECT_EQ(random_chain(5, 0.0, 1).to_json(), random_chain(5, 0.0, 1).to_json());
  EXPECT_NE(random_chain(5, 0.0, 1).to_json(), random_chain(5, 0.0, 2).to_json());
  EXPECT_THROW(random_chain(4, 0.3, 1), Error);
}

TEST(Generators, ConstrainedWalk) {
  const auto q = constrained_walk(4);
  EXPECT_EQ(q.dense_row(0), (std::vector<double>{0, 1, 0, 0}));
  EXPECT_EQ(q.dense_row(2), (std::vector<double>{0, 0.5, 0, 0.5}));
  EXPECT_EQ(q.dense_row(3), (std::vector<double>{0, 0, 1, 0}));
}

TEST(Generators, PolygonalWalk) {
  const auto q = polygonal_walk(5);
  EXPECT_EQ(q.dense_row(0), (std::vector<double>{0, 0.5, 0, 0, 0.5}));
  EXPECT_THROW(polygonal_walk(2), Error);
}

TEST(Generators, CliqueRimIsStochastic) {
  for (double eta : {0.0, 0.1, 0.5}) {
    const auto q = clique_rim(9, eta, {0, 1, 1});
    EXPECT_LE(q.max_row_sum_error(), 1e-12);
    for (std::size_t i = 0; i < q.n(); ++i)
      for (double v : q.dense_row(i)) EXPECT_GE(v, 0.0);
  }
}

TEST(Generators, CliqueRimFlipTouchesOneClique) {
  const auto a = clique_rim(12, 0.2, {0, 0, 0, 0});
  const auto b = clique_rim(12, 0.2, {0, 1, 0, 0});
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      if (a.at(i, j) != b.at(i, j)) {
        ++changed;
        // Only clique state 1 and its two rim states are involved.
        const bool row_ok = i == 1 || i == 4 + 2 || i == 4 + 3;
        EXPECT_TRUE(row_ok) << i << "," << j;
      }
  EXPECT_EQ(changed, 6u);
}

TEST(Generators, CliqueRimRejectsBadInput) {
  EXPECT_THROW(clique_rim(3, 0.1, {0}), Error);
  EXPECT_NO_THROW(clique_rim(3, 0.0, {1}));
  EXPECT_THROW(clique_rim(10, 0.1, {0, 0, 0}), Error);
  EXPECT_THROW(clique_rim(6, 0.1, {0, 2}), Error);
  EXPECT_THROW(clique_rim(6, 0.1, {0}), Error);
}

TEST(Generators, ProcessesAreDeterministic) {
  for (const char* name : {"gbm", "correlated_gaussian", "uncorrelated_gaussian",
                           "uncorrelated_uniform", "brownian"}) {
    const auto kind = parse_process_kind(name);
    EXPECT_EQ(to_string(kind), name);
    EXPECT_EQ(simulate_process(kind, {}, 100, 9), simulate_process(kind, {}, 100, 9));
  }
  EXPECT_THROW(parse_process_kind("levy"), Error);
}

TEST(Generators, UniformProcessRange) {
  const auto x = simulate_process(ProcessKind::kUncorrelatedUniform, {}, 10000, 1);
  for (double v : x) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(Generators, ArOneLagCorrelation) {
  ProcessParams p;
  p.rho = 0.8;
  p.x0 = 0.0;
  const auto x = simulate_process(ProcessKind::kCorrelatedGaussian, p, 200000, 5);
  double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) num += (x[i] - m) * (x[i + 1] - m);
  for (double v : x) den += (v - m) * (v - m);
  EXPECT_NEAR(num / den, 0.8, 0.01);
}

TEST(Generators, GbmStaysPositive) {
  ProcessParams p;
  p.sigma = 0.5;
  for (double v : simulate_process(ProcessKind::kGbm, p, 1000, 3)) EXPECT_GT(v, 0.0);
  p.x0 = -1;
  EXPECT_THROW(simulate_process(ProcessKind::kGbm, p, 10, 3), Error);
}

TEST(Generators, DiscretizeBins) {
  const std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0, 0.1};
  EXPECT_EQ(discretize(x, 4), (std::vector<int>{0, 0, 1, 2, 3, 0}));
  EXPECT_THROW(discretize({1.0, 1.0}, 2), Error);
  const auto y = simulate_process(ProcessKind::kBrownian, {}, 500, 2);
  for (int s : discretize(y, 7)) {
    EXPECT_GE(s, 0);
    EXPECT_LT(s, 7);
  }
}
