#include <gtest/gtest.h>

#include "common.hpp"
#include "oracles.hpp"
#include "state_space.hpp"

using namespace markovlm;

TEST(StateSpace, CountMatchesEnumeration) {
  for (int T = 2; T <= 5; ++T)
    for (int K = 1; K <= 4; ++K) {
      const auto brute = ref::states(T, K);
      EXPECT_EQ(state_count({T, K}), brute.size()) << "T=" << T << " K=" << K;
    }
}

TEST(StateSpace, TwelveStatesForThreeTokensTwoContext) {
  EXPECT_EQ(state_count({3, 2}), 12u);
  EXPECT_EQ(state_count({2, 3}), 14u);
}

TEST(StateSpace, OrderingIsLengthMajorLexicographic) {
  for (int T = 2; T <= 4; ++T)
    for (int K = 1; K <= 3; ++K) {
      StateSpace sp({T, K});
      const auto brute = ref::states(T, K);
      ASSERT_EQ(sp.size(), brute.size());
      for (std::size_t i = 0; i < brute.size(); ++i) {
        EXPECT_EQ(sp.state(i), brute[i]);
        EXPECT_EQ(sp.index(brute[i]), i);
      }
      EXPECT_EQ(sp.recurrent_size(), static_cast<std::size_t>(std::pow(T, K)));
    }
}

TEST(StateSpace, IncompatibilityMatchesDefinition) {
  for (auto spec : {VocabSpec{2, 3}, VocabSpec{3, 2}, VocabSpec{2, 1}}) {
    const auto S = ref::states(spec.T, spec.K);
    for (const auto& u : S)
      for (const auto& v : S)
        EXPECT_EQ(is_incompatible(u, v, spec), !ref::follows(u, v, spec.K));
  }
}

TEST(StateSpace, SuccessorsAreTheCompatibleStates) {
  const VocabSpec spec{3, 3};
  StateSpace sp(spec);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const auto u = sp.state(i);
    const auto succ = successors(u, spec);
    ASSERT_EQ(succ.size(), 3u);
    for (int t = 0; t < 3; ++t) {
      EXPECT_TRUE(ref::follows(u, succ[t], spec.K));
      EXPECT_EQ(sp.successor_index(i, t), sp.index(succ[t]));
    }
  }
}

TEST(StateSpace, FrontTruncateKeepsTail) {
  const std::vector<int> ctx{1, 2, 3, 4, 5};
  EXPECT_EQ(front_truncate(ctx, 3), (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(front_truncate(ctx, 9), ctx);
}

TEST(StateSpace, RejectsBadSpecs) {
  try {
    state_count({2, 25});
    FAIL() << "expected a size-limit error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSizeLimit);
  }
  EXPECT_THROW(state_count({1, 3}), Error);
  EXPECT_THROW(state_count({2, 0}), Error);
  StateSpace sp({2, 2});
  const std::vector<int> bad{0, 2};
  EXPECT_THROW(sp.index(bad), Error);
  EXPECT_THROW(sp.state(sp.size()), Error);
}
