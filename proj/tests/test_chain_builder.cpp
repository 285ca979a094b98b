#include <gtest/gtest.h>

#include <numeric>

#include "common.hpp"
#include "chain_builder.hpp"
#include "oracle.hpp"
#include "oracles.hpp"
#include "spectral.hpp"
#include "transition_matrix.hpp"

using namespace markovlm;

namespace {

// Returns whatever row the test hands it.
class FixedRowOracle final : public Oracle {
 public:
  FixedRowOracle(int T, int K, std::vector<double> row, bool fail = false)
      : T_(T), K_(K), row_(std::move(row)), fail_(fail) {}
  int vocab_size() const override { return T_; }
  int context_length() const override { return K_; }
  std::string kind() const override { return "fixed"; }

 protected:
  Distribution query_impl(std::span<const int>) const override {
    if (fail_) throw std::runtime_error("backend exploded");
    return row_;
  }

 private:
  int T_, K_;
  std::vector<double> row_;
  bool fail_;
};

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace

TEST(ChainBuilder, MatchesDefinitionForRandomLogits) {
  for (auto spec : {VocabSpec{2, 3}, VocabSpec{3, 2}, VocabSpec{4, 1}}) {
    auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 2.0, 11));
    TemperedOracle oracle(table, 0.7);
    const auto q = build_qf(oracle, spec);
    const auto expect = ref::qf(spec.T, spec.K, [&](const ref::Seq& s) {
      return ref::softmax(table->logits(s), 0.7);
    });
    ASSERT_EQ(q.n(), expect.size());
    for (std::size_t i = 0; i < q.n(); ++i)
      for (std::size_t j = 0; j < q.n(); ++j)
        EXPECT_NEAR(q.at(i, j), expect[i][j], 1e-15);
  }
}

TEST(ChainBuilder, StructureCountsAreExact) {
  for (int T = 2; T <= 4; ++T)
    for (int K = 1; K <= 4; ++K) {
      UniformOracle o(T, K);
      const auto q = build_qf(o, {T, K});
      const auto r = validate_structure(q, {T, K});
      const std::uint64_t tk = ipow(T, K);
      const std::uint64_t n = T * (tk - 1) / (T - 1);
      EXPECT_EQ(r.n_states, n);
      EXPECT_EQ(r.nonzero_count, T * n);
      EXPECT_EQ(r.expected_nonzeros, T * n);
      const std::uint64_t g = std::gcd<std::uint64_t>(T - 1, tk - 1);
      EXPECT_EQ(r.nonzero_proportion, (Rational{(T - 1) / g, (tk - 1) / g}));
      EXPECT_TRUE(r.block_pattern_ok);
      EXPECT_TRUE(r.support_exact);
      ASSERT_TRUE(r.nilpotency_index.has_value());
      EXPECT_LE(*r.nilpotency_index, K);
    }
}

TEST(ChainBuilder, UniformTwoByThreeIsOneSeventh) {
  UniformOracle o(2, 3);
  const auto r = validate_structure(build_qf(o, {2, 3}), {2, 3});
  EXPECT_EQ(r.nonzero_proportion, (Rational{1, 7}));
}

TEST(ChainBuilder, TransientBlockIsNilpotent) {
  for (auto spec : {VocabSpec{2, 4}, VocabSpec{3, 3}}) {
    auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 3));
    const auto q = build_qf(TemperedOracle(table, 1.0), spec);
    const std::size_t rb = q.blocks()->recurrent_begin;
    ref::Mat pt(rb, std::vector<double>(rb, 0.0));
    for (std::size_t i = 0; i < rb; ++i)
      for (std::size_t j = 0; j < rb; ++j) pt[i][j] = q.at(i, j);
    const auto pk = ref::power(pt, spec.K);
    for (const auto& row : pk)
      for (double v : row) EXPECT_EQ(v, 0.0);
    // Nothing flows back from the recurrent block.
    for (std::size_t i = rb; i < q.n(); ++i)
      for (auto c : q.row_cols(i)) EXPECT_GE(c, rb);
  }
}

TEST(ChainBuilder, SmallDriftIsRenormalized) {
  FixedRowOracle o(2, 2, {0.5 + 5e-7, 0.5});
  const auto q = build_qf(o, {2, 2});
  EXPECT_LE(q.max_row_sum_error(), 1e-12);
}

TEST(ChainBuilder, LargeDriftIsANormalizationError) {
  FixedRowOracle o(2, 2, {0.6, 0.5});
  try {
    build_qf(o, {2, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNormalization);
  }
}

TEST(ChainBuilder, OracleFailureIsWrapped) {
  FixedRowOracle o(2, 2, {0.5, 0.5}, true);
  try {
    build_qf(o, {2, 2}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOracle);
  }
}

TEST(ChainBuilder, ParallelBuildIsIdentical) {
  const VocabSpec spec{3, 3};
  auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 5));
  TemperedOracle o(table, 1.0);
  EXPECT_EQ(build_qf(o, spec, 1).to_json(), build_qf(o, spec, 4).to_json());
}

TEST(ChainBuilder, RecurrentBlock) {
  const VocabSpec spec{2, 3};
  auto table = std::make_shared<LogitTable>(LogitTable::random(spec, 1.0, 8));
  const auto q = build_qf(TemperedOracle(table, 1.0), spec);
  const auto r = recurrent_block(q);
  EXPECT_EQ(r.n(), 8u);
  EXPECT_EQ(r.label(), "recurrent-block-only");
  EXPECT_LE(r.max_row_sum_error(), 1e-12);
  // Same stationary law as the full chain, restricted to length-K states.
  const auto full = stationary(q);
  const auto block = stationary(r);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(full.pi[6 + i], block.pi[i], 1e-10);
  try {
    recurrent_block(q, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSizeLimit);
  }
}

TEST(ChainBuilder, JsonRoundTrip) {
  UniformOracle o(3, 2);
  const auto q = build_qf(o, {3, 2});
  const auto back = TransitionMatrix::from_json(q.to_json());
  EXPECT_EQ(back.to_json(), q.to_json());
  ASSERT_TRUE(back.blocks().has_value());
  EXPECT_EQ(back.blocks()->recurrent_begin, 3u);
}

TEST(ChainBuilder, StructureReportFlagsWrongSupport) {
  UniformOracle o(2, 2);
  const auto q = build_qf(o, {2, 2});
  auto dense = q.to_dense();
  dense(0, 0) = 0.5;  // self-loop on a length-1 state
  dense(0, 2) = 0.0;
  const auto bad = TransitionMatrix::from_dense(dense);
  EXPECT_FALSE(validate_structure(bad, {2, 2}).support_exact);
}
