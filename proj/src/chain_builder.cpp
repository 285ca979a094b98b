#include "chain_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace markovlm {

namespace {

Distribution checked_row(const Oracle& oracle, std::span<const int> state,
                         std::size_t row) {
  Distribution p;
  try {
    p = oracle.query(state);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTransport || e.code() == ErrorCode::kProtocol ||
        e.code() == ErrorCode::kOracle)
      throw;
    fail(ErrorCode::kOracle, std::string("oracle failed on state ") +
                                 std::to_string(row) + ": " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kOracle, std::string("oracle failed on state ") +
                                 std::to_string(row) + ": " + e.what());
  }
  if (p.size() != static_cast<std::size_t>(oracle.vocab_size()))
    fail(ErrorCode::kOracle, "oracle returned " + std::to_string(p.size()) +
                                 " probabilities on state " + std::to_string(row));
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0 + kRepairTolerance))
      fail(ErrorCode::kNormalization,
           "oracle row " + std::to_string(row) + " has an entry outside [0,1]");
    s += v;
  }
  const double drift = std::abs(s - 1.0);
  if (drift > kRepairTolerance)
    fail(ErrorCode::kNormalization, "oracle row " + std::to_string(row) +
                                        " sums to " + std::to_string(s) +
                                        ", beyond the repair tolerance");
  if (drift > kSumTolerance)
    for (double& v : p) v /= s;
  return p;
}

}  // namespace

TransitionMatrix build_qf(const Oracle& oracle, VocabSpec spec, unsigned jobs,
                          std::uint64_t power_cap) {
  const StateSpace space(spec, power_cap);
  require(oracle.vocab_size() == spec.T,
          "build_qf: oracle vocabulary size " +
              std::to_string(oracle.vocab_size()) + " != T=" +
              std::to_string(spec.T));
  const std::size_t n = space.size();
  std::vector<std::vector<Triplet>> rows(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const SeqState s = space.state(i);
    const Distribution p = checked_row(oracle, s, i);
    auto& out = rows[i];
    out.reserve(p.size());
    for (int x = 0; x < spec.T; ++x)
      if (p[x] > 0.0) out.push_back({i, space.successor_index(i, x), p[x]});
  });
  std::vector<Triplet> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  auto q = TransitionMatrix::from_triplets(n, std::move(all));
  q.set_blocks({0, space.recurrent_begin(), space.recurrent_begin(), n});
  return q;
}

std::string StructureReport::to_json() const {
  nlohmann::json j = {
      {"n_states", n_states},
      {"nonzero_count", nonzero_count},
      {"expected_nonzeros", expected_nonzeros},
      {"nonzero_proportion",
       std::to_string(nonzero_proportion.num) + "/" +
           std::to_string(nonzero_proportion.den)},
      {"row_sum_max_error", row_sum_max_error},
      {"block_pattern_ok", block_pattern_ok},
      {"support_exact", support_exact},
      {"nilpotency_index", nilpotency_index ? nlohmann::json(*nilpotency_index)
                                            : nlohmann::json(nullptr)}};
  return j.dump(2);
}

StructureReport validate_structure(const TransitionMatrix& q, VocabSpec spec) {
  const StateSpace space(spec);
  StructureReport r;
  r.n_states = q.n();
  r.nonzero_count = q.nonzeros();
  const auto T = static_cast<std::uint64_t>(spec.T);
  r.expected_nonzeros = static_cast<std::size_t>(T * space.size());
  const std::uint64_t n2 = static_cast<std::uint64_t>(q.n()) * q.n();
  const std::uint64_t g = std::gcd<std::uint64_t>(r.nonzero_count, n2);
  r.nonzero_proportion = g == 0 ? Rational{0, 1}
                                : Rational{r.nonzero_count / g, n2 / g};
  r.row_sum_max_error = q.max_row_sum_error();
  if (q.n() != space.size()) return r;

  const std::size_t rb = space.recurrent_begin();
  bool pattern = true, exact = true;
  for (std::size_t i = 0; i < q.n(); ++i) {
    std::vector<std::size_t> succ;
    for (int x = 0; x < spec.T; ++x) succ.push_back(space.successor_index(i, x));
    std::sort(succ.begin(), succ.end());
    const auto cols = q.row_cols(i);
    for (std::size_t j : cols) {
      if (!std::binary_search(succ.begin(), succ.end(), j)) pattern = false;
      if (i >= rb && j < rb) pattern = false;
    }
    if (!std::equal(cols.begin(), cols.end(), succ.begin(), succ.end()))
      exact = false;
  }
  r.block_pattern_ok = pattern;
  r.support_exact = exact;

  // Structural powers of P_T: `live` marks transient rows that still have a
  // length-k path staying inside the transient block.
  std::vector<char> live(rb, 1);
  int k = 1;
  for (; k <= spec.K; ++k) {
    // live_k(i) = exists j transient with P_T(i,j) > 0 and live_{k-1}(j);
    // live_1(i) = row i of P_T is nonzero.
    std::vector<char> next(rb, 0);
    for (std::size_t i = 0; i < rb; ++i) {
      const auto cols = q.row_cols(i);
      const auto vals = q.row_values(i);
      for (std::size_t e = 0; e < cols.size(); ++e)
        if (cols[e] < rb && vals[e] != 0.0 && (k == 1 || live[cols[e]])) {
          next[i] = 1;
          break;
        }
    }
    live.swap(next);
    if (std::none_of(live.begin(), live.end(), [](char c) { return c != 0; }))
      break;
  }
  if (k <= spec.K) r.nilpotency_index = k;
  return r;
}

TransitionMatrix recurrent_block(const TransitionMatrix& q,
                                 std::size_t memory_cap_bytes) {
  require(q.blocks().has_value(),
          "recurrent_block: matrix carries no block metadata");
  const BlockInfo b = *q.blocks();
  const std::size_t m = b.recurrent_end - b.recurrent_begin;
  require(m > 0, "recurrent_block: empty recurrent block");
  if (m > memory_cap_bytes / sizeof(double) / m)
    fail(ErrorCode::kSizeLimit,
         "recurrent_block: a dense " + std::to_string(m) + "x" +
             std::to_string(m) + " block exceeds the memory cap of " +
             std::to_string(memory_cap_bytes) + " bytes");
  std::vector<Triplet> trips;
  for (std::size_t i = b.recurrent_begin; i < b.recurrent_end; ++i) {
    const auto cols = q.row_cols(i);
    const auto vals = q.row_values(i);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      if (cols[e] < b.recurrent_begin || cols[e] >= b.recurrent_end)
        fail(ErrorCode::kInvalidArgument,
             "recurrent_block: recurrent row " + std::to_string(i) +
                 " leaks into column " + std::to_string(cols[e]));
      trips.push_back({i - b.recurrent_begin, cols[e] - b.recurrent_begin, vals[e]});
    }
  }
  auto r = TransitionMatrix::from_triplets(m, std::move(trips));
  r.set_blocks({0, 0, 0, m});
  r.set_label("recurrent-block-only");
  return r;
}

}  // namespace markovlm
