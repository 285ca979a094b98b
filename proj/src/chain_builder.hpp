#pragma once

#include <cstdint>
#include <optional>

#include "oracle.hpp"
#include "state_space.hpp"
#include "transition_matrix.hpp"

namespace markovlm {

// Materializes Q_f over V*_K: row i holds query(state i) spread over the
// successors of state i, indexed by the emitted token. Rows that miss the
// 1e-9 sum check by at most 1e-6 are renormalized; larger drift throws
// kNormalization. Oracle exceptions are rethrown as kOracle unless they
// already carry a transport or protocol code.
TransitionMatrix build_qf(const Oracle& oracle, VocabSpec spec,
                          unsigned jobs = 1,
                          std::uint64_t power_cap = kDefaultPowerCap);

struct Rational {
  std::uint64_t num = 0, den = 1;
  bool operator==(const Rational&) const = default;
};

struct StructureReport {
  std::size_t n_states = 0;
  std::size_t nonzero_count = 0;
  std::size_t expected_nonzeros = 0;  // T^2 (T^K - 1) / (T - 1)
  Rational nonzero_proportion;        // nonzero_count / n_states^2, reduced
  double row_sum_max_error = 0.0;
  bool block_pattern_ok = false;
  bool support_exact = false;  // support(row i) == successors(state i)
  std::optional<int> nilpotency_index;  // smallest k <= K with P_T^k = 0

  std::string to_json() const;
};

StructureReport validate_structure(const TransitionMatrix& q, VocabSpec spec);

// P_R: the T^K x T^K block on the length-K states, labelled
// "recurrent-block-only". Throws kSizeLimit when a dense copy of the block
// would exceed `memory_cap_bytes`.
TransitionMatrix recurrent_block(const TransitionMatrix& q,
                                 std::size_t memory_cap_bytes = std::size_t{1} << 30);

}  // namespace markovlm
