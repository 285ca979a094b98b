#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace markovlm {

using SeqState = std::vector<int>;

struct VocabSpec {
  int T = 2;  // vocabulary size
  int K = 1;  // context window
};

// Default cap on T^K, the size of the recurrent block.
constexpr std::uint64_t kDefaultPowerCap = std::uint64_t{1} << 24;

// Closed-form |V*_K| = T (T^K - 1) / (T - 1). Throws kSizeLimit when T^K
// exceeds `power_cap`.
std::uint64_t state_count(VocabSpec spec,
                          std::uint64_t power_cap = kDefaultPowerCap);

// All token sequences of length 1..K over [0, T), indexed length-major and
// then by base-T value with the first token most significant.
class StateSpace {
 public:
  explicit StateSpace(VocabSpec spec,
                      std::uint64_t power_cap = kDefaultPowerCap);

  VocabSpec spec() const { return spec_; }
  int T() const { return spec_.T; }
  int K() const { return spec_.K; }
  std::size_t size() const { return size_; }

  // First index of the states of length `len` (1-based length).
  std::size_t offset(int len) const { return offsets_[len - 1]; }
  // Transient states are [0, recurrent_begin()); length-K states follow.
  std::size_t recurrent_begin() const { return offset(spec_.K); }
  std::size_t recurrent_size() const { return size_ - recurrent_begin(); }

  std::size_t index(std::span<const int> state) const;
  SeqState state(std::size_t index) const;
  int length(std::size_t index) const;
  int last_token(std::size_t index) const;

  // Index of the successor of state `index` after emitting `token`.
  std::size_t successor_index(std::size_t index, int token) const;

  std::vector<SeqState> enumerate() const;

  bool valid(std::span<const int> state) const;

 private:
  VocabSpec spec_;
  std::size_t size_ = 0;
  std::vector<std::size_t> offsets_;  // offsets_[l-1] for l in 1..K, plus end
  std::vector<std::size_t> powers_;   // T^0 .. T^K
};

std::vector<SeqState> enumerate_states(VocabSpec spec);

// True iff v cannot follow u in one generation step (append when |u| < K,
// drop-first-and-append when |u| = K).
bool is_incompatible(std::span<const int> u, std::span<const int> v,
                     VocabSpec spec);

std::vector<SeqState> successors(std::span<const int> u, VocabSpec spec);

// Keeps the last K tokens of a context.
SeqState front_truncate(std::span<const int> context, int K);

}  // namespace markovlm
