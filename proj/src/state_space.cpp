#include "state_space.hpp"

#include <limits>
#include <string>

#include "common.hpp"

namespace markovlm {

namespace {

void check_spec(VocabSpec spec) {
  require(spec.T >= 2, "vocabulary size T must be >= 2, got " +
                           std::to_string(spec.T));
  require(spec.K >= 1,
          "context window K must be >= 1, got " + std::to_string(spec.K));
}

std::uint64_t checked_power(VocabSpec spec, std::uint64_t cap) {
  std::uint64_t p = 1;
  const auto t = static_cast<std::uint64_t>(spec.T);
  for (int k = 0; k < spec.K; ++k) {
    if (p > cap / t) {
      fail(ErrorCode::kSizeLimit,
           "T^K = " + std::to_string(spec.T) + "^" + std::to_string(spec.K) +
               " exceeds the state-space cap of " + std::to_string(cap) +
               " recurrent states");
    }
    p *= t;
  }
  return p;
}

}  // namespace

std::uint64_t state_count(VocabSpec spec, std::uint64_t power_cap) {
  check_spec(spec);
  const std::uint64_t p = checked_power(spec, power_cap);
  const auto t = static_cast<std::uint64_t>(spec.T);
  return t * (p - 1) / (t - 1);
}

StateSpace::StateSpace(VocabSpec spec, std::uint64_t power_cap) : spec_(spec) {
  size_ = static_cast<std::size_t>(state_count(spec, power_cap));
  powers_.resize(spec.K + 1);
  powers_[0] = 1;
  for (int k = 1; k <= spec.K; ++k) powers_[k] = powers_[k - 1] * spec.T;
  offsets_.resize(spec.K + 1);
  offsets_[0] = 0;
  for (int l = 1; l <= spec.K; ++l) offsets_[l] = offsets_[l - 1] + powers_[l];
}

bool StateSpace::valid(std::span<const int> state) const {
  if (state.empty() || state.size() > static_cast<std::size_t>(spec_.K))
    return false;
  for (int t : state)
    if (t < 0 || t >= spec_.T) return false;
  return true;
}

std::size_t StateSpace::index(std::span<const int> state) const {
  require(valid(state), "sequence is not a state of V*_K");
  std::size_t value = 0;
  for (int t : state) value = value * spec_.T + static_cast<std::size_t>(t);
  return offset(static_cast<int>(state.size())) + value;
}

int StateSpace::length(std::size_t index) const {
  require(index < size_, "state index out of range");
  int len = 1;
  while (index >= offsets_[len]) ++len;
  return len;
}

SeqState StateSpace::state(std::size_t index) const {
  const int len = length(index);
  std::size_t value = index - offset(len);
  SeqState s(len);
  for (int i = len - 1; i >= 0; --i) {
    s[i] = static_cast<int>(value % spec_.T);
    value /= spec_.T;
  }
  return s;
}

int StateSpace::last_token(std::size_t index) const {
  const int len = length(index);
  return static_cast<int>((index - offset(len)) % spec_.T);
}

std::size_t StateSpace::successor_index(std::size_t index, int token) const {
  require(token >= 0 && token < spec_.T, "token out of range");
  const int len = length(index);
  std::size_t value = index - offset(len);
  if (len == spec_.K) {
    value %= powers_[spec_.K - 1];
    return offset(spec_.K) + value * spec_.T + static_cast<std::size_t>(token);
  }
  return offset(len + 1) + value * spec_.T + static_cast<std::size_t>(token);
}

std::vector<SeqState> StateSpace::enumerate() const {
  std::vector<SeqState> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(state(i));
  return out;
}

std::vector<SeqState> enumerate_states(VocabSpec spec) {
  return StateSpace(spec).enumerate();
}

bool is_incompatible(std::span<const int> u, std::span<const int> v,
                     VocabSpec spec) {
  const auto K = static_cast<std::size_t>(spec.K);
  if (u.size() < K) {
    if (v.size() != u.size() + 1) return true;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (u[i] != v[i]) return true;
    return false;
  }
  if (u.size() != K || v.size() != K) return true;
  for (std::size_t i = 0; i + 1 < K; ++i)
    if (u[i + 1] != v[i]) return true;
  return false;
}

std::vector<SeqState> successors(std::span<const int> u, VocabSpec spec) {
  SeqState base(u.begin(), u.end());
  if (base.size() == static_cast<std::size_t>(spec.K))
    base.erase(base.begin());
  std::vector<SeqState> out;
  out.reserve(spec.T);
  for (int x = 0; x < spec.T; ++x) {
    SeqState s = base;
    s.push_back(x);
    out.push_back(std::move(s));
  }
  return out;
}

SeqState front_truncate(std::span<const int> context, int K) {
  const std::size_t keep =
      std::min(context.size(), static_cast<std::size_t>(K));
  return SeqState(context.end() - static_cast<std::ptrdiff_t>(keep),
                  context.end());
}

}  // namespace markovlm
