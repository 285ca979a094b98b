#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "state_space.hpp"
#include "transition_matrix.hpp"

namespace markovlm {

// A next-token probability source. Contexts longer than context_length()
// are front-truncated by query() before they reach the implementation.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual int vocab_size() const = 0;
  virtual int context_length() const = 0;
  virtual std::string kind() const = 0;

  Distribution query(std::span<const int> context) const;

 protected:
  virtual Distribution query_impl(std::span<const int> context) const = 0;
};

using OracleHandle = std::shared_ptr<const Oracle>;

// softmax(logits / tau) with max-shift for stability.
Distribution apply_temperature(std::span<const double> logits, double tau);

// Lower bound 1 / (m e^{2 c1}) on every softmax entry when ||x||_1 <= c1.
double softmax_lower_bound(std::size_t m, double c1);

class UniformOracle final : public Oracle {
 public:
  UniformOracle(int T, int K);
  int vocab_size() const override { return T_; }
  int context_length() const override { return K_; }
  std::string kind() const override { return "uniform"; }

 protected:
  Distribution query_impl(std::span<const int>) const override;

 private:
  int T_, K_;
};

// Ground-truth d-state chain: the next-state law depends on the last token.
class ChainOracle final : public Oracle {
 public:
  explicit ChainOracle(TransitionMatrix q, int context_length = 1);
  int vocab_size() const override { return static_cast<int>(q_.n()); }
  int context_length() const override { return K_; }
  std::string kind() const override { return "chain"; }
  const TransitionMatrix& matrix() const { return q_; }

 protected:
  Distribution query_impl(std::span<const int> context) const override;

 private:
  TransitionMatrix q_;
  int K_;
};

// Anything that produces raw logits for a context.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual int vocab_size() const = 0;
  virtual int context_length() const = 0;
  virtual std::vector<double> logits(std::span<const int> context) const = 0;
};

// One logit vector per state of V*_K.
class LogitTable final : public LogitSource {
 public:
  LogitTable(VocabSpec spec, std::vector<std::vector<double>> table);
  // Standard-normal logits scaled by `scale`.
  static LogitTable random(VocabSpec spec, double scale, std::uint64_t seed);

  int vocab_size() const override { return space_.T(); }
  int context_length() const override { return space_.K(); }
  std::vector<double> logits(std::span<const int> context) const override;

 private:
  StateSpace space_;
  std::vector<std::vector<double>> table_;
};

// softmax(logits / tau) over a shared logit source.
class TemperedOracle final : public Oracle {
 public:
  TemperedOracle(std::shared_ptr<const LogitSource> source, double tau);
  int vocab_size() const override { return source_->vocab_size(); }
  int context_length() const override { return source_->context_length(); }
  std::string kind() const override { return "softmax"; }
  double temperature() const { return tau_; }
  const std::shared_ptr<const LogitSource>& source() const { return source_; }

 protected:
  Distribution query_impl(std::span<const int> context) const override;

 private:
  std::shared_ptr<const LogitSource> source_;
  double tau_;
};

// Order-n count model with additive smoothing:
// P(x | ctx) = (count(ctx, x) + alpha) / (count(ctx) + alpha T).
// Unseen contexts with alpha = 0 fall back to uniform.
class NgramOracle final : public Oracle {
 public:
  NgramOracle(int T, int order, double alpha,
              std::map<std::vector<int>, std::vector<double>> counts);
  int vocab_size() const override { return T_; }
  int context_length() const override { return order_; }
  std::string kind() const override { return "ngram"; }
  double alpha() const { return alpha_; }

 protected:
  Distribution query_impl(std::span<const int> context) const override;

 private:
  int T_, order_;
  double alpha_;
  std::map<std::vector<int>, std::vector<double>> counts_;
};

// Fits an order-`order` model on a token sequence over [0, T). Every
// position i >= 1 contributes (last min(order, i) tokens before i) -> x_i.
OracleHandle fit_ngram(std::span<const int> trajectory, int T, int order,
                       double alpha = 1.0);

}  // namespace markovlm
