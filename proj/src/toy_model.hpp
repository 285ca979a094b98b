#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "oracle.hpp"

namespace markovlm {

struct ToyModelConfig {
  int context_length = 3;
  int embedding_dim = 16;
  double learning_rate = 0.1;
  int epochs = 500;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

struct Example {
  std::vector<int> context;
  int next = 0;
};

// Small next-token classifier: the whole (left-padded) context is one-hot
// encoded, mapped to an embedding row, projected to T logits, and trained
// with plain SGD on cross-entropy. Shorter contexts are padded with the
// reserved id T.
class ToyModel final : public LogitSource {
 public:
  ToyModel(int vocab_size, ToyModelConfig config);

  int vocab_size() const override { return T_; }
  int context_length() const override { return config_.context_length; }
  std::vector<double> logits(std::span<const int> context) const override;

  const ToyModelConfig& config() const { return config_; }
  const std::vector<double>& epoch_losses() const { return losses_; }

  // Runs config().epochs epochs of SGD. Throws kTraining when the loss
  // becomes non-finite, naming the epoch.
  void train(const std::vector<Example>& dataset);

  std::string to_json() const;
  static std::shared_ptr<ToyModel> from_json(const std::string& text);

 private:
  std::size_t input_index(std::span<const int> context) const;

  int T_;
  ToyModelConfig config_;
  std::size_t n_inputs_;
  std::vector<double> embedding_;    // n_inputs x dim
  std::vector<double> unembedding_;  // dim x T
  std::vector<double> bias_;         // T
  std::vector<double> losses_;
};

// Trains a fresh model and wraps it as a softmax oracle at
// config.temperature.
struct TrainedToy {
  std::shared_ptr<const ToyModel> model;
  OracleHandle oracle;
};
TrainedToy train_toy(const std::vector<Example>& dataset, int vocab_size,
                     const ToyModelConfig& config);

// Binary sequence where each token after the prefix is the parity of the
// previous `window` tokens.
std::vector<int> parity_sequence(std::size_t length, std::vector<int> prefix);

// Sliding-window supervised examples: (seq[i-window..i), seq[i]).
std::vector<Example> sliding_examples(std::span<const int> seq, int window);

// Every binary context of length `window` labelled with its parity.
std::vector<Example> parity_truth_table(int window);

}  // namespace markovlm
