#include "toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

namespace markovlm {

using nlohmann::json;

namespace {

void check_config(const ToyModelConfig& c) {
  require(c.context_length >= 1, "toy model: context_length must be >= 1");
  require(c.embedding_dim >= 1, "toy model: embedding_dim must be >= 1");
  require(c.learning_rate > 0.0, "toy model: learning_rate must be > 0");
  require(c.epochs >= 1, "toy model: epochs must be >= 1");
  require(c.temperature > 0.0, "toy model: temperature must be > 0");
}

}  // namespace

ToyModel::ToyModel(int vocab_size, ToyModelConfig config)
    : T_(vocab_size), config_(config) {
  check_config(config_);
  require(T_ >= 2, "toy model: vocabulary size must be >= 2");
  n_inputs_ = 1;
  for (int k = 0; k < config_.context_length; ++k) {
    require(n_inputs_ <= (std::size_t{1} << 24) / (T_ + 1),
            "toy model: padded context space too large");
    n_inputs_ *= static_cast<std::size_t>(T_ + 1);
  }
  const auto dim = static_cast<std::size_t>(config_.embedding_dim);
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> init(0.0, 0.1);
  embedding_.resize(n_inputs_ * dim);
  for (double& w : embedding_) w = init(rng);
  unembedding_.resize(dim * T_);
  for (double& w : unembedding_) w = init(rng);
  bias_.assign(T_, 0.0);
}

std::size_t ToyModel::input_index(std::span<const int> context) const {
  const auto K = static_cast<std::size_t>(config_.context_length);
  require(!context.empty() && context.size() <= K,
          "toy model: context length must be in [1, K]");
  std::size_t idx = 0;
  const std::size_t pad = K - context.size();
  for (std::size_t i = 0; i < K; ++i) {
    const int tok = i < pad ? T_ : context[i - pad];
    require(tok >= 0 && tok <= T_, "toy model: token outside the vocabulary");
    idx = idx * static_cast<std::size_t>(T_ + 1) + static_cast<std::size_t>(tok);
  }
  return idx;
}

std::vector<double> ToyModel::logits(std::span<const int> context) const {
  const auto dim = static_cast<std::size_t>(config_.embedding_dim);
  const std::size_t idx = input_index(front_truncate(context,
                                                     config_.context_length));
  const double* e = embedding_.data() + idx * dim;
  std::vector<double> out(bias_);
  for (std::size_t d = 0; d < dim; ++d)
    for (int t = 0; t < T_; ++t) out[t] += e[d] * unembedding_[d * T_ + t];
  return out;
}

void ToyModel::train(const std::vector<Example>& dataset) {
  require(!dataset.empty(), "toy model: dataset is empty");
  for (const auto& ex : dataset) {
    require(!ex.context.empty() &&
                ex.context.size() <= static_cast<std::size_t>(config_.context_length),
            "toy model: example context length must be in [1, K]");
    require(ex.next >= 0 && ex.next < T_, "toy model: label out of range");
  }
  const auto dim = static_cast<std::size_t>(config_.embedding_dim);
  const double lr = config_.learning_rate;
  std::mt19937_64 rng(derive_seed(config_.seed, 0x5ca1ab1e));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(T_), back(dim);

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (std::size_t k : order) {
      const Example& ex = dataset[k];
      const std::size_t idx = input_index(ex.context);
      double* e = embedding_.data() + idx * dim;
      const auto x = logits(ex.context);
      for (double v : x)
        if (!std::isfinite(v))
          fail(ErrorCode::kTraining,
               "toy model: training diverged at epoch " + std::to_string(epoch));
      const auto p = apply_temperature(x, 1.0);
      loss -= std::log(std::max(p[ex.next], 1e-300));
      for (int t = 0; t < T_; ++t) grad[t] = p[t] - (t == ex.next ? 1.0 : 0.0);
      for (std::size_t d = 0; d < dim; ++d) {
        double s = 0.0;
        for (int t = 0; t < T_; ++t) s += unembedding_[d * T_ + t] * grad[t];
        back[d] = s;
      }
      for (std::size_t d = 0; d < dim; ++d)
        for (int t = 0; t < T_; ++t)
          unembedding_[d * T_ + t] -= lr * e[d] * grad[t];
      for (int t = 0; t < T_; ++t) bias_[t] -= lr * grad[t];
      for (std::size_t d = 0; d < dim; ++d) e[d] -= lr * back[d];
    }
    loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(loss))
      fail(ErrorCode::kTraining,
           "toy model: training diverged at epoch " + std::to_string(epoch));
    losses_.push_back(loss);
  }
}

std::string ToyModel::to_json() const {
  json j;
  j["format"] = "markovlm-toy-model";
  j["vocab_size"] = T_;
  j["config"] = {{"context_length", config_.context_length},
                 {"embedding_dim", config_.embedding_dim},
                 {"learning_rate", config_.learning_rate},
                 {"epochs", config_.epochs},
                 {"seed", config_.seed},
                 {"temperature", config_.temperature}};
  j["weights"] = {
      {"embedding",
       {{"rows", n_inputs_}, {"cols", config_.embedding_dim}, {"data", embedding_}}},
      {"unembedding",
       {{"rows", config_.embedding_dim}, {"cols", T_}, {"data", unembedding_}}},
      {"bias", bias_}};
  j["epoch_losses"] = losses_;
  return j.dump();
}

std::shared_ptr<ToyModel> ToyModel::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ToyModelConfig c;
    const auto& cj = j.at("config");
    c.context_length = cj.at("context_length").get<int>();
    c.embedding_dim = cj.at("embedding_dim").get<int>();
    c.learning_rate = cj.at("learning_rate").get<double>();
    c.epochs = cj.at("epochs").get<int>();
    c.seed = cj.at("seed").get<std::uint64_t>();
    c.temperature = cj.at("temperature").get<double>();
    auto m = std::make_shared<ToyModel>(j.at("vocab_size").get<int>(), c);
    const auto& w = j.at("weights");
    auto emb = w.at("embedding").at("data").get<std::vector<double>>();
    auto unemb = w.at("unembedding").at("data").get<std::vector<double>>();
    auto bias = w.at("bias").get<std::vector<double>>();
    require(emb.size() == m->embedding_.size() &&
                unemb.size() == m->unembedding_.size() &&
                bias.size() == m->bias_.size(),
            "toy checkpoint: weight shapes do not match the config");
    m->embedding_ = std::move(emb);
    m->unembedding_ = std::move(unemb);
    m->bias_ = std::move(bias);
    if (j.contains("epoch_losses"))
      m->losses_ = j["epoch_losses"].get<std::vector<double>>();
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument,
         std::string("malformed toy checkpoint: ") + e.what());
  }
}

TrainedToy train_toy(const std::vector<Example>& dataset, int vocab_size,
                     const ToyModelConfig& config) {
  auto model = std::make_shared<ToyModel>(vocab_size, config);
  model->train(dataset);
  auto oracle = std::make_shared<TemperedOracle>(model, config.temperature);
  return {model, oracle};
}

std::vector<int> parity_sequence(std::size_t length, std::vector<int> prefix) {
  require(!prefix.empty(), "parity_sequence: prefix must be non-empty");
  for (int b : prefix) require(b == 0 || b == 1, "parity_sequence: bits only");
  const std::size_t window = prefix.size();
  std::vector<int> seq = std::move(prefix);
  while (seq.size() < length) {
    int s = 0;
    for (std::size_t i = seq.size() - window; i < seq.size(); ++i) s += seq[i];
    seq.push_back(s % 2);
  }
  seq.resize(length);
  return seq;
}

std::vector<Example> sliding_examples(std::span<const int> seq, int window) {
  require(window >= 1, "sliding_examples: window must be >= 1");
  std::vector<Example> out;
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = w; i < seq.size(); ++i)
    out.push_back({std::vector<int>(seq.begin() + static_cast<std::ptrdiff_t>(i - w),
                                    seq.begin() + static_cast<std::ptrdiff_t>(i)),
                   seq[i]});
  return out;
}

std::vector<Example> parity_truth_table(int window) {
  require(window >= 1 && window <= 20, "parity_truth_table: window in [1, 20]");
  std::vector<Example> out;
  for (unsigned v = 0; v < (1u << window); ++v) {
    Example ex;
    int s = 0;
    for (int i = window - 1; i >= 0; --i) {
      const int bit = static_cast<int>((v >> i) & 1u);
      ex.context.push_back(bit);
      s += bit;
    }
    ex.next = s % 2;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace markovlm
