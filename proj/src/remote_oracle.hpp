#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "oracle.hpp"
#include "transition_matrix.hpp"

namespace httplib {
class Server;
}

namespace markovlm {

enum class RemoteProtocol {
  kNative,  // {"context","alphabet"} -> {"probs"}
  kOpenAi,  // completions endpoint with top logprobs
};

struct RemoteOracleConfig {
  std::string endpoint;  // http://host:port/path
  std::vector<std::string> alphabet;
  std::string separator = ",";
  int timeout_ms = 5000;
  int max_in_flight = 4;
  int context_length = 4096;
  RemoteProtocol protocol = RemoteProtocol::kNative;
  std::string model;  // forwarded as "model" for kOpenAi
  int top_logprobs = 20;
};

// Symbols from a completions response, restricted to the alphabet. Missing
// alphabet symbols share the residual mass 1 - sum(exp(logprob)) equally;
// the result is renormalized over the alphabet.
Distribution extract_alphabet_distribution(
    const std::vector<std::pair<std::string, double>>& token_logprobs,
    const std::vector<std::string>& alphabet);

std::string render_context(std::span<const int> context,
                           const std::vector<std::string>& alphabet,
                           const std::string& separator);

class RemoteOracle final : public Oracle {
 public:
  explicit RemoteOracle(RemoteOracleConfig config);
  ~RemoteOracle() override;

  int vocab_size() const override {
    return static_cast<int>(config_.alphabet.size());
  }
  int context_length() const override { return config_.context_length; }
  std::string kind() const override { return "remote"; }
  const RemoteOracleConfig& config() const { return config_; }

 protected:
  Distribution query_impl(std::span<const int> context) const override;

 private:
  struct Gate;
  RemoteOracleConfig config_;
  std::string base_, path_;
  std::unique_ptr<Gate> gate_;
};

// Serves the oracle wire protocol from a fixed d-state chain. POST /predict
// answers the native protocol; POST /v1/completions answers with
// OpenAI-style top_logprobs, which also carry the separator token and, when
// top_k < d, omit the least likely states.
struct MockServerConfig {
  std::vector<std::string> alphabet;
  std::string separator = ",";
  double separator_mass = 0.05;
  int top_k = 0;  // 0 = all states
};

class MockOracleServer {
 public:
  MockOracleServer(TransitionMatrix model, MockServerConfig config);
  ~MockOracleServer();
  MockOracleServer(const MockOracleServer&) = delete;
  MockOracleServer& operator=(const MockOracleServer&) = delete;

  // Binds host:port (port 0 picks a free port) and serves on a background
  // thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void serve_forever(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::size_t requests_served() const;

 private:
  void install_routes();
  TransitionMatrix model_;
  MockServerConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::shared_ptr<std::atomic<std::size_t>> served_;
};

}  // namespace markovlm
