#include "remote_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

namespace markovlm {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

int symbol_index(const std::vector<std::string>& alphabet,
                 const std::string& sym) {
  const auto it = std::find(alphabet.begin(), alphabet.end(), sym);
  return it == alphabet.end() ? -1 : static_cast<int>(it - alphabet.begin());
}

Distribution normalize_or_throw(Distribution p, const std::string& where) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorCode::kProtocol, where + ": negative or non-finite probability");
    s += v;
  }
  if (!(s > 0.0))
    fail(ErrorCode::kProtocol, where + ": response is not normalizable");
  for (double& v : p) v /= s;
  check_distribution(p, where);
  return p;
}

}  // namespace

Distribution extract_alphabet_distribution(
    const std::vector<std::pair<std::string, double>>& token_logprobs,
    const std::vector<std::string>& alphabet) {
  Distribution p(alphabet.size(), 0.0);
  std::vector<bool> seen(alphabet.size(), false);
  double returned_mass = 0.0;
  for (const auto& [token, lp] : token_logprobs) {
    if (std::isnan(lp))
      fail(ErrorCode::kProtocol, "remote oracle: NaN logprob");
    const double mass = std::exp(lp);
    returned_mass += mass;
    const int idx = symbol_index(alphabet, trim(token));
    if (idx < 0) continue;
    p[idx] += mass;
    seen[idx] = true;
  }
  const std::size_t missing =
      static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  if (missing > 0) {
    const double residual = std::max(0.0, 1.0 - returned_mass);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!seen[i]) p[i] = residual / static_cast<double>(missing);
  }
  return normalize_or_throw(std::move(p), "remote oracle");
}

std::string render_context(std::span<const int> context,
                           const std::vector<std::string>& alphabet,
                           const std::string& separator) {
  std::string out;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) out += separator;
    out += alphabet.at(static_cast<std::size_t>(context[i]));
  }
  return out;
}

struct RemoteOracle::Gate {
  explicit Gate(int limit) : free(limit) {}
  std::mutex mu;
  std::condition_variable cv;
  int free;
  void acquire() {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return free > 0; });
    --free;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu);
      ++free;
    }
    cv.notify_one();
  }
};

RemoteOracle::RemoteOracle(RemoteOracleConfig config)
    : config_(std::move(config)) {
  require(!config_.alphabet.empty(), "remote oracle: alphabet is empty");
  for (std::size_t i = 0; i < config_.alphabet.size(); ++i)
    for (std::size_t j = i + 1; j < config_.alphabet.size(); ++j)
      require(config_.alphabet[i] != config_.alphabet[j],
              "remote oracle: alphabet symbols must be distinct");
  require(!config_.separator.empty(), "remote oracle: separator is empty");
  require(config_.timeout_ms > 0, "remote oracle: timeout must be positive");
  require(config_.max_in_flight >= 1, "remote oracle: max_in_flight >= 1");
  require(config_.context_length >= 1, "remote oracle: context_length >= 1");
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  require(scheme_end != std::string::npos && url.substr(0, scheme_end) == "http",
          "remote oracle: endpoint must be an http:// URL");
  const auto path_begin = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  gate_ = std::make_unique<Gate>(config_.max_in_flight);
}

RemoteOracle::~RemoteOracle() = default;

Distribution RemoteOracle::query_impl(std::span<const int> context) const {
  json body;
  std::vector<std::string> symbols;
  for (int t : context) symbols.push_back(config_.alphabet[t]);
  const std::string prompt =
      render_context(context, config_.alphabet, config_.separator);
  if (config_.protocol == RemoteProtocol::kNative) {
    body["context"] = symbols;
    body["alphabet"] = config_.alphabet;
    body["prompt"] = prompt;
  } else {
    body["prompt"] = prompt + config_.separator;
    body["max_tokens"] = 1;
    body["logprobs"] = config_.top_logprobs;
    body["temperature"] = 1.0;
    if (!config_.model.empty()) body["model"] = config_.model;
  }

  gate_->acquire();
  httplib::Result res;
  {
    httplib::Client client(base_);
    const auto sec = config_.timeout_ms / 1000;
    const auto usec = (config_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    res = client.Post(path_, body.dump(), "application/json");
  }
  gate_->release();

  if (!res)
    fail(ErrorCode::kTransport, "remote oracle: request to " + config_.endpoint +
                                    " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    fail(ErrorCode::kTransport, "remote oracle: HTTP status " +
                                    std::to_string(res->status));
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception&) {
    fail(ErrorCode::kProtocol, "remote oracle: response is not JSON");
  }

  try {
    if (reply.contains("probs")) {
      const auto& probs = reply["probs"];
      Distribution p(config_.alphabet.size(), 0.0);
      if (probs.is_array()) {
        if (probs.size() != config_.alphabet.size())
          fail(ErrorCode::kProtocol,
               "remote oracle: probs has " + std::to_string(probs.size()) +
                   " entries for an alphabet of " +
                   std::to_string(config_.alphabet.size()));
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = probs[i].get<double>();
      } else if (probs.is_object()) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (!probs.contains(config_.alphabet[i]))
            fail(ErrorCode::kProtocol, "remote oracle: symbol '" +
                                           config_.alphabet[i] +
                                           "' missing from response");
          p[i] = probs[config_.alphabet[i]].get<double>();
        }
      } else {
        fail(ErrorCode::kProtocol, "remote oracle: probs must be array or object");
      }
      return normalize_or_throw(std::move(p), "remote oracle");
    }
    const auto& top = reply.at("choices").at(0).at("logprobs").at("top_logprobs");
    const auto& first = top.at(0);
    std::vector<std::pair<std::string, double>> entries;
    for (auto it = first.begin(); it != first.end(); ++it)
      entries.emplace_back(it.key(), it.value().get<double>());
    return extract_alphabet_distribution(entries, config_.alphabet);
  } catch (const json::exception& e) {
    fail(ErrorCode::kProtocol,
         std::string("remote oracle: malformed response: ") + e.what());
  }
}

MockOracleServer::MockOracleServer(TransitionMatrix model,
                                   MockServerConfig config)
    : model_(std::move(model)),
      config_(std::move(config)),
      served_(std::make_shared<std::atomic<std::size_t>>(0)) {
  model_.check_stochastic(kSumTolerance);
  if (config_.alphabet.empty())
    for (std::size_t i = 0; i < model_.n(); ++i)
      config_.alphabet.push_back(std::to_string(i));
  require(config_.alphabet.size() == model_.n(),
          "mock server: alphabet size must equal the number of states");
  require(config_.separator_mass >= 0.0 && config_.separator_mass < 1.0,
          "mock server: separator_mass must be in [0, 1)");
  server_ = std::make_unique<httplib::Server>();
  install_routes();
}

MockOracleServer::~MockOracleServer() { stop(); }

void MockOracleServer::install_routes() {
  auto bad = [](httplib::Response& res, const std::string& msg) {
    res.status = 400;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  };
  server_->Post("/predict", [this, bad](const httplib::Request& req,
                                        httplib::Response& res) {
    ++*served_;
    json in;
    try {
      in = json::parse(req.body);
      const auto ctx = in.at("context").get<std::vector<std::string>>();
      if (ctx.empty()) return bad(res, "empty context");
      const int idx = symbol_index(config_.alphabet, ctx.back());
      if (idx < 0) return bad(res, "unknown symbol " + ctx.back());
      const auto row = model_.dense_row(static_cast<std::size_t>(idx));
      std::vector<std::string> order = config_.alphabet;
      if (in.contains("alphabet"))
        order = in["alphabet"].get<std::vector<std::string>>();
      std::vector<double> probs;
      for (const auto& s : order) {
        const int j = symbol_index(config_.alphabet, s);
        probs.push_back(j < 0 ? 0.0 : row[j]);
      }
      res.set_content(json{{"probs", probs}}.dump(), "application/json");
    } catch (const json::exception& e) {
      bad(res, e.what());
    }
  });
  server_->Post("/v1/completions", [this, bad](const httplib::Request& req,
                                               httplib::Response& res) {
    ++*served_;
    try {
      const json in = json::parse(req.body);
      const auto prompt = in.at("prompt").get<std::string>();
      std::vector<std::string> parts;
      std::size_t start = 0;
      while (true) {
        const auto pos = prompt.find(config_.separator, start);
        parts.push_back(prompt.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + config_.separator.size();
      }
      while (!parts.empty() && trim(parts.back()).empty()) parts.pop_back();
      if (parts.empty()) return bad(res, "empty prompt");
      const int idx = symbol_index(config_.alphabet, trim(parts.back()));
      if (idx < 0) return bad(res, "unknown symbol " + parts.back());
      const auto row = model_.dense_row(static_cast<std::size_t>(idx));
      std::vector<std::size_t> order(row.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
      std::size_t keep = order.size();
      if (config_.top_k > 0)
        keep = std::min<std::size_t>(keep, static_cast<std::size_t>(config_.top_k));
      json top = json::object();
      const double scale = 1.0 - config_.separator_mass;
      for (std::size_t k = 0; k < keep; ++k) {
        const double p = row[order[k]] * scale;
        if (p > 0.0) top[" " + config_.alphabet[order[k]]] = std::log(p);
      }
      if (config_.separator_mass > 0.0)
        top[config_.separator] = std::log(config_.separator_mass);
      json out = {{"object", "text_completion"},
                  {"choices",
                   json::array({{{"text", config_.alphabet[order[0]]},
                                 {"index", 0},
                                 {"logprobs", {{"top_logprobs", json::array({top})}}}}})}};
      res.set_content(out.dump(), "application/json");
    } catch (const json::exception& e) {
      bad(res, e.what());
    }
  });
}

int MockOracleServer::start(const std::string& host, int port) {
  require(!thread_.joinable(), "mock server: already started");
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0)
    fail(ErrorCode::kTransport, "mock server: cannot bind " + host + ":" +
                                    std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockOracleServer::serve_forever(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port))
    fail(ErrorCode::kTransport, "mock server: cannot listen on " + host + ":" +
                                    std::to_string(port));
}

void MockOracleServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::size_t MockOracleServer::requests_served() const { return *served_; }

}  // namespace markovlm
