#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "common.hpp"
#include "generators.hpp"
#include "remote_oracle.hpp"

using namespace markovlm;

namespace {

RemoteOracleConfig config_for(int port, RemoteProtocol proto, std::size_t d) {
  RemoteOracleConfig c;
  c.endpoint = "http://127.0.0.1:" + std::to_string(port) +
               (proto == RemoteProtocol::kNative ? "/predict" : "/v1/completions");
  for (std::size_t i = 0; i < d; ++i) c.alphabet.push_back(std::to_string(i));
  c.protocol = proto;
  c.timeout_ms = 2000;
  return c;
}

}  // namespace

TEST(Remote, ExtractRestrictsToAlphabet) {
  const std::vector<std::string> abc{"a", "b", "c"};
  const auto p = extract_alphabet_distribution(
      {{" a", std::log(0.5)}, {"b", std::log(0.3)}, {"c", std::log(0.1)}, {",", std::log(0.1)}},
      abc);
  EXPECT_NEAR(p[0], 0.5 / 0.9, 1e-15);
  EXPECT_NEAR(p[1], 0.3 / 0.9, 1e-15);
  EXPECT_NEAR(p[2], 0.1 / 0.9, 1e-15);
}

TEST(Remote, ExtractSharesResidualAmongMissing) {
  const std::vector<std::string> abc{"a", "b", "c"};
  const auto p = extract_alphabet_distribution({{"a", std::log(0.6)}}, abc);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.2, 1e-15);
  EXPECT_NEAR(p[2], 0.2, 1e-15);
  EXPECT_THROW(extract_alphabet_distribution({{"a", NAN}}, abc), Error);
}

TEST(Remote, RenderContext) {
  const std::vector<int> ctx{2, 0, 1};
  EXPECT_EQ(render_context(ctx, {"x", "y", "z"}, ","), "z,x,y");
  EXPECT_EQ(render_context(ctx, {"x", "y", "z"}, " "), "z x y");
}

TEST(Remote, NativeProtocolReturnsChainRows) {
  const auto q = random_chain(3, 0.0, 4);
  MockOracleServer server(q, {});
  const int port = server.start();
  RemoteOracle o(config_for(port, RemoteProtocol::kNative, 3));
  for (int s = 0; s < 3; ++s) {
    const auto p = o.query(std::vector<int>{1, s});
    const auto row = q.dense_row(static_cast<std::size_t>(s));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(p[j], row[j], 1e-15);
  }
  EXPECT_EQ(server.requests_served(), 3u);
  server.stop();
}

TEST(Remote, CompletionsProtocolDropsSeparator) {
  const auto q = random_chain(4, 0.0, 9);
  MockServerConfig mc;
  mc.separator_mass = 0.2;
  MockOracleServer server(q, mc);
  const int port = server.start();
  RemoteOracle o(config_for(port, RemoteProtocol::kOpenAi, 4));
  const auto p = o.query(std::vector<int>{2});
  const auto row = q.dense_row(2);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[j], row[j], 1e-12);
  server.stop();
}

TEST(Remote, CompletionsTopKFillsMissingMass) {
  const auto q = TransitionMatrix::from_rows(
      {{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  MockServerConfig mc;
  mc.top_k = 1;
  mc.separator_mass = 0.0;
  MockOracleServer server(q, mc);
  const int port = server.start();
  RemoteOracle o(config_for(port, RemoteProtocol::kOpenAi, 3));
  const auto p = o.query(std::vector<int>{0});
  EXPECT_NEAR(p[0], 0.7, 1e-12);
  EXPECT_NEAR(p[1], 0.15, 1e-12);
  EXPECT_NEAR(p[2], 0.15, 1e-12);
  server.stop();
}

TEST(Remote, ConcurrentQueriesAreBounded) {
  const auto q = random_chain(3, 0.0, 1);
  MockOracleServer server(q, {});
  const int port = server.start();
  auto cfg = config_for(port, RemoteProtocol::kNative, 3);
  cfg.max_in_flight = 2;
  RemoteOracle o(cfg);
  std::vector<Distribution> out(64);
  parallel_for(out.size(), 8, [&](std::size_t i) {
    out[i] = o.query(std::vector<int>{static_cast<int>(i % 3)});
  });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], out[i % 3]);
  EXPECT_EQ(server.requests_served(), 64u);
  server.stop();
}

TEST(Remote, TransportFailure) {
  int port = 0;
  {
    MockOracleServer s(random_chain(2, 0.0, 1), {});
    port = s.start();
    s.stop();
  }
  auto cfg = config_for(port, RemoteProtocol::kNative, 2);
  cfg.timeout_ms = 300;
  RemoteOracle o(cfg);
  try {
    o.query(std::vector<int>{0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTransport);
  }
}

TEST(Remote, BadResponsesAreClassified) {
  httplib::Server srv;
  srv.Post("/predict", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"probs\": [0.5]}", "application/json");
  });
  srv.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  srv.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  for (const char* path : {"/predict", "/garbage", "/fail"}) {
    auto cfg = config_for(port, RemoteProtocol::kNative, 2);
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + path;
    RemoteOracle o(cfg);
    try {
      o.query(std::vector<int>{0});
      FAIL() << path;
    } catch (const Error& e) {
      // A server-side HTTP failure is a transport problem, not a bad payload.
      const auto want = std::string(path) == "/fail" ? ErrorCode::kTransport : ErrorCode::kProtocol;
      EXPECT_EQ(e.code(), want) << path;
    }
  }
  srv.stop();
  t.join();
}

TEST(Remote, RejectsBadEndpoint) {
  RemoteOracleConfig c;
  c.alphabet = {"0", "1"};
  c.endpoint = "ftp://x";
  EXPECT_THROW(RemoteOracle{c}, Error);
}
