#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "markovlm/markovlm.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  mlm_free_string(s);
  return out;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(mlm_version(), "1.0.0");
  EXPECT_STREQ(mlm_status_name(MLM_OK), "ok");
  EXPECT_STRNE(mlm_status_name(MLM_ERR_ORACLE), mlm_status_name(MLM_ERR_TRANSPORT));
}

TEST(CApi, StateCountAndErrors) {
  uint64_t n = 0;
  ASSERT_EQ(mlm_state_count(3, 2, &n), MLM_OK);
  EXPECT_EQ(n, 12u);
  EXPECT_EQ(mlm_state_count(2, 30, &n), MLM_ERR_SIZE_LIMIT);
  EXPECT_NE(std::strlen(mlm_last_error()), 0u);
  EXPECT_EQ(mlm_state_count(1, 2, &n), MLM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(mlm_state_count(2, 2, nullptr), MLM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, StateRoundTrip) {
  int tok[3];
  size_t len = 0, idx = 0;
  ASSERT_EQ(mlm_state_at(2, 3, 9, tok, 3, &len), MLM_OK);
  ASSERT_EQ(len, 3u);
  ASSERT_EQ(mlm_state_index(2, 3, tok, len, &idx), MLM_OK);
  EXPECT_EQ(idx, 9u);
  EXPECT_EQ(mlm_state_at(2, 3, 9, tok, 1, &len), MLM_ERR_BUFFER);
}

TEST(CApi, BuildValidateAnalyze) {
  mlm_oracle* o = nullptr;
  ASSERT_EQ(mlm_oracle_uniform(2, 3, &o), MLM_OK);
  mlm_matrix* q = nullptr;
  ASSERT_EQ(mlm_build_qf(o, 2, 3, 2, &q), MLM_OK);
  EXPECT_EQ(mlm_matrix_size(q), 14u);
  EXPECT_EQ(mlm_matrix_nonzeros(q), 28u);
  mlm_structure_report r{};
  ASSERT_EQ(mlm_validate_structure(q, 2, 3, &r), MLM_OK);
  EXPECT_EQ(r.proportion_num, 1u);
  EXPECT_EQ(r.proportion_den, 7u);
  EXPECT_EQ(r.support_exact, 1);
  char* js = nullptr;
  ASSERT_EQ(mlm_structure_report_json(&r, &js), MLM_OK);
  EXPECT_NE(take(js).find("\"1/7\""), std::string::npos);

  std::vector<double> pi(14);
  mlm_stationary_info info{};
  ASSERT_EQ(mlm_stationary(q, 1e-12, 100000, pi.data(), pi.size(), &info), MLM_OK);
  EXPECT_EQ(info.converged, 1);
  for (size_t i = 6; i < 14; ++i) EXPECT_NEAR(pi[i], 0.125, 1e-12);
  EXPECT_EQ(mlm_stationary(q, 1e-12, 100000, pi.data(), 3, &info), MLM_ERR_BUFFER);

  double eps = 0;
  ASSERT_EQ(mlm_epsilon(q, 3, 1, &eps), MLM_OK);
  EXPECT_NEAR(eps, 0.125, 1e-15);

  std::vector<int> cls(14), rec(14);
  size_t n_cls = 0, n_rec = 0;
  int period = 0;
  ASSERT_EQ(mlm_classify(q, cls.data(), rec.data(), 14, &n_cls, &n_rec, &period), MLM_OK);
  EXPECT_EQ(n_rec, 1u);
  EXPECT_EQ(period, 1);

  mlm_matrix* block = nullptr;
  ASSERT_EQ(mlm_recurrent_block(q, 0, &block), MLM_OK);
  EXPECT_EQ(mlm_matrix_size(block), 8u);
  mlm_matrix_free(block);
  mlm_matrix_free(q);
  mlm_oracle_free(o);
}

TEST(CApi, MixingAndTmin) {
  const double rows[] = {0.5, 0.5, 0.5, 0.5};
  mlm_matrix* q = nullptr;
  ASSERT_EQ(mlm_matrix_from_dense(rows, 2, &q), MLM_OK);
  const double pi[] = {0.5, 0.5};
  double value = 0, argmin = 0;
  int64_t table[20];
  ASSERT_EQ(mlm_t_min(q, pi, 2, nullptr, 0, 100, 1, &value, &argmin, table), MLM_OK);
  EXPECT_EQ(value, 4.0);
  mlm_matrix_free(q);

  mlm_matrix* poly = nullptr;
  ASSERT_EQ(mlm_polygonal_walk(4, &poly), MLM_OK);
  const double upi[] = {0.25, 0.25, 0.25, 0.25};
  int64_t t = 0;
  ASSERT_EQ(mlm_mixing_time(poly, upi, 4, 0.1, 50, 1, &t), MLM_OK);
  EXPECT_EQ(t, -1);
  ASSERT_EQ(mlm_t_min(poly, upi, 4, nullptr, 0, 50, 1, &value, &argmin, table), MLM_OK);
  EXPECT_TRUE(std::isinf(value));
  EXPECT_TRUE(std::isnan(argmin));
  mlm_matrix_free(poly);
}

TEST(CApi, NonStochasticMatrixRejected) {
  const double rows[] = {0.5, 0.6, 0.5, 0.5};
  mlm_matrix* q = nullptr;
  EXPECT_EQ(mlm_matrix_from_dense(rows, 2, &q), MLM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(q, nullptr);
  EXPECT_EQ(mlm_matrix_from_json("{oops", &q), MLM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, RiskCurveAndFit) {
  mlm_matrix* q = nullptr;
  ASSERT_EQ(mlm_random_chain(3, 0.0, 7, &q), MLM_OK);
  mlm_predictor p{};
  p.kind = MLM_PREDICTOR_FREQUENTIST;
  const size_t Ns[] = {100, 1000, 10000};
  mlm_risk_curve* c = nullptr;
  ASSERT_EQ(mlm_risk_curve_run(q, &p, Ns, 3, 10, 1, MLM_METRIC_TV, nullptr, 1, &c), MLM_OK);
  EXPECT_EQ(mlm_risk_curve_rows(c), 3u);
  mlm_power_fit fit{};
  ASSERT_EQ(mlm_risk_curve_fit(c, &fit), MLM_OK);
  EXPECT_LT(fit.slope, -0.3);
  EXPECT_GT(fit.slope, -0.7);
  char* csv = nullptr;
  ASSERT_EQ(mlm_risk_curve_csv(c, &csv), MLM_OK);
  EXPECT_EQ(take(csv).rfind("N,mean,lo,hi,reps,metric,estimator\n", 0), 0u);
  mlm_risk_curve_free(c);
  mlm_matrix_free(q);
}

TEST(CApi, BoundsEntryPoints) {
  mlm_icl_params ip{3, 0.0, 1.0, 0.1, 0.05, 1000, INFINITY};
  double v = 0;
  ASSERT_EQ(mlm_bbar_icl(&ip, &v), MLM_OK);
  EXPECT_NEAR(v, 3.034854258770293, 1e-14);
  EXPECT_EQ(mlm_icl_gap(&ip, &v), MLM_ERR_UNDEFINED);
  uint64_t n = 0;
  ASSERT_EQ(mlm_sample_complexity(3.035, 0.1, 0.05, &n), MLM_OK);
  EXPECT_EQ(n, 13592u);
  EXPECT_EQ(mlm_model_card_count(), 8u);
  const char* name = nullptr;
  const char* family = nullptr;
  double N = 0, T = 0, r = 0;
  ASSERT_EQ(mlm_model_card(0, &name, &family, &N, &T, &r), MLM_OK);
  EXPECT_STREQ(name, "Llama 7B");
  EXPECT_EQ(mlm_model_card(8, &name, &family, &N, &T, &r), MLM_ERR_INVALID_ARGUMENT);
  char* csv = nullptr;
  ASSERT_EQ(mlm_epsilon_predictor_csv(nullptr, 1.0, 0.05, &csv), MLM_OK);
  const auto text = take(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(CApi, ToyPipeline) {
  std::vector<int> seq(40);
  const int prefix[] = {0, 0, 1};
  ASSERT_EQ(mlm_parity_sequence(40, prefix, 3, seq.data()), MLM_OK);
  mlm_toy_config cfg = mlm_toy_defaults();
  cfg.epochs = 50;
  mlm_toy* toy = nullptr;
  size_t n_ex = 0;
  ASSERT_EQ(mlm_toy_train_sequence(seq.data(), seq.size(), 2, &cfg, &toy, &n_ex), MLM_OK);
  EXPECT_EQ(n_ex, 37u);
  char* js = nullptr;
  ASSERT_EQ(mlm_toy_to_json(toy, &js), MLM_OK);
  mlm_toy* back = nullptr;
  ASSERT_EQ(mlm_toy_from_json(js, &back), MLM_OK);
  mlm_free_string(js);
  mlm_oracle* o = nullptr;
  ASSERT_EQ(mlm_toy_oracle(back, 1.0, &o), MLM_OK);
  mlm_matrix* q = nullptr;
  ASSERT_EQ(mlm_build_qf(o, 2, 3, 1, &q), MLM_OK);
  EXPECT_EQ(mlm_matrix_size(q), 14u);
  mlm_matrix_free(q);
  mlm_oracle_free(o);
  mlm_toy_free(back);
  mlm_toy_free(toy);
}

TEST(CApi, NullHandlesAreSafe) {
  mlm_matrix_free(nullptr);
  mlm_oracle_free(nullptr);
  mlm_toy_free(nullptr);
  mlm_risk_curve_free(nullptr);
  mlm_mock_server_free(nullptr);
  mlm_free_string(nullptr);
  EXPECT_EQ(mlm_matrix_size(nullptr), 0u);
  mlm_matrix* q = nullptr;
  EXPECT_EQ(mlm_build_qf(nullptr, 2, 2, 1, &q), MLM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, MockServerRemoteOracle) {
  mlm_matrix* q = nullptr;
  ASSERT_EQ(mlm_random_chain(3, 0.0, 2, &q), MLM_OK);
  mlm_mock_server* s = nullptr;
  ASSERT_EQ(mlm_mock_server_create(q, nullptr, 0, ",", 0.05, 0, &s), MLM_OK);
  int port = 0;
  ASSERT_EQ(mlm_mock_server_start(s, "127.0.0.1", 0, &port), MLM_OK);
  const std::string ep = "http://127.0.0.1:" + std::to_string(port) + "/predict";
  const char* abc[] = {"0", "1", "2"};
  mlm_remote_config cfg{};
  cfg.endpoint = ep.c_str();
  cfg.alphabet = abc;
  cfg.alphabet_len = 3;
  mlm_oracle* o = nullptr;
  ASSERT_EQ(mlm_oracle_remote(&cfg, &o), MLM_OK);
  const int ctx[] = {1};
  double p[3];
  ASSERT_EQ(mlm_oracle_query(o, ctx, 1, p, 3), MLM_OK);
  double row[9];
  ASSERT_EQ(mlm_matrix_dense(q, row, 9), MLM_OK);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p[j], row[3 + j], 1e-15);
  EXPECT_EQ(mlm_mock_server_requests(s), 1u);
  mlm_mock_server_stop(s);
  EXPECT_EQ(mlm_oracle_query(o, ctx, 1, p, 3), MLM_ERR_TRANSPORT);
  mlm_oracle_free(o);
  mlm_mock_server_free(s);
  mlm_matrix_free(q);
}
