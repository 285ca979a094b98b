#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace markovlm {

struct PretrainBoundParams {
  double T = 2;
  double B_U = 0.0;
  double tau = 1.0;
  double c0 = 1.0;
  double gamma_norm = 1.0;
  double delta = 0.05;
  double N_train = 1.0;
};

// 2 ||Gamma|| sqrt(max{log T + 2 B_U / tau, log(1 / c0)}).
double bbar_pretrain(const PretrainBoundParams& p);
// KL version: sqrt(2) ||Gamma|| max{log T + 2 B_U / tau, log(1 / c0)}.
double bbar_pretrain_kl(const PretrainBoundParams& p);

// bbar sqrt(t_min / N) sqrt(log(2 / delta)); t_min = 1 for iid data.
double generalization_gap(double bbar, double N, double delta,
                          double t_min = 1.0);

struct IclBoundParams {
  double d = 2;
  double B_U = 0.0;
  double tau = 1.0;
  double p_min = 1.0;
  double delta = 0.05;
  double N_icl = 1.0;
  double t_min = 4.0;
};

// 2 sqrt(max{log d + 2 B_U / tau, log(1 / p_min)}).
double bbar_icl(const IclBoundParams& p);
// Throws kUndefined when t_min is infinite.
double icl_gap_term(const IclBoundParams& p);

struct DepthBoundParams {
  int L = 1, H = 1, r = 1, m = 1;
  double B_1 = 0.0, B_2 = 0.0, B_O = 0.0, B_V = 0.0, B_tok = 1.0, B_U = 1.0;
  double T = 2;
  double tau = 1.0, c0 = 1.0, gamma_norm = 1.0, delta = 0.05;
};

struct DepthBoundResult {
  double b_theta = 0.0;
  double bbar = 0.0;
  std::vector<std::string> warnings;
};

// B_Theta = (1 + r m B_1 B_2)(1 + (r^3 / H) B_O B_V)(B_tok B_U)^{1/L};
// bbar uses (B_Theta)^L in place of B_U. Overflow of the power throws
// kSizeLimit with log(B_Theta) * L in the message.
DepthBoundResult bbar_depth(const DepthBoundParams& p);

// ceil(4 bbar^2 / eps^2 * log(2 / delta)).
std::uint64_t sample_complexity(double bbar, double eps, double delta);

struct ModelCard {
  std::string name;
  std::string family;
  double N_train;
  double T;
  double r;
};

const std::vector<ModelCard>& builtin_model_cards();
// CSV with header name,family,N_train,T,r.
std::vector<ModelCard> parse_model_cards(const std::string& csv);

struct PredictorRow {
  ModelCard card;
  double bbar;
  double epsilon;
};

// bbar ~ 2 sqrt(log T + 2 T sqrt(r) / tau) with B_U = T sqrt(r);
// eps = 2 bbar sqrt(log(2 / delta)) / sqrt(N_train).
std::vector<PredictorRow> epsilon_predictor(const std::vector<ModelCard>& cards,
                                            double tau, double delta);
std::string predictor_csv(const std::vector<PredictorRow>& rows);

// 2 exp(-2 u^2 / (||Gamma||^2 ||c||^2)).
double mcdiarmid_tail(double gamma_norm, const std::vector<double>& c, double u);
// 2 exp(-2 u^2 / (||c||^2 t_min)).
double mcdiarmid_tail_chain(const std::vector<double>& c, double u, double t_min);

struct McRow {
  double u;
  double empirical;  // fraction of draws with |f - mean| >= u
  double tail;
  double stderr_;    // sqrt(p (1 - p) / n) at the empirical p
  bool ok;           // empirical <= tail + 3 stderr
};

struct McReport {
  std::size_t n_samples = 0;
  double mean = 0.0;
  std::vector<McRow> rows;
  bool all_ok() const;
};

struct McVerifyConfig {
  std::vector<double> c;
  std::vector<double> u_grid;
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  double gamma_norm = 1.0;
  double t_min = 0.0;  // > 0 selects the Markov-chain tail
  bool has_expectation = false;
  double expectation = 0.0;  // otherwise the sample mean is used
  unsigned jobs = 1;
};

// `statistic` draws one realization of the sample and returns f of it.
// Draws are split into fixed batches with derived seeds, so the report does
// not depend on jobs.
McReport mc_verify(const std::function<double(std::mt19937_64&)>& statistic,
                   const McVerifyConfig& cfg);

struct LemmaReport {
  double B = 0.0;  // max |log(P / Q)|
  double tv = 0.0, kl = 0.0, hellinger2 = 0.0;
  bool tv_ok = false;         // TV <= sqrt(2 B)
  bool kl_ok = false;         // KL <= B
  bool hellinger_ok = false;  // H^2 <= 2 B, H^2 = 1/2 sum (sqrt p - sqrt q)^2
  bool all_ok() const { return tv_ok && kl_ok && hellinger_ok; }
};

LemmaReport lemma_checks(const std::vector<double>& P, const std::vector<double>& Q);

// min softmax(x) >= 1 / (m e^{2 ||x||_1}).
bool softmax_bound_holds(const std::vector<double>& logits);

}  // namespace markovlm
