#include "bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "common.hpp"
#include "oracle.hpp"

namespace markovlm {

namespace {

void check_delta(double delta) {
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
}

void check_positive(double v, const char* name) {
  require(v > 0.0 && std::isfinite(v), std::string(name) + " must be positive");
}

double log_term(double log_states, double B_U, double tau, double floor_prob,
                const char* floor_name) {
  require(B_U >= 0.0 && std::isfinite(B_U), "B_U must be >= 0");
  check_positive(tau, "tau");
  require(floor_prob > 0.0 && floor_prob <= 1.0,
          std::string(floor_name) + " must lie in (0, 1]");
  return std::max(log_states + 2.0 * B_U / tau, std::log(1.0 / floor_prob));
}

}  // namespace

double bbar_pretrain(const PretrainBoundParams& p) {
  check_positive(p.T, "T");
  require(p.gamma_norm >= 1.0, "the mixing-matrix norm must be >= 1");
  return 2.0 * p.gamma_norm * std::sqrt(log_term(std::log(p.T), p.B_U, p.tau, p.c0, "c0"));
}

double bbar_pretrain_kl(const PretrainBoundParams& p) {
  check_positive(p.T, "T");
  require(p.gamma_norm >= 1.0, "the mixing-matrix norm must be >= 1");
  return std::sqrt(2.0) * p.gamma_norm *
         log_term(std::log(p.T), p.B_U, p.tau, p.c0, "c0");
}

double generalization_gap(double bbar, double N, double delta, double t_min) {
  require(bbar >= 0.0, "bbar must be >= 0");
  check_positive(N, "N");
  check_delta(delta);
  if (std::isinf(t_min))
    fail(ErrorCode::kUndefined, "gap undefined: t_min is infinite");
  check_positive(t_min, "t_min");
  return bbar * std::sqrt(t_min / N) * std::sqrt(std::log(2.0 / delta));
}

double bbar_icl(const IclBoundParams& p) {
  check_positive(p.d, "d");
  return 2.0 * std::sqrt(log_term(std::log(p.d), p.B_U, p.tau, p.p_min, "p_min"));
}

double icl_gap_term(const IclBoundParams& p) {
  check_delta(p.delta);
  if (std::isinf(p.t_min))
    fail(ErrorCode::kUndefined, "ICL gap undefined: t_min is infinite");
  return generalization_gap(bbar_icl(p), p.N_icl, p.delta, p.t_min);
}

DepthBoundResult bbar_depth(const DepthBoundParams& p) {
  require(p.L >= 1 && p.H >= 1 && p.r >= 1 && p.m >= 1,
          "L, H, r and m must be positive");
  for (double b : {p.B_1, p.B_2, p.B_O, p.B_V, p.B_tok, p.B_U})
    require(b >= 0.0 && std::isfinite(b), "norm bounds must be >= 0");
  DepthBoundResult res;
  if (p.r % p.H != 0)
    res.warnings.push_back("H does not divide r");
  const double r = p.r;
  const double attn = 1.0 + r * p.m * p.B_1 * p.B_2;
  const double mlp = 1.0 + (r * r * r / p.H) * p.B_O * p.B_V;
  res.b_theta = attn * mlp * std::pow(p.B_tok * p.B_U, 1.0 / p.L);
  const double power = std::pow(res.b_theta, p.L);
  if (!std::isfinite(power))
    fail(ErrorCode::kSizeLimit,
         "B_Theta^L overflows: L * log(B_Theta) = " +
             std::to_string(p.L * std::log(res.b_theta)));
  PretrainBoundParams pre{p.T, power, p.tau, p.c0, p.gamma_norm, p.delta, 1.0};
  res.bbar = bbar_pretrain(pre);
  return res;
}

std::uint64_t sample_complexity(double bbar, double eps, double delta) {
  require(bbar >= 0.0 && std::isfinite(bbar), "bbar must be >= 0");
  check_positive(eps, "epsilon");
  check_delta(delta);
  const double n = std::ceil(4.0 * bbar * bbar / (eps * eps) * std::log(2.0 / delta));
  if (!(n < 0x1.0p63))
    fail(ErrorCode::kSizeLimit, "sample complexity exceeds 2^63");
  return static_cast<std::uint64_t>(n);
}

const std::vector<ModelCard>& builtin_model_cards() {
  static const std::vector<ModelCard> cards = {
      {"Llama 7B", "llama", 1e12, 32000, 4096},
      {"Llama2 7B", "llama", 2e12, 32000, 4096},
      {"Llama3 8B", "llama", 1.5e13, 128000, 4096},
      {"Llama3.2 3B", "llama", 1.5e13, 128000, 3072},
      {"Gemma 2B", "gemma", 3e12, 256128, 2048},
      {"Gemma 7B", "gemma", 6e12, 256128, 3072},
      {"Gemma2 9B", "gemma", 8e12, 256128, 3584},
      {"Gemma2 27B", "gemma", 1.3e13, 256128, 4608},
  };
  return cards;
}

std::vector<ModelCard> parse_model_cards(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<ModelCard> out;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      require(line == "name,family,N_train,T,r",
              "model cards: expected header name,family,N_train,T,r");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    require(f.size() == 5, "model cards: expected 5 columns in '" + line + "'");
    ModelCard c;
    c.name = f[0];
    c.family = f[1];
    try {
      c.N_train = std::stod(f[2]);
      c.T = std::stod(f[3]);
      c.r = std::stod(f[4]);
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "model cards: bad number in '" + line + "'");
    }
    require(c.N_train > 0 && c.T > 0 && c.r > 0,
            "model cards: N_train, T and r must be positive");
    out.push_back(c);
  }
  return out;
}

std::vector<PredictorRow> epsilon_predictor(const std::vector<ModelCard>& cards,
                                            double tau, double delta) {
  check_positive(tau, "tau");
  check_delta(delta);
  std::vector<PredictorRow> rows;
  for (const auto& c : cards) {
    const double bbar = 2.0 * std::sqrt(std::log(c.T) + 2.0 * c.T * std::sqrt(c.r) / tau);
    const double eps = 2.0 * bbar * std::sqrt(std::log(2.0 / delta)) / std::sqrt(c.N_train);
    rows.push_back({c, bbar, eps});
  }
  return rows;
}

std::string predictor_csv(const std::vector<PredictorRow>& rows) {
  std::string out = "name,N_train,T,r,bbar,epsilon\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.card.N_train, r.card.T, r.card.r, r.bbar, r.epsilon);
    out += r.card.name + buf;
  }
  return out;
}

namespace {

double norm2_sq(const std::vector<double>& c) {
  double s = 0.0;
  for (double v : c) s += v * v;
  require(s > 0.0, "McDiarmid: c must be nonzero");
  return s;
}

}  // namespace

double mcdiarmid_tail(double gamma_norm, const std::vector<double>& c, double u) {
  require(u >= 0.0, "McDiarmid: u must be >= 0");
  check_positive(gamma_norm, "gamma_norm");
  return 2.0 * std::exp(-2.0 * u * u / (gamma_norm * gamma_norm * norm2_sq(c)));
}

double mcdiarmid_tail_chain(const std::vector<double>& c, double u, double t_min) {
  require(u >= 0.0, "McDiarmid: u must be >= 0");
  check_positive(t_min, "t_min");
  return 2.0 * std::exp(-2.0 * u * u / (norm2_sq(c) * t_min));
}

bool McReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const McRow& r) { return r.ok; });
}

McReport mc_verify(const std::function<double(std::mt19937_64&)>& statistic,
                   const McVerifyConfig& cfg) {
  require(cfg.n_samples >= 1, "mc_verify: n_samples must be >= 1");
  require(!cfg.u_grid.empty(), "mc_verify: empty u grid");
  norm2_sq(cfg.c);
  constexpr std::size_t kBatches = 64;
  std::vector<double> values(cfg.n_samples);
  parallel_for(kBatches, cfg.jobs, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(cfg.seed, b));
    for (std::size_t i = b; i < cfg.n_samples; i += kBatches) values[i] = statistic(rng);
  });
  McReport rep;
  rep.n_samples = cfg.n_samples;
  if (cfg.has_expectation) {
    rep.mean = cfg.expectation;
  } else {
    for (double v : values) rep.mean += v;
    rep.mean /= static_cast<double>(values.size());
  }
  const double n = static_cast<double>(cfg.n_samples);
  for (double u : cfg.u_grid) {
    McRow row;
    row.u = u;
    std::size_t hits = 0;
    // Deviations that equal u in exact arithmetic can land one rounding
    // below it; count them.
    for (double v : values)
      if (std::abs(v - rep.mean) >= u - 1e-12) ++hits;
    row.empirical = static_cast<double>(hits) / n;
    row.tail = cfg.t_min > 0.0 ? mcdiarmid_tail_chain(cfg.c, u, cfg.t_min)
                               : mcdiarmid_tail(cfg.gamma_norm, cfg.c, u);
    row.stderr_ = std::sqrt(row.empirical * (1.0 - row.empirical) / n);
    row.ok = row.empirical <= row.tail + 3.0 * row.stderr_;
    rep.rows.push_back(row);
  }
  return rep;
}

LemmaReport lemma_checks(const std::vector<double>& P, const std::vector<double>& Q) {
  require(P.size() == Q.size() && !P.empty(),
          "lemma_checks: distributions must share a non-empty support");
  for (std::size_t i = 0; i < P.size(); ++i)
    require(P[i] > 0.0 && Q[i] > 0.0, "lemma_checks: entries must be strictly positive");
  LemmaReport r;
  for (std::size_t i = 0; i < P.size(); ++i) {
    r.B = std::max(r.B, std::abs(std::log(P[i] / Q[i])));
    const double h = std::sqrt(P[i]) - std::sqrt(Q[i]);
    r.hellinger2 += 0.5 * h * h;
  }
  r.tv = total_variation(P, Q);
  r.kl = kl_divergence(P, Q);
  r.tv_ok = r.tv <= std::sqrt(2.0 * r.B);
  r.kl_ok = r.kl <= r.B;
  r.hellinger_ok = r.hellinger2 <= 2.0 * r.B;
  return r;
}

bool softmax_bound_holds(const std::vector<double>& logits) {
  double c1 = 0.0;
  for (double x : logits) c1 += std::abs(x);
  const auto p = apply_temperature(logits, 1.0);
  const double lb = softmax_lower_bound(logits.size(), c1);
  return *std::min_element(p.begin(), p.end()) >= lb;
}

}  // namespace markovlm
