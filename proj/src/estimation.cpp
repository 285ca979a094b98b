#include "estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>

namespace markovlm {

namespace {

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Values>
std::size_t draw_index(const Values& probs, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  // Rounding left u above the cumulative sum; take the last positive entry.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return k;
  return probs.size() - 1;
}

// Per-position loss, summed in order so the result does not depend on jobs.
template <class Loss>
double average_loss(const Trajectory& traj, unsigned jobs, Loss loss) {
  const std::size_t N = traj.states.size();
  require(N >= 1, "risk: empty trajectory");
  std::vector<double> per(N);
  parallel_for(N, jobs, [&](std::size_t n) { per[n] = loss(n); });
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(N);
}

void check_traj(const TransitionMatrix& q, const Trajectory& traj) {
  for (int x : traj.states)
    require(x >= 0 && static_cast<std::size_t>(x) < q.n(),
            "risk: trajectory state outside the chain");
}

}  // namespace

Trajectory sample_trajectory(const TransitionMatrix& q,
                             std::span<const double> start, std::size_t N,
                             std::uint64_t seed) {
  require(N >= 1, "sample_trajectory: N must be >= 1");
  require(start.size() == q.n(), "sample_trajectory: start has the wrong length");
  check_distribution(start, "sample_trajectory start");
  q.check_stochastic(kSumTolerance);
  std::mt19937_64 rng(seed);
  Trajectory t;
  t.d = static_cast<int>(q.n());
  t.seed = seed;
  t.source = "chain";
  t.states.reserve(N);
  std::size_t x = draw_index(start, unit_draw(rng));
  t.states.push_back(static_cast<int>(x));
  for (std::size_t n = 1; n < N; ++n) {
    const auto cols = q.row_cols(x);
    x = cols[draw_index(q.row_values(x), unit_draw(rng))];
    t.states.push_back(static_cast<int>(x));
  }
  return t;
}

FrequentistEstimate frequentist_estimate(const Trajectory& traj, int d) {
  require(d >= 1, "frequentist_estimate: d must be >= 1");
  require(traj.states.size() >= 2,
          "frequentist_estimate: need at least two observations");
  const auto u = static_cast<std::size_t>(d);
  std::vector<std::vector<double>> counts(u, std::vector<double>(u, 0.0));
  for (std::size_t n = 0; n + 1 < traj.states.size(); ++n) {
    const int a = traj.states[n], b = traj.states[n + 1];
    require(a >= 0 && a < d && b >= 0 && b < d,
            "frequentist_estimate: state outside [0, d)");
    counts[a][b] += 1.0;
  }
  FrequentistEstimate est;
  est.unvisited.assign(u, false);
  for (std::size_t i = 0; i < u; ++i) {
    double s = 0.0;
    for (double c : counts[i]) s += c;
    if (s == 0.0) {
      est.unvisited[i] = true;
      std::fill(counts[i].begin(), counts[i].end(), 1.0 / d);
    } else {
      for (double& c : counts[i]) c /= s;
    }
  }
  est.q = TransitionMatrix::from_rows(counts);
  return est;
}

double tv_risk(const TransitionMatrix& q_true, const Oracle& predictor,
               const Trajectory& traj, unsigned jobs) {
  check_traj(q_true, traj);
  require(static_cast<std::size_t>(predictor.vocab_size()) == q_true.n(),
          "tv_risk: predictor vocabulary does not match the chain");
  const std::span<const int> s(traj.states);
  return average_loss(traj, jobs, [&](std::size_t n) {
    const auto truth = q_true.dense_row(static_cast<std::size_t>(s[n]));
    return total_variation(truth, predictor.query(s.first(n + 1)));
  });
}

double kl_risk(const TransitionMatrix& q_true, const Oracle& predictor,
               const Trajectory& traj, unsigned jobs) {
  check_traj(q_true, traj);
  require(static_cast<std::size_t>(predictor.vocab_size()) == q_true.n(),
          "kl_risk: predictor vocabulary does not match the chain");
  const std::span<const int> s(traj.states);
  return average_loss(traj, jobs, [&](std::size_t n) {
    const auto truth = q_true.dense_row(static_cast<std::size_t>(s[n]));
    return kl_divergence(truth, predictor.query(s.first(n + 1)));
  });
}

double theoretical_tv_risk(const TransitionMatrix& q_true,
                           const TransitionMatrix& predictor,
                           std::span<const double> start, std::size_t N) {
  const std::size_t d = q_true.n();
  require(d <= 64, "theoretical_tv_risk: exact marginals only for d <= 64");
  require(predictor.n() == d, "theoretical_tv_risk: predictor size mismatch");
  require(start.size() == d, "theoretical_tv_risk: start has the wrong length");
  require(N >= 1, "theoretical_tv_risk: N must be >= 1");
  std::vector<double> per_state(d);
  for (std::size_t x = 0; x < d; ++x)
    per_state[x] = total_variation(q_true.dense_row(x), predictor.dense_row(x));
  std::vector<double> mu(start.begin(), start.end());
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t x = 0; x < d; ++x) total += mu[x] * per_state[x];
    mu = q_true.left_multiply(mu);
  }
  return total / static_cast<double>(N);
}

std::string to_string(RiskMetric m) { return m == RiskMetric::kTv ? "tv" : "kl"; }

RiskMetric parse_risk_metric(const std::string& s) {
  if (s == "tv" || s == "TV") return RiskMetric::kTv;
  if (s == "kl" || s == "KL") return RiskMetric::kKl;
  fail(ErrorCode::kInvalidArgument, "unknown risk metric '" + s + "'");
}

Predictor fixed_predictor(OracleHandle oracle, std::string id) {
  require(oracle != nullptr, "fixed_predictor: null oracle");
  return {std::move(id), [oracle](const Trajectory&) { return oracle; }};
}

Predictor frequentist_predictor(int d) {
  return {"frequentist", [d](const Trajectory& t) -> OracleHandle {
            return std::make_shared<ChainOracle>(frequentist_estimate(t, d).q, 1);
          }};
}

Predictor ngram_predictor(int d, int order, double alpha) {
  return {"ngram" + std::to_string(order), [=](const Trajectory& t) {
            return fit_ngram(t.states, d, order, alpha);
          }};
}

std::string RiskCurve::to_csv() const {
  std::string out = "N,mean,lo,hi,reps,metric,estimator\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu,", r.N, r.mean,
                  r.lo, r.hi, r.reps);
    out += buf;
    out += to_string(metric) + "," + estimator + "\n";
  }
  return out;
}

RiskCurve icl_risk_curve(const TransitionMatrix& q_true,
                         const Predictor& predictor,
                         const std::vector<std::size_t>& N_list,
                         const RiskCurveOptions& opt) {
  require(!N_list.empty(), "icl_risk_curve: empty N list");
  require(opt.reps >= 2, "icl_risk_curve: reps must be >= 2");
  for (std::size_t k = 0; k < N_list.size(); ++k) {
    require(N_list[k] >= 2, "icl_risk_curve: every N must be >= 2");
    require(k == 0 || N_list[k] > N_list[k - 1],
            "icl_risk_curve: N list must be strictly increasing");
  }
  const std::size_t d = q_true.n();
  std::vector<double> start = opt.start;
  if (start.empty()) start.assign(d, 1.0 / static_cast<double>(d));

  RiskCurve curve;
  curve.metric = opt.metric;
  curve.estimator = predictor.id;
  for (std::size_t k = 0; k < N_list.size(); ++k) {
    std::vector<double> risks(opt.reps);
    parallel_for(opt.reps, opt.jobs, [&](std::size_t r) {
      const auto traj = sample_trajectory(q_true, start, N_list[k],
                                          derive_seed(opt.seed, k, r));
      const OracleHandle model = predictor.fit(traj);
      risks[r] = opt.metric == RiskMetric::kTv ? tv_risk(q_true, *model, traj)
                                               : kl_risk(q_true, *model, traj);
    });
    RiskRow row{N_list[k], 0.0, 0.0, 0.0, opt.reps};
    for (double v : risks) {
      row.mean += v;
      if (std::isinf(v)) row.infinite = true;
    }
    row.mean /= static_cast<double>(opt.reps);
    if (row.infinite) {
      row.lo = row.hi = row.mean;
    } else {
      double ss = 0.0;
      for (double v : risks) ss += (v - row.mean) * (v - row.mean);
      const double se = std::sqrt(ss / static_cast<double>(opt.reps - 1) /
                                  static_cast<double>(opt.reps));
      row.lo = std::max(0.0, row.mean - 1.96 * se);
      row.hi = row.mean + 1.96 * se;
      if (opt.metric == RiskMetric::kTv) row.hi = std::min(1.0, row.hi);
    }
    curve.rows.push_back(row);
  }
  return curve;
}

double oracle_divergence(const Oracle& a, const Oracle& b,
                         const std::vector<Trajectory>& trajs, unsigned jobs) {
  require(!trajs.empty(), "oracle_divergence: no trajectories");
  require(a.vocab_size() == b.vocab_size(),
          "oracle_divergence: oracles disagree on the vocabulary");
  double total = 0.0;
  for (const auto& t : trajs) {
    const std::span<const int> s(t.states);
    total += average_loss(t, jobs, [&](std::size_t n) {
      return total_variation(a.query(s.first(n + 1)), b.query(s.first(n + 1)));
    });
  }
  return total / static_cast<double>(trajs.size());
}

std::string PowerLawFit::to_json() const {
  return nlohmann::json{{"slope", slope},
                        {"intercept", intercept},
                        {"stderr", slope_stderr},
                        {"r2", r2},
                        {"n_points", n_points}}
      .dump(2);
}

PowerLawFit fit_power_law(const RiskCurve& curve) {
  std::vector<double> x, y;
  for (const auto& r : curve.rows) {
    if (std::isinf(r.mean)) continue;
    x.push_back(static_cast<double>(r.N));
    y.push_back(r.mean);
  }
  return fit_power_law(x, y);
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_power_law: x and y differ in length");
  require(x.size() >= 3, "fit_power_law: need at least 3 finite points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(x[i] > 0.0 && y[i] > 0.0,
            "fit_power_law: N and mean risk must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  // Shift by the first point so exactly flat data gives a zero slope.
  const double x0 = lx[0], y0 = ly[0];
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] -= x0;
    ly[i] -= y0;
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, "fit_power_law: all N values are equal");
  PowerLawFit f;
  f.n_points = n;
  f.slope = sxy / sxx;
  f.intercept = (my - f.slope * mx) + y0 - f.slope * x0;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - my - f.slope * (lx[i] - mx);
    sse += e * e;
  }
  f.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

}  // namespace markovlm
