#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "transition_matrix.hpp"

namespace markovlm {

struct Trajectory {
  std::vector<int> states;
  int d = 0;
  std::uint64_t seed = 0;
  std::string source = "external";
};

// X_1 ~ start, X_{n+1} ~ Q(X_n, .). Sampling is inverse-CDF on the top 53
// bits of mt19937_64, so runs are portable across standard libraries.
Trajectory sample_trajectory(const TransitionMatrix& q,
                             std::span<const double> start, std::size_t N,
                             std::uint64_t seed);

struct FrequentistEstimate {
  TransitionMatrix q;
  std::vector<bool> unvisited;  // rows without outgoing transitions; uniform
};

FrequentistEstimate frequentist_estimate(const Trajectory& traj, int d);

// Predictor evaluated on S_n = (X_1..X_n), front-truncated by the oracle.
double tv_risk(const TransitionMatrix& q_true, const Oracle& predictor,
               const Trajectory& traj, unsigned jobs = 1);
// +inf when the predictor puts zero mass on a supported outcome.
double kl_risk(const TransitionMatrix& q_true, const Oracle& predictor,
               const Trajectory& traj, unsigned jobs = 1);

// Expected TV risk under the exact marginals of X_n, for predictors that
// only look at the last state (given as a matrix). Limited to d <= 64.
double theoretical_tv_risk(const TransitionMatrix& q_true,
                           const TransitionMatrix& predictor,
                           std::span<const double> start, std::size_t N);

enum class RiskMetric { kTv, kKl };
std::string to_string(RiskMetric m);
RiskMetric parse_risk_metric(const std::string& s);

// Fixed predictors ignore the trajectory; fitting ones are refit on it.
struct Predictor {
  std::string id;
  std::function<OracleHandle(const Trajectory&)> fit;
};

Predictor fixed_predictor(OracleHandle oracle, std::string id);
Predictor frequentist_predictor(int d);
Predictor ngram_predictor(int d, int order, double alpha);

struct RiskRow {
  std::size_t N;
  double mean, lo, hi;
  std::size_t reps;
  bool infinite = false;  // at least one replicate had infinite risk
};

struct RiskCurve {
  RiskMetric metric = RiskMetric::kTv;
  std::string estimator;
  std::vector<RiskRow> rows;

  // Columns N,mean,lo,hi,reps,metric,estimator.
  std::string to_csv() const;
};

struct RiskCurveOptions {
  RiskMetric metric = RiskMetric::kTv;
  std::size_t reps = 20;
  std::uint64_t seed = 0;
  std::vector<double> start;  // empty: uniform
  unsigned jobs = 1;
};

// Replicate r at N_list[k] uses derive_seed(seed, k, r). Means come with a
// normal-approximation 95% interval, lo clamped at 0 (and hi at 1 for TV).
RiskCurve icl_risk_curve(const TransitionMatrix& q_true,
                         const Predictor& predictor,
                         const std::vector<std::size_t>& N_list,
                         const RiskCurveOptions& opt);

double oracle_divergence(const Oracle& a, const Oracle& b,
                         const std::vector<Trajectory>& trajs,
                         unsigned jobs = 1);

struct PowerLawFit {
  double slope = 0.0, intercept = 0.0, slope_stderr = 0.0, r2 = 0.0;
  std::size_t n_points = 0;

  std::string to_json() const;
};

// OLS on (log N, log mean). Rows with infinite means are skipped.
PowerLawFit fit_power_law(const RiskCurve& curve);
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace markovlm
