#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "transition_matrix.hpp"

namespace markovlm {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StationaryResult {
  Distribution pi;
  std::int64_t iterations = 0;
  double residual = 0.0;  // L-inf of pi Q - pi
  bool converged = false;
  // Periodic chains report the Cesaro average over one period.
  bool periodic = false;
  int period = 1;
};

StationaryResult stationary(const TransitionMatrix& q, double tol = 1e-12,
                            std::int64_t max_iter = 1000000);

struct StateClasses {
  std::vector<std::vector<std::size_t>> classes;  // sorted members
  std::vector<bool> recurrent;                    // per class: closed
  std::vector<int> period;                        // per class
  std::vector<int> class_of;                      // per state

  std::size_t recurrent_count() const;
  // Sorted union of the recurrent classes.
  std::vector<std::size_t> recurrent_states() const;
  // lcm of the recurrent-class periods.
  int chain_period() const;
};

StateClasses classify_states(const TransitionMatrix& q);

// Min entry of Q^K over R x R, R the union of recurrent classes.
double epsilon_of(const TransitionMatrix& q, int K, unsigned jobs = 1);

// (1 - 2 eps)^{floor(n/K) - 1}; the base is clamped at 0.
double envelope(double epsilon, int K, std::int64_t n);

struct ConvergencePoint {
  std::int64_t n;
  double empirical;
  double bound;
};

struct ConvergenceProfile {
  double epsilon = 0.0;
  bool vacuous = false;  // eps == 0
  std::vector<ConvergencePoint> points;  // n = K..n_max
  std::size_t violations = 0;  // empirical > bound + 1e-12
};

// Works on either a full oracle-built Q_f or its recurrent block.
ConvergenceProfile convergence_profile(const TransitionMatrix& q, int K,
                                       std::int64_t n_max, unsigned jobs = 1);

// d(t) = max_x TV(Q^t(x, .), pi) for t = 1..t_cap, stopping early once
// d(t) <= stop_below.
std::vector<double> distance_curve(const TransitionMatrix& q,
                                   std::span<const double> pi,
                                   std::int64_t t_cap, double stop_below = -1.0,
                                   unsigned jobs = 1);

// Smallest t in [1, t_cap] with d(t) <= eps; nullopt stands for +inf.
std::optional<std::int64_t> mixing_time(const TransitionMatrix& q,
                                        std::span<const double> pi, double eps,
                                        std::int64_t t_cap, unsigned jobs = 1);

struct TminRow {
  double epsilon;
  std::optional<std::int64_t> t_mix;  // at epsilon / 2
  double factor;                      // ((2 - eps) / (1 - eps))^2
  double product;                     // +inf when t_mix is
};

struct TminResult {
  double value = kInf;
  std::optional<double> argmin;  // smallest eps achieving the min
  std::vector<TminRow> table;
};

std::vector<double> default_tmin_grid();

TminResult t_min(const TransitionMatrix& q, std::span<const double> pi,
                 std::span<const double> grid, std::int64_t t_cap,
                 unsigned jobs = 1);

struct MixingReport {
  StationaryResult stationary;
  StateClasses classes;
  std::vector<std::pair<double, std::optional<std::int64_t>>> t_mix;
  TminResult t_min;
};

MixingReport mixing_report(const TransitionMatrix& q,
                           std::span<const double> eps_list,
                           std::span<const double> grid, std::int64_t t_cap,
                           unsigned jobs = 1);

struct TemperaturePoint {
  double tau;
  double epsilon;             // from the recurrent block of Q_f^K
  double min_oracle_entry;    // min over all rows of softmax(logits / tau)
  std::optional<std::int64_t> steps_to_converge;  // first n with d(n) <= tol
};

// Rebuilds Q_f at each temperature for a fixed logit source.
std::vector<TemperaturePoint> temperature_sweep(
    const std::shared_ptr<const LogitSource>& source, VocabSpec spec,
    std::span<const double> taus, double converge_tol = 1e-6,
    std::int64_t t_cap = 100000, unsigned jobs = 1);

}  // namespace markovlm
