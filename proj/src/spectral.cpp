#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chain_builder.hpp"

namespace markovlm {

namespace {

// out = m Q for a dense n x n m.
DenseMatrix step(const DenseMatrix& m, const TransitionMatrix& q,
                 unsigned jobs) {
  const std::size_t n = m.n();
  DenseMatrix out(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto src = m.row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = src[k];
      if (a == 0.0) continue;
      const auto cols = q.row_cols(k);
      const auto vals = q.row_values(k);
      for (std::size_t e = 0; e < cols.size(); ++e) dst[cols[e]] += a * vals[e];
    }
  });
  return out;
}

double linf_residual(const TransitionMatrix& q, std::span<const double> x) {
  const auto y = q.left_multiply(x);
  double r = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) r = std::max(r, std::abs(y[j] - x[j]));
  return r;
}

}  // namespace

StationaryResult stationary(const TransitionMatrix& q, double tol,
                            std::int64_t max_iter) {
  const std::size_t n = q.n();
  require(n > 0, "stationary: empty matrix");
  require(tol > 0.0, "stationary: tolerance must be positive");
  require(max_iter >= 1, "stationary: max_iter must be >= 1");
  q.check_stochastic(kSumTolerance);

  StationaryResult res;
  res.period = classify_states(q).chain_period();
  res.periodic = res.period > 1;
  Distribution x(n, 1.0 / static_cast<double>(n));

  if (!res.periodic) {
    for (std::int64_t it = 1; it <= max_iter; ++it) {
      auto y = q.left_multiply(x);
      double r = 0.0;
      for (std::size_t j = 0; j < n; ++j) r = std::max(r, std::abs(y[j] - x[j]));
      x.swap(y);
      res.iterations = it;
      res.residual = r;
      if (r <= tol) {
        res.converged = true;
        break;
      }
    }
    res.pi = std::move(x);
    return res;
  }

  // Cesaro average of the last `period` iterates.
  const auto p = static_cast<std::size_t>(res.period);
  std::vector<Distribution> window{x};
  Distribution avg(n);
  for (std::int64_t it = 1; it <= max_iter; ++it) {
    x = q.left_multiply(x);
    window.push_back(x);
    if (window.size() > p) window.erase(window.begin());
    res.iterations = it;
    if (window.size() < p) continue;
    std::fill(avg.begin(), avg.end(), 0.0);
    for (const auto& w : window)
      for (std::size_t j = 0; j < n; ++j) avg[j] += w[j] / static_cast<double>(p);
    res.residual = linf_residual(q, avg);
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
  }
  res.pi = avg;
  return res;
}

std::size_t StateClasses::recurrent_count() const {
  return static_cast<std::size_t>(std::count(recurrent.begin(), recurrent.end(), true));
}

std::vector<std::size_t> StateClasses::recurrent_states() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (recurrent[c]) out.insert(out.end(), classes[c].begin(), classes[c].end());
  std::sort(out.begin(), out.end());
  return out;
}

int StateClasses::chain_period() const {
  int p = 1;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (recurrent[c] && period[c] > 0) p = std::lcm(p, period[c]);
  return p;
}

StateClasses classify_states(const TransitionMatrix& q) {
  const std::size_t n = q.n();
  constexpr int kUnvisited = -1;
  std::vector<int> index(n, kUnvisited), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  StateClasses out;
  out.class_of.assign(n, -1);
  int counter = 0;

  struct Frame {
    std::size_t v;
    std::size_t edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto cols = q.row_cols(f.v);
      const auto vals = q.row_values(f.v);
      if (f.edge < cols.size()) {
        const std::size_t w = cols[f.edge];
        const bool positive = vals[f.edge] > 0.0;
        ++f.edge;
        if (!positive) continue;
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> members;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          out.class_of[w] = static_cast<int>(out.classes.size());
          members.push_back(w);
        } while (w != v);
        std::sort(members.begin(), members.end());
        out.classes.push_back(std::move(members));
      }
    }
  }

  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    const auto& members = out.classes[c];
    bool closed = true;
    for (std::size_t v : members) {
      const auto cols = q.row_cols(v);
      const auto vals = q.row_values(v);
      for (std::size_t e = 0; e < cols.size(); ++e)
        if (vals[e] > 0.0 && out.class_of[cols[e]] != static_cast<int>(c))
          closed = false;
    }
    out.recurrent.push_back(closed);

    // Period: gcd of level differences along internal edges of a BFS tree.
    std::vector<std::int64_t> level(n, -1);
    level[members[0]] = 0;
    std::vector<std::size_t> queue{members[0]};
    std::int64_t g = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t u = queue[head];
      const auto cols = q.row_cols(u);
      const auto vals = q.row_values(u);
      for (std::size_t e = 0; e < cols.size(); ++e) {
        const std::size_t v = cols[e];
        if (vals[e] <= 0.0 || out.class_of[v] != static_cast<int>(c)) continue;
        if (level[v] < 0) {
          level[v] = level[u] + 1;
          queue.push_back(v);
        } else {
          g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
        }
      }
    }
    out.period.push_back(static_cast<int>(g));  // 0: no cycle inside the class
  }
  return out;
}

double epsilon_of(const TransitionMatrix& q, int K, unsigned jobs) {
  require(K >= 1, "epsilon_of: K must be >= 1");
  const auto rec = classify_states(q).recurrent_states();
  const std::size_t m = rec.size();
  std::vector<std::ptrdiff_t> pos(q.n(), -1);
  for (std::size_t a = 0; a < m; ++a) pos[rec[a]] = static_cast<std::ptrdiff_t>(a);
  std::vector<Triplet> trips;
  for (std::size_t a = 0; a < m; ++a) {
    const auto cols = q.row_cols(rec[a]);
    const auto vals = q.row_values(rec[a]);
    for (std::size_t e = 0; e < cols.size(); ++e)
      trips.push_back({a, static_cast<std::size_t>(pos[cols[e]]), vals[e]});
  }
  const auto sub = TransitionMatrix::from_triplets(m, std::move(trips));
  DenseMatrix power = sub.to_dense();
  for (int k = 1; k < K; ++k) power = step(power, sub, jobs);
  return *std::min_element(power.data().begin(), power.data().end());
}

double envelope(double epsilon, int K, std::int64_t n) {
  const double base = std::max(0.0, 1.0 - 2.0 * epsilon);
  return std::pow(base, static_cast<double>(n / K - 1));
}

constexpr double kPiReferenceTol = 1e-15;
constexpr std::int64_t kPiReferenceIters = 1000000;

ConvergenceProfile convergence_profile(const TransitionMatrix& q, int K,
                                       std::int64_t n_max, unsigned jobs) {
  require(K >= 1, "convergence_profile: K must be >= 1");
  require(n_max >= K, "convergence_profile: n_max must be >= K");
  ConvergenceProfile prof;
  prof.epsilon = epsilon_of(q, K, jobs);
  prof.vacuous = !(prof.epsilon > 0.0);
  // Deviations are compared against an envelope that decays to ~0, so the
  // reference pi has to be accurate to rounding, not just to the default tol.
  const auto st = stationary(q, kPiReferenceTol, kPiReferenceIters);
  DenseMatrix power = q.to_dense();
  const std::size_t n = q.n();
  for (std::int64_t t = 1; t <= n_max; ++t) {
    if (t > 1) power = step(power, q, jobs);
    if (t < K) continue;
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        dev = std::max(dev, std::abs(power(i, j) - st.pi[j]));
    const double bound = prof.vacuous ? 1.0 : envelope(prof.epsilon, K, t);
    if (dev > bound + 1e-12) ++prof.violations;
    prof.points.push_back({t, dev, bound});
  }
  return prof;
}

std::vector<double> distance_curve(const TransitionMatrix& q,
                                   std::span<const double> pi,
                                   std::int64_t t_cap, double stop_below,
                                   unsigned jobs) {
  const std::size_t n = q.n();
  require(pi.size() == n, "distance_curve: pi has the wrong length");
  require(t_cap >= 1, "distance_curve: t_cap must be >= 1");
  std::vector<double> d;
  DenseMatrix power = q.to_dense();
  for (std::int64_t t = 1; t <= t_cap; ++t) {
    if (t > 1) power = step(power, q, jobs);
    double worst = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      worst = std::max(worst, total_variation(power.row(x), pi));
    d.push_back(worst);
    if (worst <= stop_below) break;
  }
  return d;
}

namespace {

std::optional<std::int64_t> first_below(const std::vector<double>& d,
                                        double eps) {
  for (std::size_t t = 0; t < d.size(); ++t)
    if (d[t] <= eps) return static_cast<std::int64_t>(t + 1);
  return std::nullopt;
}

}  // namespace

std::optional<std::int64_t> mixing_time(const TransitionMatrix& q,
                                        std::span<const double> pi, double eps,
                                        std::int64_t t_cap, unsigned jobs) {
  require(eps >= 0.0, "mixing_time: eps must be >= 0");
  return first_below(distance_curve(q, pi, t_cap, eps, jobs), eps);
}

std::vector<double> default_tmin_grid() {
  std::vector<double> g;
  for (int i = 0; i < 20; ++i) g.push_back(0.05 * i);
  return g;
}

namespace {

TminResult tmin_from_curve(const std::vector<double>& d,
                           std::span<const double> grid) {
  require(!grid.empty(), "t_min: empty grid");
  TminResult res;
  for (double eps : grid) {
    require(eps >= 0.0 && eps < 1.0, "t_min: grid values must lie in [0, 1)");
    TminRow row;
    row.epsilon = eps;
    row.t_mix = first_below(d, eps / 2.0);
    const double f = (2.0 - eps) / (1.0 - eps);
    row.factor = f * f;
    row.product = row.t_mix ? static_cast<double>(*row.t_mix) * row.factor : kInf;
    if (row.product < res.value ||
        (row.product == res.value && res.argmin && eps < *res.argmin)) {
      res.value = row.product;
      res.argmin = eps;
    }
    res.table.push_back(row);
  }
  return res;
}

}  // namespace

TminResult t_min(const TransitionMatrix& q, std::span<const double> pi,
                 std::span<const double> grid, std::int64_t t_cap,
                 unsigned jobs) {
  require(!grid.empty(), "t_min: empty grid");
  const double lowest = *std::min_element(grid.begin(), grid.end());
  return tmin_from_curve(distance_curve(q, pi, t_cap, lowest / 2.0, jobs), grid);
}

MixingReport mixing_report(const TransitionMatrix& q,
                           std::span<const double> eps_list,
                           std::span<const double> grid, std::int64_t t_cap,
                           unsigned jobs) {
  MixingReport rep;
  rep.stationary = stationary(q);
  rep.classes = classify_states(q);
  double lowest = grid.empty() ? 1.0 : *std::min_element(grid.begin(), grid.end()) / 2.0;
  for (double e : eps_list) {
    require(e >= 0.0, "mixing_report: eps must be >= 0");
    lowest = std::min(lowest, e);
  }
  const auto d = distance_curve(q, rep.stationary.pi, t_cap, lowest, jobs);
  for (double e : eps_list) rep.t_mix.emplace_back(e, first_below(d, e));
  if (!grid.empty()) rep.t_min = tmin_from_curve(d, grid);
  return rep;
}

std::vector<TemperaturePoint> temperature_sweep(
    const std::shared_ptr<const LogitSource>& source, VocabSpec spec,
    std::span<const double> taus, double converge_tol, std::int64_t t_cap,
    unsigned jobs) {
  require(source != nullptr, "temperature_sweep: null logit source");
  require(!taus.empty(), "temperature_sweep: empty temperature grid");
  std::vector<TemperaturePoint> out;
  for (double tau : taus) {
    const TemperedOracle oracle(source, tau);
    const auto q = build_qf(oracle, spec, jobs);
    TemperaturePoint pt;
    pt.tau = tau;
    pt.epsilon = epsilon_of(q, spec.K, jobs);
    double mn = 1.0;
    for (std::size_t i = 0; i < q.n(); ++i) {
      const auto vals = q.row_values(i);
      if (vals.size() < static_cast<std::size_t>(spec.T)) mn = 0.0;
      for (double v : vals) mn = std::min(mn, v);
    }
    pt.min_oracle_entry = mn;
    const auto st = stationary(q);
    pt.steps_to_converge =
        first_below(distance_curve(q, st.pi, t_cap, converge_tol, jobs), converge_tol);
    out.push_back(pt);
  }
  return out;
}

}  // namespace markovlm
