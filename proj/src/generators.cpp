#include "generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "common.hpp"

namespace markovlm {

TransitionMatrix random_chain(int d, double p_min, std::uint64_t seed) {
  require(d >= 2, "random_chain: d must be >= 2");
  require(p_min >= 0.0 && std::isfinite(p_min), "random_chain: p_min must be >= 0");
  require(p_min * d <= 1.0 + 1e-15,
          "random_chain: infeasible p_min (p_min * d must be <= 1)");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gamma1(1.0);  // Gamma(1, 1)
  const double free_mass = std::max(0.0, 1.0 - d * p_min);
  std::vector<std::vector<double>> rows(d, std::vector<double>(d));
  for (auto& row : rows) {
    double s = 0.0;
    for (double& v : row) s += (v = gamma1(rng));
    for (double& v : row) v = p_min + free_mass * (v / s);
  }
  return TransitionMatrix::from_rows(rows);
}

TransitionMatrix constrained_walk(int d) {
  require(d >= 2, "constrained_walk: d must be >= 2");
  std::vector<Triplet> t;
  const auto u = static_cast<std::size_t>(d);
  t.push_back({0, 1, 1.0});
  for (std::size_t i = 1; i + 1 < u; ++i) {
    t.push_back({i, i - 1, 0.5});
    t.push_back({i, i + 1, 0.5});
  }
  t.push_back({u - 1, u - 2, 1.0});
  return TransitionMatrix::from_triplets(u, std::move(t));
}

TransitionMatrix polygonal_walk(int d) {
  require(d >= 3, "polygonal_walk: d must be >= 3");
  const auto u = static_cast<std::size_t>(d);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < u; ++i) {
    t.push_back({i, (i + 1) % u, 0.5});
    t.push_back({i, (i + u - 1) % u, 0.5});
  }
  return TransitionMatrix::from_triplets(u, std::move(t));
}

TransitionMatrix clique_rim(int d, double eta, const std::vector<int>& tau,
                            double eps_rim) {
  require(d >= 3 && d % 3 == 0, "clique_rim: d must be a positive multiple of 3");
  require(eta >= 0.0 && eta < 0.75, "clique_rim: eta must lie in [0, 3/4)");
  require(eps_rim >= 0.0 && eps_rim <= 0.25, "clique_rim: eps' must lie in [0, 1/4]");
  const std::size_t k = static_cast<std::size_t>(d / 3);
  require(tau.size() == k, "clique_rim: tau must have d/3 entries");
  for (int b : tau) require(b == 0 || b == 1, "clique_rim: tau entries must be 0 or 1");
  require(k > 1 || eta == 0.0,
          "clique_rim: a single-state clique has no off-diagonal entries; eta must be 0");

  std::vector<Triplet> t;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j)
      t.push_back({i, j, i == j ? 0.75 - eta : eta / static_cast<double>(k - 1)});
    const double a = 4.0 * tau[i] * eps_rim;
    const std::size_t r0 = k + 2 * i, r1 = r0 + 1;
    // R_tau row i and its transpose in the lower-left block.
    t.push_back({i, r0, (1.0 + a) / 8.0});
    t.push_back({i, r1, (1.0 - a) / 8.0});
    t.push_back({r0, i, (1.0 + a) / 8.0});
    t.push_back({r1, i, (1.0 - a) / 8.0});
    // L_tau diagonal.
    t.push_back({r0, r0, (7.0 - a) / 8.0});
    t.push_back({r1, r1, (7.0 + a) / 8.0});
  }
  return TransitionMatrix::from_triplets(static_cast<std::size_t>(d), std::move(t));
}

ProcessKind parse_process_kind(const std::string& name) {
  if (name == "gbm") return ProcessKind::kGbm;
  if (name == "correlated_gaussian") return ProcessKind::kCorrelatedGaussian;
  if (name == "uncorrelated_gaussian") return ProcessKind::kUncorrelatedGaussian;
  if (name == "uncorrelated_uniform") return ProcessKind::kUncorrelatedUniform;
  if (name == "brownian") return ProcessKind::kBrownian;
  fail(ErrorCode::kInvalidArgument, "unknown process kind '" + name + "'");
}

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::kGbm: return "gbm";
    case ProcessKind::kCorrelatedGaussian: return "correlated_gaussian";
    case ProcessKind::kUncorrelatedGaussian: return "uncorrelated_gaussian";
    case ProcessKind::kUncorrelatedUniform: return "uncorrelated_uniform";
    case ProcessKind::kBrownian: return "brownian";
  }
  return "unknown";
}

std::vector<double> simulate_process(ProcessKind kind, const ProcessParams& p,
                                     std::size_t n, std::uint64_t seed) {
  require(n >= 1, "simulate_process: n must be >= 1");
  require(p.sigma >= 0.0 && std::isfinite(p.sigma),
          "simulate_process: sigma must be >= 0");
  require(p.dt > 0.0, "simulate_process: dt must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  switch (kind) {
    case ProcessKind::kGbm: {
      require(p.x0 > 0.0, "simulate_process: gbm needs x0 > 0");
      const double drift = (p.mu - 0.5 * p.sigma * p.sigma) * p.dt;
      const double vol = p.sigma * std::sqrt(p.dt);
      x[0] = p.x0;
      for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] * std::exp(drift + vol * z(rng));
      break;
    }
    case ProcessKind::kCorrelatedGaussian:
      require(std::abs(p.rho) < 1.0, "simulate_process: |rho| must be < 1");
      x[0] = p.x0;
      for (std::size_t k = 1; k < n; ++k) x[k] = p.rho * x[k - 1] + p.sigma * z(rng);
      break;
    case ProcessKind::kUncorrelatedGaussian:
      for (double& v : x) v = p.sigma * z(rng);
      break;
    case ProcessKind::kUncorrelatedUniform: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (double& v : x) v = u(rng);
      break;
    }
    case ProcessKind::kBrownian: {
      const double vol = p.sigma * std::sqrt(p.dt);
      x[0] = p.x0;
      for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] + vol * z(rng);
      break;
    }
  }
  return x;
}

std::vector<int> discretize(const std::vector<double>& series, int d) {
  require(d >= 2, "discretize: d must be >= 2");
  require(!series.empty(), "discretize: empty series");
  for (double v : series) require(std::isfinite(v), "discretize: non-finite value");
  const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  const double lo = *lo_it, hi = *hi_it;
  require(hi > lo, "discretize: constant series cannot be split into bins");
  std::vector<int> out;
  out.reserve(series.size());
  for (double v : series) {
    const double scaled = (v - lo) * d / (hi - lo);
    const int bin = static_cast<int>(std::ceil(scaled)) - 1;
    out.push_back(std::clamp(bin, 0, d - 1));
  }
  return out;
}

}  // namespace markovlm
