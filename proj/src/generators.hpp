#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transition_matrix.hpp"

namespace markovlm {

// Rows p_min + (1 - d p_min) * Dirichlet(1, ..., 1).
TransitionMatrix random_chain(int d, double p_min, std::uint64_t seed);

// Reflecting walk on a path: endpoints move inward with probability 1,
// interior states step +-1 with probability 1/2.
TransitionMatrix constrained_walk(int d);

// Symmetric walk on a d-cycle.
TransitionMatrix polygonal_walk(int d);

// Inner clique of k = d/3 states and a rim of 2k states. `tau` has k
// entries in {0, 1}; the rim amplitude eps_rim lies in [0, 1/4].
TransitionMatrix clique_rim(int d, double eta, const std::vector<int>& tau,
                            double eps_rim = 0.125);

enum class ProcessKind {
  kGbm,
  kCorrelatedGaussian,
  kUncorrelatedGaussian,
  kUncorrelatedUniform,
  kBrownian,
};

ProcessKind parse_process_kind(const std::string& name);
std::string to_string(ProcessKind kind);

struct ProcessParams {
  double mu = 0.0;       // gbm drift
  double sigma = 1.0;    // volatility / noise scale
  double rho = 0.5;      // AR(1) coefficient, |rho| < 1
  double x0 = 1.0;       // starting value (gbm: S_0 > 0)
  double dt = 1.0;
};

// gbm: S_{k+1} = S_k exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z).
// correlated_gaussian: X_{k+1} = rho X_k + sigma Z.
// uncorrelated_gaussian: X_k = sigma Z. uncorrelated_uniform: U[0, 1).
// brownian: X_{k+1} = X_k + sigma sqrt(dt) Z.
std::vector<double> simulate_process(ProcessKind kind, const ProcessParams& p,
                                     std::size_t n, std::uint64_t seed);

// Uniform-width bins over [min, max]; a value on a shared edge falls in the
// lower bin.
std::vector<int> discretize(const std::vector<double>& series, int d);

}  // namespace markovlm
