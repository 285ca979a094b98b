#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace markovlm {

Distribution Oracle::query(std::span<const int> context) const {
  require(!context.empty(), "query: context must contain at least one token");
  const std::size_t K = static_cast<std::size_t>(context_length());
  if (context.size() > K) context = context.subspan(context.size() - K);
  const int T = vocab_size();
  // Only the retained window is checked; tokens already truncated away
  // cannot affect the answer.
  for (int t : context)
    require(t >= 0 && t < T, "query: token " + std::to_string(t) +
                                 " outside the vocabulary");
  return query_impl(context);
}

Distribution apply_temperature(std::span<const double> logits, double tau) {
  require(tau > 0.0 && std::isfinite(tau), "temperature must be > 0");
  require(!logits.empty(), "apply_temperature: empty logits");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    require(std::isfinite(x), "apply_temperature: logits must be finite");
    mx = std::max(mx, x);
  }
  Distribution p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / tau);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double softmax_lower_bound(std::size_t m, double c1) {
  require(m >= 1, "softmax_lower_bound: m must be >= 1");
  return 1.0 / (static_cast<double>(m) * std::exp(2.0 * c1));
}

UniformOracle::UniformOracle(int T, int K) : T_(T), K_(K) {
  require(T >= 1 && K >= 1, "uniform oracle: T and K must be positive");
}

Distribution UniformOracle::query_impl(std::span<const int>) const {
  return Distribution(T_, 1.0 / T_);
}

ChainOracle::ChainOracle(TransitionMatrix q, int context_length)
    : q_(std::move(q)), K_(context_length) {
  require(K_ >= 1, "chain oracle: context length must be >= 1");
  q_.check_stochastic(kSumTolerance);
}

Distribution ChainOracle::query_impl(std::span<const int> context) const {
  return q_.dense_row(static_cast<std::size_t>(context.back()));
}

LogitTable::LogitTable(VocabSpec spec, std::vector<std::vector<double>> table)
    : space_(spec), table_(std::move(table)) {
  require(table_.size() == space_.size(),
          "logit table needs one row per state of V*_K");
  for (const auto& row : table_)
    require(row.size() == static_cast<std::size_t>(spec.T),
            "logit table rows must have T entries");
}

LogitTable LogitTable::random(VocabSpec spec, double scale,
                              std::uint64_t seed) {
  StateSpace space(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> table(space.size(),
                                         std::vector<double>(spec.T));
  for (auto& row : table)
    for (double& x : row) x = scale * normal(rng);
  return LogitTable(spec, std::move(table));
}

std::vector<double> LogitTable::logits(std::span<const int> context) const {
  return table_[space_.index(front_truncate(context, space_.K()))];
}

TemperedOracle::TemperedOracle(std::shared_ptr<const LogitSource> source,
                               double tau)
    : source_(std::move(source)), tau_(tau) {
  require(source_ != nullptr, "tempered oracle: null logit source");
  require(tau > 0.0 && std::isfinite(tau), "temperature must be > 0");
}

Distribution TemperedOracle::query_impl(std::span<const int> context) const {
  const auto x = source_->logits(context);
  return apply_temperature(x, tau_);
}

NgramOracle::NgramOracle(int T, int order, double alpha,
                         std::map<std::vector<int>, std::vector<double>> counts)
    : T_(T), order_(order), alpha_(alpha), counts_(std::move(counts)) {
  require(T >= 1, "n-gram oracle: T must be positive");
  require(order >= 1, "n-gram oracle: order must be >= 1");
  require(alpha >= 0.0, "n-gram oracle: smoothing must be >= 0");
}

Distribution NgramOracle::query_impl(std::span<const int> context) const {
  const std::vector<int> key(context.begin(), context.end());
  const auto it = counts_.find(key);
  double total = 0.0;
  if (it != counts_.end())
    for (double c : it->second) total += c;
  const double denom = total + alpha_ * T_;
  if (denom <= 0.0) return Distribution(T_, 1.0 / T_);
  Distribution p(T_);
  for (int x = 0; x < T_; ++x) {
    const double c = it != counts_.end() ? it->second[x] : 0.0;
    p[x] = (c + alpha_) / denom;
  }
  return p;
}

OracleHandle fit_ngram(std::span<const int> trajectory, int T, int order,
                       double alpha) {
  require(order >= 1, "fit_ngram: order must be >= 1");
  require(alpha >= 0.0, "fit_ngram: smoothing must be >= 0");
  if (trajectory.size() < 2 && alpha == 0.0)
    fail(ErrorCode::kInvalidArgument,
         "fit_ngram: no transitions to count and no smoothing");
  std::map<std::vector<int>, std::vector<double>> counts;
  for (int x : trajectory)
    require(x >= 0 && x < T, "fit_ngram: token outside the vocabulary");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const std::size_t len = std::min<std::size_t>(order, i);
    std::vector<int> key(trajectory.begin() + static_cast<std::ptrdiff_t>(i - len),
                         trajectory.begin() + static_cast<std::ptrdiff_t>(i));
    auto& row = counts[key];
    if (row.empty()) row.assign(T, 0.0);
    row[trajectory[i]] += 1.0;
  }
  return std::make_shared<NgramOracle>(T, order, alpha, std::move(counts));
}

}  // namespace markovlm
