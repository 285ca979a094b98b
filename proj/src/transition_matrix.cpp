#include "transition_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "common.hpp"

namespace markovlm {

using nlohmann::json;

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.n() == b.n(), "dense multiply: dimension mismatch");
  const std::size_t n = a.n();
  DenseMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

TransitionMatrix TransitionMatrix::from_triplets(std::size_t n,
                                                 std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    require(t.row < n && t.col < n, "triplet index out of range");
    require(std::isfinite(t.value), "triplet value is not finite");
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  TransitionMatrix m;
  m.n_ = n;
  m.row_ptr_.assign(n + 1, 0);
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col)
      fail(ErrorCode::kInvalidArgument, "duplicate triplet (" +
                                            std::to_string(t.row) + "," +
                                            std::to_string(t.col) + ")");
    if (t.value == 0.0) continue;
    m.cols_.push_back(t.col);
    m.vals_.push_back(t.value);
    m.row_ptr_[t.row + 1]++;
  }
  for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
  return m;
}

TransitionMatrix TransitionMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < dense.n(); ++i)
    for (std::size_t j = 0; j < dense.n(); ++j)
      if (dense(i, j) != 0.0) t.push_back({i, j, dense(i, j)});
  return from_triplets(dense.n(), std::move(t));
}

TransitionMatrix TransitionMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  DenseMatrix d(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == rows.size(), "matrix rows must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) d(i, j) = rows[i][j];
  }
  return from_dense(d);
}

double TransitionMatrix::at(std::size_t i, std::size_t j) const {
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> TransitionMatrix::dense_row(std::size_t i) const {
  std::vector<double> r(n_, 0.0);
  const auto cols = row_cols(i);
  const auto vals = row_values(i);
  for (std::size_t k = 0; k < cols.size(); ++k) r[cols[k]] = vals[k];
  return r;
}

DenseMatrix TransitionMatrix::to_dense() const {
  DenseMatrix d(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto cols = row_cols(i);
    const auto vals = row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) d(i, cols[k]) = vals[k];
  }
  return d;
}

std::vector<Triplet> TransitionMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nonzeros());
  for (std::size_t i = 0; i < n_; ++i) {
    const auto cols = row_cols(i);
    const auto vals = row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      out.push_back({i, cols[k], vals[k]});
  }
  return out;
}

std::vector<double> TransitionMatrix::left_multiply(
    std::span<const double> x) const {
  require(x.size() == n_, "left_multiply: dimension mismatch");
  std::vector<double> y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto cols = row_cols(i);
    const auto vals = row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) y[cols[k]] += xi * vals[k];
  }
  return y;
}

DenseMatrix TransitionMatrix::right_multiply(const DenseMatrix& m) const {
  require(m.n() == n_, "right_multiply: dimension mismatch");
  DenseMatrix out(n_);
  for (std::size_t r = 0; r < n_; ++r) {
    const auto in_row = m.row(r);
    auto out_row = out.row(r);
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = in_row[i];
      if (x == 0.0) continue;
      const auto cols = row_cols(i);
      const auto vals = row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k)
        out_row[cols[k]] += x * vals[k];
    }
  }
  return out;
}

double TransitionMatrix::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (double v : row_values(i)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void TransitionMatrix::check_stochastic(double tol) const {
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (double v : row_values(i)) {
      if (!(v >= 0.0 && v <= 1.0))
        fail(ErrorCode::kInvalidArgument,
             "row " + std::to_string(i) + " has an entry outside [0,1]");
      s += v;
    }
    if (std::abs(s - 1.0) > tol)
      fail(ErrorCode::kInvalidArgument,
           "row " + std::to_string(i) + " sums to " + std::to_string(s));
  }
}

std::string TransitionMatrix::to_json() const {
  json j;
  j["n"] = n_;
  json trip = json::array();
  for (const auto& t : triplets()) trip.push_back({t.row, t.col, t.value});
  j["triplets"] = std::move(trip);
  json blocks = json::object();
  if (blocks_) {
    blocks["transient"] = {blocks_->transient_begin, blocks_->transient_end};
    blocks["recurrent"] = {blocks_->recurrent_begin, blocks_->recurrent_end};
  }
  if (!label_.empty()) blocks["label"] = label_;
  j["blocks"] = std::move(blocks);
  return j.dump();
}

TransitionMatrix TransitionMatrix::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument,
         std::string("matrix JSON does not parse: ") + e.what());
  }
  try {
    const auto n = j.at("n").get<std::size_t>();
    std::vector<Triplet> t;
    for (const auto& e : j.at("triplets")) {
      require(e.is_array() && e.size() == 3, "triplet must be [i, j, p]");
      t.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(),
                   e[2].get<double>()});
    }
    auto m = from_triplets(n, std::move(t));
    if (j.contains("blocks")) {
      const auto& b = j["blocks"];
      if (b.contains("transient") && b.contains("recurrent")) {
        BlockInfo info;
        info.transient_begin = b["transient"][0].get<std::size_t>();
        info.transient_end = b["transient"][1].get<std::size_t>();
        info.recurrent_begin = b["recurrent"][0].get<std::size_t>();
        info.recurrent_end = b["recurrent"][1].get<std::size_t>();
        m.set_blocks(info);
      }
      if (b.contains("label")) m.set_label(b["label"].get<std::string>());
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument,
         std::string("malformed matrix JSON: ") + e.what());
  }
}

std::string TransitionMatrix::to_dense_csv() const {
  std::ostringstream os;
  char buf[32];
  for (std::size_t i = 0; i < n_; ++i) {
    const auto row = dense_row(i);
    for (std::size_t j = 0; j < n_; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "kl_divergence: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(s, 0.0);
}

void check_distribution(std::span<const double> p, const std::string& where) {
  if (p.empty()) fail(ErrorCode::kNormalization, where + ": empty distribution");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorCode::kNormalization, where + ": negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1.0) > kSumTolerance)
    fail(ErrorCode::kNormalization,
         where + ": probabilities sum to " + std::to_string(s));
}

}  // namespace markovlm
