#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace markovlm {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

struct BlockInfo {
  std::size_t transient_begin = 0, transient_end = 0;
  std::size_t recurrent_begin = 0, recurrent_end = 0;
};

// Dense row-major square matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * n, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t n() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * n_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * n_, n_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * n_, n_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);

// Row-stochastic matrix in compressed-row storage. Entries are kept sorted
// by column within each row; explicit zeros are dropped.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;

  static TransitionMatrix from_triplets(std::size_t n,
                                        std::vector<Triplet> triplets);
  static TransitionMatrix from_dense(const DenseMatrix& dense);
  static TransitionMatrix from_rows(
      const std::vector<std::vector<double>>& rows);

  std::size_t n() const { return n_; }
  std::size_t nonzeros() const { return cols_.size(); }

  std::span<const std::size_t> row_cols(std::size_t i) const {
    return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> dense_row(std::size_t i) const;
  DenseMatrix to_dense() const;
  std::vector<Triplet> triplets() const;

  // y = x Q
  std::vector<double> left_multiply(std::span<const double> x) const;
  // Returns M Q for a dense M with n() columns.
  DenseMatrix right_multiply(const DenseMatrix& m) const;

  double max_row_sum_error() const;
  // Throws kInvalidArgument unless every row sums to 1 within `tol` and all
  // entries lie in [0, 1].
  void check_stochastic(double tol = 1e-9) const;

  const std::optional<BlockInfo>& blocks() const { return blocks_; }
  void set_blocks(BlockInfo b) { blocks_ = b; }
  const std::string& label() const { return label_; }
  void set_label(std::string l) { label_ = std::move(l); }

  // {"n": n, "triplets": [[i,j,p],...], "blocks": {...}}
  std::string to_json() const;
  static TransitionMatrix from_json(const std::string& text);
  std::string to_dense_csv() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  std::optional<BlockInfo> blocks_;
  std::string label_;
};

}  // namespace markovlm
