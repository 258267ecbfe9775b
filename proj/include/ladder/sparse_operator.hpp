#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "ladder/error.hpp"

namespace ladder {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;

/// Real sparse matrix in compressed-row form.
class SparseOperator {
public:
  struct Entry {
    int column;
    double value;
  };

  /// Accumulates (row, column, value) contributions; duplicates are summed.
  class Builder {
  public:
    explicit Builder(std::size_t dimension) : rows_(dimension) {}

    void add(std::size_t row, std::size_t column, double value) {
      rows_[row].push_back({static_cast<int>(column), value});
    }

    SparseOperator build(bool symmetric) && {
      SparseOperator op;
      op.dim_ = rows_.size();
      op.symmetric_ = symmetric;
      op.row_start_.reserve(rows_.size() + 1);
      for (auto& row : rows_) {
        std::sort(row.begin(), row.end(),
                  [](const Entry& a, const Entry& b) { return a.column < b.column; });
        for (std::size_t k = 0; k < row.size();) {
          Entry merged = row[k++];
          while (k < row.size() && row[k].column == merged.column) merged.value += row[k++].value;
          if (merged.value != 0.0) op.entries_.push_back(merged);
        }
        op.row_start_.push_back(op.entries_.size());
        row.clear();
        row.shrink_to_fit();
      }
      return op;
    }

  private:
    std::vector<std::vector<Entry>> rows_;
  };

  SparseOperator() = default;

  static SparseOperator identity(std::size_t dimension) {
    Builder b(dimension);
    for (std::size_t i = 0; i < dimension; ++i) b.add(i, i, 1.0);
    return std::move(b).build(true);
  }

  static SparseOperator diagonal(std::span<const double> values) {
    Builder b(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) b.add(i, i, values[i]);
    return std::move(b).build(true);
  }

  std::size_t dimension() const { return dim_; }
  std::size_t nonzeros() const { return entries_.size(); }
  bool symmetric() const { return symmetric_; }

  std::span<const Entry> row(std::size_t r) const {
    return {entries_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
  }

  double diagonal_element(std::size_t r) const {
    for (const auto& e : row(r))
      if (e.column == static_cast<int>(r)) return e.value;
    return 0.0;
  }

  template <class Vec>
  void apply_into(const Vec& in, Vec& out) const {
    require(static_cast<std::size_t>(in.size()) == dim_, "operator/vector dimension mismatch");
    out.resize(static_cast<Eigen::Index>(dim_));
    for (std::size_t r = 0; r < dim_; ++r) {
      typename Vec::Scalar acc(0);
      for (const auto& e : row(r)) acc += e.value * in[e.column];
      out[static_cast<Eigen::Index>(r)] = acc;
    }
  }

  StateVector apply(const StateVector& v) const {
    StateVector out;
    apply_into(v, out);
    return out;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out;
    apply_into(v, out);
    return out;
  }

  Complex expectation(const StateVector& v) const { return v.dot(apply(v)); }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t r = 0; r < dim_; ++r)
      for (const auto& e : row(r)) m(r, e.column) += e.value;
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) t += diagonal_element(r);
    return t;
  }

  /// Max |A_ij - A_ji| over stored entries.
  double asymmetry() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < dim_; ++r)
      for (const auto& e : row(r)) {
        double mirror = 0.0;
        for (const auto& f : row(e.column))
          if (f.column == static_cast<int>(r)) mirror = f.value;
        worst = std::max(worst, std::abs(e.value - mirror));
      }
    return worst;
  }

  /// a + scale * b.
  friend SparseOperator add_scaled(const SparseOperator& a, const SparseOperator& b, double scale) {
    require(a.dim_ == b.dim_, "cannot add operators of different dimension");
    Builder builder(a.dim_);
    for (std::size_t r = 0; r < a.dim_; ++r) {
      for (const auto& e : a.row(r)) builder.add(r, e.column, e.value);
      for (const auto& e : b.row(r)) builder.add(r, e.column, scale * e.value);
    }
    return std::move(builder).build(a.symmetric_ && b.symmetric_);
  }

private:
  std::size_t dim_ = 0;
  bool symmetric_ = false;
  std::vector<std::size_t> row_start_{0};
  std::vector<Entry> entries_;
};

/// Exact sparse matrix-vector product.
inline StateVector apply(const SparseOperator& op, const StateVector& v) { return op.apply(v); }

}  // namespace ladder
