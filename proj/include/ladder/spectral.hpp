#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ladder/error.hpp"
#include "ladder/lapack.hpp"
#include "ladder/sparse_operator.hpp"

namespace ladder {

/// Full eigensystem of a real symmetric operator. When a commuting involution
/// (the beam swap) is supplied, the operator is block-diagonalized into its even
/// and odd sectors first, so every eigenvector has a definite parity.
class SpectralDecomposition {
public:
  struct Block {
    int parity = 0;  // +1 / -1, or 0 when no symmetry was used
    // Column k of the block basis: coef_a[k] at first[k] plus coef_b[k] at second[k] (if >= 0).
    std::vector<int> first, second;
    std::vector<double> coef_a, coef_b;
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
  };

  SpectralDecomposition() = default;
  SpectralDecomposition(std::size_t dimension, std::vector<Block> blocks)
      : dim_(dimension), blocks_(std::move(blocks)) {
    std::vector<std::pair<int, int>> loc;
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      for (Eigen::Index c = 0; c < blocks_[b].values.size(); ++c)
        loc.emplace_back(static_cast<int>(b), static_cast<int>(c));
    std::stable_sort(loc.begin(), loc.end(), [&](auto l, auto r) {
      return blocks_[l.first].values[l.second] < blocks_[r.first].values[r.second];
    });
    location_ = std::move(loc);
    values_.resize(static_cast<Eigen::Index>(location_.size()));
    for (std::size_t n = 0; n < location_.size(); ++n)
      values_[static_cast<Eigen::Index>(n)] = blocks_[location_[n].first].values[location_[n].second];
  }

  std::size_t dimension() const { return dim_; }
  const Eigen::VectorXd& eigenvalues() const { return values_; }
  double eigenvalue(std::size_t n) const { return values_[static_cast<Eigen::Index>(n)]; }
  int parity(std::size_t n) const { return blocks_[location_[n].first].parity; }
  bool parity_resolved() const { return blocks_.size() > 1 || (blocks_.size() == 1 && blocks_[0].parity != 0); }

  Eigen::VectorXd eigenvector(std::size_t n) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    scatter(n, v);
    return v;
  }

  /// Columns are the eigenvectors with the requested (global, ascending) indices.
  Eigen::MatrixXd eigenvectors(std::span<const int> indices) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_),
                                                static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
      scatter(static_cast<std::size_t>(indices[k]), col);
      out.col(static_cast<Eigen::Index>(k)) = col;
    }
    return out;
  }

  Eigen::MatrixXd eigenvectors() const {
    std::vector<int> all(dim_);
    std::iota(all.begin(), all.end(), 0);
    return eigenvectors(all);
  }

  /// Coefficients <n|v> for every eigenvector n (ascending order).
  StateVector project(const StateVector& v) const {
    StateVector c(static_cast<Eigen::Index>(dim_));
    for (std::size_t n = 0; n < location_.size(); ++n) {
      const auto [b, col] = location_[n];
      const Block& blk = blocks_[static_cast<std::size_t>(b)];
      Complex acc = 0.0;
      for (std::size_t k = 0; k < blk.first.size(); ++k) {
        Complex comp = blk.coef_a[k] * v[blk.first[k]];
        if (blk.second[k] >= 0) comp += blk.coef_b[k] * v[blk.second[k]];
        acc += blk.vectors(static_cast<Eigen::Index>(k), col) * comp;
      }
      c[static_cast<Eigen::Index>(n)] = acc;
    }
    return c;
  }

  /// Sum_n c_n |n>.
  StateVector expand(const StateVector& coefficients) const {
    StateVector v = StateVector::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t n = 0; n < location_.size(); ++n) {
      const auto [b, col] = location_[n];
      const Block& blk = blocks_[static_cast<std::size_t>(b)];
      const Complex c = coefficients[static_cast<Eigen::Index>(n)];
      for (std::size_t k = 0; k < blk.first.size(); ++k) {
        const Complex amp = blk.vectors(static_cast<Eigen::Index>(k), col) * c;
        v[blk.first[k]] += blk.coef_a[k] * amp;
        if (blk.second[k] >= 0) v[blk.second[k]] += blk.coef_b[k] * amp;
      }
    }
    return v;
  }

private:
  void scatter(std::size_t n, Eigen::VectorXd& v) const {
    const auto [b, col] = location_[n];
    const Block& blk = blocks_[static_cast<std::size_t>(b)];
    for (std::size_t k = 0; k < blk.first.size(); ++k) {
      const double amp = blk.vectors(static_cast<Eigen::Index>(k), col);
      v[blk.first[k]] += blk.coef_a[k] * amp;
      if (blk.second[k] >= 0) v[blk.second[k]] += blk.coef_b[k] * amp;
    }
  }

  std::size_t dim_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::pair<int, int>> location_;
  Eigen::VectorXd values_;
};

struct DiagonalizeOptions {
  std::size_t dense_ceiling = 20000;
  /// Involutive permutation of the basis commuting with the operator (e.g. beam swap).
  std::optional<std::vector<int>> symmetry;
};

namespace detail {

inline bool commutes_with_permutation(const SparseOperator& op, const std::vector<int>& perm) {
  if (perm.size() != op.dimension()) return false;
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[static_cast<std::size_t>(perm[i])] != static_cast<int>(i)) return false;
  // <perm(r)|A|perm(c)> must equal <r|A|c> for every stored entry.
  for (std::size_t r = 0; r < op.dimension(); ++r) {
    const auto pr = static_cast<std::size_t>(perm[r]);
    for (const auto& e : op.row(r)) {
      double mirrored = 0.0;
      for (const auto& f : op.row(pr))
        if (f.column == perm[static_cast<std::size_t>(e.column)]) mirrored = f.value;
      if (std::abs(mirrored - e.value) > 1e-12 * (1.0 + std::abs(e.value))) return false;
    }
  }
  return true;
}

inline SpectralDecomposition::Block make_block(const SparseOperator& op, int parity,
                                               std::vector<int> first, std::vector<int> second,
                                               std::vector<double> coef_a,
                                               std::vector<double> coef_b) {
  SpectralDecomposition::Block blk;
  blk.parity = parity;
  blk.first = std::move(first);
  blk.second = std::move(second);
  blk.coef_a = std::move(coef_a);
  blk.coef_b = std::move(coef_b);
  const auto m = static_cast<Eigen::Index>(blk.first.size());
  Eigen::MatrixXd dense(m, m);
  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.dimension()));
  for (Eigen::Index k = 0; k < m; ++k) {
    // op is symmetric, so its column equals its row.
    auto spread = [&](int idx, double coef) {
      for (const auto& e : op.row(static_cast<std::size_t>(idx))) scratch[e.column] += coef * e.value;
    };
    spread(blk.first[static_cast<std::size_t>(k)], blk.coef_a[static_cast<std::size_t>(k)]);
    if (blk.second[static_cast<std::size_t>(k)] >= 0)
      spread(blk.second[static_cast<std::size_t>(k)], blk.coef_b[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      double val = blk.coef_a[ju] * scratch[blk.first[ju]];
      if (blk.second[ju] >= 0) val += blk.coef_b[ju] * scratch[blk.second[ju]];
      dense(j, k) = val;
    }
    auto clear = [&](int idx) {
      for (const auto& e : op.row(static_cast<std::size_t>(idx))) scratch[e.column] = 0.0;
    };
    clear(blk.first[static_cast<std::size_t>(k)]);
    if (blk.second[static_cast<std::size_t>(k)] >= 0) clear(blk.second[static_cast<std::size_t>(k)]);
  }
  dense = 0.5 * (dense + dense.transpose()).eval();
  blk.values = lapack::symmetric_eigen(dense);
  blk.vectors = std::move(dense);
  return blk;
}

}  // namespace detail

inline SpectralDecomposition diagonalize_dense(const SparseOperator& op,
                                               const DiagonalizeOptions& options = {}) {
  const std::size_t d = op.dimension();
  if (d > options.dense_ceiling)
    throw ValidationError("dense diagonalization refused: dimension " + std::to_string(d) +
                          " exceeds the dense ceiling " + std::to_string(options.dense_ceiling) +
                          "; raise --dense-ceiling or use the window-free pipeline (tcl, "
                          "pure-state evolution)");
  require(op.symmetric(), "diagonalize_dense expects a symmetric operator");
  std::vector<SpectralDecomposition::Block> blocks;
  const double r = std::sqrt(0.5);
  if (options.symmetry && detail::commutes_with_permutation(op, *options.symmetry)) {
    const auto& perm = *options.symmetry;
    std::vector<int> ef, es, of, os;
    std::vector<double> ea, eb, oa, ob;
    for (std::size_t i = 0; i < d; ++i) {
      const int j = perm[i];
      if (j == static_cast<int>(i)) {
        ef.push_back(static_cast<int>(i)); es.push_back(-1); ea.push_back(1.0); eb.push_back(0.0);
      } else if (static_cast<int>(i) < j) {
        ef.push_back(static_cast<int>(i)); es.push_back(j); ea.push_back(r); eb.push_back(r);
        of.push_back(static_cast<int>(i)); os.push_back(j); oa.push_back(r); ob.push_back(-r);
      }
    }
    blocks.push_back(detail::make_block(op, +1, std::move(ef), std::move(es), std::move(ea), std::move(eb)));
    if (!of.empty())
      blocks.push_back(detail::make_block(op, -1, std::move(of), std::move(os), std::move(oa), std::move(ob)));
  } else {
    std::vector<int> f(d), s(d, -1);
    std::iota(f.begin(), f.end(), 0);
    blocks.push_back(detail::make_block(op, 0, std::move(f), std::move(s), std::vector<double>(d, 1.0),
                                        std::vector<double>(d, 0.0)));
  }
  return SpectralDecomposition(d, std::move(blocks));
}

/// Eigen-indices with eigenvalue in the closed interval [center - width/2, center + width/2].
struct EnergyWindow {
  double center = 0.0;
  double width = 0.0;
  std::vector<int> indices;

  std::size_t rank() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

inline EnergyWindow window_projector(const SpectralDecomposition& spec, double center, double width) {
  require(width > 0.0, "energy window width must be positive");
  EnergyWindow w{center, width, {}};
  const double lo = center - 0.5 * width;
  const double hi = center + 0.5 * width;
  for (std::size_t n = 0; n < spec.dimension(); ++n) {
    const double e = spec.eigenvalue(n);
    if (e >= lo && e <= hi) w.indices.push_back(static_cast<int>(n));
  }
  return w;
}

}  // namespace ladder
