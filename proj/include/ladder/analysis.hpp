#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ladder/chain_basis.hpp"
#include "ladder/error.hpp"
#include "ladder/operators.hpp"
#include "ladder/propagation.hpp"
#include "ladder/spectral.hpp"

namespace ladder {

/// Time-averaged |a_Q(t) - a_ref(t)| over the grid span (trapezoid rule).
inline double delta_metric(const std::vector<double>& times, const std::vector<double>& a_quantum,
                           const std::vector<double>& a_reference) {
  require(times.size() >= 2 && a_quantum.size() == times.size() && a_reference.size() == times.size(),
          "delta metric needs two trajectories on a common grid");
  double integral = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k)
    integral += 0.5 * (times[k] - times[k - 1]) *
                (std::abs(a_quantum[k] - a_reference[k]) + std::abs(a_quantum[k - 1] - a_reference[k - 1]));
  return integral / (times.back() - times.front());
}

inline void require_common_grid(const ProbabilitySeries& a, const ProbabilitySeries& b) {
  require(a.times.size() == b.times.size(), "series have different grid lengths");
  for (std::size_t k = 0; k < a.times.size(); ++k)
    require(std::abs(a.times[k] - b.times[k]) < 1e-9, "series grids differ at index " + std::to_string(k));
  require(a.x_values.size() == b.x_values.size(), "series cover different X ranges");
}

inline double delta_metric(const ProbabilitySeries& quantum, const ProbabilitySeries& reference) {
  require_common_grid(quantum, reference);
  return delta_metric(quantum.times, quantum.mean, reference.mean);
}

struct DeltaReport {
  struct Entry {
    std::string label;
    std::string group;
    double delta;
  };
  std::vector<Entry> entries;

  double group_mean(const std::string& group) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& e : entries)
      if (e.group == group) {
        sum += e.delta;
        ++n;
      }
    require(n > 0, "no delta entries for group " + group);
    return sum / n;
  }
};

/// Fine and coarse views of one H0-eigenbasis block of the rung coupling.
struct BlockStructureReport {
  struct FineElement {
    double row_energy, col_energy, value;
  };
  struct CoarseBin {
    double row_center, col_center, mean_sq;
    std::size_t count;
  };
  std::size_t fine_rows = 0, fine_cols = 0;
  std::vector<FineElement> fine;
  double bin_width = 0.0;
  std::size_t row_bins = 0, col_bins = 0;
  std::vector<CoarseBin> coarse;  // non-empty bins, row-major
  double total_weight = 0.0;      // sum of |V_nm|^2 over the block
  std::size_t total_count = 0;
  std::string notice;  // set when the block is smaller than the requested fine size

  /// Element-weighted mean of |V|^2 over bins whose center distance satisfies `pred`.
  template <class Pred>
  double mean_sq_where(Pred pred) const {
    double w = 0.0;
    std::size_t n = 0;
    for (const auto& b : coarse)
      if (pred(std::abs(b.row_center - b.col_center))) {
        w += b.mean_sq * static_cast<double>(b.count);
        n += b.count;
      }
    return n ? w / static_cast<double>(n) : 0.0;
  }

  double fine_mean() const {
    double s = 0.0;
    for (const auto& e : fine) s += e.value;
    return fine.empty() ? 0.0 : s / static_cast<double>(fine.size());
  }

  double fine_standard_error() const {
    if (fine.size() < 2) return 0.0;
    const double m = fine_mean();
    double v = 0.0;
    for (const auto& e : fine) v += (e.value - m) * (e.value - m);
    return std::sqrt(v / static_cast<double>(fine.size() - 1) / static_cast<double>(fine.size()));
  }
};

namespace detail {

// Energies snapped so that numerically degenerate levels share one value.
inline std::vector<double> cluster_energies(const Eigen::VectorXd& e, double tol = 1e-9) {
  std::vector<int> order(static_cast<std::size_t>(e.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return e[a] < e[b]; });
  std::vector<double> out(order.size());
  double anchor = 0.0, last = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double v = e[order[k]];
    if (k == 0 || v - last > tol) anchor = v;
    out[static_cast<std::size_t>(order[k])] = anchor;
    last = v;
  }
  return out;
}

inline std::vector<int> nearest_to_zero(const Eigen::VectorXd& e, std::size_t count) {
  std::vector<int> idx(static_cast<std::size_t>(e.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(e[a]) < std::abs(e[b]); });
  idx.resize(std::min(count, idx.size()));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return e[a] < e[b]; });
  return idx;
}

}  // namespace detail

inline BlockStructureReport block_structure(const DiracBlock& block, std::size_t fine_size = 50,
                                            double bin_width = 0.12) {
  require(bin_width > 0.0, "bin width must be positive");
  BlockStructureReport rep;
  rep.bin_width = bin_width;
  const auto rows = detail::nearest_to_zero(block.row_energies, fine_size);
  const auto cols = detail::nearest_to_zero(block.col_energies, fine_size);
  rep.fine_rows = rows.size();
  rep.fine_cols = cols.size();
  if (rows.size() < fine_size || cols.size() < fine_size)
    rep.notice = "fine block shrunk to " + std::to_string(rows.size()) + " x " + std::to_string(cols.size()) +
                 " (block is smaller than " + std::to_string(fine_size) + ")";
  for (int r : rows)
    for (int c : cols) rep.fine.push_back({block.row_energies[r], block.col_energies[c], block.values(r, c)});

  const auto re = detail::cluster_energies(block.row_energies);
  const auto ce = detail::cluster_energies(block.col_energies);
  const double rmin = *std::min_element(re.begin(), re.end()), rmax = *std::max_element(re.begin(), re.end());
  const double cmin = *std::min_element(ce.begin(), ce.end()), cmax = *std::max_element(ce.begin(), ce.end());
  rep.row_bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((rmax - rmin) / bin_width)));
  rep.col_bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((cmax - cmin) / bin_width)));
  auto bin = [&](double e, double lo, std::size_t nbins) {
    const auto b = static_cast<std::size_t>(std::floor((e - lo) / bin_width));
    return std::min(b, nbins - 1);
  };
  std::vector<double> sums(rep.row_bins * rep.col_bins, 0.0);
  std::vector<std::size_t> counts(rep.row_bins * rep.col_bins, 0);
  for (Eigen::Index c = 0; c < block.values.cols(); ++c) {
    const std::size_t cb = bin(ce[static_cast<std::size_t>(c)], cmin, rep.col_bins);
    for (Eigen::Index r = 0; r < block.values.rows(); ++r) {
      const std::size_t rb = bin(re[static_cast<std::size_t>(r)], rmin, rep.row_bins);
      const double v2 = block.values(r, c) * block.values(r, c);
      sums[rb * rep.col_bins + cb] += v2;
      ++counts[rb * rep.col_bins + cb];
      rep.total_weight += v2;
      ++rep.total_count;
    }
  }
  for (std::size_t rb = 0; rb < rep.row_bins; ++rb)
    for (std::size_t cb = 0; cb < rep.col_bins; ++cb) {
      const std::size_t k = rb * rep.col_bins + cb;
      if (counts[k] == 0) continue;
      rep.coarse.push_back({rmin + (static_cast<double>(rb) + 0.5) * bin_width,
                            cmin + (static_cast<double>(cb) + 0.5) * bin_width,
                            sums[k] / static_cast<double>(counts[k]), counts[k]});
    }
  return rep;
}

/// Diagonal elements of x and x^2 in the eigenstates of one energy window.
struct EthReport {
  struct Row {
    double energy, x_diag, x2_diag;
    int parity;
  };
  std::vector<Row> rows;
  double mean_x2 = 0.0, spread_x2 = 0.0, max_abs_x = 0.0;
};

inline EthReport eth_diagonals(const SpectralDecomposition& spec, const SectorBasis& basis, const EnergyWindow& window) {
  EthReport rep;
  std::vector<double> x(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) x[i] = basis.magnetization_difference(basis.state(i));
  double s1 = 0.0, s2 = 0.0;
  for (int n : window.indices) {
    const Eigen::VectorXd v = spec.eigenvector(static_cast<std::size_t>(n));
    double xd = 0.0, x2d = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double p = v[i] * v[i];
      xd += p * x[static_cast<std::size_t>(i)];
      x2d += p * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    rep.rows.push_back({spec.eigenvalue(static_cast<std::size_t>(n)), xd, x2d, spec.parity(static_cast<std::size_t>(n))});
    rep.max_abs_x = std::max(rep.max_abs_x, std::abs(xd));
    s1 += x2d;
    s2 += x2d * x2d;
  }
  if (!rep.rows.empty()) {
    const double n = static_cast<double>(rep.rows.size());
    rep.mean_x2 = s1 / n;
    rep.spread_x2 = std::sqrt(std::max(0.0, s2 / n - rep.mean_x2 * rep.mean_x2));
  }
  return rep;
}

/// Deviations between a quantum series and a master-equation series on one grid.
struct CompareReport {
  std::vector<double> times;
  std::vector<double> max_dp, dmean, dvariance;  // per time
  double sup_dp = 0.0, sup_dmean = 0.0, sup_dvariance = 0.0;
  double delta = 0.0;
};

inline CompareReport compare_report(const ProbabilitySeries& quantum, const ProbabilitySeries& stochastic) {
  require_common_grid(quantum, stochastic);
  CompareReport rep;
  rep.times = quantum.times;
  for (std::size_t k = 0; k < quantum.times.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double dp = (quantum.probabilities.row(kk) - stochastic.probabilities.row(kk)).cwiseAbs().maxCoeff();
    const double dm = std::abs(quantum.mean[k] - stochastic.mean[k]);
    const double dv = std::abs(quantum.variance[k] - stochastic.variance[k]);
    rep.max_dp.push_back(dp);
    rep.dmean.push_back(dm);
    rep.dvariance.push_back(dv);
    rep.sup_dp = std::max(rep.sup_dp, dp);
    rep.sup_dmean = std::max(rep.sup_dmean, dm);
    rep.sup_dvariance = std::max(rep.sup_dvariance, dv);
  }
  if (quantum.times.size() >= 2) rep.delta = delta_metric(quantum, stochastic);
  return rep;
}

}  // namespace ladder
