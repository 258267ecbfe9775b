#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ladder/chain_basis.hpp"
#include "ladder/error.hpp"
#include "ladder/propagation.hpp"
#include "ladder/stochastic.hpp"

namespace ladder {

/// C_{Y,X}(t) = (kappa^2/d_X) Tr{[V(t), P_Y][V, P_X]} sampled on a time grid,
/// with V(t) evolving under H0 alone.
struct CorrelationFunction {
  double x_from = 0.0, x_to = 0.0;
  double kappa = 0.0;
  std::vector<double> times;
  std::vector<double> values;
};

/// Spectral evaluation through the chain factorization of H0:
/// C(t) = (2 kappa^2 / d_X) sum_{n in Y, m in X} |V_nm|^2 cos((e_n - e_m) t).
/// With V = a sum_i A_i (x) B_i the double sum collapses to
/// a^2 sum_ij F_ij(t) G_ij(t), where F and G are single-chain sums.
inline CorrelationFunction correlation_function(const ChainFactorizedBasis& cfb, double x_from, double x_to,
                                                const std::vector<double>& times, double kappa) {
  CorrelationFunction c{x_from, x_to, kappa, times, std::vector<double>(times.size(), 0.0)};
  if (std::abs(std::abs(x_to - x_from) - 1.0) > 1e-9 || !cfb.admissible(x_from) || !cfb.admissible(x_to))
    return c;
  const FlipFactors f = flip_factors(cfb, x_from, x_to);
  const std::size_t sites = f.left.size();
  const double dx = static_cast<double>(f.cols());

  // Elementwise products A_i o A_j for i <= j; off-diagonal pairs carry weight 2.
  std::vector<Eigen::ArrayXXd> lp, rp;
  std::vector<double> weight;
  for (std::size_t i = 0; i < sites; ++i)
    for (std::size_t j = i; j < sites; ++j) {
      lp.push_back(f.left[i].array() * f.left[j].array());
      rp.push_back(f.right[i].array() * f.right[j].array());
      weight.push_back(i == j ? 1.0 : 2.0);
    }

  auto gaps = [](const Eigen::VectorXd& to, const Eigen::VectorXd& from) {
    Eigen::ArrayXXd g(to.size(), from.size());
    for (Eigen::Index a = 0; a < to.size(); ++a)
      for (Eigen::Index b = 0; b < from.size(); ++b) g(a, b) = to[a] - from[b];
    return g;
  };
  const Eigen::ArrayXXd gl = gaps(f.left_to, f.left_from);
  const Eigen::ArrayXXd gr = gaps(f.right_to, f.right_from);

  const double prefactor = 2.0 * kappa * kappa / dx * f.amplitude * f.amplitude;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    const Eigen::ArrayXXd cl = (gl * t).cos(), sl = (gl * t).sin();
    const Eigen::ArrayXXd cr = (gr * t).cos(), sr = (gr * t).sin();
    double sum = 0.0;
    for (std::size_t p = 0; p < lp.size(); ++p) {
      const double left_re = (lp[p] * cl).sum(), left_im = (lp[p] * sl).sum();
      const double right_re = (rp[p] * cr).sum(), right_im = (rp[p] * sr).sum();
      sum += weight[p] * (left_re * right_re - left_im * right_im);
    }
    c.values[k] = prefactor * sum;
  }
  return c;
}

/// Same quantity summed directly over the elements of an H0-eigenbasis block.
inline CorrelationFunction correlation_from_block(const DiracBlock& block, const std::vector<double>& times,
                                                  double kappa) {
  CorrelationFunction c{block.x_from, block.x_to, kappa, times, std::vector<double>(times.size(), 0.0)};
  const double dx = static_cast<double>(block.values.cols());
  for (std::size_t k = 0; k < times.size(); ++k) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < block.values.cols(); ++m)
      for (Eigen::Index n = 0; n < block.values.rows(); ++n) {
        const double v = block.values(n, m);
        sum += v * v * std::cos((block.row_energies[n] - block.col_energies[m]) * times[k]);
      }
    c.values[k] = 2.0 * kappa * kappa / dx * sum;
  }
  return c;
}

/// Running second-order rate R(t) = int_0^t C(t') dt' with its plateau estimate.
struct TclRates {
  double x_from = 0.0, x_to = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  double quadrature_error = 0.0;  // trapezoid bound T dt^2 max|C''| / 12
  double plateau_start = 0.0, plateau_end = 0.0;
  double plateau = 0.0;  // mean of R(t) over the plateau window

  /// Linear interpolation on the grid; the plateau value beyond the last sample.
  double at(double t) const {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return plateau;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    return (1.0 - w) * values[k - 1] + w * values[k];
  }
};

inline TclRates tcl2_rates(const CorrelationFunction& corr, double plateau_start = 3.0, double plateau_end = 10.0) {
  const auto& t = corr.times;
  require(t.size() >= 2 && std::abs(t.front()) < 1e-12, "correlation grid must start at t = 0");
  require(is_uniform(t), "correlation grid must be uniform");
  const double dt = t[1] - t[0];
  require(dt <= 0.05 + 1e-12, "correlation grid too coarse for the rate integral: dt = " + std::to_string(dt) +
                                  ", required dt <= 0.05");
  require(plateau_start < plateau_end && plateau_end <= t.back() + 1e-9,
          "plateau window must lie inside the correlation grid");
  TclRates r;
  r.x_from = corr.x_from;
  r.x_to = corr.x_to;
  r.times = t;
  r.values.assign(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    r.values[k] = r.values[k - 1] + 0.5 * dt * (corr.values[k] + corr.values[k - 1]);
  double curvature = 0.0;
  for (std::size_t k = 1; k + 1 < t.size(); ++k)
    curvature = std::max(curvature, std::abs(corr.values[k + 1] - 2.0 * corr.values[k] + corr.values[k - 1]) / (dt * dt));
  r.quadrature_error = t.back() * dt * dt * curvature / 12.0;
  r.plateau_start = plateau_start;
  r.plateau_end = plateau_end;
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= plateau_start - 1e-9 && t[k] <= plateau_end + 1e-9) {
      sum += r.values[k];
      ++count;
    }
  r.plateau = count > 0 ? sum / count : 0.0;
  return r;
}

/// Rates for every neighbouring pair X -> X +- 1 of the sector.
struct TclRateSet {
  std::vector<CorrelationFunction> correlations;
  std::vector<TclRates> rates;

  const TclRates* find(double x_from, double x_to) const {
    for (const auto& r : rates)
      if (std::abs(r.x_from - x_from) < 1e-9 && std::abs(r.x_to - x_to) < 1e-9) return &r;
    return nullptr;
  }
  const CorrelationFunction* find_correlation(double x_from, double x_to) const {
    for (const auto& c : correlations)
      if (std::abs(c.x_from - x_from) < 1e-9 && std::abs(c.x_to - x_to) < 1e-9) return &c;
    return nullptr;
  }
};

inline TclRateSet compute_tcl_rates(const ChainFactorizedBasis& cfb, const std::vector<double>& x_values,
                                    double kappa, const std::vector<double>& times, double plateau_start,
                                    double plateau_end) {
  TclRateSet set;
  for (double x : x_values)
    for (int dir : {+1, -1}) {
      if (!cfb.admissible(x + dir)) continue;
      set.correlations.push_back(correlation_function(cfb, x, x + dir, times, kappa));
      set.rates.push_back(tcl2_rates(set.correlations.back(), plateau_start, plateau_end));
    }
  return set;
}

/// C_{X+-1,X}(0) gamma / R_{X -> X+-1} per admissible pair.
struct InitialValueReport {
  struct Entry {
    double x_from, x_to, c0, naive_rate, ratio;
  };
  std::vector<Entry> entries;
  double common = 0.0;
  double relative_spread = 0.0;
  bool pass = false;
  std::string explanation;
};

inline InitialValueReport check_initial_value(const std::vector<CorrelationFunction>& corrs, const RateTable& rates,
                                              double flip_amplitude, double tolerance = 1e-8) {
  InitialValueReport rep;
  for (const auto& c : corrs) {
    require(std::abs(c.kappa - rates.kappa) < 1e-12, "correlation and rate table use different kappa");
    const std::size_t k = rates.slot(c.x_from);
    const double r = c.x_to > c.x_from ? rates.up[k] : rates.down[k];
    if (r == 0.0) continue;
    rep.entries.push_back({c.x_from, c.x_to, c.values.front(), r, c.values.front() * rates.gamma / r});
  }
  require(!rep.entries.empty(), "no pair with a non-zero naive rate");
  double lo = rep.entries.front().ratio, hi = lo, sum = 0.0;
  for (const auto& e : rep.entries) {
    lo = std::min(lo, e.ratio);
    hi = std::max(hi, e.ratio);
    sum += e.ratio;
  }
  rep.common = sum / static_cast<double>(rep.entries.size());
  rep.relative_spread = (hi - lo) / std::abs(rep.common);
  rep.pass = rep.relative_spread <= tolerance;
  std::ostringstream os;
  os.precision(12);
  os << "C(0) gamma / R = " << rep.common << " for every pair (spread " << rep.relative_spread
     << "); this equals 2 a^2 with rung flip amplitude a = " << flip_amplitude
     << ": the factor 2 comes from the two operator orderings in Tr{[V,P_Y][V,P_X]} = 2 Tr{P_X V P_Y V}, "
     << "a^2 from the spin normalization. Relative to the value 1/4 it differs by a factor "
     << rep.common / 0.25 << ".";
  rep.explanation = os.str();
  return rep;
}

/// Time scale gamma from the TCL2 plateaus, restricted to regular pairs.
struct GammaFit {
  struct Pair {
    double x_from, x_to, plateau_ratio;
  };
  double gamma = 0.0;
  std::vector<Pair> pairs;
  double pair_dispersion = 0.0;  // max_p |ratio_p / gamma - 1|
  double sample_dispersion = 0.0;  // std/mean over all (pair, t) samples in the window
};

inline GammaFit fit_gamma(const TclRateSet& set, int sites, double kappa, double max_abs_x = 2.0,
                          double max_sample_dispersion = 0.2) {
  GammaFit fit;
  std::vector<double> samples;
  for (const auto& r : set.rates) {
    if (std::abs(r.x_from) > max_abs_x + 1e-9 || std::abs(r.x_to) > max_abs_x + 1e-9) continue;
    const int dir = r.x_to > r.x_from ? +1 : -1;
    const double shape = naive_rate_shape(sites, kappa, r.x_from, dir);
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < r.times.size(); ++k)
      if (r.times[k] >= r.plateau_start - 1e-9 && r.times[k] <= r.plateau_end + 1e-9) {
        samples.push_back(r.values[k] / shape);
        sum += r.values[k] / shape;
        ++count;
      }
    require(count > 0, "plateau window holds no samples");
    fit.pairs.push_back({r.x_from, r.x_to, sum / count});
  }
  require(!fit.pairs.empty(), "no TCL pairs inside |X| <= " + std::to_string(max_abs_x));
  fit.gamma = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - fit.gamma) * (s - fit.gamma);
  fit.sample_dispersion = std::sqrt(var / static_cast<double>(samples.size())) / std::abs(fit.gamma);
  for (const auto& p : fit.pairs) fit.pair_dispersion = std::max(fit.pair_dispersion, std::abs(p.plateau_ratio / fit.gamma - 1.0));
  if (fit.sample_dispersion > max_sample_dispersion) {
    std::ostringstream os;
    os << "no TCL2 plateau: dispersion " << fit.sample_dispersion << " exceeds " << max_sample_dispersion
       << " (per-pair ratios:";
    for (const auto& p : fit.pairs) os << " " << p.x_from << "->" << p.x_to << "=" << p.plateau_ratio;
    os << ")";
    throw NumericalError(os.str(), fit.sample_dispersion);
  }
  return fit;
}

enum class TclRateMode { time_dependent, plateau };

/// Generator assembled from TCL2 rates at time t.
inline Eigen::MatrixXd tcl_generator(const TclRateSet& set, const std::vector<double>& x_values, double t,
                                     TclRateMode mode) {
  const auto n = static_cast<Eigen::Index>(x_values.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  auto slot = [&](double x) -> Eigen::Index {
    for (std::size_t k = 0; k < x_values.size(); ++k)
      if (std::abs(x_values[k] - x) < 1e-9) return static_cast<Eigen::Index>(k);
    return -1;
  };
  for (const auto& r : set.rates) {
    const Eigen::Index from = slot(r.x_from), to = slot(r.x_to);
    if (from < 0 || to < 0) continue;
    const double rate = mode == TclRateMode::plateau ? r.plateau : r.at(t);
    w(to, from) += rate;
    w(from, from) -= rate;
  }
  return w;
}

/// Classical RK4 on dP/dt = W(t) P with step-doubling control.
inline DistributionSeries evolve_tcl_master(const TclRateSet& set, const std::vector<double>& x_values,
                                            const Eigen::VectorXd& p0, const std::vector<double>& times,
                                            TclRateMode mode = TclRateMode::time_dependent,
                                            double max_step = 0.01, double tol = 1e-10) {
  require(p0.size() == static_cast<Eigen::Index>(x_values.size()), "initial distribution has the wrong length");
  auto rhs = [&](double t, const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return tcl_generator(set, x_values, t, mode) * p;
  };
  auto rk4 = [&](double t, const Eigen::VectorXd& p, double h) -> Eigen::VectorXd {
    const Eigen::VectorXd k1 = rhs(t, p);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, p + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, p + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(t + h, p + h * k3);
    return p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  DistributionSeries s;
  s.times = times;
  s.x_values = x_values;
  s.probabilities.resize(static_cast<Eigen::Index>(times.size()), p0.size());
  Eigen::VectorXd p = p0;
  double t = times.empty() ? 0.0 : times.front();
  for (std::size_t k = 0; k < times.size(); ++k) {
    while (t < times[k] - 1e-13) {
      double h = std::min(max_step, times[k] - t);
      for (int halvings = 0;; ++halvings) {
        const Eigen::VectorXd full = rk4(t, p, h);
        const Eigen::VectorXd half = rk4(t + 0.5 * h, rk4(t, p, 0.5 * h), 0.5 * h);
        if ((full - half).cwiseAbs().maxCoeff() <= tol) {
          p = half;
          t += h;
          break;
        }
        if (halvings > 30) throw NumericalError("TCL master equation step rejected repeatedly at t = " + std::to_string(t));
        h *= 0.5;
      }
    }
    s.probabilities.row(static_cast<Eigen::Index>(k)) = p.transpose();
  }
  s.compute_moments();
  return s;
}

/// Constant-rate table from the TCL2 plateaus (gamma-free comparison).
inline RateTable plateau_rate_table(const TclRateSet& set, int sites, double kappa) {
  RateTable t{sites, 1.0, kappa, {}, {}, {}};
  const int xmax = sites / 4;
  for (int x = -xmax; x <= xmax; ++x) {
    t.x_values.push_back(x);
    const auto* up = set.find(x, x + 1);
    const auto* down = set.find(x, x - 1);
    t.up.push_back(up ? up->plateau : 0.0);
    t.down.push_back(down ? down->plateau : 0.0);
  }
  return t;
}

}  // namespace ladder
