#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <vector>

#include "ladder/error.hpp"
#include "ladder/propagation.hpp"

namespace ladder {

/// Birth-death rates between neighbouring magnetization differences X.
struct RateTable {
  int sites = 0;
  double gamma = 0.0;
  double kappa = 0.0;
  std::vector<double> x_values;  // -N/4 .. N/4
  std::vector<double> up;        // R_{X -> X+1}
  std::vector<double> down;      // R_{X -> X-1}

  std::size_t size() const { return x_values.size(); }
  std::size_t slot(double x) const {
    for (std::size_t k = 0; k < x_values.size(); ++k)
      if (std::abs(x_values[k] - x) < 1e-9) return k;
    throw ValidationError("X = " + std::to_string(x) + " outside the rate table");
  }
};

/// Gamma-free part of the naive rate: (kappa^2 N / 2) (1/2 -+ 2X/N)^2 for direction +-1.
inline double naive_rate_shape(int sites, double kappa, double x, int direction) {
  const double n = sites;
  const double f = 0.5 - direction * 2.0 * x / n;
  return kappa * kappa * n / 2.0 * f * f;
}

inline RateTable naive_rates(int sites, double gamma, double kappa) {
  require(sites > 0 && sites % 4 == 0, "naive rates need N divisible by 4");
  require(gamma > 0.0 && kappa > 0.0, "naive rates need gamma > 0 and kappa > 0");
  RateTable t{sites, gamma, kappa, {}, {}, {}};
  const int xmax = sites / 4;
  for (int x = -xmax; x <= xmax; ++x) {
    t.x_values.push_back(x);
    t.up.push_back(x == xmax ? 0.0 : gamma * naive_rate_shape(sites, kappa, x, +1));
    t.down.push_back(x == -xmax ? 0.0 : gamma * naive_rate_shape(sites, kappa, x, -1));
  }
  return t;
}

/// Tridiagonal generator W with dP/dt = W P; columns sum to zero.
struct MasterGenerator {
  std::vector<double> x_values;
  Eigen::MatrixXd matrix;
};

inline MasterGenerator master_generator(const RateTable& rates) {
  const auto n = static_cast<Eigen::Index>(rates.size());
  MasterGenerator g{rates.x_values, Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const double up = rates.up[static_cast<std::size_t>(k)];
    const double down = rates.down[static_cast<std::size_t>(k)];
    require(up >= 0.0 && down >= 0.0, "rates must be non-negative");
    if (k + 1 < n) g.matrix(k + 1, k) = up;
    if (k > 0) g.matrix(k - 1, k) = down;
    g.matrix(k, k) = -((k + 1 < n ? up : 0.0) + (k > 0 ? down : 0.0));
  }
  return g;
}

/// Normalized null vector of the generator.
inline Eigen::VectorXd stationary_distribution(const MasterGenerator& gen) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gen.matrix);
  Eigen::MatrixXd kernel = lu.kernel();
  require(kernel.cols() >= 1, "generator has no stationary state");
  Eigen::VectorXd p = kernel.col(0);
  p /= p.sum();
  return p;
}

using DistributionSeries = ProbabilitySeries;

/// P(t) = exp(W t) P(0) on the grid, evaluated by scaling-and-squaring Pade.
inline DistributionSeries evolve_master(const MasterGenerator& gen, const Eigen::VectorXd& p0,
                                        const std::vector<double>& times) {
  require(p0.size() == gen.matrix.rows(), "initial distribution has the wrong length");
  require((p0.array() >= -1e-14).all() && std::abs(p0.sum() - 1.0) < 1e-9,
          "initial distribution must be a probability vector");
  DistributionSeries s;
  s.times = times;
  s.x_values = gen.x_values;
  s.probabilities.resize(static_cast<Eigen::Index>(times.size()), p0.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::MatrixXd prop = (gen.matrix * times[k]).exp();
    s.probabilities.row(static_cast<Eigen::Index>(k)) = (prop * p0).transpose();
  }
  s.compute_moments();
  return s;
}

/// Point mass at X.
inline Eigen::VectorXd point_mass(const std::vector<double>& x_values, double x) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x_values.size()));
  for (std::size_t k = 0; k < x_values.size(); ++k)
    if (std::abs(x_values[k] - x) < 1e-9) p[static_cast<Eigen::Index>(k)] = 1.0;
  require(std::abs(p.sum() - 1.0) < 1e-12, "X not on the lattice");
  return p;
}

/// Relaxation rate of the first moment, R1 = 2 gamma kappa^2.
inline double mean_relaxation_rate(double gamma, double kappa) { return 2.0 * gamma * kappa * kappa; }

/// Relaxation rate of the second moment, R2 = 4 (1 - 1/N) gamma kappa^2.
inline double second_moment_relaxation_rate(int sites, double gamma, double kappa) {
  return 4.0 * (1.0 - 1.0 / sites) * gamma * kappa * kappa;
}

/// Fixed point of the second moment, N / (16 (1 - 1/N)).
inline double stationary_second_moment(int sites) { return sites / (16.0 * (1.0 - 1.0 / sites)); }

/// Drift potential and diffusion of the truncated Kramers-Moyal expansion in z = X/N.
struct FpeCoefficients {
  double gamma = 0.0, kappa = 0.0;
  int sites = 0;

  double potential(double z) const { return gamma * kappa * kappa * z * z; }
  double potential_slope(double z) const { return 2.0 * gamma * kappa * kappa * z; }
  double diffusion(double z) const { return gamma * kappa * kappa * (0.25 + 4.0 * z * z) / sites; }
};

inline FpeCoefficients fpe_coefficients(double gamma, double kappa, int sites) {
  require(gamma > 0.0 && kappa > 0.0 && sites > 0, "Fokker-Planck coefficients need positive parameters");
  return {gamma, kappa, sites};
}

/// (mean, variance) per time.
inline std::pair<std::vector<double>, std::vector<double>> moments(const DistributionSeries& series) {
  DistributionSeries copy = series;
  copy.compute_moments();
  return {copy.mean, copy.variance};
}

/// Least-squares slope of log|y| against t, returned as a decay rate (positive for decay).
inline double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y) {
  require(t.size() == y.size() && t.size() >= 2, "decay fit needs matching series of length >= 2");
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    require(y[k] != 0.0, "decay fit hit an exact zero");
    const double ly = std::log(std::abs(y[k]));
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
  }
  return -(n * sty - st * sy) / (n * stt - st * st);
}

}  // namespace ladder
