#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ladder/basis.hpp"
#include "ladder/error.hpp"
#include "ladder/operators.hpp"
#include "ladder/propagation.hpp"
#include "ladder/spectral.hpp"

namespace ladder {

/// Reproducible random numbers: std::mt19937_64 for the raw stream, with uniform and
/// normal deviates derived explicitly (Box-Muller) so that results do not depend on
/// the standard library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, index), mixed with splitmix64.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

  /// Uniform in (0, 1].
  double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
  }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-random unit vector: normalized i.i.d. complex Gaussians.
inline StateVector haar_vector(std::size_t dimension, Rng& rng) {
  StateVector v(static_cast<Eigen::Index>(dimension));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.complex_normal();
  v.normalize();
  return v;
}

enum class InitialKind { window_mixed, product_random, entangled_random };
enum class MixedMode { exact, typicality };
/// literal: rho ~ P_w P_X P_w.  x_supported: rho ~ P_X P_w P_X.
enum class ProjectorOrder { literal, x_supported };

struct InitialStateSpec {
  InitialKind kind = InitialKind::window_mixed;
  double x = 1.0;
  double window_center = 0.0;
  double window_width = 2.0;
  std::uint64_t seed = 1;
  int samples = 10;
  MixedMode mode = MixedMode::exact;
  ProjectorOrder order = ProjectorOrder::literal;
  std::size_t exact_rank_limit = 8000;

  void validate() const {
    require(samples >= 1, "samples must be >= 1");
    require(window_width > 0.0, "window width must be positive");
  }
};

namespace detail {

// Rows of the window eigenvector matrix restricted to one X-subspace (d_X x r).
inline Eigen::MatrixXd window_rows(const Eigen::MatrixXd& vw, const XSubspace& sub) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(sub.dimension()), vw.cols());
  for (std::size_t k = 0; k < sub.dimension(); ++k) rows.row(static_cast<Eigen::Index>(k)) = vw.row(sub.indices[k]);
  return rows;
}

}  // namespace detail

/// rho_X = P_w P_X P_w / Z expressed in the window eigenbasis.
inline WindowDensity window_density(const SpectralDecomposition& spec, const EnergyWindow& window,
                                    const XPartition& partition, double x) {
  require(!window.empty(), "energy window is empty");
  const Eigen::MatrixXd vw = spec.eigenvectors(window.indices);
  const Eigen::MatrixXd rows = detail::window_rows(vw, partition.at_x(x));
  WindowDensity d{window, rows.transpose() * rows};
  const double z = d.rho.trace();
  require(z > 1e-14, "window and X-subspace do not overlap (Z = 0)");
  d.rho /= z;
  return d;
}

/// Mixed initial state built from an energy window and an X-subspace, as an ensemble.
inline MixedEnsemble window_mixed_state(const InitialStateSpec& spec, const SpectralDecomposition& spectrum,
                                        const EnergyWindow& window, const XPartition& partition) {
  spec.validate();
  require(!window.empty(), "energy window is empty");
  const auto& sub = partition.at_x(spec.x);
  const Eigen::MatrixXd vw = spectrum.eigenvectors(window.indices);
  const auto d = static_cast<Eigen::Index>(spectrum.dimension());
  MixedEnsemble ens;

  if (spec.mode == MixedMode::exact) {
    require(window.rank() <= spec.exact_rank_limit,
            "window rank " + std::to_string(window.rank()) + " exceeds the exact-mode limit; use typicality mode");
    // Both orders share the nonzero spectrum of B^T B with B = P_X V_w.
    const Eigen::MatrixXd rows = detail::window_rows(vw, sub);
    Eigen::MatrixXd gram = rows.transpose() * rows;
    const Eigen::VectorXd lambda = lapack::symmetric_eigen(gram);
    const double z = lambda.sum();
    require(z > 1e-14, "window and X-subspace do not overlap (Z = 0)");
    const double cutoff = 1e-12 * lambda.maxCoeff();
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (lambda[k] <= cutoff) continue;
      StateVector member = StateVector::Zero(d);
      if (spec.order == ProjectorOrder::literal) {
        member = (vw * gram.col(k)).cast<Complex>();
      } else {
        const Eigen::VectorXd inside = rows * gram.col(k) / std::sqrt(lambda[k]);
        for (std::size_t i = 0; i < sub.dimension(); ++i) member[sub.indices[i]] = inside[static_cast<Eigen::Index>(i)];
      }
      member.normalize();
      ens.weights.push_back(lambda[k]);
      ens.members.push_back(std::move(member));
    }
  } else {
    // rho = K K^dagger with K = P_w P_X (literal) or P_X P_w (x_supported); a Gaussian
    // vector filtered through K has covariance rho, so members are weighted by |K v|^2.
    std::vector<char> in_x(static_cast<std::size_t>(d), 0);
    for (int i : sub.indices) in_x[static_cast<std::size_t>(i)] = 1;
    auto project_x = [&](StateVector& v) {
      for (Eigen::Index i = 0; i < d; ++i)
        if (!in_x[static_cast<std::size_t>(i)]) v[i] = 0.0;
    };
    auto project_w = [&](StateVector& v) {
      const Eigen::VectorXcd c = vw.transpose().cast<Complex>() * v;
      v = vw.cast<Complex>() * c;
    };
    for (int s = 0; s < spec.samples; ++s) {
      Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(s));
      StateVector v(d);
      for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.complex_normal();
      if (spec.order == ProjectorOrder::literal) {
        project_x(v);
        project_w(v);
      } else {
        project_w(v);
        project_x(v);
      }
      const double weight = v.squaredNorm();
      require(weight > 0.0, "typicality sample vanished after projection");
      v /= std::sqrt(weight);
      ens.weights.push_back(weight);
      ens.members.push_back(std::move(v));
    }
  }
  double total = 0.0;
  for (double w : ens.weights) total += w;
  for (double& w : ens.weights) w /= total;
  return ens;
}

/// Haar-random left-beam state with `left_up` up spins times a Haar-random right-beam
/// state with `right_up` up spins, embedded in the sector.
inline StateVector random_product_state(std::uint64_t seed, int left_up, int right_up, const SectorBasis& basis) {
  require(left_up + right_up == basis.up_count(),
          "product state needs left_up + right_up = " + std::to_string(basis.up_count()));
  require(left_up >= 0 && left_up <= basis.rungs() && right_up >= 0 && right_up <= basis.rungs(),
          "beam up counts out of range");
  const auto lp = chain_patterns(basis.rungs(), left_up);
  const auto rp = chain_patterns(basis.rungs(), right_up);
  Rng rng = Rng::stream(seed, 0);
  const StateVector left = haar_vector(lp.size(), rng);
  const StateVector right = haar_vector(rp.size(), rng);
  StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < lp.size(); ++i)
    for (std::size_t j = 0; j < rp.size(); ++j)
      psi[basis.index(lp[i] | (rp[j] << basis.rungs()))] = left[static_cast<Eigen::Index>(i)] * right[static_cast<Eigen::Index>(j)];
  return psi;
}

/// Haar-random state on one X-subspace.
inline StateVector random_entangled_state(std::uint64_t seed, double x, const XPartition& partition,
                                          std::size_t sector_dimension) {
  const auto& sub = partition.at_x(x);
  require(sub.dimension() > 1, "X-subspace must have dimension > 1");
  Rng rng = Rng::stream(seed, 0);
  const StateVector amps = haar_vector(sub.dimension(), rng);
  StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(sector_dimension));
  for (std::size_t i = 0; i < sub.dimension(); ++i) psi[sub.indices[i]] = amps[static_cast<Eigen::Index>(i)];
  return psi;
}

/// Von Neumann entropy (bits) of the left beam for a sector state.
inline double beam_entanglement_entropy(const StateVector& psi, const SectorBasis& basis) {
  const Eigen::Index side = Eigen::Index{1} << basis.rungs();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(side, side);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Pattern p = basis.state(i);
    m(basis.left(p), basis.right(p)) = psi[static_cast<Eigen::Index>(i)];
  }
  const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues();
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    const double p = s[k] * s[k];
    if (p > 1e-300) entropy -= p * std::log2(p);
  }
  return entropy;
}

}  // namespace ladder
