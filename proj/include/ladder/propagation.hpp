#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "ladder/error.hpp"
#include "ladder/operators.hpp"
#include "ladder/sparse_operator.hpp"
#include "ladder/spectral.hpp"

namespace ladder {

/// Uniform grid t_k = k * dt for k = 0 .. round(t_max / dt).
inline std::vector<double> make_grid(double t_max, double dt) {
  require(dt > 0.0 && t_max >= 0.0, "time grid needs dt > 0 and t_max >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

inline bool is_uniform(const std::vector<double>& t, double rel_tol = 1e-9) {
  if (t.size() < 3) return true;
  const double dt = t[1] - t[0];
  for (std::size_t k = 1; k < t.size(); ++k)
    if (std::abs((t[k] - t[0]) - static_cast<double>(k) * dt) > rel_tol * (1.0 + std::abs(t[k]))) return false;
  return true;
}

/// Probabilities P_X(t) over the X-subspaces with their mean and variance.
/// Used for both quantum expectation values and master-equation solutions.
struct ProbabilitySeries {
  std::vector<double> times;
  std::vector<double> x_values;
  Eigen::MatrixXd probabilities;  // rows: times, columns: x_values
  std::vector<double> mean, variance;

  std::size_t steps() const { return times.size(); }

  void compute_moments() {
    const auto nt = static_cast<std::size_t>(probabilities.rows());
    mean.assign(nt, 0.0);
    variance.assign(nt, 0.0);
    for (std::size_t k = 0; k < nt; ++k) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < x_values.size(); ++j) {
        const double p = probabilities(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
        m1 += p * x_values[j];
        m2 += p * x_values[j] * x_values[j];
      }
      mean[k] = m1;
      variance[k] = std::max(0.0, m2 - m1 * m1);
    }
  }

  /// Second raw moment sum_X X^2 P_X(t).
  std::vector<double> second_moment() const {
    std::vector<double> out(times.size(), 0.0);
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t j = 0; j < x_values.size(); ++j)
        out[k] += probabilities(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * x_values[j] * x_values[j];
    return out;
  }
};

using ObservableSeries = ProbabilitySeries;

/// Short-iterate Lanczos propagator for exp(-i H dt) with an a-posteriori error bound.
class KrylovPropagator {
public:
  KrylovPropagator(const SparseOperator& hamiltonian, double tol = 1e-9, double max_step = 0.1,
                   int max_dimension = 40)
      : h_(&hamiltonian), tol_(tol), max_step_(max_step), max_dim_(max_dimension) {
    require(tol > 0.0 && tol <= 1e-6, "propagation tolerance must lie in (0, 1e-6]");
  }

  std::size_t dimension() const { return h_->dimension(); }

  /// psi <- exp(-i H dt) psi.
  void step(StateVector& psi, double dt) const {
    require(dt > 0.0, "propagation step must be positive");
    require(static_cast<std::size_t>(psi.size()) == h_->dimension(), "state/operator dimension mismatch");
    const int pieces = std::max(1, static_cast<int>(std::ceil(dt / max_step_ - 1e-12)));
    const double h = dt / pieces;
    for (int k = 0; k < pieces; ++k) substep(psi, h, tol_ / pieces, 0);
  }

private:
  void substep(StateVector& psi, double dt, double tol, int depth) const {
    const double norm = psi.norm();
    if (norm == 0.0) return;
    const auto d = psi.size();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(max_dim_, d));
    std::vector<StateVector> basis;
    basis.reserve(static_cast<std::size_t>(m_max) + 1);
    basis.push_back(psi / norm);
    std::vector<double> alpha, beta;
    StateVector w(d);
    double residual = 0.0;
    for (int j = 0; j < m_max; ++j) {
      h_->apply_into(basis.back(), w);
      alpha.push_back(basis.back().dot(w).real());
      // Full reorthogonalization; the subspace stays small.
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) w -= b.dot(w) * b;
      const double bnext = w.norm();
      const int m = j + 1;
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      const Eigen::VectorXcd phases =
          (es.eigenvalues().cast<Complex>() * Complex(0.0, -dt)).array().exp().matrix();
      const Eigen::VectorXcd coeff =
          es.eigenvectors().cast<Complex>() * phases.cwiseProduct(es.eigenvectors().row(0).transpose().cast<Complex>());
      residual = bnext * std::abs(coeff[m - 1]);
      const bool breakdown = bnext < 1e-13;
      if (breakdown || residual <= tol) {
        StateVector out = StateVector::Zero(d);
        for (int i = 0; i < m; ++i) out += coeff[i] * basis[static_cast<std::size_t>(i)];
        psi = norm * out;
        return;
      }
      beta.push_back(bnext);
      basis.push_back(w / bnext);
    }
    if (depth >= 20)
      throw NumericalError("Krylov propagation did not converge; achieved residual " +
                               std::to_string(residual),
                           residual);
    substep(psi, 0.5 * dt, 0.5 * tol, depth + 1);
    substep(psi, 0.5 * dt, 0.5 * tol, depth + 1);
  }

  const SparseOperator* h_;
  double tol_;
  double max_step_;
  int max_dim_;
};

/// Exact propagation through a full eigendecomposition.
class SpectralPropagator {
public:
  explicit SpectralPropagator(SpectralDecomposition spec) : spec_(std::move(spec)) {}

  std::size_t dimension() const { return spec_.dimension(); }
  const SpectralDecomposition& spectrum() const { return spec_; }

  void step(StateVector& psi, double dt) const {
    StateVector c = spec_.project(psi);
    for (Eigen::Index n = 0; n < c.size(); ++n)
      c[n] *= std::exp(Complex(0.0, -dt * spec_.eigenvalue(static_cast<std::size_t>(n))));
    psi = spec_.expand(c);
  }

private:
  SpectralDecomposition spec_;
};

/// Dense spectral propagation below `dense_threshold`, Krylov above.
class Propagator {
public:
  Propagator(const SparseOperator& hamiltonian, double tol = 1e-9, std::size_t dense_threshold = 1500)
      : impl_(make(hamiltonian, tol, dense_threshold)) {}

  void step(StateVector& psi, double dt) const {
    std::visit([&](const auto& p) { p.step(psi, dt); }, impl_);
  }

  bool is_dense() const { return std::holds_alternative<SpectralPropagator>(impl_); }

private:
  static std::variant<KrylovPropagator, SpectralPropagator> make(const SparseOperator& h, double tol,
                                                                 std::size_t threshold) {
    if (h.dimension() < threshold) return SpectralPropagator(diagonalize_dense(h));
    return KrylovPropagator(h, tol);
  }

  std::variant<KrylovPropagator, SpectralPropagator> impl_;
};

/// exp(-i H dt)|psi> to within `tol` in norm.
inline StateVector propagate(const StateVector& state, const SparseOperator& hamiltonian, double dt,
                             double tol = 1e-9) {
  StateVector out = state;
  KrylovPropagator(hamiltonian, tol).step(out, dt);
  return out;
}

/// Weighted collection of normalized pure states representing a density operator.
struct MixedEnsemble {
  std::vector<double> weights;
  std::vector<StateVector> members;

  std::size_t size() const { return members.size(); }

  void validate() const {
    require(weights.size() == members.size() && !members.empty(), "ensemble needs one weight per member");
    double total = 0.0;
    for (std::size_t r = 0; r < members.size(); ++r) {
      require(weights[r] > 0.0, "ensemble weights must be positive");
      require(std::abs(members[r].norm() - 1.0) < 1e-9, "ensemble members must be normalized");
      total += weights[r];
    }
    require(std::abs(total - 1.0) < 1e-12, "ensemble weights must sum to 1");
  }

  static MixedEnsemble pure(StateVector psi) {
    MixedEnsemble e;
    e.weights = {1.0};
    e.members.push_back(std::move(psi));
    return e;
  }
};

namespace detail {

template <class Prop>
Eigen::MatrixXd member_probabilities(const Prop& prop, StateVector psi, const XPartition& partition,
                                     const std::vector<double>& times) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(partition.size()));
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0) {
      const double dt = times[k] - times[k - 1];
      if (dt > 0.0) {
        try {
          prop.step(psi, dt);
        } catch (const NumericalError& e) {
          throw NumericalError(std::string(e.what()) + " at t = " + std::to_string(times[k - 1]), e.residual());
        }
      }
    }
    const auto w = subspace_weights(partition, psi);
    for (std::size_t j = 0; j < w.size(); ++j) out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = w[j];
  }
  return out;
}

}  // namespace detail

/// P_X(t) = sum_r w_r <psi_r(t)|P_X|psi_r(t)> with moments. Members propagate
/// independently (optionally on several threads); the reduction runs in member order.
template <class Prop>
ObservableSeries evolve_series(const MixedEnsemble& ensemble, const Prop& prop, const XPartition& partition,
                               const std::vector<double>& times, unsigned threads = 1) {
  ensemble.validate();
  require(!times.empty(), "time grid is empty");
  for (std::size_t k = 1; k < times.size(); ++k) require(times[k] >= times[k - 1], "time grid must be monotone");
  std::vector<Eigen::MatrixXd> per_member(ensemble.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(ensemble.size())));
  if (workers == 1) {
    for (std::size_t r = 0; r < ensemble.size(); ++r)
      per_member[r] = detail::member_probabilities(prop, ensemble.members[r], partition, times);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < ensemble.size(); r += workers)
            per_member[r] = detail::member_probabilities(prop, ensemble.members[r], partition, times);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  ObservableSeries s;
  s.times = times;
  s.x_values = partition.x_values();
  s.probabilities = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(partition.size()));
  for (std::size_t r = 0; r < ensemble.size(); ++r) s.probabilities += ensemble.weights[r] * per_member[r];
  s.compute_moments();
  return s;
}

/// Long-time dephased prediction sum_n <n|A|n> sum_r w_r |<n|psi_r>|^2.
inline double diagonal_ensemble(const SpectralDecomposition& spec, const MixedEnsemble& initial,
                                const SparseOperator& observable) {
  initial.validate();
  std::vector<double> occupation(spec.dimension(), 0.0);
  for (std::size_t r = 0; r < initial.size(); ++r) {
    const StateVector c = spec.project(initial.members[r]);
    for (std::size_t n = 0; n < spec.dimension(); ++n) occupation[n] += initial.weights[r] * std::norm(c[static_cast<Eigen::Index>(n)]);
  }
  double total = 0.0;
  for (std::size_t n = 0; n < spec.dimension(); ++n) {
    const Eigen::VectorXd v = spec.eigenvector(n);
    total += occupation[n] * v.dot(observable.apply(v));
  }
  return total;
}

/// Density operator supported on an energy window, stored in that window's
/// eigenbasis: rho = sum_ij rho_ij |i><j| with i, j window eigenstates.
struct WindowDensity {
  EnergyWindow window;
  Eigen::MatrixXd rho;
};

/// Exact dynamics of a window-supported density operator:
/// P_Y(t) = sum_ij W^Y_ij cos((E_i - E_j) t) with W^Y = rho o <i|P_Y|j>. The cosine is split
/// as cos(E_i t) cos(E_j t) + sin(E_i t) sin(E_j t), so each X-subspace costs two matrix products.
inline ObservableSeries evolve_window_density(const SpectralDecomposition& spec, const WindowDensity& density,
                                              const XPartition& partition, const std::vector<double>& times) {
  const auto r = static_cast<Eigen::Index>(density.window.rank());
  require(density.rho.rows() == r && density.rho.cols() == r, "window density has the wrong shape");
  require(!times.empty(), "time grid is empty");
  const Eigen::MatrixXd vw = spec.eigenvectors(density.window.indices);
  const auto nt = static_cast<Eigen::Index>(times.size());
  const std::size_t ny = partition.size();

  Eigen::MatrixXd cosines(r, nt), sines(r, nt);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double e = spec.eigenvalue(static_cast<std::size_t>(density.window.indices[static_cast<std::size_t>(i)]));
    for (Eigen::Index k = 0; k < nt; ++k) {
      cosines(i, k) = std::cos(e * times[static_cast<std::size_t>(k)]);
      sines(i, k) = std::sin(e * times[static_cast<std::size_t>(k)]);
    }
  }

  ObservableSeries out;
  out.times = times;
  out.x_values = partition.x_values();
  out.probabilities.resize(nt, static_cast<Eigen::Index>(ny));
  Eigen::MatrixXd rows, weights, g;
  for (std::size_t y = 0; y < ny; ++y) {
    const auto& idx = partition[y].indices;
    rows.resize(static_cast<Eigen::Index>(idx.size()), r);
    for (std::size_t k = 0; k < idx.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) = vw.row(idx[k]);
    weights.noalias() = rows.transpose() * rows;
    weights.array() *= density.rho.array();
    g.noalias() = weights * cosines;
    Eigen::VectorXd p = (cosines.array() * g.array()).colwise().sum().transpose().matrix();
    g.noalias() = weights * sines;
    p += (sines.array() * g.array()).colwise().sum().transpose().matrix();
    out.probabilities.col(static_cast<Eigen::Index>(y)) = p;
  }
  out.compute_moments();
  return out;
}

}  // namespace ladder
