#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "ladder/error.hpp"

namespace ladder::lapack {

namespace detail {

// Residual and orthogonality on a handful of spread-out columns.
inline double spot_check(const Eigen::MatrixXd& a, const Eigen::MatrixXd& v, const Eigen::VectorXd& w) {
  const Eigen::Index n = a.rows();
  const Eigen::Index probes = std::min<Eigen::Index>(n, 8);
  Eigen::MatrixXd cols(n, probes);
  Eigen::VectorXd vals(probes);
  for (Eigen::Index k = 0; k < probes; ++k) {
    const Eigen::Index c = probes == 1 ? 0 : k * (n - 1) / (probes - 1);
    cols.col(k) = v.col(c);
    vals[k] = w[c];
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double residual = (a * cols - cols * vals.asDiagonal()).colwise().norm().maxCoeff() / scale;
  const double ortho = (cols.transpose() * cols - Eigen::MatrixXd::Identity(probes, probes)).cwiseAbs().maxCoeff();
  return std::max(residual, ortho);
}

}  // namespace detail

/// Replaces the symmetric matrix `a` by its orthonormal eigenvectors (columns) and
/// returns the eigenvalues in ascending order. Divide-and-conquer driver; the result
/// is spot-checked and recomputed with Eigen if the BLAS backend misbehaves.
inline Eigen::VectorXd symmetric_eigen(Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), "symmetric_eigen: matrix must be square");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const Eigen::MatrixXd original = a;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data());
  if (info == 0 && detail::spot_check(original, a, w) < 1e-8) return w;

  static bool warned = false;
  if (!warned) {
    std::cerr << "warning: LAPACK dsyevd returned an inaccurate eigensystem (info " << info
              << "); falling back to Eigen. With OpenBLAS, OPENBLAS_CORETYPE=Haswell usually fixes this.\n";
    warned = true;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(original);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed to converge");
  a = es.eigenvectors();
  w = es.eigenvalues();
  const double check = detail::spot_check(original, a, w);
  if (check > 1e-8) throw NumericalError("symmetric eigensolver inaccurate", check);
  return w;
}

}  // namespace ladder::lapack
