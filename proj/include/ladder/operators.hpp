#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "ladder/basis.hpp"
#include "ladder/config.hpp"
#include "ladder/sparse_operator.hpp"

namespace ladder {

namespace detail {

// XXZ bond between bit positions a and b, accumulated into `builder` for every basis state.
inline void add_bond(const SectorBasis& basis, SparseOperator::Builder& builder, int a, int b,
                     double strength, double anisotropy, double flip_amplitude, double zz_weight,
                     bool include_flip, bool include_diagonal) {
  for (std::size_t col = 0; col < basis.size(); ++col) {
    const Pattern p = basis.state(col);
    const bool up_a = (p >> a) & 1u;
    const bool up_b = (p >> b) & 1u;
    if (include_diagonal)
      builder.add(col, col, strength * anisotropy * zz_weight * (up_a == up_b ? 1.0 : -1.0));
    if (include_flip && up_a != up_b) {
      const Pattern q = p ^ ((Pattern{1} << a) | (Pattern{1} << b));
      builder.add(static_cast<std::size_t>(basis.index(q)), col, strength * flip_amplitude);
    }
  }
}

}  // namespace detail

/// Beam Hamiltonian: open XXZ chains along both beams, no rung terms.
inline SparseOperator build_h0(const SectorBasis& basis, const LadderConfig& config) {
  SparseOperator::Builder builder(basis.size());
  const int L = basis.rungs();
  for (int beam = 0; beam < 2; ++beam)
    for (int i = 0; i + 1 < L; ++i)
      detail::add_bond(basis, builder, beam * L + i, beam * L + i + 1, config.beam_coupling,
                       config.anisotropy, config.flip_amplitude(), config.zz_weight(), true, true);
  return std::move(builder).build(true);
}

enum class RungPart { full, flip_only, diagonal_only };

/// Rung coupling with unit strength; kappa enters only through build_hamiltonian.
inline SparseOperator build_v(const SectorBasis& basis, const LadderConfig& config,
                              RungPart part = RungPart::full) {
  SparseOperator::Builder builder(basis.size());
  const int L = basis.rungs();
  for (int i = 0; i < L; ++i)
    detail::add_bond(basis, builder, i, L + i, 1.0, config.anisotropy, config.flip_amplitude(),
                     config.zz_weight(), part != RungPart::diagonal_only,
                     part != RungPart::flip_only);
  return std::move(builder).build(true);
}

/// H = H0 + kappa V.
inline SparseOperator build_hamiltonian(const SectorBasis& basis, const LadderConfig& config) {
  return add_scaled(build_h0(basis, config), build_v(basis, config), config.rung_coupling);
}

/// Diagonal magnetization-difference operator, eigenvalue (n_L - n_R)/2 on each pattern.
inline SparseOperator build_x_observable(const SectorBasis& basis) {
  std::vector<double> diag(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i)
    diag[i] = basis.magnetization_difference(basis.state(i));
  return SparseOperator::diagonal(diag);
}

/// One subspace of fixed magnetization difference X within the sector.
struct XSubspace {
  double x = 0.0;
  int left_up = 0;
  std::vector<int> indices;  // ascending sector positions
  std::size_t dimension() const { return indices.size(); }
};

/// Partition of the sector into X-subspaces, ordered by ascending X.
struct XPartition {
  std::vector<XSubspace> subspaces;
  std::vector<int> block_of;  // sector position -> subspace slot

  std::size_t size() const { return subspaces.size(); }
  const XSubspace& operator[](std::size_t k) const { return subspaces[k]; }

  /// Slot of the subspace with the given X, or -1.
  int slot(double x) const {
    for (std::size_t k = 0; k < subspaces.size(); ++k)
      if (std::abs(subspaces[k].x - x) < 1e-9) return static_cast<int>(k);
    return -1;
  }

  const XSubspace& at_x(double x) const {
    const int k = slot(x);
    require(k >= 0, "magnetization difference " + std::to_string(x) + " not present in sector");
    return subspaces[static_cast<std::size_t>(k)];
  }

  std::vector<double> x_values() const {
    std::vector<double> out;
    for (const auto& s : subspaces) out.push_back(s.x);
    return out;
  }
};

inline XPartition build_projectors(const SectorBasis& basis) {
  std::map<int, XSubspace> by_left;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Pattern p = basis.state(i);
    auto& sub = by_left[basis.left_up(p)];
    sub.left_up = basis.left_up(p);
    sub.x = basis.magnetization_difference(p);
    sub.indices.push_back(static_cast<int>(i));
  }
  XPartition out;
  out.block_of.assign(basis.size(), -1);
  for (auto& [left, sub] : by_left) {
    for (int i : sub.indices) out.block_of[static_cast<std::size_t>(i)] = static_cast<int>(out.subspaces.size());
    out.subspaces.push_back(std::move(sub));
  }
  return out;
}

/// Sector permutation exchanging the two beams site by site.
inline std::vector<int> beam_swap_permutation(const SectorBasis& basis) {
  std::vector<int> perm(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i)
    perm[i] = static_cast<int>(basis.index(basis.swap_beams(basis.state(i))));
  return perm;
}

/// Probability weight of `v` inside each X-subspace.
inline std::vector<double> subspace_weights(const XPartition& partition, const StateVector& v) {
  std::vector<double> w(partition.size(), 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    w[static_cast<std::size_t>(partition.block_of[static_cast<std::size_t>(i)])] += std::norm(v[i]);
  return w;
}

}  // namespace ladder
