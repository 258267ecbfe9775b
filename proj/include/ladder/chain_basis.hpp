#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ladder/basis.hpp"
#include "ladder/config.hpp"
#include "ladder/lapack.hpp"
#include "ladder/sparse_operator.hpp"

namespace ladder {

/// Eigenpairs of one open XXZ chain restricted to a fixed number of up spins.
struct ChainSector {
  int up = 0;
  std::vector<Pattern> patterns;
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;  // columns: eigenvectors in the pattern basis

  std::size_t dimension() const { return patterns.size(); }
  int index(Pattern p) const {
    auto it = std::lower_bound(patterns.begin(), patterns.end(), p);
    return (it != patterns.end() && *it == p) ? static_cast<int>(it - patterns.begin()) : -1;
  }
};

/// H0 is a sum of two identical decoupled chains, so its eigenbasis inside each
/// X-subspace is the tensor product of chain eigenbases with n_L and n_R up spins.
class ChainFactorizedBasis {
public:
  explicit ChainFactorizedBasis(const LadderConfig& config) : config_(config) {
    config.validate();
    const int L = config.rungs;
    for (int up = 0; up <= L; ++up) {
      ChainSector s;
      s.up = up;
      s.patterns = chain_patterns(L, up);
      const auto m = static_cast<Eigen::Index>(s.patterns.size());
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index c = 0; c < m; ++c) {
        const Pattern p = s.patterns[static_cast<std::size_t>(c)];
        for (int i = 0; i + 1 < L; ++i) {
          const bool a = (p >> i) & 1u, b = (p >> (i + 1)) & 1u;
          h(c, c) += config.beam_coupling * config.anisotropy * config.zz_weight() * (a == b ? 1.0 : -1.0);
          if (a != b)
            h(s.index(p ^ (Pattern{3} << i)), c) += config.beam_coupling * config.flip_amplitude();
        }
      }
      s.energies = lapack::symmetric_eigen(h);
      s.vectors = std::move(h);
      sectors_.push_back(std::move(s));
    }
  }

  const LadderConfig& config() const { return config_; }
  int rungs() const { return config_.rungs; }
  int total_up() const { return config_.up_count(); }
  const ChainSector& sector(int up) const { return sectors_.at(static_cast<std::size_t>(up)); }

  /// Left-beam up count of the X-subspace with magnetization difference x.
  int left_up_for(double x) const {
    const double nl = x + 0.5 * total_up();
    const int rounded = static_cast<int>(std::lround(nl));
    require(std::abs(nl - rounded) < 1e-9 && rounded >= 0 && rounded <= rungs() &&
                total_up() - rounded >= 0 && total_up() - rounded <= rungs(),
            "magnetization difference " + std::to_string(x) + " is not admissible");
    return rounded;
  }

  bool admissible(double x) const {
    const double nl = x + 0.5 * total_up();
    const int r = static_cast<int>(std::lround(nl));
    return std::abs(nl - r) < 1e-9 && r >= 0 && r <= rungs() && total_up() - r >= 0 &&
           total_up() - r <= rungs();
  }

  std::size_t block_dimension(double x) const {
    const int nl = left_up_for(x);
    return sector(nl).dimension() * sector(total_up() - nl).dimension();
  }

  /// Product energies eps_L(a) + eps_R(b), flattened as a * dim_R + b.
  Eigen::VectorXd product_energies(double x) const {
    const int nl = left_up_for(x);
    const auto& l = sector(nl);
    const auto& r = sector(total_up() - nl);
    Eigen::VectorXd e(static_cast<Eigen::Index>(l.dimension() * r.dimension()));
    for (std::size_t a = 0; a < l.dimension(); ++a)
      for (std::size_t b = 0; b < r.dimension(); ++b)
        e[static_cast<Eigen::Index>(a * r.dimension() + b)] = l.energies[static_cast<Eigen::Index>(a)] + r.energies[static_cast<Eigen::Index>(b)];
    return e;
  }

  /// Product eigenstate (a, b) of the X-subspace written in the sector basis.
  Eigen::VectorXd embed(const SectorBasis& basis, double x, std::size_t a, std::size_t b) const {
    const int nl = left_up_for(x);
    const auto& l = sector(nl);
    const auto& r = sector(total_up() - nl);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < l.dimension(); ++i)
      for (std::size_t j = 0; j < r.dimension(); ++j) {
        const Pattern p = l.patterns[i] | (r.patterns[j] << rungs());
        v[basis.index(p)] = l.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) *
                            r.vectors(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b));
      }
    return v;
  }

  /// Matrix of S^+ at `site` from the `up` chain sector to `up + 1`, in the chain eigenbases.
  Eigen::MatrixXd raising(int site, int up) const {
    const auto& from = sector(up);
    const auto& to = sector(up + 1);
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(to.dimension()),
                                               static_cast<Eigen::Index>(from.dimension()));
    for (std::size_t c = 0; c < from.dimension(); ++c) {
      const Pattern p = from.patterns[c];
      if (!((p >> site) & 1u)) op(to.index(p | (Pattern{1} << site)), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return to.vectors.transpose() * op * from.vectors;
  }

private:
  LadderConfig config_;
  std::vector<ChainSector> sectors_;
};

inline ChainFactorizedBasis chain_factorize_h0(const LadderConfig& config) {
  return ChainFactorizedBasis(config);
}

/// Flip part of the rung coupling between adjacent X-subspaces, factorized as
/// amplitude * sum_i left[i] (x) right[i] in the chain eigenbases.
struct FlipFactors {
  double amplitude = 0.0;
  std::vector<Eigen::MatrixXd> left, right;
  Eigen::VectorXd left_to, left_from, right_to, right_from;  // chain energies

  Eigen::Index rows() const { return left_to.size() * right_to.size(); }
  Eigen::Index cols() const { return left_from.size() * right_from.size(); }
};

inline FlipFactors flip_factors(const ChainFactorizedBasis& cfb, double x_from, double x_to) {
  require(std::abs(std::abs(x_to - x_from) - 1.0) < 1e-9,
          "rung flips connect only |Y - X| = 1 (block is identically zero otherwise)");
  const int nl = cfb.left_up_for(x_from);
  const int nr = cfb.total_up() - nl;
  const bool up = x_to > x_from;
  const int nl_to = up ? nl + 1 : nl - 1;
  const int nr_to = up ? nr - 1 : nr + 1;
  require(nl_to >= 0 && nl_to <= cfb.rungs() && nr_to >= 0 && nr_to <= cfb.rungs(),
          "target magnetization difference outside the sector");
  FlipFactors f;
  f.amplitude = cfb.config().flip_amplitude();
  for (int i = 0; i < cfb.rungs(); ++i) {
    f.left.push_back(up ? cfb.raising(i, nl) : Eigen::MatrixXd(cfb.raising(i, nl - 1).transpose()));
    f.right.push_back(up ? Eigen::MatrixXd(cfb.raising(i, nr - 1).transpose()) : cfb.raising(i, nr));
  }
  f.left_from = cfb.sector(nl).energies;
  f.right_from = cfb.sector(nr).energies;
  f.left_to = cfb.sector(nl_to).energies;
  f.right_to = cfb.sector(nr_to).energies;
  return f;
}

/// Block <n in Y| V |m in X> in the H0 eigenbasis, with energy labels.
struct DiracBlock {
  double x_from = 0.0, x_to = 0.0;
  Eigen::MatrixXd values;
  Eigen::VectorXd row_energies, col_energies;
};

inline DiracBlock dirac_rotate_v_block(const ChainFactorizedBasis& cfb, double x_from, double x_to) {
  const FlipFactors f = flip_factors(cfb, x_from, x_to);
  DiracBlock blk;
  blk.x_from = x_from;
  blk.x_to = x_to;
  const Eigen::Index rl = f.left_to.size(), rr = f.right_to.size();
  const Eigen::Index cl = f.left_from.size(), cr = f.right_from.size();
  blk.values = Eigen::MatrixXd::Zero(rl * rr, cl * cr);
  for (std::size_t i = 0; i < f.left.size(); ++i)
    for (Eigen::Index a = 0; a < cl; ++a)
      for (Eigen::Index b = 0; b < cr; ++b) {
        auto col = blk.values.col(a * cr + b);
        for (Eigen::Index ap = 0; ap < rl; ++ap) {
          const double la = f.amplitude * f.left[i](ap, a);
          if (la == 0.0) continue;
          col.segment(ap * rr, rr).noalias() += la * f.right[i].col(b);
        }
      }
  blk.row_energies.resize(rl * rr);
  for (Eigen::Index a = 0; a < rl; ++a)
    for (Eigen::Index b = 0; b < rr; ++b) blk.row_energies[a * rr + b] = f.left_to[a] + f.right_to[b];
  blk.col_energies.resize(cl * cr);
  for (Eigen::Index a = 0; a < cl; ++a)
    for (Eigen::Index b = 0; b < cr; ++b) blk.col_energies[a * cr + b] = f.left_from[a] + f.right_from[b];
  return blk;
}

}  // namespace ladder
