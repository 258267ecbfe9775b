#include <gtest/gtest.h>

#include <bit>
#include <map>
#include <random>

#include "ladder/basis.hpp"
#include "ladder/operators.hpp"
#include "test_support.hpp"

using namespace ladder;

namespace {

LadderConfig ladder_config(int rungs, double kappa = 0.2) {
  LadderConfig c;
  c.rungs = rungs;
  c.rung_coupling = kappa;
  return c;
}

double offblock_norm(const SparseOperator& op, const XPartition& part, std::size_t y, std::size_t x) {
  double s = 0.0;
  for (std::size_t r = 0; r < op.dimension(); ++r) {
    if (part.block_of[r] != static_cast<int>(y)) continue;
    for (const auto& e : op.row(r))
      if (part.block_of[static_cast<std::size_t>(e.column)] == static_cast<int>(x)) s += e.value * e.value;
  }
  return s;
}

}  // namespace

TEST(SectorBasis, DimensionsMatchDirectCount) {
  for (int rungs : {2, 4, 8}) {
    const int n = 2 * rungs;
    std::size_t count = 0;
    for (std::uint32_t p = 0; p < (1u << n); ++p) count += std::popcount(p) == rungs;
    EXPECT_EQ(build_basis(ladder_config(rungs)).size(), count);
  }
  EXPECT_EQ(build_basis(ladder_config(8)).size(), 12870u);
  EXPECT_EQ(build_basis(ladder_config(2)).size(), 6u);
  LadderConfig all_up = ladder_config(8);
  all_up.total_sz = 8;
  const auto b = build_basis(all_up);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.state(0), 0xFFFFu);
}

TEST(SectorBasis, SortedWithExactReverseIndex) {
  const auto b = build_basis(ladder_config(6));
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(std::popcount(b.state(i)), 6);
    if (i > 0) EXPECT_LT(b.state(i - 1), b.state(i));
    EXPECT_EQ(b.index(b.state(i)), static_cast<std::ptrdiff_t>(i));
  }
  EXPECT_EQ(b.index(0b1u), -1);
}

TEST(SectorBasis, InfeasibleSzRejectedWithRange) {
  LadderConfig c = ladder_config(4);
  c.total_sz = 5;
  try {
    build_basis(c);
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("[-4"), std::string::npos);
  }
  c.total_sz = 0.5;  // N/2 + Sz not integral
  EXPECT_THROW(build_basis(c), ValidationError);
}

TEST(Operators, MatchKroneckerOracleForBothConventions) {
  for (auto conv : {SpinConvention::half, SpinConvention::pauli})
    for (int rungs : {2, 3}) {
      LadderConfig c = ladder_config(rungs);
      c.convention = conv;
      const auto basis = build_basis(c);
      const auto full = oracle::full_ladder(c);
      EXPECT_LT((build_h0(basis, c).to_dense() - oracle::restrict(full.h0, basis).real()).norm(), 1e-12);
      EXPECT_LT((build_v(basis, c).to_dense() - oracle::restrict(full.v, basis).real()).norm(), 1e-12);
      EXPECT_LT((build_x_observable(basis).to_dense() - oracle::restrict(full.x, basis).real()).norm(), 1e-12);
      EXPECT_LT(oracle::restrict(full.h0 + c.rung_coupling * full.v, basis).imag().norm(), 1e-12);
    }
}

TEST(Operators, FlipAmplitudeIsHalfJ) {
  const LadderConfig c = ladder_config(2);
  const auto basis = build_basis(c);
  const auto h0 = build_h0(basis, c);
  // Left beam: one up spin on site 0 or 1; right beam fixed at site 0 up.
  const Pattern a = 0b0101, b = 0b0110;
  const auto ia = basis.index(a), ib = basis.index(b);
  double element = 0.0;
  for (const auto& e : h0.row(static_cast<std::size_t>(ia)))
    if (e.column == ib) element = e.value;
  EXPECT_DOUBLE_EQ(element, 0.5);
}

TEST(Operators, OffDiagonalEntriesPerRowBounded) {
  const LadderConfig c = ladder_config(8);
  const auto basis = build_basis(c);
  const auto h0 = build_h0(basis, c);
  for (std::size_t r = 0; r < h0.dimension(); ++r) {
    std::size_t off = 0;
    for (const auto& e : h0.row(r)) off += e.column != static_cast<int>(r);
    EXPECT_LE(off, 2u * (8 - 1));
  }
}

TEST(Operators, H0GroundStateMatchesIndependentChains) {
  const LadderConfig c = ladder_config(8);
  const auto basis = build_basis(c);
  const auto h0 = build_h0(basis, c);
  // Chain spectra per magnetization from a dense 256-dimensional Kronecker build.
  oracle::MatrixXcd chain = oracle::MatrixXcd::Zero(256, 256);
  for (int i = 0; i < 7; ++i) chain += oracle::xxz_bond(i, i + 1, 8, 0.5, 0.6);
  std::vector<double> lowest(9);
  for (int up = 0; up <= 8; ++up) {
    std::vector<int> idx;
    for (int p = 0; p < 256; ++p)
      if (std::popcount(static_cast<unsigned>(p)) == up) idx.push_back(p);
    Eigen::MatrixXd block(idx.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) block(i, j) = chain(idx[i], idx[j]).real();
    lowest[up] = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(block).eigenvalues()[0];
  }
  double expected = 1e9;
  for (int nl = 0; nl <= 8; ++nl) expected = std::min(expected, lowest[nl] + lowest[8 - nl]);
  const double e0 = oracle::lanczos_lowest([&](const Eigen::VectorXd& v) { return h0.apply(v); },
                                           static_cast<Eigen::Index>(basis.size()), 300);
  EXPECT_NEAR(e0, expected, 1e-8);
}

TEST(Operators, ProjectorDimensionsFromDirectCount) {
  const auto basis = build_basis(ladder_config(8));
  const auto part = build_projectors(basis);
  // Direct tally over all 16-bit patterns with eight up spins.
  std::map<int, std::size_t> tally;
  for (std::uint32_t p = 0; p < (1u << 16); ++p)
    if (std::popcount(p) == 8) ++tally[std::popcount(p & 0xFFu) - 4];
  ASSERT_EQ(part.size(), 9u);
  std::size_t total = 0;
  for (const auto& s : part.subspaces) {
    EXPECT_EQ(s.dimension(), tally[static_cast<int>(s.x)]);
    EXPECT_EQ(s.dimension(), static_cast<std::size_t>(binomial(8, 4 + static_cast<int>(s.x)) *
                                                      binomial(8, 4 - static_cast<int>(s.x))));
    total += s.dimension();
  }
  EXPECT_EQ(total, 12870u);
  EXPECT_EQ(part.at_x(0).dimension(), 4900u);
  EXPECT_EQ(part.at_x(1).dimension(), 3136u);
  EXPECT_EQ(part.at_x(-2).dimension(), 784u);
  EXPECT_EQ(part.at_x(3).dimension(), 64u);
  EXPECT_EQ(part.at_x(-4).dimension(), 1u);
  std::vector<int> seen(basis.size(), 0);
  for (const auto& s : part.subspaces)
    for (int i : s.indices) ++seen[static_cast<std::size_t>(i)];
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(Operators, XObservableValues) {
  const auto basis = build_basis(ladder_config(8));
  const auto x = build_x_observable(basis);
  EXPECT_DOUBLE_EQ(x.diagonal_element(static_cast<std::size_t>(basis.index(0x00FFu))), 4.0);
  EXPECT_DOUBLE_EQ(x.diagonal_element(static_cast<std::size_t>(basis.index(0b0000011100011111u))), 1.0);
  EXPECT_NEAR(x.trace(), 0.0, 1e-12);
}

TEST(Operators, RungFlipsConnectOnlyNeighbouringX) {
  const LadderConfig c = ladder_config(4);
  const auto basis = build_basis(c);
  const auto part = build_projectors(basis);
  const auto v = build_v(basis, c);
  const auto vflip = build_v(basis, c, RungPart::flip_only);
  for (std::size_t y = 0; y < part.size(); ++y)
    for (std::size_t x = 0; x < part.size(); ++x) {
      const double dx = std::abs(part[y].x - part[x].x);
      if (dx >= 2.0) EXPECT_EQ(offblock_norm(v, part, y, x), 0.0);
      if (dx != 1.0) EXPECT_EQ(offblock_norm(vflip, part, y, x), 0.0);
    }
  EXPECT_LT(v.asymmetry(), 1e-15);
}

TEST(Operators, FlipWeightCountsFlippableRungs) {
  const LadderConfig c = ladder_config(8);
  const auto basis = build_basis(c);
  const auto part = build_projectors(basis);
  const auto vflip = build_v(basis, c, RungPart::flip_only);
  const double amp = c.flip_amplitude();
  for (int x = -4; x <= 3; ++x) {
    const auto from = static_cast<std::size_t>(part.slot(x));
    const auto to = static_cast<std::size_t>(part.slot(x + 1));
    const double expected = amp * amp * part[from].dimension() * (4.0 - x) * (4.0 - x) / 8.0;
    EXPECT_NEAR(offblock_norm(vflip, part, to, from), expected, 1e-9 * expected);
  }
}

TEST(Operators, CommutatorsVanishAtSmallL) {
  for (int rungs : {2, 4}) {
    const LadderConfig c = ladder_config(rungs);
    const auto basis = build_basis(c);
    const Eigen::MatrixXd h0 = build_h0(basis, c).to_dense();
    const Eigen::MatrixXd x = build_x_observable(basis).to_dense();
    EXPECT_LT((h0 * x - x * h0).norm(), 1e-12);
    for (int nl = 0; nl <= rungs; ++nl) {
      const Eigen::MatrixXd p = oracle::projector(basis, nl);
      EXPECT_LT((h0 * p - p * h0).norm(), 1e-12);
    }
  }
}

TEST(Operators, BeamSwapSymmetry) {
  const LadderConfig c = ladder_config(4);
  const auto basis = build_basis(c);
  const auto perm = beam_swap_permutation(basis);
  const auto d = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) s(perm[static_cast<std::size_t>(i)], i) = 1.0;
  const Eigen::MatrixXd h = build_hamiltonian(basis, c).to_dense();
  const Eigen::MatrixXd x = build_x_observable(basis).to_dense();
  EXPECT_LT((s * h * s.transpose() - h).norm(), 1e-12);
  EXPECT_LT((s * x * s.transpose() + x).norm(), 1e-12);
}

TEST(Apply, IdentityHermitianAndDenseAgreement) {
  const LadderConfig c = ladder_config(2);
  const auto basis = build_basis(c);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  StateVector v(static_cast<Eigen::Index>(basis.size()));
  for (auto& a : v) a = {nd(gen), nd(gen)};
  EXPECT_LT((ladder::apply(SparseOperator::identity(basis.size()), v) - v).norm(), 1e-15);
  const auto h = build_hamiltonian(basis, c);
  EXPECT_LT(std::abs(h.expectation(v).imag()), 1e-12);
  const Eigen::MatrixXcd dense = oracle::restrict(oracle::full_ladder(c).h0 + 0.2 * oracle::full_ladder(c).v, basis);
  EXPECT_LT((ladder::apply(h, v) - dense * v).norm(), 1e-12);
  EXPECT_THROW(ladder::apply(h, StateVector::Zero(3)), ValidationError);
}
