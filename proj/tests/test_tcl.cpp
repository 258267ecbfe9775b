#include <gtest/gtest.h>

#include "ladder/chain_basis.hpp"
#include "ladder/operators.hpp"
#include "ladder/tcl.hpp"
#include "test_support.hpp"

using namespace ladder;

namespace {

LadderConfig small(int rungs, double kappa = 0.2) {
  LadderConfig c;
  c.rungs = rungs;
  c.rung_coupling = kappa;
  return c;
}

// Tr{[V(t), P_Y][V, P_X]} kappa^2 / d_X from dense matrices, V(t) under H0 only.
double brute_force_correlation(const LadderConfig& c, int left_from, int left_to, double t) {
  const auto basis = build_basis(c);
  const auto full = oracle::full_ladder(c);
  const Eigen::MatrixXcd h0 = oracle::restrict(full.h0, basis);
  const Eigen::MatrixXcd v = oracle::restrict(full.v, basis);
  const Eigen::MatrixXcd px = oracle::projector(basis, left_from).cast<Complex>();
  const Eigen::MatrixXcd py = oracle::projector(basis, left_to).cast<Complex>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h0);
  Eigen::VectorXcd ph(es.eigenvalues().size());
  for (Eigen::Index n = 0; n < ph.size(); ++n) ph[n] = std::exp(Complex(0.0, es.eigenvalues()[n] * t));
  const Eigen::MatrixXcd u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  const Eigen::MatrixXcd vt = u * v * u.adjoint();
  const Complex tr = ((vt * py - py * vt) * (v * px - px * v)).trace();
  return c.rung_coupling * c.rung_coupling / px.trace().real() * tr.real();
}

}  // namespace

TEST(Correlation, MatchesBruteForceCommutatorTraceAtL2) {
  for (auto conv : {SpinConvention::half, SpinConvention::pauli}) {
    LadderConfig c = small(2, 0.3);
    c.convention = conv;
    const auto cfb = chain_factorize_h0(c);
    const std::vector<double> times = {0.0, 0.37, 1.0, 2.5, 7.9};
    for (auto [xf, xt] : {std::pair{0.0, 1.0}, std::pair{0.0, -1.0}, std::pair{1.0, 0.0}, std::pair{-1.0, 0.0}}) {
      const auto corr = correlation_function(cfb, xf, xt, times, c.rung_coupling);
      for (std::size_t k = 0; k < times.size(); ++k)
        EXPECT_NEAR(corr.values[k],
                    brute_force_correlation(c, static_cast<int>(xf) + 1, static_cast<int>(xt) + 1, times[k]), 1e-12);
    }
  }
}

TEST(Correlation, MatchesBruteForceAtL3) {
  const LadderConfig c = small(3);
  const auto cfb = chain_factorize_h0(c);
  // L = 3 has half-integer X; nL = X + 3/2.
  const auto corr = correlation_function(cfb, 0.5, 1.5, {0.0, 1.3, 4.0}, c.rung_coupling);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_NEAR(corr.values[k], brute_force_correlation(c, 2, 3, corr.times[k]), 1e-12);
}

TEST(Correlation, SelectionRule) {
  const auto cfb = chain_factorize_h0(small(4));
  for (auto [xf, xt] : {std::pair{0.0, 2.0}, std::pair{1.0, 1.0}, std::pair{2.0, 3.0}}) {
    const auto corr = correlation_function(cfb, xf, xt, {0.0, 1.0}, 0.2);
    EXPECT_EQ(corr.values[0], 0.0);
    EXPECT_EQ(corr.values[1], 0.0);
  }
}

TEST(Correlation, FactorizedEqualsBlockSum) {
  const LadderConfig c = small(5);
  const auto cfb = chain_factorize_h0(c);
  const auto times = make_grid(6.0, 0.5);
  for (auto [xf, xt] : {std::pair{0.5, 1.5}, std::pair{1.5, 0.5}, std::pair{-0.5, -1.5}}) {
    const auto a = correlation_function(cfb, xf, xt, times, 0.2);
    const auto b = correlation_from_block(dirac_rotate_v_block(cfb, xf, xt), times, 0.2);
    for (std::size_t k = 0; k < times.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-12);
  }
}

TEST(Correlation, InitialValueIsComputationalBasisNorm) {
  const LadderConfig c = small(8);
  const auto basis = build_basis(c);
  const auto part = build_projectors(basis);
  const auto vflip = build_v(basis, c, RungPart::flip_only);
  const auto cfb = chain_factorize_h0(c);
  for (int x = -3; x <= 3; ++x)
    for (int dir : {+1, -1}) {
      const auto& from = part.at_x(x);
      const int to_slot = part.slot(x + dir);
      double norm2 = 0.0;
      for (int i : from.indices)
        for (const auto& e : vflip.row(static_cast<std::size_t>(i)))
          if (part.block_of[static_cast<std::size_t>(e.column)] == to_slot) norm2 += e.value * e.value;
      const double expected = 2.0 * 0.04 / from.dimension() * norm2;
      const auto corr = correlation_function(cfb, x, x + dir, {0.0}, 0.2);
      EXPECT_NEAR(corr.values[0], expected, 1e-10 * expected);
    }
}

TEST(Correlation, InitialValueProportionalToNaiveShape) {
  const auto cfb = chain_factorize_h0(small(6));
  std::vector<double> ratios;
  for (int x = -2; x <= 2; ++x) {
    const auto corr = correlation_function(cfb, x, x + 1, {0.0}, 0.2);
    ratios.push_back(corr.values[0] / std::pow(0.5 - 2.0 * x / 12.0, 2));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LT((*hi - *lo) / *lo, 1e-10);
}

TEST(Correlation, BoundedByInitialValue) {
  const auto cfb = chain_factorize_h0(small(6));
  const auto corr = correlation_function(cfb, 0.0, 1.0, make_grid(20.0, 0.1), 0.2);
  EXPECT_GT(corr.values[0], 0.0);
  for (double v : corr.values) EXPECT_LE(std::abs(v), corr.values[0] * (1 + 1e-12));
}

TEST(InitialValue, ConventionConstantAtL4) {
  for (auto conv : {SpinConvention::half, SpinConvention::pauli})
    for (double kappa : {0.2, 0.15}) {
      LadderConfig c = small(4, kappa);
      c.convention = conv;
      const auto cfb = chain_factorize_h0(c);
      std::vector<CorrelationFunction> corrs;
      for (int x = -2; x <= 2; ++x)
        for (int dir : {+1, -1})
          if (cfb.admissible(x + dir)) corrs.push_back(correlation_function(cfb, x, x + dir, {0.0}, kappa));
      const auto rates = naive_rates(8, 0.7, kappa);
      const auto rep = check_initial_value(corrs, rates, c.flip_amplitude(), 1e-12);
      EXPECT_TRUE(rep.pass) << rep.explanation;
      EXPECT_EQ(rep.entries.size(), 8u);  // boundary pairs carry zero naive rate
      EXPECT_NEAR(rep.common, 2.0 * c.flip_amplitude() * c.flip_amplitude(), 1e-12);
      EXPECT_FALSE(rep.explanation.empty());
    }
}

TEST(Rates, TrapezoidAndRefusal) {
  CorrelationFunction c{0.0, 1.0, 0.2, make_grid(10.0, 0.01), {}};
  auto exact = [](double t) { return 1.5 * (1 - std::exp(-t / 5)); };
  for (double t : c.times) c.values.push_back(0.3 * std::exp(-t / 5));
  const auto r = tcl2_rates(c);
  EXPECT_EQ(r.values[0], 0.0);
  for (std::size_t k = 1; k <= 10; ++k) EXPECT_NEAR(r.values[k] / (0.3 * c.times[k]), 1.0, 0.02);
  EXPECT_NEAR(r.values.back(), exact(10.0), 1e-5);
  EXPECT_NEAR(r.at(2.005), exact(2.005), 1e-5);
  EXPECT_GE(r.quadrature_error, std::abs(r.values.back() - exact(10.0)));
  CorrelationFunction coarse{0.0, 1.0, 0.2, make_grid(10.0, 0.1), std::vector<double>(101, 1.0)};
  try {
    tcl2_rates(coarse);
    FAIL() << "expected refusal";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("0.05"), std::string::npos);
  }
}

TEST(Gamma, RecoversPlantedValue) {
  const double gamma = 0.61, kappa = 0.2;
  TclRateSet set;
  const auto times = make_grid(10.0, 0.01);
  for (int x = -2; x <= 2; ++x)
    for (int dir : {+1, -1}) {
      if (std::abs(x + dir) > 2) continue;
      // Triangle on [0, 1] with unit area: the trapezoid rule integrates it exactly.
      CorrelationFunction c{static_cast<double>(x), static_cast<double>(x + dir), kappa, times, {}};
      const double target = gamma * naive_rate_shape(16, kappa, x, dir);
      for (double t : times) c.values.push_back(t < 1.0 ? 2.0 * target * (1.0 - t) : 0.0);
      set.correlations.push_back(c);
      set.rates.push_back(tcl2_rates(c));
    }
  const auto fit = fit_gamma(set, 16, kappa);
  EXPECT_NEAR(fit.gamma, gamma, 1e-6);
  EXPECT_LT(fit.sample_dispersion, 1e-9);
  EXPECT_EQ(fit.pairs.size(), 8u);
  // Without a plateau the fit is refused.
  set.rates[0].values.assign(times.size(), 0.0);
  for (std::size_t k = 0; k < times.size(); ++k) set.rates[0].values[k] = 5.0 * times[k];
  EXPECT_THROW(fit_gamma(set, 16, kappa), NumericalError);
}

TEST(Gamma, LadderPlateauAndMirrorSymmetry) {
  const LadderConfig c = small(8);
  const auto cfb = chain_factorize_h0(c);
  const auto times = make_grid(10.0, 0.02);
  const auto set = compute_tcl_rates(cfb, {-2, -1, 0, 1, 2}, 0.2, times, 3.0, 10.0);
  const auto fit = fit_gamma(set, 16, 0.2);
  EXPECT_GT(fit.gamma, 0.0);
  EXPECT_LT(fit.sample_dispersion, 0.2);
  for (const auto& p : fit.pairs)
    for (const auto& q : fit.pairs)
      if (std::abs(p.x_from + q.x_from) < 1e-9 && std::abs(p.x_to + q.x_to) < 1e-9) {
        EXPECT_NEAR(p.plateau_ratio, q.plateau_ratio, 1e-9 * p.plateau_ratio);
      }
  const auto* r = set.find(0, 1);
  ASSERT_NE(r, nullptr);
  const auto* corr = set.find_correlation(0, 1);
  for (std::size_t k = 1; k <= 5; ++k) EXPECT_NEAR(r->values[k] / (corr->values[0] * times[k]), 1.0, 0.02);
}

TEST(TclMaster, PlateauModeMatchesConstantRates) {
  const LadderConfig c = small(8);
  const auto cfb = chain_factorize_h0(c);
  const std::vector<double> xs = {-4, -3, -2, -1, 0, 1, 2, 3, 4};
  const auto set = compute_tcl_rates(cfb, xs, 0.2, make_grid(10.0, 0.02), 3.0, 10.0);
  const auto times = make_grid(40.0, 0.5);
  const Eigen::VectorXd p0 = point_mass(xs, 1);
  const auto tcl = evolve_tcl_master(set, xs, p0, times, TclRateMode::plateau);
  const auto exact = evolve_master(master_generator(plateau_rate_table(set, 16, 0.2)), p0, times);
  EXPECT_LT((tcl.probabilities - exact.probabilities).cwiseAbs().maxCoeff(), 1e-8);
  const auto td = evolve_tcl_master(set, xs, p0, times, TclRateMode::time_dependent);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(td.probabilities.row(static_cast<Eigen::Index>(k)).sum(), 1.0, 1e-10);
    EXPECT_GE(td.probabilities.row(static_cast<Eigen::Index>(k)).minCoeff(), -1e-12);
  }
}
