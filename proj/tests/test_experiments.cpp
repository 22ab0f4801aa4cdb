#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spectral_lab/experiments.hpp"
#include "test_util.hpp"

using namespace spectral_lab;

namespace {

const std::vector<double> kEps{0.4, 0.3, 0.2, 0.15, 0.12};

SystemConfig small_config(const Potential& v) {
  SystemConfig c;
  c.grid = Grid1D(60.0, 1200);
  c.potential = v;
  return c;
}

const PreparedSystem& well() {
  static const PreparedSystem s = prepare_system(small_config(Potential::square_well(2.0, 1.0)), 0.8);
  return s;
}

const PreparedSystem& free_system() {
  static const PreparedSystem s = prepare_system(small_config(Potential::zero()), 0.8);
  return s;
}

}  // namespace

TEST(Functional, ParseAndName) {
  EXPECT_EQ(Functional::parse("t").name(), "t^1");
  EXPECT_EQ(Functional::parse("t^3").power, 3);
  EXPECT_EQ(Functional::parse(" t ^ 2 ").name(), "t^2");
  const Functional ind = Functional::parse("indicator(0.1, 0.5)");
  EXPECT_EQ(ind.kind, Functional::Kind::indicator);
  EXPECT_EQ(ind(0.3), 1.0);
  EXPECT_EQ(ind(0.6), 0.0);
  EXPECT_EQ(Functional::parse("log1m")(1.0), -kInfinity);
  EXPECT_THROW(Functional::parse("sin"), InputError);
  EXPECT_THROW(Functional::parse("t^0"), InputError);
  EXPECT_THROW(Functional::parse("indicator(0.5,0.1)"), InputError);
  EXPECT_THROW(Functional::parse("indicator(x,0.1)"), InputError);
}

TEST(Functional, ClosedFormsMatchQuadrature) {
  const std::vector<double> a{0.9, 0.4};
  for (const auto& f : {Functional::monomial(1), Functional::monomial(2), Functional::monomial(5)}) {
    EXPECT_NEAR(functional_limit_constant(f, a), limit_constant(f.map(), a), 1e-10) << f.name();
  }
  EXPECT_NEAR(functional_limit_constant(Functional::log1m(), a), logdet_constant(a).quadrature, 1e-10);
  EXPECT_EQ(functional_limit_constant(Functional::monomial(2), {0.0, 0.0}), 0.0);
}

TEST(Functional, IndicatorIsDensityMass) {
  // Mass of mu on (alpha, beta): sum over bands of arccosh(a / sqrt(c)) / pi^2 at both ends.
  auto tail = [](double a, double c) { return c < a * a ? std::acosh(a / std::sqrt(c)) / (kPi * kPi) : 0.0; };
  const std::vector<double> a{0.9, 0.4};
  for (auto [lo, hi] : std::vector<std::pair<double, double>>{{0.05, 0.5}, {0.2, 2.0}, {0.9, 1.0}}) {
    const double expected = tail(a[0], lo) - tail(a[0], hi) + tail(a[1], lo) - tail(a[1], hi);
    EXPECT_NEAR(functional_limit_constant(Functional::indicator(lo, hi), a), expected, 1e-14);
  }
  EXPECT_EQ(functional_limit_constant(Functional::indicator(0.9, 1.0), a), 0.0);
}

TEST(Functional, GammaConstants) {
  EXPECT_NEAR(functional_gamma_constant(Functional::monomial(2)), 1.0, 1e-10);
  EXPECT_THROW(functional_gamma_constant(Functional::log1m()), DomainError);
  // Indicator of (c, inf) counts eigenvalues above c.
  const double tau = kPi / std::cosh(kPi / 2);
  EXPECT_NEAR(functional_gamma_constant(Functional::indicator(tau, 10.0)), 1.0 / (2 * kPi), 1e-12);
}

TEST(FitTail, ExactLineAndErrors) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2.5 * v - 1.0);
  y[0] = 100.0;  // outside the tail
  const Regression r = fit_tail(x, y);
  EXPECT_NEAR(r.slope, 2.5, 1e-12);
  EXPECT_NEAR(r.intercept, -1.0, 1e-12);
  EXPECT_LE(r.max_residual, 1e-12);
  EXPECT_NEAR(r.residuals[0], 101.0 - 2.5, 1e-12);
  EXPECT_THROW(fit_tail({1, 2}, {1, 2}), InputError);
  EXPECT_THROW(fit_tail({1, 1, 1}, {1, 2, 3}), InputError);
  EXPECT_EQ(fit_tail({1, 2, 3}, {0, -kInfinity, 1}).slope, -kInfinity);
}

TEST(RequireDecreasing, NamesTheProblem) {
  EXPECT_NO_THROW(require_decreasing({0.3, 0.2, 0.1}, "x"));
  EXPECT_THROW(require_decreasing({0.1, 0.2, 0.05}, "x"), InputError);
  EXPECT_THROW(require_decreasing({}, "x"), InputError);
  EXPECT_THROW(require_decreasing({0.1, -0.2}, "x"), InputError);
}

TEST(PrepareSystem, ScatteringAtLambdaStar) {
  const PreparedSystem& s = well();
  ASSERT_EQ(s.amplitudes.size(), 2u);
  EXPECT_GE(s.amplitudes[0], s.amplitudes[1]);
  EXPECT_GT(s.amplitudes[0], 0.1);
  EXPECT_EQ(free_system().amplitudes[0], 0.0);
  EXPECT_THROW(prepare_system(small_config(Potential::zero()), 0.0), InputError);
}

TEST(SnapEps, AvoidsTies) {
  const PreparedSystem& s = well();
  const double mu = s.h0.eigenvalues()(30);
  const double eps = snap_eps(s, 1.0 - mu);
  EXPECT_NEAR(eps, 1.0 - mu, 1e-4);
  for (Index i = 0; i < s.h0.size(); ++i) EXPECT_GT(std::abs(s.h0.eigenvalues()(i) - (1.0 - eps)), 1e-8);
}

TEST(EpsilonSweep, FreeSystemIsIdenticallyZero) {
  const auto series = epsilon_sweep(free_system(), {Functional::monomial(1), Functional::monomial(2)}, kEps);
  for (const auto& s : series) {
    for (const auto& p : s.points) EXPECT_LE(std::abs(p.value), 1e-10);
    EXPECT_LE(std::abs(s.regression.slope), 1e-9);
    EXPECT_EQ(s.predicted_slope, 0.0);
  }
}

TEST(EpsilonSweep, RefusesShortOrUnresolvedSweeps) {
  EXPECT_THROW(epsilon_sweep(well(), {Functional::monomial(1)}, {0.4, 0.3}), InputError);
  EXPECT_THROW(epsilon_sweep(well(), {Functional::monomial(1)}, {0.3, 0.4, 0.2}), InputError);
  // Below two level spacings of the box.
  EXPECT_THROW(epsilon_sweep(well(), {Functional::monomial(1)}, {0.4, 0.3, 0.05}), InputError);
}

TEST(EpsilonSweep, TracesGrowAsEpsShrinks) {
  const auto series = epsilon_sweep(well(), {Functional::monomial(1)}, kEps);
  const auto& pts = series[0].points;
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].value, pts[i - 1].value - 1e-12);
  EXPECT_GT(series[0].regression.slope, 0.0);
  EXPECT_EQ(series[0].variant, "pi1");
  const auto pi2 = epsilon_sweep(well(), {Functional::monomial(1)}, kEps, SweepVariant::pi2);
  EXPECT_EQ(pi2[0].variant, "pi2");
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LE(pi2[0].points[i].value, pts[i].value + 1e-10);
}

TEST(GammaSweep, SlopesWithinTwoPercent) {
  const auto series = gamma_sweep({Functional::monomial(1), Functional::monomial(2), Functional::monomial(3)},
                                  {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}, 1.0);
  for (const auto& s : series) {
    EXPECT_NEAR(s.regression.slope, s.predicted_slope, 0.02 * s.predicted_slope) << s.f_descriptor;
  }
  EXPECT_THROW(gamma_sweep({Functional::monomial(1)}, {2.0, 1.5, 1.2}, 1.0), InputError);
}

TEST(SandwichCheck, HoldsForBothShapes) {
  for (double eps : {0.3, 0.15}) {
    EXPECT_TRUE(sandwich_check(well(), eps, {1, 2, 3}).pass) << eps;
    EXPECT_TRUE(sandwich_check(well(), eps, {1, 2, 3}, Regularizer::Shape::step).pass) << eps;
  }
  EXPECT_THROW(sandwich_check(well(), 0.2, {0.5}), InputError);
}

TEST(LocalizationCheck, FreeSystemAndUnboundedWindow) {
  const VerificationReport z = localization_check(free_system(), kEps, 0.5);
  EXPECT_TRUE(z.pass);
  for (const auto& v : z.measured["difference_q_power"]) EXPECT_LE(v.get<double>(), 1e-10);
  const VerificationReport inf = localization_check(well(), kEps, kInfinity);
  EXPECT_TRUE(inf.pass);
  for (const auto& v : inf.measured["difference_q_power"]) EXPECT_LE(v.get<double>(), 1e-10);
}

TEST(FactorizationCheck, TwoByTwo) {
  Matrix h0(2, 2);
  h0 << -1.0, 0.0, 0.0, 1.0;
  const FactorizedPerturbation pert(Matrix::Identity(2, 2), SymmetricOperator(Matrix::Constant(2, 2, 0.3)));
  const VerificationReport r = factorization_check(SymmetricOperator(h0), pert, 0.5, 10.0);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.measured["max_discrepancy"].get<double>(), 1e-12);
  EXPECT_EQ(r.measured["pairs"].get<int>(), 1);
}

TEST(FactorizationCheck, ZeroPerturbationIsVacuousOrExact) {
  Matrix h0(2, 2);
  h0 << -1.0, 0.0, 0.0, 1.0;
  const FactorizedPerturbation pert(Matrix::Identity(2, 2), SymmetricOperator(Matrix::Zero(2, 2)));
  const VerificationReport r = factorization_check(SymmetricOperator(h0), pert, 0.5, 10.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.measured["max_discrepancy"].get<double>(), 0.0);

  // No H0 eigenvalue in (-delta, -eps): nothing to compare.
  const VerificationReport v = factorization_check(SymmetricOperator(Matrix::Identity(2, 2)), pert, 0.5, 10.0);
  EXPECT_TRUE(v.pass);
  ASSERT_EQ(v.notes.size(), 1u);
  EXPECT_EQ(v.notes[0], "vacuous (0 = 0)");
}

TEST(FactorizationCheck, RandomInstances) {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> dims(4, 30);
  for (int k = 0; k < 30; ++k) {
    const int n = dims(rng), m = dims(rng);
    const SymmetricOperator h0(testutil::random_symmetric(rng, n) * 3.0);
    const FactorizedPerturbation pert(testutil::random_matrix(rng, m, n) * 0.3,
                                      SymmetricOperator(testutil::random_symmetric(rng, m)));
    const VerificationReport r = factorization_check(h0, pert, 0.5, 10.0);
    EXPECT_TRUE(r.pass) << k << " " << r.measured.dump();
  }
  EXPECT_THROW(FactorizedPerturbation(Matrix::Identity(3, 2), SymmetricOperator(Matrix::Identity(2, 2))),
               InputError);
}

TEST(ToyKernel, ConstantFamilyHasZeroDifference) {
  ToyFlowModel m = ToyFlowModel::random(5);
  m.e.setZero();
  m.e0.setZero();
  const VerificationReport r = toy_kernel_check(m, {1e-2, 1e-3, 1e-4, 1e-5}, 1.0);
  EXPECT_TRUE(r.pass) << r.measured.dump();
  for (const auto& fam : r.measured["families"])
    for (const auto& v : fam["difference_norm"]) EXPECT_EQ(v.get<double>(), 0.0);
  EXPECT_EQ(r.measured["holder_constant"].get<double>(), 0.0);
}

TEST(ToyKernel, RandomModelsPass) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const VerificationReport r = toy_kernel_check(ToyFlowModel::random(seed), {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}, 1.0);
    EXPECT_TRUE(r.pass) << seed << " " << r.measured.dump();
  }
  EXPECT_THROW(toy_kernel_check(ToyFlowModel::random(1), {1e-2}, 1.0), InputError);
  EXPECT_THROW(ToyFlowModel::random(1, 0), InputError);
}

TEST(Logdet, FreeSystemIsZero) {
  std::vector<LogdetPoint> pts;
  const VerificationReport r = logdet_experiment(free_system(), kEps, &pts);
  EXPECT_TRUE(r.pass);
  ASSERT_EQ(pts.size(), kEps.size());
  for (const auto& p : pts) {
    EXPECT_LE(std::abs(p.value), 1e-10);
    EXPECT_FALSE(p.singular_index.has_value());
  }
}

TEST(Logdet, SquareWellIsNegative) {
  std::vector<LogdetPoint> pts;
  const VerificationReport r = logdet_experiment(well(), kEps, &pts);
  for (const auto& p : pts) EXPECT_LT(p.value, 0.0);
  EXPECT_LT(r.predicted["logdet_constant"].get<double>(), 0.0);
}

TEST(VerificationReport, JsonShape) {
  VerificationReport r;
  r.name = "x";
  r.measured = {{"v", json_number(-kInfinity)}};
  const Json j = r.to_json();
  EXPECT_EQ(j["measured"]["v"], "-inf");
  EXPECT_FALSE(j.contains("notes"));
  EXPECT_EQ(json_numbers({1.0, std::nan("")})[1], "nan");
}
