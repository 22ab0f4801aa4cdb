#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "spectral_lab/hankel_model.hpp"
#include "test_util.hpp"

using namespace spectral_lab;

TEST(GammaKernel, Examples) {
  EXPECT_DOUBLE_EQ(gamma_kernel(0.0, 1.0, 2.0), 1.0);
  EXPECT_NEAR(gamma_kernel(1e-14, 1.0, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(gamma_kernel(1.0, 1.0, 2.0), std::exp(-1.0) - std::exp(-2.0), 1e-15);
  EXPECT_NEAR(gamma_kernel(1.0, 1.0, 2.0), 0.232544, 1e-6);
  for (double t : {0.0, 0.3, 7.0}) EXPECT_EQ(gamma_kernel(t, 0.5, 0.5), 0.0);
  EXPECT_THROW(gamma_kernel(1.0, 2.0, 1.0), InputError);
}

TEST(CarlemanSymbol, Examples) {
  EXPECT_DOUBLE_EQ(carleman_symbol(0.0), kPi);
  EXPECT_EQ(carleman_symbol(1e6), 0.0);
  EXPECT_EQ(carleman_symbol(-1e6), 0.0);
  EXPECT_NEAR(carleman_symbol(1.0), 0.271015, 1e-6);
  EXPECT_NEAR(carleman_symbol(1.0), kPi / std::cosh(kPi), 1e-15);
}

TEST(HankelModel, Validation) {
  EXPECT_THROW(HankelModel(2.0, 1.0, 10), InputError);
  EXPECT_THROW(HankelModel(0.0, 1.0, 10), InputError);
  EXPECT_THROW(HankelModel(0.1, 1.0, 1), InputError);
  const HankelModel m = HankelModel::with_spacing(1e-6, 1.0, 0.02);
  EXPECT_LE(m.spacing(), 0.02);
  EXPECT_GT(HankelModel(1e-6, 1.0, m.n_grid() - 1).spacing(), 0.02);
}

TEST(GammaOperator, SpectrumInZeroPi) {
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const Vector ev = gamma_eigenvalues(HankelModel::with_spacing(eps, 1.0, 0.05));
    EXPECT_GE(ev.minCoeff(), -1e-10);
    EXPECT_LE(ev.maxCoeff(), kPi);
  }
}

TEST(GammaOperator, TraceIsHalfLogRatio) {
  const HankelModel m = HankelModel::with_spacing(1e-6, 1.0, 0.02);
  const double tr = build_gamma_operator(m).matrix().trace();
  EXPECT_NEAR(tr, 6.907755, 1e-3);
  EXPECT_NEAR(tr, 0.5 * std::log(1e6), 1e-12);
  EXPECT_NEAR(gamma_trace_moment(m, 1.0), 6.907755, 1e-3);
}

TEST(GammaOperator, EmptyWindowAndCoarseGrid) {
  const SymmetricOperator z = build_gamma_operator(HankelModel(0.5, 0.5, 10));
  EXPECT_EQ(z.max_abs(), 0.0);
  EXPECT_EQ(gamma_trace_moment(HankelModel(0.5, 0.5, 10), 2.0), 0.0);
  try {
    build_gamma_operator(HankelModel(1e-6, 1.0, 20));
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("n_grid"), std::string::npos);
  }
}

TEST(LaplaceMatrix, TopSingularValueOnDefaultGrid) {
  Eigen::BDCSVD<Matrix> svd(build_laplace_matrix(LaplaceGrid::default_grid()));
  const double s = svd.singularValues()(0);
  EXPECT_NEAR(s, std::sqrt(kPi), 0.01 * std::sqrt(kPi));
  // L is symmetric PSD here, so ||L^2|| = ||L||^2.
  EXPECT_NEAR(s * s, kPi, 0.02 * kPi);
}

TEST(LaplaceMatrix, FourHundredNodeGridApproachesFromBelow) {
  // [1e-6, 1e6] truncates the Mellin symbol; the norm sits about 3% under sqrt(pi).
  Eigen::BDCSVD<Matrix> svd(build_laplace_matrix(LaplaceGrid::log_uniform(1e-6, 1e6, 400)));
  const double s = svd.singularValues()(0);
  EXPECT_LE(s, std::sqrt(kPi));
  EXPECT_GE(s, 0.97 * std::sqrt(kPi));
}

TEST(LaplaceMatrix, ZeroWeightsGiveZeroOperator) {
  const LaplaceGrid g({0.5, 1.0, 2.0}, {0.0, 0.0, 0.0});
  EXPECT_EQ(build_laplace_matrix(g).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(LaplaceGrid({1.0, 0.5}, {1.0, 1.0}), InputError);
}

TEST(Constants, GammaMomentConstant) {
  EXPECT_NEAR(gamma_moment_constant(1.0), 0.5, 1e-10);
  EXPECT_NEAR(gamma_moment_constant(2.0), 1.0, 1e-10);
  EXPECT_NEAR(gamma_moment_constant(3.0), kPi * kPi / 4.0, 1e-10);
  EXPECT_NEAR(gamma_moment_constant(4.0), 2.0 * kPi * kPi / 3.0, 1e-10);
  EXPECT_THROW(gamma_moment_constant(0.5), InputError);
}

TEST(Constants, PiMomentConstant) {
  EXPECT_NEAR(pi_moment_constant(1), 1.0 / (kPi * kPi), 1e-15);
  EXPECT_NEAR(pi_moment_constant(1), 0.1013212, 1e-7);
  EXPECT_NEAR(pi_moment_constant(2), 0.0675475, 1e-7);
  EXPECT_NEAR(pi_moment_constant(3), 0.0540380, 1e-7);
  for (int n = 1; n <= 8; ++n) EXPECT_NEAR(pi_moment_constant(n), pi_moment_constant_quadrature(n), 1e-10) << n;
  // Large n switches to lgamma; the sequence is smooth across the switch.
  EXPECT_NEAR(pi_moment_constant(81) / pi_moment_constant(80), std::sqrt(80.0 / 81.0), 1e-3);
  EXPECT_THROW(pi_moment_constant(0), InputError);
}

TEST(GammaTraceMoment, LogSlopes) {
  // Slopes between eps = 1e-6 and 1e-8 reproduce the limit constants.
  auto slope = [](double q) {
    const double a = gamma_trace_moment(HankelModel::with_spacing(1e-6, 1.0, 0.02), q);
    const double b = gamma_trace_moment(HankelModel::with_spacing(1e-8, 1.0, 0.02), q);
    return (b - a) / (std::log(1e8) - std::log(1e6));
  };
  EXPECT_NEAR(slope(2.0), 1.0, 0.02);
  EXPECT_NEAR(slope(4.0), 2.0 * kPi * kPi / 3.0, 0.02 * 2.0 * kPi * kPi / 3.0);
  EXPECT_THROW(gamma_trace_moment(HankelModel(0.1, 1.0, 100), 0.5), InputError);
}

TEST(GammaTraceMoment, BerezinLiebOneSidedBound) {
  for (double q : {1.0, 1.5, 2.0, 3.0, 4.0}) {
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      const HankelModel m = HankelModel::with_spacing(eps, 1.0, 0.02);
      EXPECT_LE(gamma_trace_moment(m, q), m.log_length() * gamma_moment_constant(q) * 1.02) << q << " " << eps;
    }
  }
}

TEST(EigenCounting, PredictedSlopeAndCount) {
  const double tau = kPi / std::cosh(kPi / 2);
  const HankelModel m = HankelModel::with_spacing(1e-8, 1.0, 0.02);
  const EigenCount c = gamma_eigen_counting(m, tau);
  EXPECT_NEAR(c.predicted_slope, 1.0 / (2.0 * kPi), 1e-12);
  EXPECT_NEAR(c.count / std::abs(std::log(1e-8)), c.predicted_slope, 0.1 * c.predicted_slope);
  EXPECT_LT(gamma_eigen_counting(m, kPi * (1 - 1e-9)).predicted_slope, 1e-3);
  EXPECT_EQ(gamma_eigen_counting(m, 4.0).predicted_slope, 0.0);
  EXPECT_EQ(gamma_eigen_counting(m, 4.0).count, 0);
}

TEST(HankelBound, ScalarIndicatorIsEqualityAtQOne) {
  OperatorFamily one{1e-4, 1.0, 1, [](double) { return Matrix::Ones(1, 1); }};
  const HankelBoundReport r = hankel_schatten_bound_check(one, 1.0);
  EXPECT_NEAR(r.lhs, 0.5 * std::log(1e4), 1e-8);
  EXPECT_NEAR(r.rhs, 0.5 * std::log(1e4), 1e-12);
  EXPECT_NEAR(r.ratio, 1.0, 1e-9);
  EXPECT_TRUE(r.pass);
}

TEST(HankelBound, ZeroSigma) {
  OperatorFamily zero{1e-3, 1.0, 2, [](double) { return Matrix::Zero(2, 2); }};
  const HankelBoundReport r = hankel_schatten_bound_check(zero, 2.0);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(HankelBound, RandomThreeByThreeFamilies) {
  std::mt19937_64 rng(43);
  for (int k = 0; k < 10; ++k) {
    const Matrix a = testutil::random_matrix(rng, 3, 3);
    const Matrix b = testutil::random_matrix(rng, 3, 3);
    OperatorFamily f{1e-2, 3.0, 3, [a, b](double l) -> Matrix {
                       const Matrix s = a * a.transpose() + std::sqrt(l) * b * b.transpose();
                       return s;
                     }};
    const HankelBoundReport r = hankel_schatten_bound_check(f, 2.0);
    EXPECT_LE(r.ratio, 1.0) << k;
  }
}

TEST(HankelBound, UnboundedSigmaRejected) {
  OperatorFamily inf{1e-3, 1.0, 1, [](double) { return Matrix::Constant(1, 1, kInfinity); }};
  EXPECT_THROW(hankel_schatten_bound_check(inf, 1.0), InputError);
  // The window must stay away from 0.
  OperatorFamily open{0.0, 1.0, 1, [](double) { return Matrix::Ones(1, 1); }};
  EXPECT_THROW(hankel_schatten_bound_check(open, 1.0), InputError);
}

TEST(Commutator, BoundedByFourLogTwo) {
  const CommutatorReport r = commutator_hs_check(HankelModel::with_spacing(1e-4, 1.0, 0.05));
  EXPECT_NEAR(r.bound, 4.0 * std::numbers::ln2, 1e-15);
  EXPECT_LE(r.value, 2.78);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(commutator_hs_check(HankelModel(0.5, 0.5, 10)).value, 0.0);
}

TEST(Commutator, GrowsAndSaturates) {
  double previous = 0.0;
  for (double eps : {0.5, 1e-1, 1e-2, 1e-4, 1e-8}) {
    const CommutatorReport r = commutator_hs_check(HankelModel::with_spacing(eps, 1.0, 0.05));
    EXPECT_GE(r.value, previous - 1e-9);
    EXPECT_LE(r.value, r.bound + 1e-2);
    EXPECT_NEAR(r.value, r.continuum, 5e-3);
    previous = r.value;
  }
}

TEST(LaptevSafarov, EqualityCase) {
  Matrix p = Matrix::Zero(2, 2);
  p(0, 0) = 1.0;
  Matrix b = Matrix::Zero(2, 2);
  b(0, 1) = b(1, 0) = 1.0;
  const auto r = laptev_safarov_check(SymmetricOperator(p), SymmetricOperator(b),
                                      {[](double t) { return t * t; }, [](double) { return 2.0; }});
  EXPECT_NEAR(r.lhs, 1.0, 1e-14);
  EXPECT_NEAR(r.rhs, 1.0, 1e-14);
  EXPECT_TRUE(r.pass);
}

TEST(LaptevSafarov, IdentityProjectorGivesZero) {
  std::mt19937_64 rng(47);
  const SymmetricOperator b(testutil::random_symmetric(rng, 6));
  const auto r = laptev_safarov_check(SymmetricOperator::identity(6), b,
                                      {[](double t) { return std::sin(t); }, [](double t) { return -std::sin(t); }});
  EXPECT_NEAR(r.lhs, 0.0, 1e-12);
}

TEST(LaptevSafarov, RandomCubic) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 50; ++k) {
    const Index n = std::uniform_int_distribution<Index>(2, 30)(rng);
    const Index rank = std::uniform_int_distribution<Index>(1, n - 1)(rng);
    const Matrix q = testutil::random_orthogonal(rng, n);
    const Matrix p = q.leftCols(rank) * q.leftCols(rank).transpose();
    const SymmetricOperator b(testutil::random_symmetric(rng, n, 0.3));
    const auto r = laptev_safarov_check(SymmetricOperator(p), b,
                                        {[](double t) { return t * t * t; }, [](double t) { return 6.0 * t; }});
    EXPECT_TRUE(r.pass) << r.lhs << " > " << r.rhs;
  }
}

TEST(LaptevSafarov, RejectsNonProjector) {
  EXPECT_THROW(laptev_safarov_check(SymmetricOperator::diagonal(Vector::Constant(2, 0.5)),
                                    SymmetricOperator::identity(2),
                                    {[](double t) { return t * t; }, [](double) { return 2.0; }}),
               InputError);
}

TEST(MomentTable, RowsAndColumns) {
  const auto rows = gamma_moment_table(1.0, {1e-3, 1e-4}, {1.0, 2.0});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].eps, 1e-3);
  EXPECT_EQ(rows[1].q, 2.0);
  EXPECT_NEAR(rows[0].trace, 0.5 * std::log(1e3), 1e-10);
  EXPECT_NEAR(rows[0].trace_over_ln, rows[0].trace / std::log(1e3), 1e-15);
  EXPECT_NEAR(rows[1].predicted_constant, 1.0, 1e-10);
}
