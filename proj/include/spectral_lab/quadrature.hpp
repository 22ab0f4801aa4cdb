#pragma once

// Thin wrappers over Boost.Math double-exponential quadrature plus the node
// rules used to discretize integral operators.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/linalg_spectral.hpp"

namespace spectral_lab::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

inline void require(const Result& r, double abs_tol, const std::string& what, double a, double b) {
  if (!std::isfinite(r.value) || r.error > abs_tol) {
    throw NumericalError("quadrature did not converge for " + what + " on [" +
                         spectral_lab::detail::fmt_double(a) + ", " +
                         spectral_lab::detail::fmt_double(b) + "]: last value " +
                         spectral_lab::detail::fmt_double(r.value) + ", error estimate " +
                         spectral_lab::detail::fmt_double(r.error));
  }
}

}  // namespace detail

/// Integral over a finite interval; integrable endpoint singularities are fine.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-12, const std::string& what = "integrand") {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> rule(15);
  Result r;
  double l1 = 0.0;
  r.value = rule.integrate(f, a, b, 1e-14, &r.error, &l1);
  detail::require(r, abs_tol, what, a, b);
  return r.value;
}

/// Integral over [a, b] of f(x, xc) where xc is the signed distance to the
/// nearer endpoint (a - x on the left half, b - x on the right half). Lets
/// integrands evaluate b - x without cancellation near a singular endpoint.
inline double integrate_with_complement(const std::function<double(double, double)>& f, double a,
                                        double b, double abs_tol = 1e-12,
                                        const std::string& what = "integrand") {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> rule(15);
  Result r;
  double l1 = 0.0;
  r.value = rule.integrate(f, a, b, 1e-14, &r.error, &l1);
  detail::require(r, abs_tol, what, a, b);
  return r.value;
}

/// Integral over [a, inf).
inline double integrate_to_infinity(const std::function<double(double)>& f, double a,
                                    double abs_tol = 1e-12,
                                    const std::string& what = "integrand") {
  boost::math::quadrature::exp_sinh<double> rule(12);
  Result r;
  double l1 = 0.0;
  r.value = rule.integrate([&](double x) { return f(a + x); }, 0.0, kInfinity, 1e-14, &r.error,
                           &l1);
  detail::require(r, abs_tol, what, a, kInfinity);
  return r.value;
}

/// Integral over the real line, split at `center`.
inline double integrate_real_line(const std::function<double(double)>& f, double abs_tol = 1e-12,
                                  const std::string& what = "integrand", double center = 0.0) {
  const double right = integrate_to_infinity(f, center, abs_tol / 2, what);
  const double left =
      integrate_to_infinity([&](double x) { return f(2.0 * center - x); }, center, abs_tol / 2,
                            what);
  return left + right;
}

/// Quadrature nodes and weights in some variable.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b] (Golub-Welsch).
inline Rule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw InputError("gauss_legendre: need n >= 1");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  Rule rule;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.nodes.push_back(mid + half * es.eigenvalues()(i));
    rule.weights.push_back(2.0 * v0 * v0 * half);
  }
  return rule;
}

/// Composite trapezoid rule with `n` equispaced nodes on [a, b] (n >= 2).
inline Rule trapezoid(int n, double a, double b) {
  if (n < 2) throw InputError("trapezoid: need n >= 2");
  Rule rule;
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(i + 1 == n ? b : a + i * h);
    rule.weights.push_back((i == 0 || i + 1 == n) ? 0.5 * h : h);
  }
  return rule;
}

}  // namespace spectral_lab::quad
