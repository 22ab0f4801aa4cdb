#pragma once

// 2x2 scattering matrix of a 1D short-range potential by transfer matrices,
// its eigenphases and amplitudes a = |sin(theta/2)|, the limiting eigenvalue
// density mu(t) and the predicted trace and log-determinant constants.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/hankel_model.hpp"
#include "spectral_lab/quadrature.hpp"
#include "spectral_lab/schrodinger1d.hpp"

namespace spectral_lab {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

struct Eigenphases {
  std::array<double, 2> theta{};      // arg of the S-matrix eigenvalues, in (-pi, pi]
  std::array<double, 2> amplitude{};  // |sin(theta/2)|, descending
};

/// S = [[t, r'], [r, t]] acting on (incoming from the left, incoming from the right).
struct ScatteringData {
  double lambda = 0.0;
  double k = 0.0;
  Matrix2c s = Matrix2c::Identity();
  Complex transmission{1.0, 0.0};
  Complex reflection{0.0, 0.0};        // wave incident from the left
  Complex reflection_right{0.0, 0.0};  // wave incident from the right
  Eigenphases phases;
  Index cells = 0;

  double unitarity_defect() const {
    return (s.adjoint() * s - Matrix2c::Identity()).cwiseAbs().maxCoeff();
  }
};

/// Eigenvalues e^{i theta} of a unitary 2x2 matrix and a = |sin(theta/2)|,
/// ordered by descending amplitude.
inline Eigenphases eigenphases(const Matrix2c& s) {
  Eigen::ComplexEigenSolver<Matrix2c> es(s, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenphases: eigensolver failed");
  std::array<double, 2> th{std::arg(es.eigenvalues()(0)), std::arg(es.eigenvalues()(1))};
  Eigenphases out;
  std::array<double, 2> a{std::abs(std::sin(th[0] / 2)), std::abs(std::sin(th[1] / 2))};
  const int first = a[0] >= a[1] ? 0 : 1;
  out.theta = {th[first], th[1 - first]};
  out.amplitude = {a[first], a[1 - first]};
  return out;
}

namespace detail {

// Real transfer matrix of (psi, psi') across a cell of width d with constant V.
inline Eigen::Matrix2d cell_transfer(double k2_minus_v, double d) {
  Eigen::Matrix2d m;
  if (k2_minus_v > 0.0) {
    const double q = std::sqrt(k2_minus_v);
    const double c = std::cos(q * d), s = std::sin(q * d);
    m << c, s / q, -q * s, c;
  } else if (k2_minus_v < 0.0) {
    const double q = std::sqrt(-k2_minus_v);
    const double c = std::cosh(q * d), s = std::sinh(q * d);
    m << c, s / q, q * s, c;
  } else {
    m << 1.0, d, 0.0, 1.0;
  }
  return m;
}

inline Matrix2c plane_waves(double k, double x) {
  const Complex ip = std::exp(Complex(0.0, k * x));
  const Complex im = std::exp(Complex(0.0, -k * x));
  Matrix2c w;
  w << ip, im, Complex(0.0, k) * ip, Complex(0.0, -k) * im;
  return w;
}

inline ScatteringData smatrix_with_cells(const Potential& v, double lambda, Index cells) {
  ScatteringData out;
  out.lambda = lambda;
  out.k = std::sqrt(lambda);
  out.cells = cells;
  const double radius = v.support_radius();
  if (v.is_zero() || radius == 0.0) {
    out.phases = eigenphases(out.s);
    return out;
  }
  const double d = 2.0 * radius / static_cast<double>(cells);
  Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
  for (Index c = 0; c < cells; ++c) {
    const double mid = -radius + (static_cast<double>(c) + 0.5) * d;
    m = cell_transfer(lambda - v(mid), d) * m;
  }
  const Matrix2c t = plane_waves(out.k, radius).inverse() * m.cast<Complex>() *
                     plane_waves(out.k, -radius);
  out.reflection = -t(1, 0) / t(1, 1);
  out.transmission = 1.0 / t(1, 1);
  out.reflection_right = t(0, 1) / t(1, 1);
  out.s << out.transmission, out.reflection_right, out.reflection, out.transmission;
  out.phases = eigenphases(out.s);
  return out;
}

// (4 fine - coarse) / 3: removes the h^2 term of the midpoint cell error.
inline ScatteringData richardson(const ScatteringData& coarse, const ScatteringData& fine) {
  ScatteringData out = fine;
  auto ex = [](Complex c, Complex f) { return (4.0 * f - c) / 3.0; };
  out.transmission = ex(coarse.transmission, fine.transmission);
  out.reflection = ex(coarse.reflection, fine.reflection);
  out.reflection_right = ex(coarse.reflection_right, fine.reflection_right);
  out.s << out.transmission, out.reflection_right, out.reflection, out.transmission;
  out.phases = eigenphases(out.s);
  return out;
}

}  // namespace detail

/// S(lambda) by piecewise-constant transfer matrices across supp V. For smooth
/// potentials the cell count doubles and successive Richardson extrapolants
/// are compared until they agree to 1e-12.
inline ScatteringData transfer_matrix_smatrix(const Potential& v, double lambda,
                                              double initial_step = 0.01) {
  if (!(lambda > 0.0)) throw InputError("transfer_matrix_smatrix: lambda must be > 0");
  const double radius = v.support_radius();
  auto cells = std::max<Index>(1, static_cast<Index>(std::ceil(2.0 * radius / initial_step)));
  ScatteringData coarse = detail::smatrix_with_cells(v, lambda, cells);
  // A constant well is resolved exactly by any cell count.
  const bool piecewise_exact = v.kind() != Potential::Kind::gaussian;
  ScatteringData fine = coarse;
  if (!piecewise_exact) {
    constexpr Index kMaxCells = Index{1} << 20;
    ScatteringData mid = detail::smatrix_with_cells(v, lambda, 2 * cells);
    ScatteringData previous = detail::richardson(coarse, mid);
    for (;;) {
      cells *= 2;
      const ScatteringData next = detail::smatrix_with_cells(v, lambda, 2 * cells);
      fine = detail::richardson(mid, next);
      const double change = (fine.s - previous.s).cwiseAbs().maxCoeff();
      if (change <= 1e-12) break;
      if (2 * cells > kMaxCells) {
        throw NumericalError("transfer_matrix_smatrix: no convergence at lambda = " +
                             detail::fmt_double(lambda) + " (last change " +
                             detail::fmt_double(change) + ")");
      }
      mid = next;
      previous = fine;
    }
  }
  if (fine.unitarity_defect() > 1e-9) {
    throw NumericalError("transfer_matrix_smatrix: unitarity defect " +
                         detail::fmt_double(fine.unitarity_defect()) + " at lambda = " +
                         detail::fmt_double(lambda));
  }
  return fine;
}

/// |t(k)|^2 for the square well V = -depth on |x| < a:
/// 1/|t|^2 = 1 + depth^2 sin^2(2 k' a) / (4 k^2 k'^2), k' = sqrt(k^2 + depth).
inline double square_well_transmission(double depth, double half_width, double lambda) {
  const double k2 = lambda;
  const double kp2 = k2 + depth;
  if (kp2 > 0.0) {
    const double s = std::sin(2.0 * std::sqrt(kp2) * half_width);
    return 1.0 / (1.0 + depth * depth * s * s / (4.0 * k2 * kp2));
  }
  const double kappa = std::sqrt(-kp2);
  const double s = std::sinh(2.0 * kappa * half_width);
  return 1.0 / (1.0 + depth * depth * s * s / (4.0 * k2 * (-kp2)));
}

/// mu(t) = (1/2 pi^2) sum_l 1_{(0, a_l^2)}(t) / (t sqrt(1 - t / a_l^2)).
/// Bands whose edge a_l^2 is within 1e-12 of t are left out.
inline double limit_density(const std::vector<double>& amplitudes, double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw DomainError("limit_density: t = " + detail::fmt_double(t) + " is outside (0, 1)");
  }
  double sum = 0.0;
  for (double a : amplitudes) {
    const double top = a * a;
    if (t < top - 1e-12) sum += 1.0 / (t * std::sqrt(1.0 - t / top));
  }
  return sum / (2.0 * kPi * kPi);
}

/// (1/2 pi) sum_l integral f(a_l^2 / cosh^2(pi x)) dx.
inline double limit_constant(const ScalarMap& f, const std::vector<double>& amplitudes) {
  if (std::abs(f(0.0)) > 1e-14) throw ContractError("limit_constant: f(0) must vanish");
  double sum = 0.0;
  for (double a : amplitudes) {
    if (a == 0.0) continue;
    const double top = a * a;
    sum += quad::integrate_real_line(
        [&](double x) {
          const double c = std::cosh(kPi * x);
          return std::isinf(c) ? f(0.0) : f(top / (c * c));
        },
        1e-12, "limit_constant");
  }
  return sum / (2.0 * kPi);
}

/// integral_0^1 f(t) mu(t) dt, the density form of limit_constant.
inline double limit_constant_density_form(const ScalarMap& f, const std::vector<double>& amplitudes) {
  if (std::abs(f(0.0)) > 1e-14) throw ContractError("limit_constant: f(0) must vanish");
  double sum = 0.0;
  for (double a : amplitudes) {
    if (a == 0.0) continue;
    const double top = a * a;
    sum += quad::integrate_with_complement(
        [&](double t, double tc) {
          // Near the band edge use the exact distance top - t.
          const double gap = tc > 0.0 ? tc : top - t;
          if (t <= 0.0 || gap <= 0.0) return 0.0;
          return f(t) / (t * std::sqrt(gap / top));
        },
        0.0, top, 1e-12, "limit_density integral");
  }
  return sum / (2.0 * kPi * kPi);
}

struct LogdetConstant {
  double quadrature = 0.0;   // (1/2 pi) sum integral ln(1 - a^2 / cosh^2(pi x)) dx
  double closed_form = 0.0;  // -(1/pi^2) sum arcsin^2 a
};

namespace detail {

// ln(1 - a^2 / cosh^2 y) without cancellation near y = 0, a = 1.
inline double log_one_minus_sech2(double a, double y) {
  const double c = std::cosh(y);
  if (std::isinf(c)) return 0.0;
  const double s2 = a * a / (c * c);
  if (s2 <= 0.5) return std::log1p(-s2);
  const double sh = std::sinh(y);
  return std::log(sh * sh + (1.0 - a) * (1.0 + a)) - 2.0 * std::log(c);
}

}  // namespace detail

inline LogdetConstant logdet_constant(const std::vector<double>& amplitudes) {
  LogdetConstant out;
  for (double a : amplitudes) {
    if (!(a >= 0.0 && a <= 1.0)) throw InputError("logdet_constant: amplitudes must lie in [0, 1]");
    out.closed_form -= std::asin(a) * std::asin(a) / (kPi * kPi);
    if (a == 0.0) continue;
    auto g = [a](double x) { return detail::log_one_minus_sech2(a, kPi * x); };
    // Even integrand; log singularity at 0 when a = 1.
    // x = u^2 on [0, 1] tames the log singularity at 0 when a = 1.
    auto gu = [&g](double u) {
      const double v = g(u * u);
      return std::isfinite(v) ? 2.0 * u * v : 0.0;
    };
    const double half = quad::integrate(gu, 0.0, 1.0, 1e-12, "logdet integral") +
                        quad::integrate_to_infinity(g, 1.0, 1e-12, "logdet integral");
    out.quadrature += 2.0 * half / (2.0 * kPi);
  }
  return out;
}

/// -(1/pi^2) arcsin^2 a expanded as -sum_n (a^{2n} / n) pi_moment_constant(n).
inline double logdet_series(double a, int terms) {
  double sum = 0.0;
  for (int n = 1; n <= terms; ++n) sum -= std::pow(a, 2.0 * n) / n * pi_moment_constant(n);
  return sum;
}

struct ScatteringRow {
  double lambda = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double logdet_constant = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
};

/// One row of the scattering table: phases, amplitudes and predicted constants.
inline ScatteringRow scattering_row(const Potential& v, double lambda) {
  const ScatteringData d = transfer_matrix_smatrix(v, lambda);
  const std::vector<double> a{d.phases.amplitude[0], d.phases.amplitude[1]};
  ScatteringRow row;
  row.lambda = lambda;
  row.theta1 = d.phases.theta[0];
  row.theta2 = d.phases.theta[1];
  row.a1 = a[0];
  row.a2 = a[1];
  row.logdet_constant = logdet_constant(a).closed_form;
  // Closed-form moments: limit_constant(t^n) = sum a^{2n} pi_moment_constant(n).
  auto moment = [&](int n) {
    return (std::pow(a[0], 2.0 * n) + std::pow(a[1], 2.0 * n)) * pi_moment_constant(n);
  };
  row.delta1 = moment(1);
  row.delta2 = moment(2);
  row.delta3 = moment(3);
  return row;
}

}  // namespace spectral_lab
