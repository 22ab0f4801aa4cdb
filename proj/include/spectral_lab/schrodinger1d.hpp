#pragma once

// Finite-difference H0 = -d^2/dx^2 and H = H0 + V on a Dirichlet box, a small
// potential catalog, and the projection products Pi^(1), Pi^(2) and the
// windowed Pi^(1).
//
// Projection products are stored compressed to ran 1_{(-inf, lambda - eps)}(H0)
// and written in the H0 eigenbasis. Pi vanishes on the orthogonal complement,
// so this matrix has exactly the nonzero spectrum of the full operator.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/linalg_spectral.hpp"

namespace spectral_lab {

/// Uniform grid on [-L, L] without the Dirichlet end points.
struct Grid1D {
  double half_length = 300.0;
  Index n_points = 6000;

  Grid1D() = default;
  Grid1D(double l, Index n) : half_length(l), n_points(n) {
    if (!(half_length > 0.0) || !std::isfinite(half_length)) {
      throw InputError("Grid1D: half_length must be > 0");
    }
    if (n_points < 3) throw InputError("Grid1D: n_points must be >= 3");
  }

  double spacing() const { return 2.0 * half_length / static_cast<double>(n_points + 1); }
  double x(Index i) const { return -half_length + spacing() * static_cast<double>(i + 1); }
};

/// Short-range potentials. A square well of depth d is V = -d on |x| < half_width;
/// the Gaussian is amplitude * exp(-(x / width)^2).
class Potential {
 public:
  enum class Kind { zero, square_well, gaussian };

  static Potential zero() { return Potential(Kind::zero, 0.0, 0.0); }
  static Potential square_well(double depth, double half_width) {
    if (!(half_width > 0.0) || !std::isfinite(depth)) {
      throw InputError("square_well: need finite depth and half_width > 0");
    }
    return Potential(Kind::square_well, depth, half_width);
  }
  static Potential gaussian(double amplitude, double width) {
    if (!(width > 0.0) || !std::isfinite(amplitude)) {
      throw InputError("gaussian: need finite amplitude and width > 0");
    }
    return Potential(Kind::gaussian, amplitude, width);
  }

  Kind kind() const { return kind_; }
  double strength() const { return a_; }
  double length() const { return b_; }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::square_well:
        return std::abs(x) < b_ ? -a_ : 0.0;
      case Kind::gaussian:
        return a_ * std::exp(-(x / b_) * (x / b_));
    }
    return 0.0;
  }

  // V vanishes (below 1e-18 |amplitude| for the Gaussian) outside [-R, R].
  double support_radius() const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::square_well:
        return b_;
      case Kind::gaussian:
        return b_ * std::sqrt(18.0 * std::log(10.0));
    }
    return 0.0;
  }

  // Every catalog entry is even in x, hence decays faster than any power.
  bool is_even() const { return true; }
  bool is_zero() const { return kind_ == Kind::zero || a_ == 0.0; }

  std::string kind_name() const {
    switch (kind_) {
      case Kind::zero:
        return "zero";
      case Kind::square_well:
        return "square_well";
      case Kind::gaussian:
        return "gaussian";
    }
    return "zero";
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind_name();
    if (kind_ == Kind::square_well) {
      j["depth"] = a_;
      j["half_width"] = b_;
    } else if (kind_ == Kind::gaussian) {
      j["amplitude"] = a_;
      j["width"] = b_;
    }
    return j;
  }

  bool operator==(const Potential&) const = default;

 private:
  Potential(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

  Kind kind_;
  double a_;
  double b_;
};

struct Hamiltonians {
  TridiagonalOperator h0;
  TridiagonalOperator h;
  Grid1D grid;
};

/// Three-point stencil for -d^2/dx^2 with Dirichlet ends; H = H0 + diag V(x_i).
/// When max_energy is given it must stay below 1/spacing^2 (a quarter of the
/// discrete band edge 4/spacing^2).
inline Hamiltonians build_hamiltonians(const Grid1D& g, const Potential& v,
                                       std::optional<double> max_energy = std::nullopt) {
  const double h = g.spacing();
  if (max_energy && *max_energy > 1.0 / (h * h)) {
    const auto need =
        static_cast<Index>(std::ceil(2.0 * g.half_length * std::sqrt(*max_energy))) + 1;
    throw InputError("build_hamiltonians: energy " + detail::fmt_double(*max_energy) +
                     " is too close to the band edge of the grid; use n_points >= " +
                     std::to_string(need));
  }
  Hamiltonians out{{Vector::Constant(g.n_points, 2.0 / (h * h)),
                    Vector::Constant(g.n_points - 1, -1.0 / (h * h))},
                   {},
                   g};
  out.h = out.h0;
  if (!v.is_zero()) {
    for (Index i = 0; i < g.n_points; ++i) out.h.diagonal(i) += v(g.x(i));
  }
  return out;
}

/// Piecewise-linear psi_eps^+ / psi_eps^- (or their step-function limit).
struct Regularizer {
  enum class Shape { piecewise_linear, step };

  double eps = 0.1;
  Shape shape = Shape::piecewise_linear;

  Regularizer(double e, Shape s = Shape::piecewise_linear) : eps(e), shape(s) {
    if (!(eps > 0.0)) throw InputError("Regularizer: eps must be > 0");
  }

  // 0 on (-inf, eps], 1 on [2 eps, inf).
  double plus(double x) const {
    if (shape == Shape::step) return x > eps + kEndpointTie ? 1.0 : 0.0;
    if (x <= eps) return 0.0;
    if (x >= 2.0 * eps) return 1.0;
    return (x - eps) / eps;
  }
  double minus(double x) const { return plus(-x); }

  std::string describe() const {
    return shape == Shape::step ? "step" : "piecewise_linear";
  }
};

/// A realized product of spectral projections (or of regularized cut-offs).
struct ProjectionProduct {
  enum class Variant { pi1, pi2, pi1_windowed };

  SymmetricOperator matrix;       // compressed to ran 1_{(-inf, lambda* - eps)}(H0)
  double lambda_star = 0.0;
  double eps = 0.0;
  std::optional<double> delta;    // pi1_windowed only
  Variant variant = Variant::pi1;
  std::string regularizer_shape;  // pi2 only
  Index ambient_dim = 0;          // dimension of the underlying space
  std::vector<std::string> warnings;

  Vector eigenvalues() const { return symmetric_eigenvalues(matrix.matrix()); }
};

namespace detail {

// Columns of the H0 decomposition spanning ran 1_{(-inf, lambda* - eps)}(H0).
inline std::vector<Index> lower_indices(const SpectralDecomposition& h0, double lambda_star,
                                        double eps) {
  const double edge = lambda_star - eps;
  if (!h0.complete() && h0.cutoff() < edge) {
    throw InputError("projection product: H0 decomposition stops at " +
                     fmt_double(h0.cutoff()) + ", below lambda* - eps = " + fmt_double(edge));
  }
  const SpectralWindow w = SpectralWindow::below(edge);
  return h0.select([&](double t) { return w.contains(t); });
}

// A^T g(H) A for orthonormal columns A. For a partial decomposition g must
// equal g_tail on (tail_start, inf) and the decomposition must reach tail_start.
inline Matrix compress(const SpectralDecomposition& hdec, const Matrix& a, const ScalarMap& g,
                       double g_tail, double tail_start) {
  const Matrix& q = hdec.eigenvectors();
  const Vector& mu = hdec.eigenvalues();
  const Matrix qa = q.transpose() * a;
  if (hdec.complete()) {
    Vector gv(mu.size());
    for (Index i = 0; i < mu.size(); ++i) gv(i) = g(mu(i));
    return qa.transpose() * gv.asDiagonal() * qa;
  }
  if (hdec.cutoff() < tail_start) {
    throw InputError("projection product: H decomposition stops at " + fmt_double(hdec.cutoff()) +
                     ", below " + fmt_double(tail_start));
  }
  Vector gv(mu.size());
  for (Index i = 0; i < mu.size(); ++i) gv(i) = g(mu(i)) - g_tail;
  return g_tail * (a.transpose() * a) + qa.transpose() * gv.asDiagonal() * qa;
}

inline void tie_warnings(const SpectralDecomposition& d, double edge, const std::string& name,
                         std::vector<std::string>& out) {
  for (Index i = 0; i < d.size(); ++i) {
    if (std::abs(d.eigenvalues()(i) - edge) <= 1e-9) {
      out.push_back(name + " eigenvalue " + fmt_double(d.eigenvalues()(i)) +
                    " lies within 1e-9 of the window edge " + fmt_double(edge));
    }
  }
}

inline void check_unit_interval(const ProjectionProduct& p) {
  const Vector ev = p.eigenvalues();
  if (ev.size() && (ev.minCoeff() < -1e-9 || ev.maxCoeff() > 1.0 + 1e-9)) {
    throw NumericalError("projection product: spectrum [" + fmt_double(ev.minCoeff()) + ", " +
                         fmt_double(ev.maxCoeff()) + "] leaves [0, 1]");
  }
}

inline SymmetricOperator as_operator(const Matrix& m) {
  if (m.rows() == 0) return SymmetricOperator::zero(1);
  return SymmetricOperator(m);
}

}  // namespace detail

/// Pi^(1) = 1_{(-inf, l-eps)}(H0) 1_{(l+eps, inf)}(H) 1_{(-inf, l-eps)}(H0).
inline ProjectionProduct build_pi1(const SpectralDecomposition& h0, const SpectralDecomposition& h,
                                   double lambda_star, double eps) {
  if (!(eps > 0.0)) throw InputError("build_pi1: eps must be > 0");
  ProjectionProduct p{SymmetricOperator::zero(1), lambda_star, eps, std::nullopt,
                      ProjectionProduct::Variant::pi1, "", h0.source_dim(), {}};
  detail::tie_warnings(h0, lambda_star - eps, "H0", p.warnings);
  detail::tie_warnings(h, lambda_star + eps, "H", p.warnings);
  const Matrix a = h0.columns(detail::lower_indices(h0, lambda_star, eps));
  if (a.cols() == 0) return p;
  const SpectralWindow upper = SpectralWindow::above(lambda_star + eps);
  p.matrix = detail::as_operator(detail::compress(
      h, a, [&](double t) { return upper.contains(t) ? 1.0 : 0.0; }, 1.0, lambda_star + eps));
  detail::check_unit_interval(p);
  return p;
}

/// Pi^(2) = psi^-(H0 - l) psi^+(H - l) psi^-(H0 - l).
inline ProjectionProduct build_pi2(const SpectralDecomposition& h0, const SpectralDecomposition& h,
                                   double lambda_star, const Regularizer& r) {
  const double eps = r.eps;
  ProjectionProduct p{SymmetricOperator::zero(1), lambda_star, eps, std::nullopt,
                      ProjectionProduct::Variant::pi2, r.describe(), h0.source_dim(), {}};
  detail::tie_warnings(h0, lambda_star - eps, "H0", p.warnings);
  detail::tie_warnings(h, lambda_star + eps, "H", p.warnings);
  const std::vector<Index> idx = detail::lower_indices(h0, lambda_star, eps);
  const Matrix a = h0.columns(idx);
  if (a.cols() == 0) return p;
  Vector outer(a.cols());
  for (std::size_t c = 0; c < idx.size(); ++c)
    outer(static_cast<Index>(c)) = r.minus(h0.eigenvalues()(idx[c]) - lambda_star);
  const Matrix inner = detail::compress(
      h, a, [&](double t) { return r.plus(t - lambda_star); }, 1.0, lambda_star + 2.0 * eps);
  p.matrix = detail::as_operator(outer.asDiagonal() * inner * outer.asDiagonal());
  detail::check_unit_interval(p);
  return p;
}

/// 1_{(l-delta, l-eps)}(H0) 1_{(l+eps, l+delta)}(H) 1_{(l-delta, l-eps)}(H0), in
/// the same compressed basis as build_pi1 so the two can be subtracted.
/// delta = +inf reproduces build_pi1.
inline ProjectionProduct build_pi1_windowed(const SpectralDecomposition& h0,
                                            const SpectralDecomposition& h, double lambda_star,
                                            double eps, double delta) {
  if (!(eps > 0.0)) throw InputError("build_pi1_windowed: eps must be > 0");
  if (!(eps < delta)) throw InputError("build_pi1_windowed: need eps < delta");
  ProjectionProduct p{SymmetricOperator::zero(1), lambda_star, eps, delta,
                      ProjectionProduct::Variant::pi1_windowed, "", h0.source_dim(), {}};
  detail::tie_warnings(h0, lambda_star - eps, "H0", p.warnings);
  detail::tie_warnings(h, lambda_star + eps, "H", p.warnings);
  const std::vector<Index> idx = detail::lower_indices(h0, lambda_star, eps);
  const Matrix a = h0.columns(idx);
  if (a.cols() == 0) return p;
  const SpectralWindow lower = SpectralWindow::open(lambda_star - delta, lambda_star - eps);
  Vector sel(a.cols());
  for (std::size_t c = 0; c < idx.size(); ++c)
    sel(static_cast<Index>(c)) = lower.contains(h0.eigenvalues()(idx[c])) ? 1.0 : 0.0;
  const SpectralWindow upper = SpectralWindow::open(lambda_star + eps, lambda_star + delta);
  const bool unbounded = std::isinf(delta);
  const Matrix inner = detail::compress(
      h, a, [&](double t) { return upper.contains(t) ? 1.0 : 0.0; }, unbounded ? 1.0 : 0.0,
      unbounded ? lambda_star + eps : lambda_star + delta);
  p.matrix = detail::as_operator(sel.asDiagonal() * inner * sel.asDiagonal());
  detail::check_unit_interval(p);
  return p;
}

/// Local level spacing of the free Dirichlet box near energy lambda.
inline double free_level_spacing(const Grid1D& g, double lambda) {
  return std::numbers::pi * std::sqrt(std::max(lambda, 0.0)) / g.half_length;
}

}  // namespace spectral_lab
