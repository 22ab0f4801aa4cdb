#pragma once

// The model Hankel operator with kernel gamma_eps(s + t), realized through its
// log-variable form (a windowed convolution with 1/(2 cosh((x-y)/2))), the
// Laplace transform matrix, the Carleman symbol, moment constants and the
// Schatten-class bound checks for operator-valued Hankel operators.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/linalg_spectral.hpp"
#include "spectral_lab/quadrature.hpp"

namespace spectral_lab {

inline constexpr double kPi = std::numbers::pi;

/// Parameters of Gamma_eps: spectral window (eps, delta) and the number of
/// nodes of the uniform grid on [ln eps, ln delta].
class HankelModel {
 public:
  HankelModel(double eps, double delta, Index n_grid) : eps_(eps), delta_(delta), n_grid_(n_grid) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InputError("HankelModel: delta must be > 0");
    if (!(eps > 0.0)) throw InputError("HankelModel: eps must be > 0");
    if (eps > delta) throw InputError("HankelModel: eps must not exceed delta");
    if (n_grid < 2) throw InputError("HankelModel: n_grid must be >= 2");
  }

  // Smallest grid with spacing <= max_spacing.
  static HankelModel with_spacing(double eps, double delta, double max_spacing) {
    if (!(max_spacing > 0.0)) throw InputError("HankelModel: max_spacing must be > 0");
    if (!(eps > 0.0) || !(delta > 0.0) || eps > delta) return HankelModel(eps, delta, 2);
    const double len = std::log(delta / eps);
    const auto n = static_cast<Index>(std::ceil(len / max_spacing - 1e-12)) + 1;
    return HankelModel(eps, delta, std::max<Index>(n, 2));
  }

  double eps() const { return eps_; }
  double delta() const { return delta_; }
  Index n_grid() const { return n_grid_; }
  double log_length() const { return std::log(delta_ / eps_); }
  double spacing() const { return log_length() / static_cast<double>(n_grid_ - 1); }
  bool empty() const { return eps_ == delta_; }

  quad::Rule grid() const {
    return quad::trapezoid(static_cast<int>(n_grid_), std::log(eps_), std::log(delta_));
  }

 private:
  double eps_;
  double delta_;
  Index n_grid_;
};

/// Positive nodes and weights of a quadrature rule on (0, inf).
struct LaplaceGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  LaplaceGrid(std::vector<double> x, std::vector<double> w) : nodes(std::move(x)), weights(std::move(w)) {
    if (nodes.empty() || nodes.size() != weights.size()) {
      throw InputError("LaplaceGrid: nodes and weights must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!(nodes[i] > 0.0)) throw InputError("LaplaceGrid: nodes must be positive");
      if (i > 0 && !(nodes[i] > nodes[i - 1])) throw InputError("LaplaceGrid: nodes must increase");
      if (weights[i] < 0.0) throw InputError("LaplaceGrid: weights must be nonnegative");
    }
  }

  // Trapezoid rule in ln x with `count` nodes on [lo, hi]; dx = x d(ln x).
  static LaplaceGrid log_uniform(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo)) throw InputError("LaplaceGrid: need 0 < lo < hi");
    const quad::Rule r = quad::trapezoid(count, std::log(lo), std::log(hi));
    std::vector<double> x(r.size()), w(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      x[i] = std::exp(r.nodes[i]);
      w[i] = r.weights[i] * x[i];
    }
    return LaplaceGrid(std::move(x), std::move(w));
  }

  // Default truncation used for norm checks: 800 nodes on [1e-12, 1e12].
  static LaplaceGrid default_grid() { return log_uniform(1e-12, 1e12, 800); }

  Index count() const { return static_cast<Index>(nodes.size()); }
};

/// gamma_eps(t) = (e^{-t eps} - e^{-t delta}) / t, with limit delta - eps at t = 0.
inline double gamma_kernel(double t, double eps, double delta) {
  if (eps > delta) throw InputError("gamma_kernel: eps must not exceed delta");
  if (t < 0.0) throw InputError("gamma_kernel: t must be >= 0");
  if (t == 0.0) return delta - eps;
  // e^{-t eps} (1 - e^{-t (delta - eps)}) / t, stable for small t.
  return std::exp(-t * eps) * (-std::expm1(-t * (delta - eps))) / t;
}

/// b(xi) = pi / cosh(pi xi), the symbol of convolution with 1/(2 cosh(x/2)).
inline double carleman_symbol(double xi) {
  const double a = kPi * std::abs(xi);
  if (a > 700.0) return 0.0;
  return kPi / std::cosh(a);
}

/// Convolution kernel 1/(2 cosh(z/2)) in the log variable.
inline double carleman_kernel(double z) { return 0.5 / std::cosh(0.5 * z); }

/// Nystrom matrix sqrt(w_i w_j) / (2 cosh((x_i - x_j)/2)) for a rule in the log variable.
inline Matrix carleman_matrix(const quad::Rule& rule) {
  const auto n = static_cast<Index>(rule.size());
  Matrix c(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = std::sqrt(rule.weights[i] * rule.weights[j]) *
                       carleman_kernel(rule.nodes[i] - rule.nodes[j]);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

/// Discretized Gamma_eps on the log grid of `m`. Requires spacing <= 0.05.
inline SymmetricOperator build_gamma_operator(const HankelModel& m) {
  if (m.empty()) return SymmetricOperator::zero(1);
  if (m.spacing() > 0.05) {
    const auto need = static_cast<Index>(std::ceil(m.log_length() / 0.05)) + 1;
    throw InputError("build_gamma_operator: grid spacing " + detail::fmt_double(m.spacing()) +
                     " exceeds 0.05; use n_grid >= " + std::to_string(need));
  }
  return SymmetricOperator(carleman_matrix(m.grid()));
}

/// sqrt(w_i w_j) exp(-x_i x_j): the Laplace transform as a symmetric quadrature matrix.
inline Matrix build_laplace_matrix(const LaplaceGrid& g) {
  const Index n = g.count();
  Matrix l(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = std::sqrt(g.weights[i] * g.weights[j]) * std::exp(-g.nodes[i] * g.nodes[j]);
      l(i, j) = v;
      l(j, i) = v;
    }
  }
  return l;
}

/// Spectrum of the discretized Gamma_eps, ascending.
inline Vector gamma_eigenvalues(const HankelModel& m) {
  return symmetric_eigenvalues(build_gamma_operator(m).matrix());
}

/// sum max(mu, 0)^q over a Gamma spectrum.
inline double clipped_power_sum(const Vector& eigenvalues, double q) {
  double s = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) s += std::pow(std::max(eigenvalues(i), 0.0), q);
  return s;
}

/// tr Gamma_eps^q of the discretized operator; negative noise is clipped at 0.
inline double gamma_trace_moment(const HankelModel& m, double q) {
  if (!(q >= 1.0)) throw InputError("gamma_trace_moment: q must be >= 1");
  if (m.empty()) return 0.0;
  return clipped_power_sum(gamma_eigenvalues(m), q);
}

/// (1/2 pi) integral f(pi / cosh(pi x)) dx: the |ln eps| slope of tr f(Gamma_eps).
inline double gamma_limit_constant(const ScalarMap& f) {
  return quad::integrate_real_line([&](double x) { return f(carleman_symbol(x)); }, 1e-12,
                                   "gamma_limit_constant") /
         (2.0 * kPi);
}

/// (1/2 pi) integral (pi / cosh(pi x))^q dx.
inline double gamma_moment_constant(double q) {
  if (!(q >= 1.0)) throw InputError("gamma_moment_constant: q must be >= 1");
  return gamma_limit_constant([q](double b) { return std::pow(b, q); });
}

/// (1/2 pi) integral cosh(pi x)^{-2n} dx = n ((n-1)!)^2 2^{2n} / (2 pi^2 (2n)!).
inline double pi_moment_constant(int n) {
  if (n < 1) throw InputError("pi_moment_constant: n must be >= 1");
  if (n <= 80) {
    const double g = std::tgamma(static_cast<double>(n));
    return n * g * g * std::pow(4.0, n) / std::tgamma(2.0 * n + 1.0) / (2.0 * kPi * kPi);
  }
  const double log_value = 2.0 * std::lgamma(static_cast<double>(n)) -
                           std::lgamma(2.0 * n + 1.0) + 2.0 * n * std::numbers::ln2;
  return n * std::exp(log_value) / (2.0 * kPi * kPi);
}

/// The defining integral of pi_moment_constant, by quadrature.
inline double pi_moment_constant_quadrature(int n) {
  if (n < 1) throw InputError("pi_moment_constant_quadrature: n must be >= 1");
  return quad::integrate_real_line(
             [n](double x) {
               const double c = std::cosh(kPi * x);
               return std::isinf(c) ? 0.0 : std::pow(c, -2.0 * n);
             },
             1e-13, "pi_moment_constant") /
         (2.0 * kPi);
}

struct EigenCount {
  Index count = 0;
  double predicted_slope = 0.0;
};

/// Number of Gamma_eps eigenvalues above tau, and the predicted |ln eps| slope
/// (1/pi^2) arccosh(pi / tau) from the level set of the symbol.
inline EigenCount gamma_eigen_counting(const HankelModel& m, double tau) {
  if (!(tau > 0.0)) throw InputError("gamma_eigen_counting: tau must be > 0");
  EigenCount out;
  out.predicted_slope = tau >= kPi ? 0.0 : std::acosh(kPi / tau) / (kPi * kPi);
  if (m.empty()) return out;
  const Vector ev = gamma_eigenvalues(m);
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tau) ++out.count;
  return out;
}

/// Matrix-valued function on a window [lo, hi] of (0, inf).
struct OperatorFamily {
  double lo = 0.0;
  double hi = 0.0;
  Index block_dim = 1;
  std::function<Matrix(double)> value;
};

struct SampledFamily {
  quad::Rule rule;  // nodes in ln(lambda), weights for d ln(lambda)
  std::vector<Matrix> samples;
};

inline SampledFamily sample_family(const OperatorFamily& sigma, const quad::Rule& log_rule) {
  SampledFamily out{log_rule, {}};
  for (double x : log_rule.nodes) {
    const double lambda = std::exp(x);
    Matrix s = sigma.value(lambda);
    if (s.rows() != sigma.block_dim || s.cols() != sigma.block_dim) {
      throw InputError("OperatorFamily: sample has wrong block size at lambda = " +
                       detail::fmt_double(lambda));
    }
    if (!s.allFinite()) {
      throw InputError("OperatorFamily: sigma is unbounded at lambda = " + detail::fmt_double(lambda));
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

/// The Hankel operator with kernel k(t) = int e^{-lambda t} sigma(lambda) d lambda,
/// written as (C^{1/2} (x) I) diag(sigma_i) (C^{1/2} (x) I) on the log-lambda rule.
/// With A the Laplace quadrature matrix, A A^T = C, so this has the same
/// nonzero singular values as A^T diag(sigma_i) A.
inline Matrix laplace_hankel_matrix(const SampledFamily& s) {
  const auto n = static_cast<Index>(s.rule.size());
  if (n == 0) return Matrix::Zero(1, 1);
  const Index b = s.samples.front().rows();
  const Matrix root = psd_sqrt(carleman_matrix(s.rule));
  Matrix root_sigma(n * b, n * b);
  Matrix root_full = Matrix::Zero(n * b, n * b);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      root_sigma.block(i * b, j * b, b, b) = root(i, j) * s.samples[j];
      root_full.block(i * b, j * b, b, b).diagonal().setConstant(root(i, j));
    }
  }
  return root_sigma * root_full;
}

/// Singular values of a Hankel matrix from laplace_hankel_matrix; symmetric
/// input (symmetric sigma) goes through the eigensolver.
inline Vector hankel_singular_values(const Matrix& k) {
  if ((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, k.cwiseAbs().maxCoeff())) {
    return symmetric_eigenvalues(k).cwiseAbs();
  }
  Eigen::BDCSVD<Matrix> svd(k);
  return svd.singularValues();
}

struct HankelBoundReport {
  double lhs = 0.0;    // ||K||_q^q
  double rhs = 0.0;    // pi^{q-1} int ||sigma||_q^q d lambda / (2 lambda)
  double ratio = 0.0;  // lhs / rhs (0 when both vanish)
  Index nodes = 0;
  bool pass = false;
};

/// Right side of the operator-valued Hankel bound on a sampled family.
inline double hankel_schatten_bound_rhs(const SampledFamily& s, double q) {
  double integral = 0.0;
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    Eigen::BDCSVD<Matrix> svd(s.samples[i]);
    integral += 0.5 * s.rule.weights[i] * schatten_power_from_singular_values(svd.singularValues(), q);
  }
  return std::pow(kPi, q - 1.0) * integral;
}

/// Compares ||K||_q^q with pi^{q-1} int ||sigma(lambda)||_q^q d lambda / (2 lambda)
/// for the Hankel operator whose kernel is the Laplace transform of sigma.
inline HankelBoundReport hankel_schatten_bound_check(const OperatorFamily& sigma, double q,
                                                     double max_spacing = 0.05) {
  if (!(q >= 1.0)) throw InputError("hankel_schatten_bound_check: q must be >= 1");
  if (!(sigma.lo > 0.0) || !(sigma.hi >= sigma.lo) || !std::isfinite(sigma.hi)) {
    throw InputError("hankel_schatten_bound_check: support window must satisfy 0 < lo <= hi < inf");
  }
  HankelBoundReport report;
  if (sigma.hi == sigma.lo) {
    report.pass = true;
    return report;
  }
  const double len = std::log(sigma.hi / sigma.lo);
  const int n = std::max(2, static_cast<int>(std::ceil(len / max_spacing - 1e-12)) + 1);
  const SampledFamily s = sample_family(sigma, quad::trapezoid(n, std::log(sigma.lo), std::log(sigma.hi)));
  report.nodes = n;
  report.lhs = schatten_power_from_singular_values(hankel_singular_values(laplace_hankel_matrix(s)), q);
  report.rhs = hankel_schatten_bound_rhs(s, q);
  report.ratio = report.rhs > 0.0 ? report.lhs / report.rhs : (report.lhs > 0.0 ? kInfinity : 0.0);
  report.pass = report.ratio <= 1.0 + 1e-3;
  return report;
}

struct CommutatorReport {
  double value = 0.0;       // ||[P, B]||_2^2 of the discretization
  double continuum = 0.0;   // int phi(z) / (4 cosh^2(z/2)) dz with phi = 2 min(|z|, len)
  double bound = 0.0;       // int |z| / (2 cosh^2(z/2)) dz = 4 ln 2
  bool pass = false;
};

/// Hilbert-Schmidt norm of [P, B] for P the indicator of (ln eps, ln delta) and
/// B the convolution with 1/(2 cosh(z/2)), on a cell-centred grid with the
/// spacing of `m` and a 40-unit margin on each side.
inline CommutatorReport commutator_hs_check(const HankelModel& m) {
  CommutatorReport r;
  r.bound = 4.0 * std::numbers::ln2;
  const double len = m.log_length();
  if (m.empty()) {
    r.pass = true;
    return r;
  }
  const auto inside = std::max<Index>(1, static_cast<Index>(std::llround(len / m.spacing())));
  const double h = len / static_cast<double>(inside);
  const auto margin = static_cast<Index>(std::ceil(40.0 / h));
  // Cells k = -margin .. inside + margin - 1, centres at (k + 1/2) h; inside cells are 0..inside-1.
  double sum = 0.0;
  for (Index i = 0; i < inside; ++i) {
    for (Index j = -margin; j < inside + margin; ++j) {
      if (j >= 0 && j < inside) continue;
      const double k = carleman_kernel(static_cast<double>(i - j) * h);
      sum += k * k;
    }
  }
  r.value = 2.0 * h * h * sum;
  // Closed form of the integral of 2 min(|z|, len) / (4 cosh^2(z/2)) over the real line.
  const double half = 0.5 * len;
  const double log_cosh = half + std::log1p(std::exp(-2.0 * half)) - std::numbers::ln2;
  r.continuum = 2.0 * len - 4.0 * log_cosh;
  r.pass = r.value <= r.bound + 1e-2;
  return r;
}

/// A C^2 scalar map together with its second derivative.
struct C2Function {
  ScalarMap f;
  ScalarMap second_derivative;
};

struct LaptevSafarovReport {
  double lhs = 0.0;            // |tr f(PBP) - tr P f(B) P|
  double rhs = 0.0;            // (1/2) ||f''||_inf ||P B (1-P)||_2^2
  double f2_sup = 0.0;
  double off_diagonal_hs = 0.0;
  bool pass = false;
};

/// Checks |tr f(PBP) - tr P f(B) P| <= (1/2) ||f''||_inf ||PB(1-P)||_2^2.
/// ||f''||_inf is sampled at 4096 points of [0, ||B||] and their mirror images.
inline LaptevSafarovReport laptev_safarov_check(const SymmetricOperator& p,
                                                const SymmetricOperator& b, const C2Function& f) {
  if (p.dim() != b.dim()) throw InputError("laptev_safarov_check: P and B differ in size");
  const Matrix& pm = p.matrix();
  if ((pm * pm - pm).cwiseAbs().maxCoeff() > 1e-9) {
    throw InputError("laptev_safarov_check: P is not a projector");
  }
  const SymmetricOperator pbp(pm * b.matrix() * pm);
  const double tr_compressed = trace_function(pbp, f.f);
  const SpectralDecomposition bdec = eigendecompose(b);
  const double tr_sandwich = (apply_function(bdec, f.f).matrix() * pm).trace();

  const Matrix off = pm * b.matrix() * (Matrix::Identity(p.dim(), p.dim()) - pm);
  LaptevSafarovReport r;
  r.off_diagonal_hs = off.squaredNorm();
  const double norm_b = bdec.eigenvalues().cwiseAbs().maxCoeff();
  constexpr int kSamples = 4096;
  for (int k = 0; k < kSamples; ++k) {
    const double t = norm_b * k / (kSamples - 1);
    r.f2_sup = std::max({r.f2_sup, std::abs(f.second_derivative(t)), std::abs(f.second_derivative(-t))});
  }
  r.lhs = std::abs(tr_compressed - tr_sandwich);
  r.rhs = 0.5 * r.f2_sup * r.off_diagonal_hs;
  r.pass = r.lhs <= r.rhs + 1e-9;
  return r;
}

struct MomentRow {
  double eps = 0.0;
  double delta = 0.0;
  double q = 0.0;
  double trace = 0.0;
  double trace_over_ln = 0.0;
  double predicted_constant = 0.0;
};

/// tr Gamma_eps^q for every (eps, q); one eigendecomposition per eps.
inline std::vector<MomentRow> gamma_moment_table(double delta, const std::vector<double>& eps_list,
                                                 const std::vector<double>& q_list,
                                                 double max_spacing = 0.02) {
  std::vector<double> constants;
  for (double q : q_list) constants.push_back(gamma_moment_constant(q));
  std::vector<MomentRow> rows;
  for (double eps : eps_list) {
    const HankelModel m = HankelModel::with_spacing(eps, delta, max_spacing);
    const Vector ev = m.empty() ? Vector::Zero(1) : gamma_eigenvalues(m);
    for (std::size_t k = 0; k < q_list.size(); ++k) {
      MomentRow row;
      row.eps = eps;
      row.delta = delta;
      row.q = q_list[k];
      row.trace = clipped_power_sum(ev, q_list[k]);
      row.trace_over_ln = row.trace / std::abs(std::log(eps));
      row.predicted_constant = constants[k];
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace spectral_lab
