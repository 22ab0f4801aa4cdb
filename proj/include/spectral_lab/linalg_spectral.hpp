#pragma once

// Dense real-symmetric spectral core: eigendecomposition, spectral projections,
// functional calculus, Schatten norms and the kernel-equivalence check
// C^T C ~ C C^T.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "spectral_lab/errors.hpp"

namespace spectral_lab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using ScalarMap = std::function<double(double)>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Eigenvalues this close to an open window endpoint are treated as outside.
inline constexpr double kEndpointTie = 1e-12;

/// Real symmetric matrix. The constructor symmetrizes (A + A^T)/2, which is
/// exactly symmetric in floating point because addition commutes.
class SymmetricOperator {
 public:
  explicit SymmetricOperator(const Matrix& entries) {
    if (entries.rows() != entries.cols()) {
      throw InputError("SymmetricOperator: matrix is " + std::to_string(entries.rows()) + "x" +
                       std::to_string(entries.cols()) + ", expected square");
    }
    if (entries.rows() < 1) throw InputError("SymmetricOperator: dim must be >= 1");
    entries_ = 0.5 * (entries + entries.transpose());
  }

  static SymmetricOperator zero(Index dim) { return SymmetricOperator(Matrix::Zero(dim, dim)); }
  static SymmetricOperator identity(Index dim) {
    return SymmetricOperator(Matrix::Identity(dim, dim));
  }
  static SymmetricOperator diagonal(const Vector& d) {
    return SymmetricOperator(Matrix(d.asDiagonal()));
  }

  Index dim() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

  bool all_finite() const { return entries_.allFinite(); }
  double max_abs() const { return entries_.cwiseAbs().maxCoeff(); }

 private:
  Matrix entries_;
};

/// Symmetric tridiagonal matrix: `diagonal` has n entries, `off_diagonal` n-1.
struct TridiagonalOperator {
  Vector diagonal;
  Vector off_diagonal;

  Index dim() const { return diagonal.size(); }

  SymmetricOperator dense() const {
    const Index n = dim();
    Matrix m = Matrix::Zero(n, n);
    m.diagonal() = diagonal;
    for (Index i = 0; i + 1 < n; ++i) {
      m(i, i + 1) = off_diagonal(i);
      m(i + 1, i) = off_diagonal(i);
    }
    return SymmetricOperator(m);
  }

  // Number of eigenvalues strictly below x (Sylvester inertia of T - x I).
  Index count_below(double x) const {
    Index count = 0;
    double q = 1.0;
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    for (Index i = 0; i < dim(); ++i) {
      const double b2 = i > 0 ? off_diagonal(i - 1) * off_diagonal(i - 1) : 0.0;
      q = diagonal(i) - x - (i > 0 ? b2 / q : 0.0);
      if (q == 0.0) q = -tiny;
      if (q < 0.0) ++count;
    }
    return count;
  }
};

/// Eigenvalues (ascending) and orthonormal eigenvectors. A decomposition is
/// `complete` when it spans the whole space; a partial one holds every
/// eigenpair with eigenvalue <= cutoff() and nothing above it.
class SpectralDecomposition {
 public:
  SpectralDecomposition(Vector eigenvalues, Matrix eigenvectors, Index source_dim,
                        double cutoff = kInfinity)
      : eigenvalues_(std::move(eigenvalues)),
        eigenvectors_(std::move(eigenvectors)),
        source_dim_(source_dim),
        cutoff_(cutoff) {
    if (source_dim_ < 1) throw InputError("SpectralDecomposition: source_dim must be >= 1");
    if (eigenvectors_.rows() != source_dim_ || eigenvectors_.cols() != eigenvalues_.size()) {
      throw InputError("SpectralDecomposition: eigenvector matrix has wrong shape");
    }
    for (Index i = 1; i < eigenvalues_.size(); ++i) {
      if (eigenvalues_(i) < eigenvalues_(i - 1)) {
        throw NumericalError("SpectralDecomposition: eigenvalues not ascending");
      }
    }
    if (complete() && cutoff_ != kInfinity) cutoff_ = kInfinity;
  }

  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  Index source_dim() const { return source_dim_; }
  Index size() const { return eigenvalues_.size(); }
  bool complete() const { return eigenvalues_.size() == source_dim_; }
  double cutoff() const { return cutoff_; }

  // Indices of eigenvalues accepted by `pred`, in ascending eigenvalue order.
  template <class Pred>
  std::vector<Index> select(Pred&& pred) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (pred(eigenvalues_(i))) out.push_back(i);
    return out;
  }

  Matrix columns(const std::vector<Index>& idx) const {
    Matrix out(source_dim_, static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = eigenvectors_.col(idx[c]);
    return out;
  }

 private:
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Index source_dim_;
  double cutoff_;
};

/// Interval of the real line with independently open or closed ends.
struct SpectralWindow {
  double lo = -kInfinity;
  double hi = kInfinity;
  bool lo_open = true;
  bool hi_open = true;

  static SpectralWindow open(double lo, double hi) {
    if (!(lo < hi)) throw InputError("SpectralWindow: need lo < hi");
    return {lo, hi, true, true};
  }
  static SpectralWindow closed(double lo, double hi) {
    if (!(lo < hi)) throw InputError("SpectralWindow: need lo < hi");
    return {lo, hi, false, false};
  }
  static SpectralWindow below(double x) { return open(-kInfinity, x); }
  static SpectralWindow above(double x) { return open(x, kInfinity); }
  static SpectralWindow whole_line() { return {}; }

  bool contains(double t) const {
    const bool lo_ok = lo_open ? t > lo + kEndpointTie : t >= lo - kEndpointTie;
    const bool hi_ok = hi_open ? t < hi - kEndpointTie : t <= hi + kEndpointTie;
    return lo_ok && hi_ok;
  }
};

/// Schatten exponent q >= 1, or the operator norm (q = infinity).
class SchattenIndex {
 public:
  explicit SchattenIndex(double q) : q_(q) {
    if (!(q >= 1.0)) throw InputError("SchattenIndex: q must be >= 1, got " + std::to_string(q));
  }
  static SchattenIndex infinity() { return SchattenIndex(kInfinity); }

  double value() const { return q_; }
  bool is_infinite() const { return std::isinf(q_); }

 private:
  double q_;
};

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double lapack_abstol() { return 2.0 * LAPACKE_dlamch('S'); }

}  // namespace detail

/// Full eigendecomposition of a dense symmetric operator.
inline SpectralDecomposition eigendecompose(const SymmetricOperator& a) {
  if (!a.all_finite()) throw InputError("eigendecompose: operator has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigendecompose: symmetric eigensolver did not converge (dim " +
                         std::to_string(a.dim()) + ", max|a| " + detail::fmt_double(a.max_abs()) +
                         ")");
  }
  return SpectralDecomposition(solver.eigenvalues(), solver.eigenvectors(), a.dim());
}

/// Eigenpairs of a symmetric tridiagonal operator with eigenvalue <= cutoff
/// (all of them when cutoff is +inf). Uses LAPACK dstevr (MRRR).
inline SpectralDecomposition eigendecompose(const TridiagonalOperator& t,
                                            double cutoff = kInfinity) {
  const Index n = t.dim();
  if (n < 1) throw InputError("eigendecompose: empty tridiagonal operator");
  if (t.off_diagonal.size() != n - 1) {
    throw InputError("eigendecompose: off-diagonal must have dim-1 entries");
  }
  if (!t.diagonal.allFinite() || !t.off_diagonal.allFinite()) {
    throw InputError("eigendecompose: operator has non-finite entries");
  }

  Vector d = t.diagonal;
  Vector e(std::max<Index>(n, 1));
  e.head(n - 1) = t.off_diagonal;
  e(n - 1) = 0.0;

  const bool all = std::isinf(cutoff);
  const Index capacity = all ? n : std::min<Index>(n, t.count_below(cutoff) + 2);
  if (capacity == 0) return SpectralDecomposition(Vector(0), Matrix(n, 0), n, cutoff);

  // Gershgorin lower bound for the value range (vl, cutoff].
  double lower = kInfinity;
  for (Index i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.off_diagonal(i - 1));
    if (i + 1 < n) r += std::abs(t.off_diagonal(i));
    lower = std::min(lower, t.diagonal(i) - r);
  }
  lower -= 1.0 + std::abs(lower) * 1e-12;

  Vector w(n);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> z(n, std::max<Index>(capacity, 1));
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max<Index>(capacity, 1)));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dstevr(
      LAPACK_COL_MAJOR, 'V', all ? 'A' : 'V', static_cast<lapack_int>(n), d.data(), e.data(),
      lower, all ? 0.0 : cutoff, 0, 0, detail::lapack_abstol(), &found, w.data(), z.data(),
      static_cast<lapack_int>(n), isuppz.data());
  if (info != 0) {
    throw NumericalError("eigendecompose: dstevr failed with info = " + std::to_string(info) +
                         " (dim " + std::to_string(n) + ")");
  }
  if (found > capacity) throw NumericalError("eigendecompose: dstevr returned too many eigenpairs");
  return SpectralDecomposition(w.head(found), z.leftCols(found), n, cutoff);
}

inline Vector map_eigenvalues(const Vector& values, const ScalarMap& f) {
  Vector out(values.size());
  for (Index i = 0; i < values.size(); ++i) {
    const double v = f(values(i));
    if (!std::isfinite(v)) {
      throw DomainError("apply_function: f is not finite at eigenvalue " +
                        detail::fmt_double(values(i)));
    }
    out(i) = v;
  }
  return out;
}

/// Orthogonal projection onto the eigenvectors whose eigenvalues lie in `w`.
inline SymmetricOperator spectral_projection(const SpectralDecomposition& d,
                                             const SpectralWindow& w) {
  if (!d.complete() && !(w.hi <= d.cutoff())) {
    throw InputError("spectral_projection: window reaches above the cutoff " +
                     detail::fmt_double(d.cutoff()) + " of a partial decomposition");
  }
  const Matrix v = d.columns(d.select([&](double t) { return w.contains(t); }));
  if (v.cols() == 0) return SymmetricOperator::zero(d.source_dim());
  return SymmetricOperator(v * v.transpose());
}

/// Q diag(f(lambda_i)) Q^T. Needs a complete decomposition.
inline SymmetricOperator apply_function(const SpectralDecomposition& d, const ScalarMap& f) {
  if (!d.complete()) throw InputError("apply_function: decomposition is partial");
  const Vector fv = map_eigenvalues(d.eigenvalues(), f);
  const Matrix& q = d.eigenvectors();
  return SymmetricOperator(q * fv.asDiagonal() * q.transpose());
}

/// (sum s_i^q)^(1/q) from singular values; max s_i for q = infinity.
inline double schatten_norm_from_singular_values(const Vector& s, const SchattenIndex& q) {
  if (s.size() == 0) return 0.0;
  const Vector a = s.cwiseAbs();
  const double top = a.maxCoeff();
  if (q.is_infinite() || top == 0.0) return top;
  // Scale by the largest value to keep s^q in range.
  double sum = 0.0;
  for (Index i = 0; i < a.size(); ++i) sum += std::pow(a(i) / top, q.value());
  return top * std::pow(sum, 1.0 / q.value());
}

/// sum s_i^q, the q-th power of the Schatten norm (q finite).
inline double schatten_power_from_singular_values(const Vector& s, double q) {
  double sum = 0.0;
  for (Index i = 0; i < s.size(); ++i) sum += std::pow(std::abs(s(i)), q);
  return sum;
}

inline double schatten_norm(const SymmetricOperator& a, const SchattenIndex& q) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("schatten_norm: eigensolver failed");
  return schatten_norm_from_singular_values(solver.eigenvalues(), q);
}

/// Schatten norm of a rectangular operator through its singular values.
inline double schatten_norm(const Matrix& a, const SchattenIndex& q) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return schatten_norm_from_singular_values(svd.singularValues(), q);
}

/// sum f(lambda_i) over the spectrum of A. Kernel contributions must vanish,
/// so f(0) = 0 is part of the contract.
inline double trace_function(const SymmetricOperator& a, const ScalarMap& f) {
  const double f0 = f(0.0);
  if (!(std::abs(f0) <= 1e-14)) {
    throw ContractError("trace_function: f(0) = " + detail::fmt_double(f0) + ", expected 0");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("trace_function: eigensolver failed");
  return map_eigenvalues(solver.eigenvalues(), f).sum();
}

struct KernelEquivReport {
  std::vector<double> left;   // nonzero eigenvalues of C^T C, ascending
  std::vector<double> right;  // nonzero eigenvalues of C C^T, ascending
  double max_abs_discrepancy = 0.0;
  double max_rel_discrepancy = 0.0;  // relative to the largest eigenvalue
};

/// Compares the nonzero spectra of C^T C and C C^T. "Nonzero" means the
/// corresponding singular value of C exceeds 1e-10 times the largest one.
inline KernelEquivReport kernel_equiv_check(const Matrix& c) {
  KernelEquivReport report;
  if (c.size() == 0) return report;
  if (!c.allFinite()) throw InputError("kernel_equiv_check: non-finite entries");

  Eigen::BDCSVD<Matrix> svd(c);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (smax > 0.0 && s(i) > 1e-10 * smax) ++rank;
  if (rank == 0) return report;

  auto top = [rank](const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    return std::vector<double>(ev.data() + ev.size() - rank, ev.data() + ev.size());
  };
  report.left = top(c.transpose() * c);
  report.right = top(c * c.transpose());

  const double scale = std::max(report.left.back(), report.right.back());
  for (Index i = 0; i < rank; ++i) {
    const double diff = std::abs(report.left[i] - report.right[i]);
    report.max_abs_discrepancy = std::max(report.max_abs_discrepancy, diff);
    report.max_rel_discrepancy = std::max(report.max_rel_discrepancy, diff / scale);
  }
  return report;
}

/// Symmetric square root of a positive semidefinite operator; eigenvalues
/// below zero (rounding noise) are clipped.
inline Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigensolver failed");
  const Vector r = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

inline Vector symmetric_eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric_eigenvalues: eigensolver failed");
  return es.eigenvalues();
}

}  // namespace spectral_lab
