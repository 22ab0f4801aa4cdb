#pragma once

// The verification suite: each check builds its own inputs from a seed and
// returns a VerificationReport. run_suite executes them concurrently and
// returns the reports in a fixed order.

#include <ctime>
#include <cstdint>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <vector>

#include "spectral_lab/experiments.hpp"
#include "spectral_lab/hankel_model.hpp"
#include "spectral_lab/scattering1d.hpp"

namespace spectral_lab::suite {

namespace detail {

// CPU time of the calling thread, so runtime budgets are not charged for
// checks running alongside on the same core.
inline double thread_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

inline Matrix random_symmetric(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(rng);
  return m;
}

inline Matrix random_orthogonal(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(n, n);
}

}  // namespace detail

inline const std::vector<double>& gamma_eps_list() {
  static const std::vector<double> e{1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  return e;
}

inline const std::vector<double>& schrodinger_eps_list() {
  static const std::vector<double> e{0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};
  return e;
}

/// Regression slope of tr Gamma_eps^n against |ln eps| within 2% of
/// gamma_moment_constant(n), in under 30 s.
inline VerificationReport gamma_slope_check(const std::vector<double>& eps_list = gamma_eps_list(),
                                            double delta = 1.0, const std::vector<double>& q_list = {1, 2, 3},
                                            double max_spacing = 0.02) {
  const double t0 = detail::thread_seconds();
  VerificationReport r;
  r.name = "gamma_moment_slopes";
  r.inputs = {{"eps_list", eps_list}, {"delta", delta}, {"q", q_list}, {"max_spacing", max_spacing}};
  r.tolerance = {{"relative", 0.02}, {"cpu_seconds", 30.0}};
  const auto rows = gamma_moment_table(delta, eps_list, q_list, max_spacing);
  Json slopes = Json::array(), predicted = Json::array(), rel = Json::array();
  bool ok = true;
  for (std::size_t k = 0; k < q_list.size(); ++k) {
    std::vector<double> x, y;
    for (std::size_t i = k; i < rows.size(); i += q_list.size()) {
      x.push_back(std::abs(std::log(rows[i].eps)));
      y.push_back(rows[i].trace);
    }
    const Regression reg = fit_tail(x, y, x.size());
    const double c = gamma_moment_constant(q_list[k]);
    const double e = std::abs(reg.slope - c) / c;
    slopes.push_back(reg.slope);
    predicted.push_back(c);
    rel.push_back(e);
    ok = ok && e <= 0.02;
  }
  const double elapsed = detail::thread_seconds() - t0;
  r.measured = {{"slope", slopes}, {"relative_error", rel}, {"cpu_seconds", elapsed}};
  r.predicted = {{"gamma_moment_constant", predicted}};
  r.pass = ok && elapsed < 30.0;
  return r;
}

/// |tr Gamma_eps - ln(delta / eps) / 2| <= 1e-3 ln(delta / eps) at every point.
inline VerificationReport gamma_first_moment_check(const std::vector<double>& eps_list = gamma_eps_list(),
                                                   double delta = 1.0, double max_spacing = 0.02) {
  VerificationReport r;
  r.name = "gamma_first_moment";
  r.inputs = {{"eps_list", eps_list}, {"delta", delta}, {"max_spacing", max_spacing}};
  r.tolerance = {{"relative", 1e-3}};
  std::vector<double> traces, exact;
  bool ok = true;
  for (double eps : eps_list) {
    const HankelModel m = HankelModel::with_spacing(eps, delta, max_spacing);
    const double tr = build_gamma_operator(m).matrix().trace();
    const double len = std::log(delta / eps);
    traces.push_back(tr);
    exact.push_back(0.5 * len);
    ok = ok && std::abs(tr - 0.5 * len) <= 1e-3 * len;
  }
  r.measured = {{"trace", traces}};
  r.predicted = {{"half_log_ratio", exact}};
  r.pass = ok;
  return r;
}

/// Every Gamma_eps eigenvalue in [-1e-10, pi + 1e-6]; top singular value of
/// the discretized Laplace transform within 1% of sqrt(pi).
inline VerificationReport gamma_spectrum_bounds_check(const std::vector<double>& eps_list = gamma_eps_list(),
                                                      double delta = 1.0, double max_spacing = 0.02) {
  VerificationReport r;
  r.name = "gamma_spectrum_bounds";
  r.inputs = {{"eps_list", eps_list}, {"delta", delta}, {"laplace_grid", "log_uniform(1e-12, 1e12, 800)"}};
  r.tolerance = {{"lower_slack", 1e-10}, {"upper_slack", 1e-6}, {"laplace_relative", 0.01}};
  double lo = kInfinity, hi = -kInfinity;
  for (double eps : eps_list) {
    const Vector ev = gamma_eigenvalues(HankelModel::with_spacing(eps, delta, max_spacing));
    lo = std::min(lo, ev.minCoeff());
    hi = std::max(hi, ev.maxCoeff());
  }
  Eigen::BDCSVD<Matrix> svd(build_laplace_matrix(LaplaceGrid::default_grid()));
  const double top = svd.singularValues()(0);
  const double root_pi = std::sqrt(kPi);
  r.measured = {{"min_eigenvalue", lo}, {"max_eigenvalue", hi}, {"laplace_top_singular_value", top}};
  r.predicted = {{"spectrum", {0.0, kPi}}, {"laplace_norm", root_pi}};
  r.pass = lo >= -1e-10 && hi <= kPi + 1e-6 && std::abs(top - root_pi) <= 0.01 * root_pi;
  return r;
}

/// The constructed equality case: P = diag(1, 0), B = [[0, 1], [1, 0]], f = t^2
/// gives |tr f(PBP) - tr P f(B) P| = (1/2) ||f''|| ||PB(1-P)||_2^2 = 1.
inline LaptevSafarovReport laptev_safarov_equality_case() {
  Matrix p = Matrix::Zero(2, 2);
  p(0, 0) = 1.0;
  Matrix b = Matrix::Zero(2, 2);
  b(0, 1) = b(1, 0) = 1.0;
  return laptev_safarov_check(SymmetricOperator(p), SymmetricOperator(b),
                              {[](double t) { return t * t; }, [](double) { return 2.0; }});
}

/// C^2 test functions with f(0) = 0, indexed 0..4, scaled by w.
inline C2Function laptev_safarov_function(int which, double w) {
  switch (which % 5) {
    case 0:
      return {[](double t) { return t * t; }, [](double) { return 2.0; }};
    case 1:
      return {[w](double t) { return std::sin(w * t); }, [w](double t) { return -w * w * std::sin(w * t); }};
    case 2:
      return {[w](double t) { return 1.0 - std::cos(w * t); }, [w](double t) { return w * w * std::cos(w * t); }};
    case 3:
      return {[w](double t) { return std::log(std::cosh(w * t)); },
              [w](double t) {
                const double c = std::cosh(w * t);
                return w * w / (c * c);
              }};
    default:
      return {[](double t) { return t * t * t; }, [](double t) { return 6.0 * t; }};
  }
}

/// Random (P, B, f) with dim <= 30 plus the equality case; slack 1e-9.
inline VerificationReport laptev_safarov_random_check(std::uint64_t seed, int instances = 200) {
  VerificationReport r;
  r.name = "laptev_safarov";
  r.inputs = {{"seed", seed}, {"instances", instances}, {"max_dim", 30}};
  r.tolerance = {{"slack", 1e-9}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_d(2, 30), fn_d(0, 4);
  std::uniform_real_distribution<double> w_d(0.2, 3.0), s_d(0.1, 2.0);
  double worst_margin = -kInfinity;
  int failures = 0;
  for (int k = 0; k < instances; ++k) {
    const Index n = dim_d(rng);
    const Index rank = std::uniform_int_distribution<Index>(1, n - 1)(rng);
    const Matrix q = detail::random_orthogonal(rng, n);
    const Matrix p = q.leftCols(rank) * q.leftCols(rank).transpose();
    const Matrix b = detail::random_symmetric(rng, n, s_d(rng) / std::sqrt(static_cast<double>(n)));
    const LaptevSafarovReport rep =
        laptev_safarov_check(SymmetricOperator(p), SymmetricOperator(b), laptev_safarov_function(fn_d(rng), w_d(rng)));
    worst_margin = std::max(worst_margin, rep.lhs - rep.rhs);
    if (!rep.pass) ++failures;
  }
  const LaptevSafarovReport eq = laptev_safarov_equality_case();
  const bool eq_ok = std::abs(eq.lhs - 1.0) <= 1e-12 && std::abs(eq.rhs - 1.0) <= 1e-12 && eq.pass;
  r.measured = {{"failures", failures}, {"max_lhs_minus_rhs", worst_margin},
                {"equality_case", {{"lhs", eq.lhs}, {"rhs", eq.rhs}}}};
  r.predicted = {{"lhs_minus_rhs_at_most", 0.0}, {"equality_case", {{"lhs", 1.0}, {"rhs", 1.0}}}};
  r.pass = failures == 0 && eq_ok;
  return r;
}

/// Random operator-valued sigma on a window [lo, hi]: sigma(l) = M1 + l^k M2 + cos(w l) M3,
/// block size 1..2, not necessarily symmetric or sign-definite.
inline OperatorFamily random_operator_family(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lo_d(-3.0, -1.0), hi_d(0.0, 1.0), k_d(0.2, 2.0), w_d(0.5, 5.0);
  std::normal_distribution<double> g;
  const Index b = std::uniform_int_distribution<Index>(1, 2)(rng);
  std::array<Matrix, 3> m;
  const bool symmetric = std::bernoulli_distribution(0.5)(rng);
  for (auto& x : m) {
    x = Matrix(b, b);
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < b; ++j) x(i, j) = g(rng);
    if (symmetric) x = 0.5 * (x + x.transpose()).eval();
  }
  const double kexp = k_d(rng), w = w_d(rng);
  OperatorFamily f;
  f.lo = std::pow(10.0, lo_d(rng));
  f.hi = std::pow(10.0, hi_d(rng));
  f.block_dim = b;
  f.value = [m, kexp, w](double l) -> Matrix { return m[0] + std::pow(l, kexp) * m[1] + std::cos(w * l) * m[2]; };
  return f;
}

/// ||K||_q^q <= pi^{q-1} int ||sigma||_q^q d lambda / (2 lambda) on random sigma, q in {1, 2, 3}.
inline VerificationReport hankel_bound_random_check(std::uint64_t seed, int instances = 100) {
  VerificationReport r;
  r.name = "hankel_schatten_bound";
  r.inputs = {{"seed", seed}, {"instances", instances}, {"q", {1, 2, 3}}};
  r.tolerance = {{"ratio_at_most", 1.0 + 1e-3}};
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  int failures = 0;
  for (int k = 0; k < instances; ++k) {
    const OperatorFamily f = random_operator_family(rng);
    for (double q : {1.0, 2.0, 3.0}) {
      const HankelBoundReport rep = hankel_schatten_bound_check(f, q);
      worst = std::max(worst, rep.ratio);
      if (!rep.pass) ++failures;
    }
  }
  r.measured = {{"max_ratio", worst}, {"failures", failures}};
  r.predicted = {{"ratio_at_most", 1.0}};
  r.pass = failures == 0;
  return r;
}

/// A random instance with H0 spectrum split between (-delta, -eps) and (eps, delta)
/// and a factorized V = G^T V0 G of moderate size.
struct FactorizationInstance {
  SymmetricOperator h0;
  FactorizedPerturbation pert;
  double eps;
  double delta;
};

inline FactorizationInstance random_factorization_instance(std::mt19937_64& rng) {
  const Index n = std::uniform_int_distribution<Index>(4, 40)(rng);
  const Index k = std::uniform_int_distribution<Index>(1, n)(rng);
  const double eps = 0.5, delta = 10.0;
  std::uniform_real_distribution<double> mag(eps + 0.1, 4.0);
  Vector spec(n);
  for (Index i = 0; i < n; ++i) spec(i) = (i % 2 ? 1.0 : -1.0) * mag(rng);
  const Matrix q = detail::random_orthogonal(rng, n);
  Matrix g(k, n);
  std::normal_distribution<double> gd(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = gd(rng);
  return {SymmetricOperator(q * spec.asDiagonal() * q.transpose()),
          FactorizedPerturbation(g, SymmetricOperator(detail::random_symmetric(rng, k))), eps, delta};
}

/// The identity on 100 random gapped instances and the 2x2 example, in < 5 s.
inline VerificationReport factorization_random_check(std::uint64_t seed, int instances = 100) {
  const double t0 = detail::thread_seconds();
  VerificationReport r;
  r.name = "factorization_identity";
  r.inputs = {{"seed", seed}, {"instances", instances}, {"max_dim", 40}};
  r.tolerance = {{"max_abs", 1e-10}, {"cpu_seconds", 5.0}};
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  int vacuous = 0;
  for (int i = 0; i < instances; ++i) {
    const FactorizationInstance inst = random_factorization_instance(rng);
    const VerificationReport rep = factorization_check(inst.h0, inst.pert, inst.eps, inst.delta);
    worst = std::max(worst, rep.measured["max_discrepancy"].get<double>());
    if (!rep.notes.empty()) ++vacuous;
  }
  Matrix h0 = Matrix::Zero(2, 2);
  h0(0, 0) = -1.0;
  h0(1, 1) = 1.0;
  Matrix v = Matrix::Zero(2, 2);
  v(0, 1) = v(1, 0) = 0.3;
  const VerificationReport small = factorization_check(
      SymmetricOperator(h0), FactorizedPerturbation(Matrix::Identity(2, 2), SymmetricOperator(v)), 0.5, 10.0);
  const double small_d = small.measured["max_discrepancy"].get<double>();
  const double elapsed = detail::thread_seconds() - t0;
  r.measured = {{"max_discrepancy", worst}, {"vacuous_instances", vacuous},
                {"two_by_two_discrepancy", small_d}, {"cpu_seconds", elapsed}};
  r.predicted = {{"discrepancy", 0.0}};
  r.pass = worst <= 1e-10 && small_d <= 1e-12 && elapsed < 5.0;
  return r;
}

/// Transfer-matrix |t|^2 against the square-well closed form at 50 energies,
/// with the unitarity defect of S.
inline VerificationReport scattering_oracle_check(double depth = 2.0, double half_width = 1.0) {
  VerificationReport r;
  r.name = "scattering_oracle";
  r.inputs = {{"depth", depth}, {"half_width", half_width}, {"energies", "50 points on [0.05, 5]"}};
  r.tolerance = {{"transmission_abs", 1e-6}, {"unitarity", 1e-9}};
  const Potential v = Potential::square_well(depth, half_width);
  double worst_t = 0.0, worst_u = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double lambda = 0.05 + (5.0 - 0.05) * k / 49.0;
    const ScatteringData d = transfer_matrix_smatrix(v, lambda);
    worst_t = std::max(worst_t, std::abs(std::norm(d.transmission) - square_well_transmission(depth, half_width, lambda)));
    worst_u = std::max(worst_u, d.unitarity_defect());
  }
  r.measured = {{"max_transmission_error", worst_t}, {"max_unitarity_defect", worst_u}};
  r.predicted = {{"transmission_error", 0.0}, {"unitarity_defect", 0.0}};
  r.pass = worst_t <= 1e-6 && worst_u <= 1e-9;
  return r;
}

/// Closed forms against quadrature: the cosh^{-2n} moments (n <= 8, 1e-10),
/// the arcsin^2 log-det constant (1e-8) and the two forms of the limit
/// constant (1e-8).
inline VerificationReport constants_check() {
  VerificationReport r;
  r.name = "constant_identities";
  r.tolerance = {{"moment_abs", 1e-10}, {"arcsin_abs", 1e-8}, {"density_form_abs", 1e-8}};
  double moment_err = 0.0;
  for (int n = 1; n <= 8; ++n)
    moment_err = std::max(moment_err, std::abs(pi_moment_constant(n) - pi_moment_constant_quadrature(n)));
  double arcsin_err = 0.0;
  Json arcsin = Json::array();
  for (double a : {0.1, 0.5, 0.9, 1.0}) {
    const LogdetConstant c = logdet_constant({a});
    arcsin_err = std::max(arcsin_err, std::abs(c.quadrature - c.closed_form));
    arcsin.push_back({{"a", a}, {"quadrature", c.quadrature}, {"closed_form", c.closed_form}});
  }
  double form_err = 0.0;
  const std::vector<std::vector<double>> amp_sets{{0.748, 0.617}, {1.0, 0.0}, {0.3, 0.9}};
  const std::vector<ScalarMap> fs{[](double t) { return t; }, [](double t) { return t * t; },
                                  [](double t) { return t * t * t; }, [](double t) { return t / (1.0 + t); }};
  for (const auto& amps : amp_sets)
    for (const auto& f : fs)
      form_err = std::max(form_err, std::abs(limit_constant(f, amps) - limit_constant_density_form(f, amps)));
  r.measured = {{"max_moment_error", moment_err}, {"max_arcsin_error", arcsin_err},
                {"max_density_form_error", form_err}, {"arcsin", arcsin}};
  r.predicted = {{"errors", 0.0}};
  r.pass = moment_err <= 1e-10 && arcsin_err <= 1e-8 && form_err <= 1e-8;
  return r;
}

/// The default end-to-end system: square well (2, 1), lambda* = 1, L = 300, n = 6000.
inline SystemConfig default_system() { return SystemConfig{}; }

/// Slope of tr (Pi_eps^(1))^n against |ln eps| within 20% of
/// sum a^{2n} pi_moment_constant(n), n in {1, 2}. The Gamma model over the
/// same eps window is reported alongside for comparison.
inline VerificationReport theorem_slope_check(const PreparedSystem& s,
                                              const std::vector<double>& eps_list = schrodinger_eps_list(),
                                              const std::vector<int>& powers = {1, 2}) {
  const double t0 = detail::thread_seconds();
  VerificationReport r;
  r.name = "trace_asymptotics";
  r.inputs = {{"system", s.config.to_json()}, {"eps_list", eps_list}, {"powers", powers}};
  r.tolerance = {{"relative", 0.2}, {"cpu_seconds", 600.0}};
  std::vector<Functional> fs;
  for (int n : powers) fs.push_back(Functional::monomial(n));
  const auto series = epsilon_sweep(s, fs, eps_list);
  // Gamma_eps over the same eps window (delta = 1) for tr Gamma^{2n}.
  std::vector<Functional> gf;
  for (int n : powers) gf.push_back(Functional::monomial(2 * n));
  const auto gamma = gamma_sweep(gf, eps_list, 1.0);
  Json measured = Json::array(), predicted = Json::array(), diag = Json::array();
  bool ok = true;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double slope = series[k].regression.slope;
    const double pred = series[k].predicted_slope;
    const double rel = pred != 0.0 ? std::abs(slope - pred) / std::abs(pred) : std::abs(slope);
    ok = ok && (pred != 0.0 ? rel <= 0.2 : std::abs(slope) <= 1e-12);
    measured.push_back({{"f", series[k].f_descriptor}, {"slope", slope}, {"relative_error", rel},
                        {"values", series[k].y()}, {"residuals", series[k].regression.residuals}});
    predicted.push_back({{"f", series[k].f_descriptor}, {"slope", pred}});
    diag.push_back({{"f", gamma[k].f_descriptor}, {"slope_ratio", gamma[k].regression.slope / gamma[k].predicted_slope}});
  }
  const double elapsed = detail::thread_seconds() - t0;
  r.measured = {{"series", measured}, {"gamma_model_same_window", diag}, {"cpu_seconds", elapsed},
                {"amplitudes", s.amplitudes}};
  r.predicted = {{"series", predicted}};
  r.pass = ok && elapsed < 600.0;
  return r;
}

/// The sandwich inequalities at every eps of the sweep, q in {1, 2, 3}.
inline VerificationReport sandwich_sweep_check(const PreparedSystem& s,
                                               const std::vector<double>& eps_list = schrodinger_eps_list()) {
  VerificationReport r;
  r.name = "sandwich_sweep";
  r.inputs = {{"system", s.config.to_json()}, {"eps_list", eps_list}, {"q", {1, 2, 3}}};
  r.tolerance = {{"slack", 1e-10}};
  Json points = Json::array();
  bool ok = true;
  for (double requested : eps_list) {
    const VerificationReport one = sandwich_check(s, snap_eps(s, requested), {1.0, 2.0, 3.0});
    ok = ok && one.pass;
    points.push_back({{"eps", one.inputs["eps"]}, {"pass", one.pass}, {"measured", one.measured},
                      {"bounds", one.predicted}});
  }
  r.measured = {{"points", points}};
  r.predicted = {{"ordering", "lower <= middle <= upper"}};
  r.pass = ok;
  return r;
}

inline std::vector<double> toy_eps_list() {
  std::vector<double> e;
  for (int k = 0; k <= 8; ++k) e.push_back(std::pow(10.0, -2.0 - 0.5 * k));
  return e;
}

inline VerificationReport toy_kernel_suite_check(std::uint64_t seed) {
  VerificationReport r = toy_kernel_check(ToyFlowModel::random(seed), toy_eps_list(), 1.0);
  r.inputs["seed"] = seed;
  return r;
}

struct SuiteOptions {
  std::uint64_t seed = 0;
  SystemConfig system;
  std::vector<double> eps_list = schrodinger_eps_list();
  double delta = 0.5;
};

/// Every check, run concurrently; reports come back in a fixed order.
inline std::vector<VerificationReport> run_suite(const SuiteOptions& o) {
  const auto system = std::make_shared<PreparedSystem>(
      prepare_system(o.system, std::max(2.0 * o.eps_list.front(), o.delta)));
  std::vector<std::function<VerificationReport()>> checks{
      [] { return gamma_slope_check(); },
      [] { return gamma_first_moment_check(); },
      [] { return gamma_spectrum_bounds_check(); },
      [&o] { return laptev_safarov_random_check(o.seed); },
      [&o] { return hankel_bound_random_check(o.seed); },
      [&o] { return factorization_random_check(o.seed); },
      [] { return scattering_oracle_check(); },
      [] { return constants_check(); },
      [&] { return theorem_slope_check(*system, o.eps_list); },
      [&] { return sandwich_sweep_check(*system, o.eps_list); },
      [&o] { return toy_kernel_suite_check(o.seed); },
      [&] { return logdet_experiment(*system, o.eps_list); },
      [&] { return localization_check(*system, o.eps_list, o.delta); },
  };
  std::vector<std::future<VerificationReport>> futures;
  for (auto& c : checks) futures.push_back(std::async(std::launch::async, c));
  std::vector<VerificationReport> out;
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace spectral_lab::suite
