#pragma once

// Drivers: eps sweeps of tr f(Pi_eps) with |ln eps| regression, the sandwich
// and localization monitors, the exact factorization identity, the toy
// operator-valued kernel check and the log-determinant experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/hankel_model.hpp"
#include "spectral_lab/linalg_spectral.hpp"
#include "spectral_lab/quadrature.hpp"
#include "spectral_lab/scattering1d.hpp"
#include "spectral_lab/schrodinger1d.hpp"

namespace spectral_lab {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- functionals

/// Test functions f with f(0) = 0: t^n, the indicator of (alpha, beta), ln(1 - t).
struct Functional {
  enum class Kind { power, indicator, log1m };

  Kind kind = Kind::power;
  int power = 1;
  double alpha = 0.0;
  double beta = 0.0;

  static Functional monomial(int n) {
    if (n < 1) throw InputError("functional t^n: n must be >= 1");
    Functional f;
    f.power = n;
    return f;
  }
  static Functional indicator(double a, double b) {
    if (!(a > 0.0) || !(b > a)) throw InputError("functional indicator(a,b): need 0 < a < b");
    Functional f;
    f.kind = Kind::indicator;
    f.alpha = a;
    f.beta = b;
    return f;
  }
  static Functional log1m() {
    Functional f;
    f.kind = Kind::log1m;
    return f;
  }

  /// Parses "t", "t^n", "indicator(a,b)" or "log1m".
  static Functional parse(const std::string& text) {
    static const std::regex pow_re(R"(\s*t\s*(\^\s*(\d+))?\s*)");
    static const std::regex ind_re(R"(\s*indicator\s*\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)\s*)");
    std::smatch m;
    if (std::regex_match(text, m, pow_re)) {
      return monomial(m[2].matched ? std::stoi(m[2].str()) : 1);
    }
    if (std::regex_match(text, m, ind_re)) {
      try {
        return indicator(std::stod(m[1].str()), std::stod(m[2].str()));
      } catch (const std::logic_error& e) {
        if (dynamic_cast<const InputError*>(&e)) throw;
        throw InputError("functional '" + text + "': bad number");
      }
    }
    if (text == "log1m") return log1m();
    throw InputError("unknown functional '" + text + "' (expected t^n, indicator(a,b) or log1m)");
  }

  std::string name() const {
    switch (kind) {
      case Kind::power:
        return "t^" + std::to_string(power);
      case Kind::indicator:
        return "indicator(" + detail::fmt_double(alpha) + "," + detail::fmt_double(beta) + ")";
      case Kind::log1m:
        return "log1m";
    }
    return "";
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::power:
        return std::pow(t, power);
      case Kind::indicator:
        return (t > alpha && t < beta) ? 1.0 : 0.0;
      case Kind::log1m:
        return t >= 1.0 ? -kInfinity : std::log1p(-t);
    }
    return 0.0;
  }

  ScalarMap map() const {
    return [f = *this](double t) { return f(t); };
  }
};

namespace detail {

// |{x : top / cosh^2(pi x) > c}| = (2 / pi) arccosh(sqrt(top / c)).
inline double superlevel_length(double top, double c) {
  return c < top ? 2.0 * std::acosh(std::sqrt(top / c)) / kPi : 0.0;
}

}  // namespace detail

/// (1/2 pi) sum_l integral f(a_l^2 / cosh^2(pi x)) dx in closed form where one
/// exists, otherwise by quadrature.
inline double functional_limit_constant(const Functional& f, const std::vector<double>& amplitudes) {
  double sum = 0.0;
  for (double a : amplitudes) {
    const double top = a * a;
    switch (f.kind) {
      case Functional::Kind::power:
        sum += std::pow(top, f.power) * pi_moment_constant(f.power);
        break;
      case Functional::Kind::indicator:
        sum += (detail::superlevel_length(top, f.alpha) - detail::superlevel_length(top, f.beta)) /
               (2.0 * kPi);
        break;
      case Functional::Kind::log1m:
        sum -= std::asin(a) * std::asin(a) / (kPi * kPi);
        break;
    }
  }
  return sum;
}

/// The |ln eps| slope of tr f(Gamma_eps): (1/2 pi) integral f(pi / cosh(pi x)) dx.
inline double functional_gamma_constant(const Functional& f) {
  switch (f.kind) {
    case Functional::Kind::power:
      return gamma_moment_constant(f.power);
    case Functional::Kind::indicator: {
      auto len = [](double c) { return c < kPi ? 2.0 * std::acosh(kPi / c) / kPi : 0.0; };
      return (len(f.alpha) - len(f.beta)) / (2.0 * kPi);
    }
    case Functional::Kind::log1m:
      throw DomainError("log1m is undefined on the spectrum of Gamma_eps, which reaches pi");
  }
  return 0.0;
}

/// sum f(clip(mu_i, 0, 1)); -inf if f diverges at some eigenvalue.
inline double trace_on_unit_interval(const Vector& eigenvalues, const Functional& f) {
  double s = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) s += f(std::clamp(eigenvalues(i), 0.0, 1.0));
  return s;
}

// ---------------------------------------------------------------- regression

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;   // over the fitted points
  std::vector<double> residuals;  // every point of the series, fitted or not
};

/// Least squares y = slope x + intercept on the last `fit_count` points.
inline Regression fit_tail(const std::vector<double>& x, const std::vector<double>& y,
                           std::size_t fit_count = 3) {
  if (x.size() != y.size()) throw InputError("regression: size mismatch");
  if (x.size() < 3) throw InputError("regression: need at least 3 sweep points, got " + std::to_string(x.size()));
  fit_count = std::min(fit_count, x.size());
  const std::size_t start = x.size() - fit_count;
  Regression r;
  if (std::any_of(y.begin(), y.end(), [](double v) { return std::isinf(v) && v < 0; })) {
    r.slope = -kInfinity;
    r.intercept = 0.0;
    r.residuals.assign(x.size(), 0.0);
    return r;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(fit_count);
  my /= static_cast<double>(fit_count);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("regression: eps values must be distinct");
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.residuals.push_back(y[i] - (r.slope * x[i] + r.intercept));
    if (i >= start) r.max_residual = std::max(r.max_residual, std::abs(r.residuals.back()));
  }
  return r;
}

inline void require_decreasing(const std::vector<double>& eps_list, const std::string& what) {
  if (eps_list.empty()) throw InputError(what + ": eps_list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw InputError(what + ": eps_list entries must be > 0");
    if (i && !(eps_list[i] < eps_list[i - 1])) throw InputError(what + ": eps_list must be strictly decreasing");
  }
}

// ---------------------------------------------------------------- reports

/// Outcome of one check; `pass` is always recomputable from measured,
/// predicted and tolerance.
struct VerificationReport {
  std::string name;
  Json inputs = Json::object();
  Json measured = Json::object();
  Json predicted = Json::object();
  Json tolerance = Json::object();
  bool pass = false;
  std::vector<std::string> notes;

  Json to_json() const {
    Json j;
    j["name"] = name;
    j["inputs"] = inputs;
    j["measured"] = measured;
    j["predicted"] = predicted;
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    if (!notes.empty()) j["notes"] = notes;
    return j;
  }
};

/// JSON for a double; non-finite values become strings.
inline Json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline Json json_numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

// ---------------------------------------------------------------- systems

struct SystemConfig {
  Grid1D grid;
  Potential potential = Potential::square_well(2.0, 1.0);
  double lambda_star = 1.0;

  Json to_json() const {
    Json j;
    j["grid"] = {{"half_length", grid.half_length}, {"n_points", grid.n_points}};
    j["potential"] = potential.to_json();
    j["lambda_star"] = lambda_star;
    return j;
  }
};

/// Hamiltonians, their eigenpairs up to a cutoff, and the scattering data at lambda*.
struct PreparedSystem {
  SystemConfig config;
  Hamiltonians hamiltonians;
  SpectralDecomposition h0;
  SpectralDecomposition h;
  std::vector<double> amplitudes;  // a_1 >= a_2
  std::array<double, 2> theta{};
};

/// Decomposes H0 and H up to lambda* + reach + 0.05, where reach is the
/// furthest distance above lambda* any later projection needs.
inline PreparedSystem prepare_system(const SystemConfig& cfg, double reach) {
  if (!(cfg.lambda_star > 0.0)) throw InputError("lambda_star must be > 0");
  if (!(reach > 0.0) || !std::isfinite(reach)) throw InputError("prepare_system: reach must be > 0");
  const double cutoff = cfg.lambda_star + reach + 0.05;
  Hamiltonians ham = build_hamiltonians(cfg.grid, cfg.potential, cutoff);
  SpectralDecomposition d0 = eigendecompose(ham.h0, cutoff);
  SpectralDecomposition d = eigendecompose(ham.h, cutoff);
  PreparedSystem out{cfg, std::move(ham), std::move(d0), std::move(d), {0.0, 0.0}, {0.0, 0.0}};
  if (!cfg.potential.is_zero()) {
    const ScatteringData s = transfer_matrix_smatrix(cfg.potential, cfg.lambda_star);
    out.amplitudes = {s.phases.amplitude[0], s.phases.amplitude[1]};
    out.theta = s.phases.theta;
  }
  return out;
}

/// Nudges eps (in steps of 1e-6) until no H0 eigenvalue sits within 1e-8 of
/// lambda* - eps or lambda* - 2 eps and no H eigenvalue within 1e-8 of
/// lambda* + eps or lambda* + 2 eps.
inline double snap_eps(const PreparedSystem& s, double eps) {
  const double l = s.config.lambda_star;
  auto clear = [&](double e) {
    auto far = [](const Vector& ev, double x) {
      for (Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i) - x) <= 1e-8) return false;
      return true;
    };
    return far(s.h0.eigenvalues(), l - e) && far(s.h0.eigenvalues(), l - 2 * e) &&
           far(s.h.eigenvalues(), l + e) && far(s.h.eigenvalues(), l + 2 * e);
  };
  for (int k = 0; k <= 200; ++k) {
    const double shift = 1e-6 * ((k + 1) / 2) * (k % 2 ? 1.0 : -1.0);
    if (eps + shift > 0.0 && clear(eps + shift)) return eps + shift;
  }
  throw NumericalError("snap_eps: no tie-free eps near " + detail::fmt_double(eps));
}

/// eps must cover at least two free level spacings of the box near lambda*.
inline void require_resolved(const SystemConfig& cfg, double eps) {
  const double spacing = free_level_spacing(cfg.grid, cfg.lambda_star);
  if (eps < 2.0 * spacing) {
    throw InputError("eps = " + detail::fmt_double(eps) + " is below two level spacings (" +
                     detail::fmt_double(2.0 * spacing) + ") of the box; increase half_length");
  }
}

// ---------------------------------------------------------------- sweeps

struct TracePoint {
  double eps = 0.0;
  double ln_eps_abs = 0.0;
  double value = 0.0;
};

struct TraceSeries {
  std::string f_descriptor;
  std::string variant;
  std::vector<TracePoint> points;
  Regression regression;
  double predicted_slope = 0.0;
  std::vector<std::string> warnings;

  std::vector<double> x() const {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.ln_eps_abs);
    return v;
  }
  std::vector<double> y() const {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.value);
    return v;
  }
};

enum class SweepVariant { pi1, pi2 };

inline std::string variant_name(SweepVariant v) { return v == SweepVariant::pi1 ? "pi1" : "pi2"; }

/// tr f(Pi_eps) for every eps and f; slopes against |ln eps| from the three
/// smallest eps, compared with functional_limit_constant at lambda*.
inline std::vector<TraceSeries> epsilon_sweep(const PreparedSystem& s,
                                              const std::vector<Functional>& f_list,
                                              const std::vector<double>& eps_list,
                                              SweepVariant variant = SweepVariant::pi1) {
  require_decreasing(eps_list, "epsilon_sweep");
  if (eps_list.size() < 3) throw InputError("epsilon_sweep: need at least 3 eps values for the regression");
  std::vector<TraceSeries> out(f_list.size());
  for (std::size_t k = 0; k < f_list.size(); ++k) {
    out[k].f_descriptor = f_list[k].name();
    out[k].variant = variant_name(variant);
    out[k].predicted_slope = functional_limit_constant(f_list[k], s.amplitudes);
  }
  for (double requested : eps_list) {
    require_resolved(s.config, requested);
    const double eps = snap_eps(s, requested);
    const ProjectionProduct p =
        variant == SweepVariant::pi1
            ? build_pi1(s.h0, s.h, s.config.lambda_star, eps)
            : build_pi2(s.h0, s.h, s.config.lambda_star, Regularizer(eps));
    const Vector ev = p.eigenvalues();
    for (std::size_t k = 0; k < f_list.size(); ++k) {
      out[k].points.push_back({eps, std::abs(std::log(eps)), trace_on_unit_interval(ev, f_list[k])});
      for (const auto& w : p.warnings) out[k].warnings.push_back(w);
    }
  }
  for (auto& series : out) series.regression = fit_tail(series.x(), series.y());
  return out;
}

/// The same sweep with Pi_eps replaced by Gamma_eps (delta fixed), so the
/// Hankel asymptotics can be separated from the Schrodinger discretization.
inline std::vector<TraceSeries> gamma_sweep(const std::vector<Functional>& f_list,
                                            const std::vector<double>& eps_list, double delta,
                                            double max_spacing = 0.02) {
  require_decreasing(eps_list, "gamma_sweep");
  if (eps_list.size() < 3) throw InputError("gamma_sweep: need at least 3 eps values for the regression");
  std::vector<TraceSeries> out(f_list.size());
  for (std::size_t k = 0; k < f_list.size(); ++k) {
    out[k].f_descriptor = f_list[k].name();
    out[k].variant = "gamma";
    out[k].predicted_slope = functional_gamma_constant(f_list[k]);
  }
  for (double eps : eps_list) {
    if (eps > delta) throw InputError("gamma_sweep: eps must not exceed delta");
    const HankelModel m = HankelModel::with_spacing(eps, delta, max_spacing);
    const Vector ev = m.empty() ? Vector::Zero(1) : gamma_eigenvalues(m);
    for (std::size_t k = 0; k < f_list.size(); ++k) {
      double v = 0.0;
      for (Index i = 0; i < ev.size(); ++i) v += f_list[k](std::max(ev(i), 0.0));
      out[k].points.push_back({eps, std::abs(std::log(eps)), v});
    }
  }
  for (auto& series : out) series.regression = fit_tail(series.x(), series.y());
  return out;
}

// ---------------------------------------------------------------- monitors

/// tr Pi_{2eps}^(1)^q <= tr Pi_eps^(2)^q <= tr Pi_eps^(1)^q for each q.
inline VerificationReport sandwich_check(const PreparedSystem& s, double eps,
                                         const std::vector<double>& q_list,
                                         Regularizer::Shape shape = Regularizer::Shape::piecewise_linear) {
  VerificationReport r;
  r.name = "sandwich";
  r.inputs = {{"eps", eps}, {"lambda_star", s.config.lambda_star}, {"q", q_list},
              {"regularizer", Regularizer(eps, shape).describe()}};
  r.tolerance = {{"slack", 1e-10}};
  const double l = s.config.lambda_star;
  const Vector upper = build_pi1(s.h0, s.h, l, eps).eigenvalues();
  const Vector lower = build_pi1(s.h0, s.h, l, 2.0 * eps).eigenvalues();
  const Vector middle = build_pi2(s.h0, s.h, l, Regularizer(eps, shape)).eigenvalues();
  r.pass = true;
  Json lo = Json::array(), mid = Json::array(), hi = Json::array();
  for (double q : q_list) {
    if (!(q >= 1.0)) throw InputError("sandwich_check: q must be >= 1");
    const double a = clipped_power_sum(lower, q);
    const double b = clipped_power_sum(middle, q);
    const double c = clipped_power_sum(upper, q);
    lo.push_back(a);
    mid.push_back(b);
    hi.push_back(c);
    r.pass = r.pass && a <= b + 1e-10 && b <= c + 1e-10;
  }
  r.measured = {{"trace_pi2", mid}};
  r.predicted = {{"lower_trace_pi1_2eps", lo}, {"upper_trace_pi1_eps", hi}};
  return r;
}

/// ||Pi~_eps - Pi_eps||_q^q / |ln eps|^{1/2} along the sweep, where Pi~ uses
/// the windows (lambda* - delta, lambda* - eps) and (lambda* + eps, lambda* + delta).
/// Monitored: passes while every ratio stays below twice the first one.
inline VerificationReport localization_check(const PreparedSystem& s, const std::vector<double>& eps_list,
                                             double delta, double q = 1.0) {
  require_decreasing(eps_list, "localization_check");
  VerificationReport r;
  r.name = "localization";
  r.inputs = {{"eps_list", eps_list}, {"delta", json_number(delta)}, {"q", q},
              {"lambda_star", s.config.lambda_star}};
  r.tolerance = {{"growth_factor", 2.0}};
  const double l = s.config.lambda_star;
  std::vector<double> diffs, ratios;
  for (double requested : eps_list) {
    const double eps = snap_eps(s, requested);
    const Matrix full = build_pi1(s.h0, s.h, l, eps).matrix.matrix();
    const Matrix windowed = build_pi1_windowed(s.h0, s.h, l, eps, delta).matrix.matrix();
    const double d = std::pow(schatten_norm(SymmetricOperator(windowed - full), SchattenIndex(q)), q);
    diffs.push_back(d);
    ratios.push_back(d / std::sqrt(std::abs(std::log(eps))));
  }
  const double first = ratios.front();
  r.pass = std::all_of(ratios.begin(), ratios.end(),
                       [&](double x) { return x <= 2.0 * first + 1e-12; });
  r.measured = {{"difference_q_power", diffs}, {"ratio_to_sqrt_ln", ratios}};
  r.predicted = {{"ratio_ceiling", 2.0 * first}};
  return r;
}

// ---------------------------------------------------------------- factorization

/// V = G^T V0 G with G : H -> K and V0 symmetric on K.
struct FactorizedPerturbation {
  Matrix g;
  SymmetricOperator v0;

  FactorizedPerturbation(Matrix g_, SymmetricOperator v0_) : g(std::move(g_)), v0(std::move(v0_)) {
    if (g.rows() != v0.dim()) throw InputError("FactorizedPerturbation: G rows must match dim V0");
  }

  SymmetricOperator assembled() const {
    const Matrix v = g.transpose() * v0.matrix() * g;
    if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff())) {
      throw NumericalError("FactorizedPerturbation: assembled V is not symmetric");
    }
    return SymmetricOperator(v);
  }
};

/// For eigenpairs H psi_i = lambda_i psi_i (lambda_i in (eps, delta)) and
/// H0 phi_j = mu_j phi_j (mu_j in (-delta, -eps)) compares <psi_i, phi_j> with
/// <V0 G psi_i, G phi_j> int_0^inf e^{-t lambda_i} e^{t mu_j} dt.
inline VerificationReport factorization_check(const SymmetricOperator& h0,
                                              const FactorizedPerturbation& pert, double eps,
                                              double delta) {
  if (pert.g.cols() != h0.dim()) throw InputError("factorization_check: G columns must match dim H0");
  if (!(eps > 0.0) || !(delta > eps)) throw InputError("factorization_check: need 0 < eps < delta");
  VerificationReport r;
  r.name = "factorization";
  r.inputs = {{"dim", h0.dim()}, {"k_dim", pert.v0.dim()}, {"eps", eps}, {"delta", delta}};
  r.tolerance = {{"max_abs", 1e-10}};
  const SymmetricOperator h(h0.matrix() + pert.assembled().matrix());
  const SpectralDecomposition d0 = eigendecompose(h0);
  const SpectralDecomposition d = eigendecompose(h);
  const auto up = d.select([&](double t) { return SpectralWindow::open(eps, delta).contains(t); });
  const auto down = d0.select([&](double t) { return SpectralWindow::open(-delta, -eps).contains(t); });
  r.measured["pairs"] = up.size() * down.size();
  if (up.empty() || down.empty()) {
    r.measured["max_discrepancy"] = 0.0;
    r.notes.push_back("vacuous (0 = 0)");
    r.pass = true;
    return r;
  }
  const Matrix psi = d.columns(up);
  const Matrix phi = d0.columns(down);
  const Matrix overlap = psi.transpose() * phi;
  const Matrix coupled = (pert.v0.matrix() * (pert.g * psi)).transpose() * (pert.g * phi);
  double worst = 0.0;
  for (Index i = 0; i < overlap.rows(); ++i) {
    for (Index j = 0; j < overlap.cols(); ++j) {
      const double gap = d.eigenvalues()(up[i]) - d0.eigenvalues()(down[j]);
      worst = std::max(worst, std::abs(overlap(i, j) - coupled(i, j) / gap));
    }
  }
  r.measured["max_discrepancy"] = worst;
  r.pass = worst <= 1e-10;
  return r;
}

// ---------------------------------------------------------------- toy kernel

/// F'(lambda) = F'(0) + lambda^kappa E and F0'(lambda) = F0'(0) + lambda^kappa E0
/// on a small auxiliary space K.
struct ToyFlowModel {
  double kappa = 0.5;
  Matrix f_prime_0;
  Matrix e;
  Matrix f0_prime_0;
  Matrix e0;
  double p = 2.0;

  Matrix f_prime(double lambda) const { return f_prime_0 + std::pow(lambda, kappa) * e; }
  Matrix f0_prime(double lambda) const { return f0_prime_0 + std::pow(lambda, kappa) * e0; }
  Index dim() const { return f_prime_0.rows(); }

  /// Random PSD data of dimension `dim`: F'(0), F0'(0) well conditioned and
  /// non-commuting, E and E0 PSD of norm about 1/2.
  static ToyFlowModel random(std::uint64_t seed, Index dim = 4, double kappa = 0.5, double p = 2.0) {
    if (dim < 1) throw InputError("ToyFlowModel: dim must be >= 1");
    if (!(kappa > 0.0)) throw InputError("ToyFlowModel: kappa must be > 0");
    if (!(p >= 1.0)) throw InputError("ToyFlowModel: p must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    auto gauss = [&] {
      Matrix m(dim, dim);
      for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) m(i, j) = n01(rng);
      return m;
    };
    auto psd = [&](double floor, double scale) {
      const Matrix a = gauss();
      Matrix m = a * a.transpose();
      m *= scale / std::max(1e-300, symmetric_eigenvalues(m).maxCoeff());
      m.diagonal().array() += floor;
      return m;
    };
    ToyFlowModel t;
    t.kappa = kappa;
    t.p = p;
    t.f_prime_0 = psd(0.5, 1.0);
    t.f0_prime_0 = psd(0.5, 1.0);
    t.e = psd(0.0, 0.5);
    t.e0 = psd(0.0, 0.5);
    return t;
  }
};

namespace detail {

inline SampledFamily sample_on_rule(const std::function<Matrix(double)>& sigma, const quad::Rule& rule) {
  SampledFamily s{rule, {}};
  for (double x : rule.nodes) s.samples.push_back(sigma(std::exp(x)));
  return s;
}

}  // namespace detail

/// Builds K_eps (kernel int_eps^delta e^{-t lambda} F'(lambda) d lambda) on a
/// 200-point Gauss-Legendre rule in ln(lambda) and tracks
/// ||K_eps - Gamma_eps (x) F'(0)||_p, ||K_eps||_p^p / |ln eps| and the explicit
/// bound pi^{p-1} int ||F'(lambda) - F'(0)||_p^p d lambda / (2 lambda). The
/// same is done for F0'.
inline VerificationReport toy_kernel_check(const ToyFlowModel& model, const std::vector<double>& eps_list,
                                           double delta, int nodes = 200) {
  require_decreasing(eps_list, "toy_kernel_check");
  if (eps_list.size() < 2) throw InputError("toy_kernel_check: need at least 2 eps values");
  if (!(delta > eps_list.front())) throw InputError("toy_kernel_check: need delta > every eps");
  const double p = model.p;
  VerificationReport r;
  r.name = "toy_kernel";
  r.inputs = {{"kappa", model.kappa}, {"p", p}, {"dim", model.dim()}, {"delta", delta},
              {"eps_list", eps_list}, {"nodes", nodes}};
  r.tolerance = {{"growth_factor", 1.1}, {"band", {0.5, 1.5}}, {"bound_rel_slack", 1e-9},
                 {"psd_floor", -1e-12}};

  // Hoelder certificate and positivity on 64 log-spaced points of [eps_min, delta].
  const double lo = eps_list.back();
  double holder = 0.0, min_eig = kInfinity;
  for (int k = 0; k < 64; ++k) {
    const double lambda = lo * std::pow(delta / lo, k / 63.0);
    for (const Matrix& fl : {model.f_prime(lambda), model.f0_prime(lambda)}) {
      min_eig = std::min(min_eig, symmetric_eigenvalues(fl).minCoeff());
    }
    const double d1 = schatten_norm(Matrix(model.f_prime(lambda) - model.f_prime_0), SchattenIndex::infinity());
    const double d0 = schatten_norm(Matrix(model.f0_prime(lambda) - model.f0_prime_0), SchattenIndex::infinity());
    holder = std::max(holder, std::max(d1, d0) / std::pow(lambda, model.kappa));
  }

  // Uniform-in-eps bound: pi^{p-1} ||E||_p^p delta^{p kappa} / (2 p kappa).
  auto uniform = [&](const Matrix& e) {
    return std::pow(kPi, p - 1.0) * std::pow(schatten_norm(e, SchattenIndex(p)), p) *
           std::pow(delta, p * model.kappa) / (2.0 * p * model.kappa);
  };

  bool pass = min_eig >= -1e-12 && std::isfinite(holder);
  Json families = Json::array();
  for (int which = 0; which < 2; ++which) {
    const Matrix& base = which == 0 ? model.f_prime_0 : model.f0_prime_0;
    const Matrix& e = which == 0 ? model.e : model.e0;
    auto full = [&](double lambda) -> Matrix { return base + std::pow(lambda, model.kappa) * e; };
    auto diff = [&](double lambda) -> Matrix { return std::pow(lambda, model.kappa) * e; };
    const double base_p = std::pow(schatten_norm(base, SchattenIndex(p)), p);
    const double band_center = gamma_moment_constant(p) * base_p;
    const double uniform_bound = uniform(e);

    std::vector<double> diff_norms, diff_powers, bounds, ratios;
    bool bound_ok = true, band_ok = true;
    for (double eps : eps_list) {
      const quad::Rule rule = quad::gauss_legendre(nodes, std::log(eps), std::log(delta));
      const SampledFamily sd = detail::sample_on_rule(diff, rule);
      const SampledFamily sf = detail::sample_on_rule(full, rule);
      const double dp =
          schatten_power_from_singular_values(hankel_singular_values(laplace_hankel_matrix(sd)), p);
      const double kp =
          schatten_power_from_singular_values(hankel_singular_values(laplace_hankel_matrix(sf)), p);
      const double bound = hankel_schatten_bound_rhs(sd, p);
      diff_powers.push_back(dp);
      diff_norms.push_back(std::pow(dp, 1.0 / p));
      bounds.push_back(bound);
      const double ratio = kp / std::abs(std::log(eps));
      ratios.push_back(ratio);
      bound_ok = bound_ok && dp <= bound * (1.0 + 1e-9) && dp <= uniform_bound * (1.0 + 1e-9);
      band_ok = band_ok && ratio >= 0.5 * band_center && ratio <= 1.5 * band_center;
    }
    const std::size_t half = std::max<std::size_t>(1, diff_norms.size() / 2);
    const double early = *std::max_element(diff_norms.begin(), diff_norms.begin() + static_cast<std::ptrdiff_t>(half));
    const double overall = *std::max_element(diff_norms.begin(), diff_norms.end());
    const bool bounded = overall <= 1.1 * early + 1e-14;
    pass = pass && bound_ok && band_ok && bounded;
    families.push_back({{"family", which == 0 ? "F_prime" : "F0_prime"},
                        {"difference_norm", diff_norms},
                        {"difference_p_power", diff_powers},
                        {"explicit_bound", bounds},
                        {"uniform_bound", uniform_bound},
                        {"kernel_p_power_over_ln", ratios},
                        {"band_center", band_center},
                        {"bounded", bounded},
                        {"bound_respected", bound_ok},
                        {"in_band", band_ok}});
  }
  r.measured = {{"holder_constant", holder}, {"min_eigenvalue", min_eig}, {"families", families}};
  r.predicted = {{"band_center_constant", gamma_moment_constant(p)}};
  r.pass = pass;
  return r;
}

// ---------------------------------------------------------------- log det

struct LogdetPoint {
  double eps = 0.0;
  double value = 0.0;          // ln det(1 - Pi_eps), possibly -inf
  std::optional<Index> singular_index;  // eigenvector with eigenvalue within 1e-12 of 1
};

/// ln det(1 - Pi_eps^(1)) along the sweep; the |ln eps| slope must not exceed
/// logdet_constant + 0.2 |logdet_constant|.
inline VerificationReport logdet_experiment(const PreparedSystem& s, const std::vector<double>& eps_list,
                                            std::vector<LogdetPoint>* points = nullptr) {
  require_decreasing(eps_list, "logdet_experiment");
  if (eps_list.size() < 3) throw InputError("logdet_experiment: need at least 3 eps values for the regression");
  VerificationReport r;
  r.name = "logdet";
  r.inputs = {{"eps_list", eps_list}, {"system", s.config.to_json()}};
  std::vector<double> x, y, used;
  std::vector<LogdetPoint> pts;
  for (double requested : eps_list) {
    require_resolved(s.config, requested);
    const double eps = snap_eps(s, requested);
    const Vector ev = build_pi1(s.h0, s.h, s.config.lambda_star, eps).eigenvalues();
    LogdetPoint pt{eps, 0.0, std::nullopt};
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > 1.0 - 1e-12) {
        pt.value = -kInfinity;
        pt.singular_index = i;
        r.notes.push_back("eigenvalue 1 at eps = " + detail::fmt_double(eps) + ", eigenvector index " +
                          std::to_string(i) + ": determinant is 0");
        break;
      }
      pt.value += std::log1p(-std::max(ev(i), 0.0));
    }
    pts.push_back(pt);
    used.push_back(eps);
    x.push_back(std::abs(std::log(eps)));
    y.push_back(pt.value);
  }
  const Regression reg = fit_tail(x, y);
  const LogdetConstant c = logdet_constant(s.amplitudes);
  const double bound = c.closed_form + 0.2 * std::abs(c.closed_form);
  r.measured = {{"eps", used}, {"logdet", json_numbers(y)}, {"slope", json_number(reg.slope)},
                {"intercept", reg.intercept}, {"residuals", json_numbers(reg.residuals)}};
  r.predicted = {{"logdet_constant", c.closed_form}, {"logdet_constant_quadrature", c.quadrature},
                 {"amplitudes", s.amplitudes}};
  r.tolerance = {{"one_sided_relative", 0.2}, {"slope_ceiling", bound}};
  r.pass = reg.slope <= bound + 1e-12;
  if (points) *points = std::move(pts);
  return r;
}

}  // namespace spectral_lab
