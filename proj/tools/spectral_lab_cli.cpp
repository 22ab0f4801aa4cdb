// spectral-lab: command-line front end.
//   exit 0  every check passed (or a table was written)
//   exit 1  a check failed, or a computation did not converge
//   exit 2  bad input: flags, config file, values

#include <chrono>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spectral_lab/cli_io.hpp"
#include "spectral_lab/experiments.hpp"
#include "spectral_lab/scattering1d.hpp"
#include "spectral_lab/suite.hpp"

using namespace spectral_lab;
using Type = OutputTable::Type;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
};

Json base_metadata(const RunConfig& cfg) {
  Json m;
  m["artifact_version"] = kArtifactVersion;
  m["config"] = cfg.to_json();
  return m;
}

int gamma_moments(const RunConfig& cfg, OutputTable& t) {
  t = OutputTable({"eps", "delta", "q", "trace", "trace_over_ln", "predicted_constant"},
                  std::vector<Type>(6, Type::real));
  const auto rows = gamma_moment_table(cfg.delta, cfg.eps_list, cfg.q_list, cfg.max_spacing);
  for (const auto& r : rows) t.add_row({r.eps, r.delta, r.q, r.trace, r.trace_over_ln, r.predicted_constant});
  if (cfg.eps_list.size() >= 3) {
    Json slopes = Json::array();
    for (std::size_t k = 0; k < cfg.q_list.size(); ++k) {
      std::vector<double> x, y;
      for (std::size_t i = k; i < rows.size(); i += cfg.q_list.size()) {
        x.push_back(std::abs(std::log(rows[i].eps)));
        y.push_back(rows[i].trace);
      }
      slopes.push_back({{"q", cfg.q_list[k]}, {"slope", fit_tail(x, y, x.size()).slope},
                        {"predicted", rows[k].predicted_constant}});
    }
    t.metadata["slopes"] = slopes;
  }
  return 0;
}

double reach(const RunConfig& cfg) { return std::max(2.0 * cfg.eps_list.front(), cfg.delta); }

int schrodinger_sweep(const RunConfig& cfg, OutputTable& t) {
  t = OutputTable({"eps", "abs_ln_eps", "f", "trace_pi1", "trace_pi2"},
                  {Type::real, Type::real, Type::text, Type::real, Type::real});
  const PreparedSystem s = prepare_system(cfg.system(), reach(cfg));
  const auto fs = cfg.functionals();
  const auto pi1 = epsilon_sweep(s, fs, cfg.eps_list, SweepVariant::pi1);
  const auto pi2 = epsilon_sweep(s, fs, cfg.eps_list, SweepVariant::pi2);
  Json slopes = Json::array();
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const TracePoint& a = pi1[k].points[i];
      t.add_row({a.eps, a.ln_eps_abs, pi1[k].f_descriptor, a.value, pi2[k].points[i].value});
    }
  }
  for (std::size_t k = 0; k < fs.size(); ++k) {
    slopes.push_back({{"f", pi1[k].f_descriptor},
                      {"slope_pi1", json_number(pi1[k].regression.slope)},
                      {"slope_pi2", json_number(pi2[k].regression.slope)},
                      {"predicted", json_number(pi1[k].predicted_slope)},
                      {"residuals_pi1", json_numbers(pi1[k].regression.residuals)}});
  }
  t.metadata["amplitudes"] = s.amplitudes;
  t.metadata["slopes"] = slopes;
  std::vector<std::string> warnings;
  for (const auto& series : pi1) warnings.insert(warnings.end(), series.warnings.begin(), series.warnings.end());
  t.metadata["warnings"] = warnings;
  return 0;
}

int scattering_table(const RunConfig& cfg, OutputTable& t) {
  t = OutputTable({"lambda", "theta1", "theta2", "a1", "a2", "logdet_constant", "delta_1", "delta_2", "delta_3"},
                  std::vector<Type>(9, Type::real));
  for (double lambda : cfg.lambda_list) {
    const ScatteringRow r = scattering_row(cfg.potential, lambda);
    t.add_row({r.lambda, r.theta1, r.theta2, r.a1, r.a2, r.logdet_constant, r.delta1, r.delta2, r.delta3});
  }
  return 0;
}

int logdet(const RunConfig& cfg, OutputTable& t) {
  t = OutputTable({"eps", "abs_ln_eps", "logdet"}, {Type::real, Type::real, Type::real});
  const PreparedSystem s = prepare_system(cfg.system(), reach(cfg));
  std::vector<LogdetPoint> pts;
  const VerificationReport rep = logdet_experiment(s, cfg.eps_list, &pts);
  for (const auto& p : pts) t.add_row({p.eps, std::abs(std::log(p.eps)), p.value});
  t.metadata["report"] = rep.to_json();
  return rep.pass ? 0 : 1;
}

int verify_suite(const RunConfig& cfg, OutputTable& t) {
  t = OutputTable({"name", "pass", "measured", "predicted", "tolerance"},
                  {Type::text, Type::integer, Type::text, Type::text, Type::text});
  suite::SuiteOptions o;
  o.seed = cfg.seed;
  o.system = cfg.system();
  o.eps_list = cfg.eps_list;
  o.delta = cfg.delta;
  const auto reports = suite::run_suite(o);
  Json checks = Json::array();
  bool all = true;
  for (const auto& r : reports) {
    const Json j = round_json(r.to_json());
    checks.push_back(j);
    t.add_row({r.name, std::int64_t{r.pass ? 1 : 0}, j["measured"].dump(), j["predicted"].dump(),
               j["tolerance"].dump()});
    all = all && r.pass;
    std::cerr << (r.pass ? "PASS " : "FAIL ") << r.name << "\n";
  }
  t.metadata["checks"] = checks;
  return all ? 0 : 1;
}

int run(const std::string& command, const Flags& f) {
  FlagOverrides o;
  if (!f.out.empty()) o.out = f.out;
  if (!f.format.empty()) o.format = f.format;
  o.seed = f.seed;
  const RunConfig cfg =
      parse_config(command, f.config.empty() ? std::nullopt : std::optional<std::string>(f.config), o);
  const auto t0 = std::chrono::steady_clock::now();
  OutputTable table;
  static const std::map<std::string, int (*)(const RunConfig&, OutputTable&)> dispatch{
      {"gamma-moments", gamma_moments}, {"schrodinger-sweep", schrodinger_sweep},
      {"scattering-table", scattering_table}, {"logdet", logdet}, {"verify-suite", verify_suite}};
  const int code = dispatch.at(command)(cfg, table);
  Json meta = base_metadata(cfg);
  for (auto it = table.metadata.begin(); it != table.metadata.end(); ++it) meta[it.key()] = it.value();
  meta["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  table.metadata = meta;
  if (command == "verify-suite" && cfg.format == "json") {
    // Reports are the payload here; the summary table would repeat them.
    Json j;
    j["metadata"] = round_json(Json{{"artifact_version", kArtifactVersion}, {"config", cfg.to_json()},
                                    {"wall_time_s", meta["wall_time_s"]}});
    j["checks"] = meta["checks"];
    const std::string body = j.dump(2) + "\n";
    if (cfg.output_path.empty()) std::cout << body;
    else write_text(cfg.output_path, body);
  } else {
    emit(table, cfg.format, cfg.output_path, std::cout);
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral asymptotics of products of spectral projections"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gamma-moments", "tr Gamma_eps^q table over an eps sweep"},
      {"schrodinger-sweep", "tr f(Pi_eps) for the 1D Schrodinger pair over an eps sweep"},
      {"scattering-table", "eigenphases, amplitudes and predicted constants against energy"},
      {"verify-suite", "run every check and report pass/fail"},
      {"logdet", "ln det(1 - Pi_eps) sweep and its one-sided bound"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--out", flags.out, "output path (default: stdout)");
    sub->add_option("--format", flags.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", flags.seed, "seed for randomized checks");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
