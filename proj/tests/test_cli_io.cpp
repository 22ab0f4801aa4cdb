#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "spectral_lab/cli_io.hpp"

using namespace spectral_lab;
using Type = OutputTable::Type;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("spectral_lab_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPECTRAL_LAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, GammaDefaults) {
  const RunConfig c = parse_config("gamma-moments", std::nullopt);
  EXPECT_EQ(c.delta, 1.0);
  ASSERT_EQ(c.eps_list.size(), 6u);
  EXPECT_EQ(c.eps_list.front(), 1e-3);
  EXPECT_EQ(c.eps_list.back(), 1e-8);
  EXPECT_EQ(c.format, "csv");
  EXPECT_EQ(c.grid.n_points, 6000);
  EXPECT_EQ(c.grid.half_length, 300.0);
}

TEST(ParseConfig, EmptyObjectMatchesNoFile) {
  const fs::path p = scratch() / "empty.json";
  spit(p, "{}");
  EXPECT_EQ(parse_config("logdet", p.string()).to_json(), parse_config("logdet", std::nullopt).to_json());
}

TEST(ParseConfig, RejectsIncreasingEpsByName) {
  const std::string m =
      message_of([] { config_from_json("schrodinger-sweep", Json{{"eps_list", {0.1, 0.2, 0.05}}}); });
  EXPECT_NE(m.find("eps_list"), std::string::npos) << m;
}

TEST(ParseConfig, ListsUnknownKeys) {
  const std::string m = message_of([] {
    config_from_json("logdet", Json{{"epsilon", 1}, {"grid", {{"n", 3}}}, {"potential", {{"kind", "zero"}, {"x", 1}}}});
  });
  EXPECT_NE(m.find("epsilon"), std::string::npos) << m;
  EXPECT_NE(m.find("grid.n"), std::string::npos) << m;
  EXPECT_NE(m.find("potential.x"), std::string::npos) << m;
}

TEST(ParseConfig, FieldErrorsNameTheField) {
  EXPECT_NE(message_of([] { config_from_json("logdet", Json{{"delta", -1.0}}); }).find("delta"), std::string::npos);
  EXPECT_NE(message_of([] { config_from_json("logdet", Json{{"f_list", {"sin"}}}); }).find("f_list"),
            std::string::npos);
  EXPECT_NE(message_of([] { config_from_json("logdet", Json{{"lambda_star", "one"}}); }).find("lambda_star"),
            std::string::npos);
  EXPECT_NE(message_of([] { config_from_json("logdet", Json{{"grid", {{"n_points", 1}}}}); }).find("grid"),
            std::string::npos);
  EXPECT_NE(message_of([] { config_from_json("logdet", Json{{"command", "gamma-moments"}}); }).find("command"),
            std::string::npos);
  EXPECT_THROW(config_from_json("logdet", Json::array()), InputError);
  EXPECT_THROW(parse_config("logdet", std::string("/nonexistent/config.json")), InputError);
}

TEST(ParseConfig, FlagsWin) {
  FlagOverrides f;
  f.format = "json";
  f.seed = 99;
  f.out = "x.json";
  const RunConfig c = config_from_json("verify-suite", Json{{"format", "csv"}, {"seed", 3}, {"output_path", "y"}}, f);
  EXPECT_EQ(c.format, "json");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.output_path, "x.json");
}

TEST(ParseConfig, EchoRoundTripsByteIdentically) {
  const Json j = {{"command", "schrodinger-sweep"},
                  {"grid", {{"half_length", 120.5}, {"n_points", 2400}}},
                  {"potential", {{"kind", "gaussian"}, {"amplitude", -1.25}, {"width", 0.7}}},
                  {"lambda_star", 1.5},
                  {"eps_list", {0.4, 0.2, 0.1}},
                  {"delta", 0.45},
                  {"f_list", {"t^1", "indicator(0.1,0.5)", "log1m"}},
                  {"q_list", {1, 2}},
                  {"max_spacing", 0.01},
                  {"lambda_list", {0.5, 1.0}},
                  {"output_path", "out.csv"},
                  {"format", "json"},
                  {"seed", 12345}};
  const RunConfig c = config_from_json("schrodinger-sweep", j);
  const std::string echo = c.to_json().dump();
  const RunConfig again = config_from_json("schrodinger-sweep", Json::parse(echo));
  EXPECT_EQ(again.to_json().dump(), echo);
  EXPECT_EQ(c.potential.kind(), Potential::Kind::gaussian);
  EXPECT_EQ(c.f_list.size(), 3u);
}

TEST(OutputTable, TypeAndWidthChecks) {
  OutputTable t({"a", "b"}, {Type::real, Type::text});
  EXPECT_THROW(t.add_row({1.0}), InputError);
  EXPECT_THROW(t.add_row({std::string("x"), std::string("y")}), InputError);
  EXPECT_THROW(OutputTable({"a"}, {Type::real, Type::real}), InputError);
}

TEST(Emit, EmptyTableIsHeaderOnly) {
  const OutputTable t({"eps", "q", "trace"}, {Type::real, Type::real, Type::real});
  EXPECT_EQ(to_csv(t), "eps,q,trace\n");
  EXPECT_EQ(parse_csv(to_csv(t), t.types), t);
}

TEST(Emit, OneRowRoundTrips) {
  OutputTable t({"x", "n", "name", "y"}, {Type::real, Type::integer, Type::text, Type::real});
  t.add_row({1.23456789012, std::int64_t{-7}, std::string("indicator(0.1,0.5)"), 1e-300});
  const std::string csv = to_csv(t);
  EXPECT_EQ(csv, "x,n,name,y\n1.23456789012,-7,\"indicator(0.1,0.5)\",1e-300\n");
  EXPECT_EQ(parse_csv(csv, t.types), t);
  EXPECT_EQ(to_csv(parse_csv(csv, t.types)), csv);
}

TEST(Emit, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(kPi), "3.14159265359");
  EXPECT_EQ(format_number(-kInfinity), "-inf");
  EXPECT_EQ(round12(1.0 / 3.0), 0.333333333333);
  OutputTable t({"v"}, {Type::real});
  t.add_row({2.0 / 3.0});
  t.metadata["c"] = 1.0 / 7.0;
  const Json j = to_json(t);
  EXPECT_EQ(j["rows"][0]["v"].get<double>(), 0.666666666667);
  EXPECT_EQ(j["metadata"]["c"].get<double>(), 0.142857142857);
}

TEST(Emit, WritesSidecarAndNamesBadPath) {
  OutputTable t({"v"}, {Type::real});
  t.add_row({1.5});
  t.metadata["artifact_version"] = kArtifactVersion;
  const fs::path p = scratch() / "table.csv";
  std::ostringstream sink;
  emit(t, "csv", p.string(), sink);
  EXPECT_EQ(slurp(p), "v\n1.5\n");
  EXPECT_EQ(Json::parse(slurp(p.string() + ".meta.json"))["artifact_version"], kArtifactVersion);
  emit(t, "json", "", sink);
  EXPECT_EQ(Json::parse(sink.str())["rows"][0]["v"], 1.5);
  const std::string m = message_of([&] { emit(t, "csv", "/nonexistent/dir/t.csv", sink); });
  EXPECT_NE(m.find("/nonexistent/dir/t.csv"), std::string::npos);
}

TEST(Cli, GammaMomentsSchema) {
  const fs::path cfg = scratch() / "gamma.json";
  spit(cfg, R"({"eps_list": [1e-2, 1e-3, 1e-4], "q_list": [1, 2]})");
  const fs::path out = scratch() / "gamma.csv";
  ASSERT_EQ(run_cli("gamma-moments --config " + cfg.string() + " --out " + out.string()), 0);
  const std::string csv = slurp(out);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "eps,delta,q,trace,trace_over_ln,predicted_constant");
  const OutputTable t = parse_csv(csv, std::vector<Type>(6, Type::real));
  EXPECT_EQ(t.rows.size(), 6u);
  const Json meta = Json::parse(slurp(out.string() + ".meta.json"));
  EXPECT_EQ(meta["artifact_version"], kArtifactVersion);
  EXPECT_TRUE(meta.contains("wall_time_s"));
  EXPECT_EQ(meta["config"]["q_list"].size(), 2u);
}

TEST(Cli, DeterministicTables) {
  const fs::path cfg = scratch() / "scat.json";
  spit(cfg, R"({"lambda_list": [0.5, 1.0, 2.0], "potential": {"kind": "gaussian", "amplitude": -1.0, "width": 1.0}})");
  const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv";
  ASSERT_EQ(run_cli("scattering-table --config " + cfg.string() + " --out " + a.string()), 0);
  ASSERT_EQ(run_cli("scattering-table --config " + cfg.string() + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a).substr(0, slurp(a).find('\n')),
            "lambda,theta1,theta2,a1,a2,logdet_constant,delta_1,delta_2,delta_3");

  const fs::path ja = scratch() / "a.json", jb = scratch() / "b.json";
  ASSERT_EQ(run_cli("scattering-table --config " + cfg.string() + " --format json --out " + ja.string()), 0);
  ASSERT_EQ(run_cli("scattering-table --config " + cfg.string() + " --format json --out " + jb.string()), 0);
  EXPECT_EQ(Json::parse(slurp(ja))["rows"], Json::parse(slurp(jb))["rows"]);
}

TEST(Cli, SchrodingerSweepRuns) {
  const fs::path cfg = scratch() / "sweep.json";
  spit(cfg, R"({"grid": {"half_length": 60, "n_points": 1200}, "eps_list": [0.4, 0.3, 0.2, 0.15],
               "f_list": ["t", "t^2", "log1m"]})");
  const fs::path out = scratch() / "sweep.json.out";
  ASSERT_EQ(run_cli("schrodinger-sweep --config " + cfg.string() + " --format json --out " + out.string()), 0);
  const Json j = Json::parse(slurp(out));
  EXPECT_EQ(j["rows"].size(), 12u);
  EXPECT_EQ(j["metadata"]["slopes"].size(), 3u);
  EXPECT_EQ(j["rows"][0]["f"], "t^1");
}

TEST(Cli, InputErrorsExitTwo) {
  const fs::path bad = scratch() / "bad.json";
  spit(bad, R"({"eps_list": [0.1, 0.2, 0.3]})");
  EXPECT_EQ(run_cli("gamma-moments --config " + bad.string()), 2);
  const fs::path unknown = scratch() / "unknown.json";
  spit(unknown, R"({"epsilon": 1})");
  EXPECT_EQ(run_cli("logdet --config " + unknown.string()), 2);
  const fs::path broken = scratch() / "broken.json";
  spit(broken, "{");
  EXPECT_EQ(run_cli("logdet --config " + broken.string()), 2);
  EXPECT_EQ(run_cli("gamma-moments --config /nonexistent.json"), 2);
  EXPECT_EQ(run_cli("gamma-moments --format xml"), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("gamma-moments --seed abc"), 2);
  EXPECT_EQ(run_cli("gamma-moments --out /nonexistent/dir/x.csv"), 2);
}
