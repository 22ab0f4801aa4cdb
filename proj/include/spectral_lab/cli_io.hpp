#pragma once

// Run configuration (JSON file plus flag overrides), typed output tables and
// their CSV / JSON serialization with 12 significant digits.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_lab/errors.hpp"
#include "spectral_lab/experiments.hpp"
#include "spectral_lab/schrodinger1d.hpp"

namespace spectral_lab {

inline constexpr const char* kArtifactVersion = "0.3.0";

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c{"gamma-moments", "schrodinger-sweep", "scattering-table",
                                          "verify-suite", "logdet"};
  return c;
}

struct RunConfig {
  std::string command;
  Grid1D grid;
  Potential potential = Potential::square_well(2.0, 1.0);
  double lambda_star = 1.0;
  std::vector<double> eps_list;
  double delta = 0.5;
  std::vector<std::string> f_list{"t^1", "t^2"};
  std::vector<double> q_list{1.0, 2.0, 3.0};
  double max_spacing = 0.02;
  std::vector<double> lambda_list;
  std::string output_path;
  std::string format = "csv";
  std::uint64_t seed = 0;

  SystemConfig system() const { return {grid, potential, lambda_star}; }

  std::vector<Functional> functionals() const {
    std::vector<Functional> out;
    for (const auto& s : f_list) out.push_back(Functional::parse(s));
    return out;
  }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["grid"] = {{"half_length", grid.half_length}, {"n_points", grid.n_points}};
    j["potential"] = potential.to_json();
    j["lambda_star"] = lambda_star;
    j["eps_list"] = eps_list;
    j["delta"] = delta;
    j["f_list"] = f_list;
    j["q_list"] = q_list;
    j["max_spacing"] = max_spacing;
    j["lambda_list"] = lambda_list;
    j["output_path"] = output_path;
    j["format"] = format;
    j["seed"] = seed;
    return j;
  }
};

/// Command defaults before the config file and flags are applied.
inline RunConfig default_config(const std::string& command) {
  RunConfig c;
  c.command = command;
  if (command == "gamma-moments") {
    c.delta = 1.0;
    c.eps_list = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  } else {
    c.delta = 0.5;
    c.eps_list = {0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};
  }
  for (int k = 1; k <= 16; ++k) c.lambda_list.push_back(0.25 * k);
  return c;
}

struct FlagOverrides {
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline void collect_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& prefix,
                            std::vector<std::string>& unknown) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) unknown.push_back(prefix + it.key());
}

template <class T>
T field(const Json& j, const std::string& key, const std::string& name) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("config field '" + name + "' has the wrong type");
  }
}

inline Potential potential_from_json(const Json& p) {
  if (!p.is_object()) throw InputError("config field 'potential' must be an object");
  std::vector<std::string> unknown;
  collect_unknown(p, {"kind", "depth", "half_width", "amplitude", "width"}, "potential.", unknown);
  const std::string kind = p.contains("kind") ? field<std::string>(p, "kind", "potential.kind") : "square_well";
  auto num = [&](const char* key, double fallback) {
    return p.contains(key) ? field<double>(p, key, std::string("potential.") + key) : fallback;
  };
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw InputError("unknown config keys: " + list);
  }
  try {
    if (kind == "zero") return Potential::zero();
    if (kind == "square_well") return Potential::square_well(num("depth", 2.0), num("half_width", 1.0));
    if (kind == "gaussian") return Potential::gaussian(num("amplitude", -1.0), num("width", 1.0));
  } catch (const InputError& e) {
    throw InputError(std::string("config field 'potential': ") + e.what());
  }
  throw InputError("config field 'potential.kind' must be zero, square_well or gaussian");
}

}  // namespace detail

/// Checks every invariant, naming the offending field.
inline void validate(const RunConfig& c) {
  bool known = false;
  for (const auto& k : known_commands()) known = known || k == c.command;
  if (!known) throw InputError("config field 'command': unknown command '" + c.command + "'");
  if (c.eps_list.empty()) throw InputError("config field 'eps_list' must not be empty");
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
    if (!(c.eps_list[i] > 0.0) || !std::isfinite(c.eps_list[i]))
      throw InputError("config field 'eps_list': entries must be finite and > 0");
    if (i && !(c.eps_list[i] < c.eps_list[i - 1]))
      throw InputError("config field 'eps_list' must be strictly decreasing");
  }
  if (!(c.delta > 0.0)) throw InputError("config field 'delta' must be > 0");
  if (!(c.lambda_star > 0.0) || !std::isfinite(c.lambda_star))
    throw InputError("config field 'lambda_star' must be finite and > 0");
  if (!(c.max_spacing > 0.0) || c.max_spacing > 0.05)
    throw InputError("config field 'max_spacing' must lie in (0, 0.05]");
  for (double q : c.q_list)
    if (!(q >= 1.0) || !std::isfinite(q)) throw InputError("config field 'q_list': entries must be >= 1");
  for (double l : c.lambda_list)
    if (!(l > 0.0) || !std::isfinite(l)) throw InputError("config field 'lambda_list': entries must be > 0");
  for (const auto& f : c.f_list) {
    try {
      Functional::parse(f);
    } catch (const InputError& e) {
      throw InputError(std::string("config field 'f_list': ") + e.what());
    }
  }
  if (c.format != "csv" && c.format != "json") throw InputError("config field 'format' must be csv or json");
  if (c.command == "gamma-moments" && c.eps_list.front() > c.delta)
    throw InputError("config field 'eps_list': eps must not exceed delta");
}

/// Defaults for `command`, then the JSON document, then the flags.
inline RunConfig config_from_json(const std::string& command, const Json& j, const FlagOverrides& flags = {}) {
  RunConfig c = default_config(command);
  if (!j.is_null() && !j.is_object()) throw InputError("config must be a JSON object");
  std::vector<std::string> unknown;
  if (j.is_object()) {
    detail::collect_unknown(j, {"command", "grid", "potential", "lambda_star", "eps_list", "delta", "f_list",
                                "q_list", "max_spacing", "lambda_list", "output_path", "format", "seed"},
                            "", unknown);
    if (j.contains("grid") && j.at("grid").is_object())
      detail::collect_unknown(j.at("grid"), {"half_length", "n_points"}, "grid.", unknown);
    if (j.contains("potential") && j.at("potential").is_object())
      detail::collect_unknown(j.at("potential"), {"kind", "depth", "half_width", "amplitude", "width"},
                              "potential.", unknown);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw InputError("unknown config keys: " + list);
  }
  if (j.is_object()) {
    if (j.contains("command") && detail::field<std::string>(j, "command", "command") != command)
      throw InputError("config field 'command' is '" + j.at("command").get<std::string>() +
                       "' but the subcommand is '" + command + "'");
    if (j.contains("grid")) {
      const Json& g = j.at("grid");
      if (!g.is_object()) throw InputError("config field 'grid' must be an object");
      const double l = g.contains("half_length") ? detail::field<double>(g, "half_length", "grid.half_length")
                                                 : c.grid.half_length;
      const Index n = g.contains("n_points") ? detail::field<Index>(g, "n_points", "grid.n_points") : c.grid.n_points;
      try {
        c.grid = Grid1D(l, n);
      } catch (const InputError& e) {
        throw InputError(std::string("config field 'grid': ") + e.what());
      }
    }
    if (j.contains("potential")) c.potential = detail::potential_from_json(j.at("potential"));
    if (j.contains("lambda_star")) c.lambda_star = detail::field<double>(j, "lambda_star", "lambda_star");
    if (j.contains("eps_list")) c.eps_list = detail::field<std::vector<double>>(j, "eps_list", "eps_list");
    if (j.contains("delta")) c.delta = detail::field<double>(j, "delta", "delta");
    if (j.contains("f_list")) c.f_list = detail::field<std::vector<std::string>>(j, "f_list", "f_list");
    if (j.contains("q_list")) c.q_list = detail::field<std::vector<double>>(j, "q_list", "q_list");
    if (j.contains("max_spacing")) c.max_spacing = detail::field<double>(j, "max_spacing", "max_spacing");
    if (j.contains("lambda_list"))
      c.lambda_list = detail::field<std::vector<double>>(j, "lambda_list", "lambda_list");
    if (j.contains("output_path")) c.output_path = detail::field<std::string>(j, "output_path", "output_path");
    if (j.contains("format")) c.format = detail::field<std::string>(j, "format", "format");
    if (j.contains("seed")) c.seed = detail::field<std::uint64_t>(j, "seed", "seed");
  }
  if (flags.out) c.output_path = *flags.out;
  if (flags.format) c.format = *flags.format;
  if (flags.seed) c.seed = *flags.seed;
  validate(c);
  return c;
}

/// Reads the config file at `path` (if any) and applies the flags.
inline RunConfig parse_config(const std::string& command, const std::optional<std::string>& path,
                              const FlagOverrides& flags = {}) {
  Json j;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw InputError("cannot open config file '" + *path + "'");
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("config file '" + *path + "' is not valid JSON: " + e.what());
    }
  }
  return config_from_json(command, j, flags);
}

// ---------------------------------------------------------------- tables

using Cell = std::variant<double, std::int64_t, std::string>;

struct OutputTable {
  enum class Type { real, integer, text };

  std::vector<std::string> header;
  std::vector<Type> types;
  std::vector<std::vector<Cell>> rows;
  Json metadata = Json::object();

  OutputTable() = default;
  OutputTable(std::vector<std::string> h, std::vector<Type> t) : header(std::move(h)), types(std::move(t)) {
    if (header.size() != types.size()) throw InputError("OutputTable: header and types differ in length");
  }

  void add_row(std::vector<Cell> row) {
    if (row.size() != header.size()) {
      throw InputError("OutputTable: row has " + std::to_string(row.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      const bool ok = (types[k] == Type::real && std::holds_alternative<double>(row[k])) ||
                      (types[k] == Type::integer && std::holds_alternative<std::int64_t>(row[k])) ||
                      (types[k] == Type::text && std::holds_alternative<std::string>(row[k]));
      if (!ok) throw InputError("OutputTable: cell type mismatch in column '" + header[k] + "'");
    }
    rows.push_back(std::move(row));
  }

  bool operator==(const OutputTable& o) const {
    return header == o.header && types == o.types && rows == o.rows;
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// The double nearest the 12-significant-digit rendering of v.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(format_number(v));
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return csv_escape(std::get<std::string>(c));
}

inline Json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return json_number(round12(*d));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

}  // namespace detail

inline std::string to_csv(const OutputTable& t) {
  std::string out;
  for (std::size_t k = 0; k < t.header.size(); ++k) out += (k ? "," : "") + detail::csv_escape(t.header[k]);
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + detail::cell_text(row[k]);
    out += "\n";
  }
  return out;
}

/// Rounds every floating-point number in a JSON tree to 12 significant digits.
inline Json round_json(const Json& j) {
  if (j.is_number_float()) return round12(j.get<double>());
  if (j.is_array() || j.is_object()) {
    Json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = round_json(*it);
    return out;
  }
  return j;
}

inline Json to_json(const OutputTable& t) {
  Json rows = Json::array();
  for (const auto& row : t.rows) {
    Json r;
    for (std::size_t k = 0; k < row.size(); ++k) r[t.header[k]] = detail::cell_json(row[k]);
    rows.push_back(std::move(r));
  }
  Json j;
  j["metadata"] = round_json(t.metadata);
  j["rows"] = rows;
  return j;
}

/// Parses CSV written by to_csv back into a table of the given column types.
inline OutputTable parse_csv(const std::string& text, const std::vector<OutputTable::Type>& types) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("parse_csv: missing header row");
  OutputTable t(detail::csv_split(line), types);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = detail::csv_split(line);
    if (parts.size() != types.size()) throw InputError("parse_csv: ragged row");
    std::vector<Cell> row;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      switch (types[k]) {
        case OutputTable::Type::real:
          row.emplace_back(std::stod(parts[k]));
          break;
        case OutputTable::Type::integer:
          row.emplace_back(static_cast<std::int64_t>(std::stoll(parts[k])));
          break;
        case OutputTable::Type::text:
          row.emplace_back(parts[k]);
          break;
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw InputError("write failed for '" + path + "'");
}

/// CSV goes to `path` with the metadata in `path`.meta.json; JSON holds both.
/// An empty path writes to `stream` instead (metadata goes nowhere for CSV).
inline void emit(const OutputTable& t, const std::string& format, const std::string& path, std::ostream& stream) {
  if (format == "csv") {
    const std::string body = to_csv(t);
    if (path.empty()) {
      stream << body;
    } else {
      write_text(path, body);
      write_text(path + ".meta.json", round_json(t.metadata).dump(2) + "\n");
    }
  } else if (format == "json") {
    const std::string body = to_json(t).dump(2) + "\n";
    if (path.empty()) stream << body;
    else write_text(path, body);
  } else {
    throw InputError("unknown output format '" + format + "'");
  }
}

}  // namespace spectral_lab
