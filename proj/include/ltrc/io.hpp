#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/simulation.hpp"
#include "ltrc/toml.hpp"
#include "ltrc/tree.hpp"

namespace ltrc {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write file: " + path);
  out << content;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

inline std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  for (char c : text) {
    if (c == '\n') {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
      line.clear();
    } else {
      line += c;
    }
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!line.empty()) lines.push_back(line);
  return lines;
}

inline double parse_number_cell(const std::string& cell, int row, const std::string& col) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || cell.empty())
    throw parse_error("row " + std::to_string(row) + ": bad number '" + cell +
                      "' in column " + col);
  return v;
}

inline double parse_covariate_cell(const std::string& cell, const covariate_spec& col,
                                   int row) {
  if (col.kind == cov_kind::numeric) return parse_number_cell(cell, row, col.name);
  for (std::size_t l = 0; l < col.levels.size(); ++l)
    if (col.levels[l] == cell) return static_cast<double>(l);
  throw parse_error("row " + std::to_string(row) + ": unknown level '" + cell +
                    "' in column " + col.name);
}

inline std::string format_covariate_cell(double value, const covariate_spec& col) {
  if (col.kind == cov_kind::numeric) return format_double(value);
  const auto idx = static_cast<std::size_t>(value);
  if (value != static_cast<double>(idx) || idx >= col.levels.size())
    throw validation_error("covariate value out of range for column " + col.name);
  return col.levels[idx];
}

inline void check_header(const std::vector<std::string>& got,
                         const std::vector<std::string>& expected) {
  if (got == expected) return;
  std::string want;
  for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
  std::string have;
  for (const auto& c : got) have += (have.empty() ? "" : ",") + c;
  throw parse_error("bad CSV header: expected '" + want + "', got '" + have + "'");
}

}  // namespace detail

inline dataset parse_ltrc_csv(const std::string& text, const covariate_schema& schema) {
  schema.check();
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("empty CSV input");
  std::vector<std::string> expected = {"id", "left", "right", "event"};
  for (const auto& col : schema.columns) expected.push_back(col.name);
  detail::check_header(detail::split_csv_line(lines[0]), expected);

  dataset d;
  d.schema = schema;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto cells = detail::split_csv_line(lines[i]);
    if (cells.size() != expected.size())
      throw parse_error("row " + std::to_string(row) + ": expected " +
                        std::to_string(expected.size()) + " cells, got " +
                        std::to_string(cells.size()));
    ltrc_record rec;
    rec.id = cells[0];
    rec.left = detail::parse_number_cell(cells[1], row, "left");
    rec.right = detail::parse_number_cell(cells[2], row, "right");
    const double ev = detail::parse_number_cell(cells[3], row, "event");
    if (ev != 0.0 && ev != 1.0)
      throw parse_error("row " + std::to_string(row) + ": event must be 0 or 1");
    rec.event = static_cast<int>(ev);
    for (std::size_t j = 0; j < schema.size(); ++j)
      rec.x.push_back(
          detail::parse_covariate_cell(cells[4 + j], schema.columns[j], row));
    try {
      check_record(rec, schema);
    } catch (const validation_error& e) {
      throw parse_error("row " + std::to_string(row) + ": " + e.what());
    }
    d.records.push_back(std::move(rec));
  }
  return d;
}

inline std::string write_ltrc_csv(const dataset& d) {
  std::string out = "id,left,right,event";
  for (const auto& col : d.schema.columns) out += "," + col.name;
  out += "\n";
  for (const auto& rec : d.records) {
    out += rec.id;
    out += "," + format_double(rec.left);
    out += "," + format_double(rec.right);
    out += "," + std::to_string(rec.event);
    for (std::size_t j = 0; j < d.schema.size(); ++j)
      out += "," + detail::format_covariate_cell(rec.x[j], d.schema.columns[j]);
    out += "\n";
  }
  return out;
}

inline std::vector<long_visit> parse_long_csv(const std::string& text,
                                              const covariate_schema& schema) {
  schema.check();
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("empty CSV input");
  std::vector<std::string> expected = {"id", "time", "event"};
  for (const auto& col : schema.columns) expected.push_back(col.name);
  detail::check_header(detail::split_csv_line(lines[0]), expected);

  std::vector<long_visit> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto cells = detail::split_csv_line(lines[i]);
    if (cells.size() != expected.size())
      throw parse_error("row " + std::to_string(row) + ": expected " +
                        std::to_string(expected.size()) + " cells, got " +
                        std::to_string(cells.size()));
    long_visit v;
    v.id = cells[0];
    v.time = detail::parse_number_cell(cells[1], row, "time");
    const double ev = detail::parse_number_cell(cells[2], row, "event");
    if (ev != 0.0 && ev != 1.0)
      throw parse_error("row " + std::to_string(row) + ": event must be 0 or 1");
    v.event = static_cast<int>(ev);
    int present = 0;
    for (std::size_t j = 0; j < schema.size(); ++j)
      present += cells[3 + j].empty() ? 0 : 1;
    if (present == static_cast<int>(schema.size())) {
      v.has_x = true;
      for (std::size_t j = 0; j < schema.size(); ++j)
        v.x.push_back(
            detail::parse_covariate_cell(cells[3 + j], schema.columns[j], row));
    } else if (present == 0) {
      v.has_x = false;
    } else {
      throw parse_error("row " + std::to_string(row) +
                        ": covariates must be all present or all empty");
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

struct covariate_row {
  std::string id;
  std::vector<double> x;
};

inline std::vector<covariate_row> parse_covariate_csv(const std::string& text,
                                                      const covariate_schema& schema) {
  schema.check();
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("empty CSV input");
  std::vector<std::string> expected = {"id"};
  for (const auto& col : schema.columns) expected.push_back(col.name);
  detail::check_header(detail::split_csv_line(lines[0]), expected);

  std::vector<covariate_row> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto cells = detail::split_csv_line(lines[i]);
    if (cells.size() != expected.size())
      throw parse_error("row " + std::to_string(row) + ": expected " +
                        std::to_string(expected.size()) + " cells, got " +
                        std::to_string(cells.size()));
    covariate_row r;
    r.id = cells[0];
    for (std::size_t j = 0; j < schema.size(); ++j)
      r.x.push_back(detail::parse_covariate_cell(cells[1 + j], schema.columns[j], row));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline covariate_schema load_schema_toml(const std::string& text) {
  const toml_document doc = parse_toml(text);
  auto it = doc.arrays.find("column");
  if (it == doc.arrays.end())
    throw schema_error("schema file must contain [[column]] entries");
  covariate_schema schema;
  for (const auto& table : it->second) {
    for (const auto& [key, value] : table.entries)
      if (key != "name" && key != "kind" && key != "levels")
        throw schema_error("unknown schema key '" + key + "'");
    covariate_spec col;
    col.name = table.get_string("name");
    const std::string kind = table.get_string("kind");
    if (kind == "numeric")
      col.kind = cov_kind::numeric;
    else if (kind == "ordinal")
      col.kind = cov_kind::ordinal;
    else if (kind == "nominal")
      col.kind = cov_kind::nominal;
    else
      throw schema_error("unknown covariate kind '" + kind + "'");
    if (table.has("levels")) col.levels = table.get_string_array("levels");
    schema.columns.push_back(std::move(col));
  }
  schema.check();
  return schema;
}

inline std::string write_schema_toml(const covariate_schema& schema) {
  std::string out;
  for (const auto& col : schema.columns) {
    out += "[[column]]\n";
    out += "name = \"" + col.name + "\"\n";
    out += "kind = \"";
    out += col.kind == cov_kind::numeric
               ? "numeric"
               : (col.kind == cov_kind::ordinal ? "ordinal" : "nominal");
    out += "\"\n";
    if (!col.levels.empty()) {
      out += "levels = [";
      for (std::size_t l = 0; l < col.levels.size(); ++l)
        out += (l ? ", \"" : "\"") + col.levels[l] + "\"";
      out += "]\n";
    }
    out += "\n";
  }
  return out;
}

enum class experiment_kind { recovery, null_selection, ibs };

struct scenario_run {
  experiment_kind kind = experiment_kind::recovery;
  scenario_spec spec;
  int trials = 1;
};

struct scenario_grid {
  std::vector<scenario_run> runs;
};

namespace detail {

inline sim_family family_from_string(const std::string& s) {
  if (s == "exponential") return sim_family::exponential;
  if (s == "weibull_i") return sim_family::weibull_increasing;
  if (s == "weibull_d") return sim_family::weibull_decreasing;
  if (s == "lognormal") return sim_family::lognormal;
  if (s == "bathtub") return sim_family::bathtub;
  if (s == "gompertz") return sim_family::gompertz;
  throw schema_error("unknown family '" + s + "'");
}

inline sim_setup setup_from_string(const std::string& s) {
  if (s == "tree") return sim_setup::tree;
  if (s == "linear") return sim_setup::linear;
  if (s == "nonlinear") return sim_setup::nonlinear;
  if (s == "tv_type1") return sim_setup::tv_type1;
  if (s == "tv_type2") return sim_setup::tv_type2;
  if (s == "tv_continuous") return sim_setup::tv_continuous;
  throw schema_error("unknown setup '" + s + "'");
}

}  // namespace detail

inline scenario_grid load_scenario_grid(const std::string& text) {
  const toml_document doc = parse_toml(text);
  std::uint64_t default_seed = 1;
  int default_trials = 1;
  if (auto it = doc.tables.find("grid"); it != doc.tables.end()) {
    for (const auto& [key, value] : it->second.entries)
      if (key != "seed" && key != "trials")
        throw schema_error("unknown grid key '" + key + "'");
    default_seed =
        static_cast<std::uint64_t>(it->second.get_number_or("seed", 1.0));
    default_trials = static_cast<int>(it->second.get_number_or("trials", 1.0));
  }

  auto it = doc.arrays.find("scenario");
  if (it == doc.arrays.end())
    throw schema_error("scenario grid must contain [[scenario]] entries");

  scenario_grid grid;
  std::set<std::string> names;
  for (const auto& table : it->second) {
    static const std::set<std::string> allowed = {
        "name", "kind", "family", "setup", "truncation", "censoring",
        "n",    "trials", "seed"};
    for (const auto& [key, value] : table.entries)
      if (!allowed.count(key)) throw schema_error("unknown scenario key '" + key + "'");

    scenario_run run;
    run.spec.name = table.get_string("name");
    if (!names.insert(run.spec.name).second)
      throw schema_error("duplicate scenario name '" + run.spec.name + "'");
    const std::string kind = table.get_string_or("kind", "recovery");
    if (kind == "recovery")
      run.kind = experiment_kind::recovery;
    else if (kind == "null")
      run.kind = experiment_kind::null_selection;
    else if (kind == "ibs")
      run.kind = experiment_kind::ibs;
    else
      throw schema_error("unknown experiment kind '" + kind + "'");

    if (run.kind != experiment_kind::null_selection) {
      run.spec.family = detail::family_from_string(table.get_string("family"));
      run.spec.setup = detail::setup_from_string(table.get_string_or("setup", "tree"));
      run.spec.trunc_upper = table.get_number_or("truncation", 0.0);
      run.spec.censor_target = table.get_number_or("censoring", 0.0);
    }
    run.spec.n = static_cast<int>(table.get_number_or("n", 100.0));
    run.spec.seed = table.has("seed")
                        ? static_cast<std::uint64_t>(table.get_number("seed"))
                        : default_seed;
    run.trials = static_cast<int>(table.get_number_or("trials", default_trials));
    if (run.trials < 0) throw schema_error("trials must be >= 0");
    run.spec.check();
    grid.runs.push_back(std::move(run));
  }
  return grid;
}

inline std::string write_trial_csv(const std::vector<trial_row>& rows) {
  std::string out = "scenario,method,seed,metric,value\n";
  for (const auto& r : rows) {
    out += r.scenario;
    out += "," + r.method;
    out += "," + std::to_string(r.seed);
    out += "," + r.metric;
    out += "," + format_double(r.value);
    out += "\n";
  }
  return out;
}

inline std::string join_doubles(const std::vector<double>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += format_double(values[i]);
  }
  return out;
}

}  // namespace ltrc
