#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "ltrc/io.hpp"
#include "support.hpp"

using namespace ltrc;

namespace {

covariate_schema mixed_schema() {
  covariate_schema s;
  s.columns.push_back({"age", cov_kind::numeric, {}});
  s.columns.push_back({"stage", cov_kind::ordinal, {"i", "ii", "iii"}});
  s.columns.push_back({"arm", cov_kind::nominal, {"ctl", "trt"}});
  return s;
}

}  // namespace

TEST_CASE("toml parses tables, arrays and scalars") {
  const std::string text =
      "top = 3  # comment\n"
      "flag = true\n"
      "label = \"a#b\\n\"\r\n"
      "\n"
      "[grid]\n"
      "seed = 42\n"
      "\n"
      "[[scenario]]\n"
      "name = \"one\"\n"
      "sizes = [1, 2, 3]\n"
      "tags = [\"x\", \"y\"]\n"
      "[[scenario]]\n"
      "name = \"two\"\n";
  const toml_document doc = parse_toml(text);
  REQUIRE(doc.root.get_number("top") == 3.0);
  REQUIRE(doc.root.get("flag").flag);
  REQUIRE(doc.root.get_string("label") == "a#b\n");
  REQUIRE(doc.tables.at("grid").get_number("seed") == 42.0);
  REQUIRE(doc.arrays.at("scenario").size() == 2);
  const auto& one = doc.arrays.at("scenario")[0];
  REQUIRE(one.get_string("name") == "one");
  REQUIRE(one.get("sizes").items.size() == 3);
  REQUIRE(one.get("sizes").items[2].num == 3.0);
  REQUIRE(one.get_string_array("tags") == std::vector<std::string>{"x", "y"});
  REQUIRE(doc.arrays.at("scenario")[1].get_string("name") == "two");
}

TEST_CASE("toml errors carry line numbers") {
  try {
    parse_toml("a = 1\nb = nonsense\n");
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
  REQUIRE_THROWS_AS(parse_toml("just text"), parse_error);
  REQUIRE_THROWS_AS(parse_toml("a = \"open\n"), parse_error);
  REQUIRE_THROWS_AS(parse_toml("a = [1, 2\n"), parse_error);
  REQUIRE_THROWS_AS(parse_toml("[bad name]\n"), parse_error);
  REQUIRE_THROWS_AS(parse_toml("a = 1\na = 2\n"), parse_error);
  REQUIRE_THROWS_AS(parse_toml("[t]\nx = 1\n[t]\ny = 2\n"), parse_error);
}

TEST_CASE("toml getters enforce value kinds") {
  const toml_document doc = parse_toml("a = 1\nb = \"s\"\n");
  REQUIRE_THROWS_AS(doc.root.get_string("a"), schema_error);
  REQUIRE_THROWS_AS(doc.root.get_number("b"), schema_error);
  REQUIRE_THROWS_AS(doc.root.get("missing"), schema_error);
  REQUIRE(doc.root.get_number_or("missing", 9.5) == 9.5);
  REQUIRE(doc.root.get_string_or("missing", "d") == "d");
}

TEST_CASE("schema toml round trip") {
  const covariate_schema s = mixed_schema();
  const covariate_schema back = load_schema_toml(write_schema_toml(s));
  REQUIRE(back.size() == s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    REQUIRE(back.columns[j].name == s.columns[j].name);
    REQUIRE(back.columns[j].kind == s.columns[j].kind);
    REQUIRE(back.columns[j].levels == s.columns[j].levels);
  }
}

TEST_CASE("schema toml validation") {
  REQUIRE_THROWS_AS(load_schema_toml("x = 1\n"), schema_error);
  REQUIRE_THROWS_AS(
      load_schema_toml("[[column]]\nname = \"a\"\nkind = \"fancy\"\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_schema_toml("[[column]]\nname = \"a\"\nkind = \"numeric\"\nextra = 1\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_schema_toml("[[column]]\nname = \"a\"\nkind = \"nominal\"\n"),
      schema_error);
}

TEST_CASE("ltrc csv round trip is byte identical") {
  dataset d;
  d.schema = mixed_schema();
  d.records.push_back({"s1", 0.0, 2.5, 1, {61.25, 0.0, 1.0}});
  d.records.push_back({"s2", 0.1, 7.0, 0, {49.5, 2.0, 0.0}});
  d.records.push_back({"s3", 1.0 / 3.0, 0.7, 1, {55.0, 1.0, 1.0}});
  const std::string text = write_ltrc_csv(d);
  const dataset back = parse_ltrc_csv(text, d.schema);
  REQUIRE(back.records.size() == d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    REQUIRE(back.records[i].id == d.records[i].id);
    REQUIRE(back.records[i].left == d.records[i].left);
    REQUIRE(back.records[i].right == d.records[i].right);
    REQUIRE(back.records[i].event == d.records[i].event);
    REQUIRE(back.records[i].x == d.records[i].x);
  }
  REQUIRE(write_ltrc_csv(back) == text);
}

TEST_CASE("ltrc csv parse errors") {
  const covariate_schema s = mixed_schema();
  REQUIRE_THROWS_AS(parse_ltrc_csv("", s), parse_error);
  REQUIRE_THROWS_AS(parse_ltrc_csv("id,left,right\n", s), parse_error);
  const std::string header = "id,left,right,event,age,stage,arm\n";
  REQUIRE_THROWS_AS(parse_ltrc_csv(header + "s1,0,oops,1,50,i,trt\n", s),
                    parse_error);
  REQUIRE_THROWS_AS(parse_ltrc_csv(header + "s1,0,2,1,50,i\n", s), parse_error);
  REQUIRE_THROWS_AS(parse_ltrc_csv(header + "s1,0,2,2,50,i,trt\n", s),
                    parse_error);
  REQUIRE_THROWS_AS(parse_ltrc_csv(header + "s1,0,2,1,50,iv,trt\n", s),
                    parse_error);
  REQUIRE_THROWS_AS(parse_ltrc_csv(header + "s1,3,2,1,50,i,trt\n", s),
                    parse_error);
  try {
    parse_ltrc_csv(header + "s1,0,2,1,50,i,trt\ns2,0,bad,1,50,i,trt\n", s);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    REQUIRE(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("long csv rows are all-present or all-empty") {
  const covariate_schema s = mixed_schema();
  const std::string text =
      "id,time,event,age,stage,arm\n"
      "p1,0,0,50,i,trt\n"
      "p1,2,1,,,\n"
      "p2,0.5,0,61,iii,ctl\n";
  const auto rows = parse_long_csv(text, s);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].has_x);
  REQUIRE(rows[0].x == std::vector<double>{50.0, 0.0, 1.0});
  REQUIRE_FALSE(rows[1].has_x);
  REQUIRE(rows[1].event == 1);
  REQUIRE(rows[2].time == 0.5);
  REQUIRE_THROWS_AS(
      parse_long_csv("id,time,event,age,stage,arm\np1,0,0,50,,trt\n", s),
      parse_error);
  REQUIRE_THROWS_AS(
      parse_long_csv("id,time,event,age,stage,arm\np1,0,3,50,i,trt\n", s),
      parse_error);
}

TEST_CASE("covariate csv carries id plus schema columns") {
  const covariate_schema s = mixed_schema();
  const auto rows = parse_covariate_csv("id,age,stage,arm\nq1,44,ii,ctl\n", s);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].id == "q1");
  REQUIRE(rows[0].x == std::vector<double>{44.0, 1.0, 0.0});
  REQUIRE_THROWS_AS(parse_covariate_csv("id,age,stage\nq1,44,ii\n", s),
                    parse_error);
  REQUIRE_THROWS_AS(parse_covariate_csv("id,age,stage,arm\nq1,44,ii,hmm\n", s),
                    parse_error);
  REQUIRE_THROWS_AS(parse_covariate_csv("id,age,stage,arm\nq1,44,ii\n", s),
                    parse_error);
}

TEST_CASE("scenario grids apply defaults and overrides") {
  const std::string text =
      "[grid]\n"
      "seed = 77\n"
      "trials = 4\n"
      "\n"
      "[[scenario]]\n"
      "name = \"rec\"\n"
      "family = \"weibull_i\"\n"
      "truncation = 2\n"
      "censoring = 0.2\n"
      "n = 300\n"
      "\n"
      "[[scenario]]\n"
      "name = \"curves\"\n"
      "kind = \"ibs\"\n"
      "family = \"exponential\"\n"
      "setup = \"linear\"\n"
      "trials = 9\n"
      "seed = 5\n"
      "\n"
      "[[scenario]]\n"
      "name = \"nothing\"\n"
      "kind = \"null\"\n"
      "n = 80\n";
  const scenario_grid grid = load_scenario_grid(text);
  REQUIRE(grid.runs.size() == 3);

  REQUIRE(grid.runs[0].kind == experiment_kind::recovery);
  REQUIRE(grid.runs[0].spec.family == sim_family::weibull_increasing);
  REQUIRE(grid.runs[0].spec.setup == sim_setup::tree);
  REQUIRE(grid.runs[0].spec.trunc_upper == 2.0);
  REQUIRE(grid.runs[0].spec.censor_target == 0.2);
  REQUIRE(grid.runs[0].spec.n == 300);
  REQUIRE(grid.runs[0].spec.seed == 77);
  REQUIRE(grid.runs[0].trials == 4);

  REQUIRE(grid.runs[1].kind == experiment_kind::ibs);
  REQUIRE(grid.runs[1].spec.setup == sim_setup::linear);
  REQUIRE(grid.runs[1].spec.seed == 5);
  REQUIRE(grid.runs[1].trials == 9);

  REQUIRE(grid.runs[2].kind == experiment_kind::null_selection);
  REQUIRE(grid.runs[2].spec.n == 80);
}

TEST_CASE("scenario grid validation") {
  REQUIRE_THROWS_AS(load_scenario_grid("[grid]\nseed = 1\n"), schema_error);
  REQUIRE_THROWS_AS(load_scenario_grid("[grid]\nwhat = 1\n[[scenario]]\nname = \"a\"\nkind = \"null\"\n"),
                    schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid("[[scenario]]\nname = \"a\"\nkind = \"null\"\nbogus = 1\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid(
          "[[scenario]]\nname = \"a\"\nkind = \"null\"\n"
          "[[scenario]]\nname = \"a\"\nkind = \"null\"\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid("[[scenario]]\nname = \"a\"\nfamily = \"cauchy\"\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid(
          "[[scenario]]\nname = \"a\"\nfamily = \"exponential\"\nsetup = \"odd\"\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid(
          "[[scenario]]\nname = \"a\"\nkind = \"null\"\ntrials = -1\n"),
      schema_error);
  REQUIRE_THROWS_AS(
      load_scenario_grid(
          "[[scenario]]\nname = \"a\"\nfamily = \"exponential\"\ncensoring = 1\n"),
      validation_error);
}

TEST_CASE("trial rows serialize to csv") {
  std::vector<trial_row> rows;
  rows.push_back({"s", "ltrcit", 3, "recovered", 1.0});
  rows.push_back({"s", "root", 4, "ibs", 0.125});
  REQUIRE(write_trial_csv(rows) ==
          "scenario,method,seed,metric,value\n"
          "s,ltrcit,3,recovered,1\n"
          "s,root,4,ibs,0.125\n");
}

TEST_CASE("doubles format to shortest round trip") {
  for (double v : {0.1, 1.0 / 3.0, 2.5, -17.0, 1e-300, 6.02e23}) {
    const std::string s = format_double(v);
    double back = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(ec == std::errc{});
    REQUIRE(back == v);
  }
  REQUIRE(format_double(2.5) == "2.5");
  REQUIRE(format_double(3.0) == "3");
}

TEST_CASE("text files round trip through disk") {
  const std::string path = "io_test_scratch.txt";
  write_text_file(path, "alpha\nbeta\n");
  REQUIRE(read_text_file(path) == "alpha\nbeta\n");
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(read_text_file("definitely_missing_file.xyz"), validation_error);
}
