#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "ltrc/data.hpp"
#include "ltrc/step_function.hpp"
#include "support.hpp"

using namespace ltrc;

TEST_CASE("step function is right continuous with a left limit") {
  const auto f = support::step_curve(1.0, {1.0, 3.0}, {0.5, 0.2});
  REQUIRE(f(0.0) == 1.0);
  REQUIRE(f(0.999) == 1.0);
  REQUIRE(f(1.0) == 0.5);
  REQUIRE(f(2.0) == 0.5);
  REQUIRE(f(3.0) == 0.2);
  REQUIRE(f(10.0) == 0.2);
  REQUIRE(f.before(1.0) == 1.0);
  REQUIRE(f.before(1.5) == 0.5);
  REQUIRE(f.before(3.0) == 0.5);
  REQUIRE(f.before(4.0) == 0.2);
}

TEST_CASE("step function check rejects malformed inputs") {
  step_function f;
  f.knots = {1.0, 1.0};
  f.values = {0.5, 0.2};
  REQUIRE_THROWS_AS(f.check(), validation_error);
  f.knots = {1.0, 2.0};
  f.values = {0.5};
  REQUIRE_THROWS_AS(f.check(), validation_error);
  f.values = {0.5, 0.2};
  REQUIRE_NOTHROW(f.check());
}

TEST_CASE("schema check rejects duplicates and malformed columns") {
  covariate_schema s;
  s.columns.push_back({"age", cov_kind::numeric, {}});
  s.columns.push_back({"sex", cov_kind::nominal, {"f", "m"}});
  REQUIRE_NOTHROW(s.check());

  covariate_schema dup = s;
  dup.columns.push_back({"age", cov_kind::numeric, {}});
  REQUIRE_THROWS_AS(dup.check(), schema_error);

  covariate_schema numeric_with_levels = s;
  numeric_with_levels.columns[0].levels = {"a"};
  REQUIRE_THROWS_AS(numeric_with_levels.check(), schema_error);

  covariate_schema empty_levels = s;
  empty_levels.columns[1].levels.clear();
  REQUIRE_THROWS_AS(empty_levels.check(), schema_error);

  covariate_schema dup_level = s;
  dup_level.columns[1].levels = {"f", "f"};
  REQUIRE_THROWS_AS(dup_level.check(), schema_error);

  REQUIRE(s.index_of("sex") == 1);
  REQUIRE(s.index_of("missing") == -1);
}

TEST_CASE("record check enforces times, flags and levels") {
  covariate_schema s;
  s.columns.push_back({"age", cov_kind::numeric, {}});
  s.columns.push_back({"sex", cov_kind::nominal, {"f", "m"}});

  ltrc_record ok{"1", 0.5, 2.0, 1, {60.0, 1.0}};
  REQUIRE_NOTHROW(check_record(ok, s));

  auto bad = ok;
  bad.left = 2.0;
  REQUIRE_THROWS_AS(check_record(bad, s), validation_error);

  bad = ok;
  bad.left = -0.1;
  REQUIRE_THROWS_AS(check_record(bad, s), validation_error);

  bad = ok;
  bad.event = 2;
  REQUIRE_THROWS_AS(check_record(bad, s), validation_error);

  bad = ok;
  bad.x.pop_back();
  REQUIRE_THROWS_AS(check_record(bad, s), validation_error);

  bad = ok;
  bad.x[1] = 2.0;
  REQUIRE_THROWS_AS(check_record(bad, s), schema_error);

  bad = ok;
  bad.x[1] = 0.5;
  REQUIRE_THROWS_AS(check_record(bad, s), schema_error);
}

TEST_CASE("left truncation at zero is allowed") {
  covariate_schema s;
  ltrc_record r{"1", 0.0, 1.0, 0, {}};
  REQUIRE_NOTHROW(check_record(r, s));
}

TEST_CASE("pseudo subjects partition the interval and keep the event last") {
  ltrc_record r{"7", 1.0, 5.0, 1, {3.0}};
  const auto pieces = make_pseudo_subjects(r, {4.0, 2.0});
  REQUIRE(pieces.size() == 3);
  REQUIRE(pieces[0].left == 1.0);
  REQUIRE(pieces[0].right == 2.0);
  REQUIRE(pieces[1].left == 2.0);
  REQUIRE(pieces[1].right == 4.0);
  REQUIRE(pieces[2].left == 4.0);
  REQUIRE(pieces[2].right == 5.0);
  REQUIRE(pieces[0].event == 0);
  REQUIRE(pieces[1].event == 0);
  REQUIRE(pieces[2].event == 1);
  for (const auto& p : pieces) {
    REQUIRE(p.id == "7");
    REQUIRE(p.x == std::vector<double>{3.0});
  }
}

TEST_CASE("pseudo subjects of a censored record are all censored") {
  ltrc_record r{"7", 0.0, 3.0, 0, {}};
  const auto pieces = make_pseudo_subjects(r, {1.0});
  REQUIRE(pieces[0].event == 0);
  REQUIRE(pieces[1].event == 0);
}

TEST_CASE("no cuts returns the record unchanged") {
  ltrc_record r{"7", 1.0, 5.0, 1, {}};
  const auto pieces = make_pseudo_subjects(r, {});
  REQUIRE(pieces.size() == 1);
  REQUIRE(pieces[0].left == 1.0);
  REQUIRE(pieces[0].right == 5.0);
  REQUIRE(pieces[0].event == 1);
}

TEST_CASE("cuts on or outside the boundary are rejected") {
  ltrc_record r{"7", 1.0, 5.0, 1, {}};
  REQUIRE_THROWS_AS(make_pseudo_subjects(r, {1.0}), validation_error);
  REQUIRE_THROWS_AS(make_pseudo_subjects(r, {5.0}), validation_error);
  REQUIRE_THROWS_AS(make_pseudo_subjects(r, {0.5}), validation_error);
  REQUIRE_THROWS_AS(make_pseudo_subjects(r, {6.0}), validation_error);
  REQUIRE_THROWS_AS(make_pseudo_subjects(r, {2.0, 2.0}), validation_error);
}

TEST_CASE("long format reformatting emits one interval per measurement") {
  covariate_schema s = support::numeric_schema(2);
  std::vector<long_visit> rows = {
      {"p3", 0.0, 0, true, {1.0, 10.0}},
      {"p3", 2.0, 0, true, {1.0, 12.0}},
      {"p3", 5.0, 1, false, {}},
      {"p1", 0.0, 0, true, {0.0, 7.0}},
      {"p1", 3.0, 0, false, {}},
  };
  const dataset d = reformat_long_to_ltrc(rows, s);
  REQUIRE(d.records.size() == 3);

  REQUIRE(d.records[0].id == "p3");
  REQUIRE(d.records[0].left == 0.0);
  REQUIRE(d.records[0].right == 2.0);
  REQUIRE(d.records[0].event == 0);
  REQUIRE(d.records[0].x == std::vector<double>{1.0, 10.0});

  REQUIRE(d.records[1].left == 2.0);
  REQUIRE(d.records[1].right == 5.0);
  REQUIRE(d.records[1].event == 1);
  REQUIRE(d.records[1].x == std::vector<double>{1.0, 12.0});

  REQUIRE(d.records[2].id == "p1");
  REQUIRE(d.records[2].left == 0.0);
  REQUIRE(d.records[2].right == 3.0);
  REQUIRE(d.records[2].event == 0);
}

TEST_CASE("unsorted visit rows are ordered by time within subject") {
  covariate_schema s = support::numeric_schema(1);
  std::vector<long_visit> rows = {
      {"a", 4.0, 1, false, {}},
      {"a", 0.0, 0, true, {1.0}},
      {"a", 2.0, 0, true, {2.0}},
  };
  const dataset d = reformat_long_to_ltrc(rows, s);
  REQUIRE(d.records.size() == 2);
  REQUIRE(d.records[0].x == std::vector<double>{1.0});
  REQUIRE(d.records[1].x == std::vector<double>{2.0});
  REQUIRE(d.records[1].event == 1);
}

TEST_CASE("long format validation failures") {
  covariate_schema s = support::numeric_schema(1);

  std::vector<long_visit> single = {{"a", 0.0, 0, true, {1.0}}};
  REQUIRE_THROWS_AS(reformat_long_to_ltrc(single, s), validation_error);

  std::vector<long_visit> dup_time = {
      {"a", 0.0, 0, true, {1.0}},
      {"a", 0.0, 0, true, {1.0}},
      {"a", 2.0, 1, false, {}},
  };
  REQUIRE_THROWS_AS(reformat_long_to_ltrc(dup_time, s), validation_error);

  std::vector<long_visit> early_event = {
      {"a", 0.0, 1, true, {1.0}},
      {"a", 2.0, 1, false, {}},
  };
  REQUIRE_THROWS_AS(reformat_long_to_ltrc(early_event, s), validation_error);

  std::vector<long_visit> missing_x = {
      {"a", 0.0, 0, false, {}},
      {"a", 2.0, 1, false, {}},
  };
  REQUIRE_THROWS_AS(reformat_long_to_ltrc(missing_x, s), validation_error);
}
