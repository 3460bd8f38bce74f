#pragma once

// Shared fixture builders for the test suite.

#include <string>
#include <tuple>
#include <vector>

#include "ltrc/data.hpp"
#include "ltrc/rng.hpp"
#include "ltrc/step_function.hpp"

namespace support {

// Schema with k numeric columns named x1..xk.
inline ltrc::covariate_schema numeric_schema(int k) {
  ltrc::covariate_schema schema;
  for (int j = 1; j <= k; ++j)
    schema.columns.push_back({"x" + std::to_string(j), ltrc::cov_kind::numeric, {}});
  return schema;
}

// Covariate-free dataset from (left, right, event) triples.
inline ltrc::dataset make_ltrc(const std::vector<std::tuple<double, double, int>>& rows) {
  ltrc::dataset d;
  int id = 0;
  for (const auto& [l, r, e] : rows) {
    ltrc::ltrc_record rec;
    rec.id = std::to_string(++id);
    rec.left = l;
    rec.right = r;
    rec.event = e;
    d.records.push_back(std::move(rec));
  }
  return d;
}

// Right-censored sample (all entries at 0) with continuous times, roughly
// 30% censored.
inline ltrc::dataset random_rc(int n, ltrc::rng& r) {
  std::vector<std::tuple<double, double, int>> rows;
  for (int i = 0; i < n; ++i) {
    const double t = r.uniform(0.05, 10.0);
    rows.emplace_back(0.0, t, r.bernoulli(0.7) ? 1 : 0);
  }
  return make_ltrc(rows);
}

// Left-truncated sample: entry uniform on (0, 2), lifetime exponential from
// entry so every record satisfies left < right.
inline ltrc::dataset random_ltrc(int n, ltrc::rng& r) {
  std::vector<std::tuple<double, double, int>> rows;
  for (int i = 0; i < n; ++i) {
    const double l = r.uniform(0.0, 2.0);
    const double t = l + r.exponential(0.4);
    rows.emplace_back(l, t, r.bernoulli(0.7) ? 1 : 0);
  }
  return make_ltrc(rows);
}

inline ltrc::survival_curve step_curve(double initial, std::vector<double> knots,
                                       std::vector<double> values) {
  ltrc::survival_curve c;
  c.initial = initial;
  c.knots = std::move(knots);
  c.values = std::move(values);
  return c;
}

inline bool same_curve(const ltrc::step_function& a, const ltrc::step_function& b) {
  return a.initial == b.initial && a.knots == b.knots && a.values == b.values;
}

}  // namespace support
