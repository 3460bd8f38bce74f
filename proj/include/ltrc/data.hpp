#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ltrc/common.hpp"

namespace ltrc {

enum class cov_kind { numeric, ordinal, nominal };

struct covariate_spec {
  std::string name;
  cov_kind kind = cov_kind::numeric;
  std::vector<std::string> levels;  // ordinal/nominal only, in order
};

struct covariate_schema {
  std::vector<covariate_spec> columns;

  std::size_t size() const { return columns.size(); }

  int index_of(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (columns[j].name == name) return static_cast<int>(j);
    return -1;
  }

  void check() const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto& c = columns[j];
      if (c.name.empty()) throw schema_error("covariate with empty name");
      for (std::size_t k = 0; k < j; ++k)
        if (columns[k].name == c.name)
          throw schema_error("duplicate covariate name: " + c.name);
      if (c.kind == cov_kind::numeric) {
        if (!c.levels.empty())
          throw schema_error("numeric covariate " + c.name + " declares levels");
      } else {
        if (c.levels.empty())
          throw schema_error("categorical covariate " + c.name + " has no levels");
        for (std::size_t a = 0; a < c.levels.size(); ++a)
          for (std::size_t b = 0; b < a; ++b)
            if (c.levels[a] == c.levels[b])
              throw schema_error("duplicate level '" + c.levels[a] + "' in " + c.name);
      }
    }
  }
};

// Covariate cells: numeric columns hold the value, ordinal/nominal columns
// hold the 0-based level index.
struct ltrc_record {
  std::string id;
  double left = 0.0;
  double right = 0.0;
  int event = 0;
  std::vector<double> x;
};

struct dataset {
  covariate_schema schema;
  std::vector<ltrc_record> records;

  std::size_t size() const { return records.size(); }
};

inline void check_record(const ltrc_record& r, const covariate_schema& schema) {
  if (!(r.left >= 0.0) || !std::isfinite(r.left) || !std::isfinite(r.right))
    throw validation_error("record " + r.id + ": times must be finite, left >= 0");
  if (!(r.left < r.right))
    throw validation_error("record " + r.id + ": requires left < right");
  if (r.event != 0 && r.event != 1)
    throw validation_error("record " + r.id + ": event flag must be 0 or 1");
  if (r.x.size() != schema.size())
    throw validation_error("record " + r.id + ": covariate count mismatch");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& c = schema.columns[j];
    if (c.kind == cov_kind::numeric) {
      if (!std::isfinite(r.x[j]))
        throw validation_error("record " + r.id + ": non-finite value in " + c.name);
    } else {
      const double v = r.x[j];
      if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(c.levels.size()))
        throw schema_error("record " + r.id + ": invalid level index in " + c.name);
    }
  }
}

inline void check_dataset(const dataset& d) {
  d.schema.check();
  for (const auto& r : d.records) check_record(r, d.schema);
}

// Splits one record at cut points strictly inside (left, right). Every piece
// inherits the covariates; only the last inherits the event flag.
inline std::vector<ltrc_record> make_pseudo_subjects(const ltrc_record& r,
                                                     std::vector<double> cuts) {
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (!(cuts[i] > r.left && cuts[i] < r.right))
      throw validation_error("record " + r.id + ": cut outside (left, right)");
    if (i > 0 && !(cuts[i] > cuts[i - 1]))
      throw validation_error("record " + r.id + ": duplicate cut point");
  }
  std::vector<ltrc_record> out;
  out.reserve(cuts.size() + 1);
  double lo = r.left;
  for (double c : cuts) {
    ltrc_record piece = r;
    piece.left = lo;
    piece.right = c;
    piece.event = 0;
    out.push_back(std::move(piece));
    lo = c;
  }
  ltrc_record last = r;
  last.left = lo;
  out.push_back(std::move(last));
  return out;
}

// One row of the long (visit-level) format. Covariates may be absent on a
// subject's terminal row; elsewhere they are required.
struct long_visit {
  std::string id;
  double time = 0.0;
  int event = 0;
  bool has_x = false;
  std::vector<double> x;
};

// Turns visit rows into LTRC pseudo-subject records: for measurement times
// t0 < ... < t_{k-1} and terminal time y, emit (t0,t1], ..., (t_{k-1},y],
// each carrying the covariates measured at its left endpoint; only the last
// interval carries the event flag.
inline dataset reformat_long_to_ltrc(const std::vector<long_visit>& rows,
                                     const covariate_schema& schema) {
  schema.check();
  std::vector<std::string> order;
  std::map<std::string, std::vector<const long_visit*>> groups;
  for (const auto& row : rows) {
    auto [it, fresh] = groups.try_emplace(row.id);
    if (fresh) order.push_back(row.id);
    it->second.push_back(&row);
  }
  dataset out;
  out.schema = schema;
  for (const auto& id : order) {
    auto& g = groups[id];
    std::stable_sort(g.begin(), g.end(), [](const long_visit* a, const long_visit* b) {
      return a->time < b->time;
    });
    for (std::size_t i = 1; i < g.size(); ++i)
      if (g[i]->time == g[i - 1]->time)
        throw validation_error("subject " + id + ": duplicate visit time");
    if (g.size() < 2)
      throw validation_error("subject " + id + ": needs a measurement row and a terminal row");
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      if (g[i]->event != 0)
        throw validation_error("subject " + id + ": event flag on a non-final row");
      if (!g[i]->has_x)
        throw validation_error("subject " + id + ": missing covariates on a measurement row");
    }
    const long_visit* term = g.back();
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      ltrc_record rec;
      rec.id = id;
      rec.left = g[i]->time;
      rec.right = g[i + 1]->time;
      rec.event = (i + 2 == g.size()) ? term->event : 0;
      rec.x = g[i]->x;
      check_record(rec, schema);
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace ltrc
