#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/step_function.hpp"

namespace ltrc {

// Risk sets under delayed entry: a record (l, r] is at risk at time t iff
// l < t <= r, so a record censored exactly at an event time still counts.
struct risk_row {
  double time = 0.0;
  int deaths = 0;
  int at_risk = 0;
};

struct risk_set_table {
  std::vector<risk_row> rows;

  bool empty() const { return rows.empty(); }
};

namespace detail {

inline std::vector<int> all_members(const dataset& d) {
  std::vector<int> idx(d.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace detail

inline risk_set_table risk_table(const dataset& d, const std::vector<int>& members) {
  std::vector<double> event_times;
  std::vector<double> lefts, rights;
  lefts.reserve(members.size());
  rights.reserve(members.size());
  for (int i : members) {
    const auto& r = d.records[static_cast<std::size_t>(i)];
    if (r.event == 1) event_times.push_back(r.right);
    lefts.push_back(r.left);
    rights.push_back(r.right);
  }
  std::sort(event_times.begin(), event_times.end());
  std::sort(lefts.begin(), lefts.end());
  std::sort(rights.begin(), rights.end());

  risk_set_table t;
  for (std::size_t i = 0; i < event_times.size();) {
    std::size_t j = i;
    while (j < event_times.size() && event_times[j] == event_times[i]) ++j;
    risk_row row;
    row.time = event_times[i];
    row.deaths = static_cast<int>(j - i);
    const auto entered =
        std::lower_bound(lefts.begin(), lefts.end(), row.time) - lefts.begin();
    const auto gone =
        std::lower_bound(rights.begin(), rights.end(), row.time) - rights.begin();
    row.at_risk = static_cast<int>(entered - gone);
    t.rows.push_back(row);
    i = j;
  }
  return t;
}

inline risk_set_table risk_table(const dataset& d) {
  return risk_table(d, detail::all_members(d));
}

inline survival_curve km_ltrc(const risk_set_table& t) {
  survival_curve s;
  s.initial = 1.0;
  double surv = 1.0;
  for (const auto& row : t.rows) {
    surv *= 1.0 - static_cast<double>(row.deaths) / row.at_risk;
    s.knots.push_back(row.time);
    s.values.push_back(surv);
  }
  return s;
}

inline cumulative_hazard nelson_aalen_ltrc(const risk_set_table& t) {
  cumulative_hazard h;
  h.initial = 0.0;
  double cum = 0.0;
  for (const auto& row : t.rows) {
    cum += static_cast<double>(row.deaths) / row.at_risk;
    h.knots.push_back(row.time);
    h.values.push_back(cum);
  }
  return h;
}

inline survival_curve km_ltrc(const dataset& d, const std::vector<int>& members) {
  return km_ltrc(risk_table(d, members));
}

inline survival_curve km_ltrc(const dataset& d) {
  return km_ltrc(risk_table(d));
}

inline cumulative_hazard nelson_aalen_ltrc(const dataset& d) {
  return nelson_aalen_ltrc(risk_table(d));
}

// Log-rank scores for LTRC data. Everything is computed from cumulative sums
// of log(1 - d_k/n_k), so a record's score depends only on the risk-table
// rows it covers; terms outside its interval cancel identically, which makes
// the score the conditional survival ratio over (l, r] and keeps it defined
// even when the risk set empties out and refills between records. Event
// records score with the exact Peto drop (a log a - b log b)/(a - b) over the
// survival ratio across (l, r], censored records with the log survival ratio.
inline std::vector<double> logrank_scores_ltrc(const dataset& d,
                                               const std::vector<int>& members) {
  const risk_set_table t = risk_table(d, members);
  const std::size_t m = t.rows.size();
  std::vector<double> times(m), prefix(m + 1, 0.0);
  std::vector<char> is_zero(m, 0);
  std::vector<int> zeros(m + 1, 0);
  for (std::size_t k = 0; k < m; ++k) {
    times[k] = t.rows[k].time;
    const double frac =
        static_cast<double>(t.rows[k].deaths) / t.rows[k].at_risk;
    if (t.rows[k].deaths == t.rows[k].at_risk) {
      // A full-wipeout row can only sit outside every member's window: a
      // member strictly spanning it would be at risk there without dying.
      // The placeholder therefore never enters a returned ratio.
      is_zero[k] = 1;
      prefix[k + 1] = prefix[k];
    } else {
      prefix[k + 1] = prefix[k] + std::log1p(-frac);
    }
    zeros[k + 1] = zeros[k] + is_zero[k];
  }

  std::vector<double> scores;
  scores.reserve(members.size());
  for (int i : members) {
    const auto& r = d.records[static_cast<std::size_t>(i)];
    const std::size_t lo = static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), r.left) - times.begin());
    const std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), r.right) - times.begin());
    if (r.event == 0) {
      if (zeros[hi] - zeros[lo] > 0)
        throw undefined_score_error("record " + r.id +
                                    ": survival estimate is zero at censoring time");
      scores.push_back(prefix[hi] - prefix[lo]);
    } else {
      const std::size_t k = hi - 1;  // the record's own event row
      const double log_a = prefix[k] - prefix[lo];
      if (is_zero[k]) {
        scores.push_back(log_a);
      } else {
        const double log_b = log_a + (prefix[k + 1] - prefix[k]);
        const double a = std::exp(log_a);
        const double b = std::exp(log_b);
        scores.push_back((a * log_a - b * log_b) / (a - b));
      }
    }
  }
  return scores;
}

inline std::vector<double> logrank_scores_ltrc(const dataset& d) {
  return logrank_scores_ltrc(d, detail::all_members(d));
}

// Peto log-rank scores for right-censored data: the LTRC scores with a
// common entry time, which makes every entry term vanish.
inline std::vector<double> peto_scores_rc(const dataset& d,
                                          const std::vector<int>& members) {
  double common = 0.0;
  bool first = true;
  for (int i : members) {
    const double l = d.records[static_cast<std::size_t>(i)].left;
    if (first) {
      common = l;
      first = false;
    } else if (l != common) {
      throw validation_error("peto_scores_rc requires a common entry time");
    }
  }
  return logrank_scores_ltrc(d, members);
}

inline std::vector<double> peto_scores_rc(const dataset& d) {
  return peto_scores_rc(d, detail::all_members(d));
}

}  // namespace ltrc
