#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/estimators.hpp"
#include "ltrc/tree.hpp"

namespace ltrc {

struct ctree_controls {
  double alpha = 0.05;
  int min_split = 20;
  int min_bucket = 7;
  int max_depth = 0;  // 0 = unlimited

  void check() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw validation_error("alpha must lie in (0,1)");
    if (min_bucket < 1) throw validation_error("min_bucket must be >= 1");
    if (min_split < 2 * min_bucket)
      throw validation_error("min_split must be >= 2*min_bucket");
  }
};

struct assoc_result {
  double statistic = 0.0;
  double p = 1.0;
};

namespace detail {

// Linear statistic T = sum g_i u_i standardized by its permutation moments:
// mu = (sum g)*ubar, var = s2_u * sum(g-gbar)^2 * n/(n-1). Centered sums
// evaluate the same quantities without cancellation.
inline assoc_result linear_association(const std::vector<double>& g,
                                       const std::vector<double>& u) {
  const std::size_t n = g.size();
  if (n < 2) return {};
  const double gbar = std::accumulate(g.begin(), g.end(), 0.0) / n;
  const double ubar = std::accumulate(u.begin(), u.end(), 0.0) / n;
  double sgc2 = 0.0, su2 = 0.0, t_centered = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gc = g[i] - gbar;
    const double uc = u[i] - ubar;
    sgc2 += gc * gc;
    su2 += uc * uc;
    t_centered += gc * uc;
  }
  const double v = su2 / n;
  const double var = v * sgc2 * static_cast<double>(n) / (n - 1);
  if (!(var > 0.0)) return {};
  const double z = std::fabs(t_centered) / std::sqrt(var);
  return {z, std::erfc(z / std::numbers::sqrt2)};
}

// Nominal covariate: quadratic form of the per-level indicator statistics
// against the permutation covariance, which reduces to
// (n-1) * sum n_l (ubar_l - ubar)^2 / sum (u - ubar)^2 on chi-square(k-1).
inline assoc_result nominal_association(const std::vector<double>& x, int levels,
                                        const std::vector<double>& u) {
  const std::size_t n = x.size();
  if (n < 2) return {};
  std::vector<int> count(static_cast<std::size_t>(levels), 0);
  std::vector<double> sum(static_cast<std::size_t>(levels), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(x[i]);
    ++count[l];
    sum[l] += u[i];
  }
  const double ubar = std::accumulate(u.begin(), u.end(), 0.0) / n;
  double su2 = 0.0;
  for (double ui : u) su2 += (ui - ubar) * (ui - ubar);
  int present = 0;
  double between = 0.0;
  for (std::size_t l = 0; l < count.size(); ++l) {
    if (count[l] == 0) continue;
    ++present;
    const double diff = sum[l] / count[l] - ubar;
    between += count[l] * diff * diff;
  }
  if (present < 2 || !(su2 > 0.0)) return {};
  const double q = (static_cast<double>(n) - 1.0) * between / su2;
  const double df = present - 1;
  return {q, boost::math::gamma_q(df / 2.0, q / 2.0)};
}

}  // namespace detail

inline assoc_result association_test(const dataset& d, const std::vector<int>& members,
                                     int col, const std::vector<double>& u) {
  const auto j = static_cast<std::size_t>(col);
  std::vector<double> x;
  x.reserve(members.size());
  for (int i : members) x.push_back(d.records[static_cast<std::size_t>(i)].x[j]);
  const auto& spec = d.schema.columns[j];
  if (spec.kind == cov_kind::nominal)
    return detail::nominal_association(x, static_cast<int>(spec.levels.size()), u);
  return detail::linear_association(x, u);
}

// Returns (column, Bonferroni-adjusted p) or nothing when every adjusted
// p-value exceeds alpha.
inline std::optional<std::pair<int, double>> select_split_variable(
    const dataset& d, const std::vector<int>& members, const std::vector<double>& u,
    const ctree_controls& controls) {
  const double m = static_cast<double>(d.schema.size());
  int best_col = -1;
  double best_p = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d.schema.size(); ++j) {
    const double adj =
        std::min(1.0, m * association_test(d, members, static_cast<int>(j), u).p);
    if (adj < best_p) {
      best_p = adj;
      best_col = static_cast<int>(j);
    }
  }
  if (best_col < 0 || best_p > controls.alpha) return std::nullopt;
  return std::make_pair(best_col, best_p);
}

namespace detail {

// Two-sample standardized statistic for a candidate left group: z^2 up to the
// constant (n-1)/v, which is fixed across candidates within a node.
inline double split_score(double t_left, double n_left, double sum_u, double n) {
  const double centered = t_left - n_left * (sum_u / n);
  return centered * centered / (n_left * (n - n_left));
}

struct split_candidate {
  split_rule rule;
  double score = -1.0;
};

inline std::optional<split_rule> best_threshold_split(
    const std::vector<double>& x, const std::vector<double>& u, int col,
    const ctree_controls& controls) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double sum_u = std::accumulate(u.begin(), u.end(), 0.0);
  double acc = 0.0;
  double best_score = -1.0;
  double best_cut = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    acc += u[order[i]];
    if (x[order[i]] == x[order[i + 1]]) continue;
    const std::size_t n_left = i + 1;
    if (n_left < static_cast<std::size_t>(controls.min_bucket) ||
        n - n_left < static_cast<std::size_t>(controls.min_bucket))
      continue;
    const double score =
        split_score(acc, static_cast<double>(n_left), sum_u, static_cast<double>(n));
    if (score > best_score) {
      best_score = score;
      best_cut = 0.5 * (x[order[i]] + x[order[i + 1]]);
    }
  }
  if (best_score < 0.0) return std::nullopt;
  split_rule rule;
  rule.col = col;
  rule.cut = best_cut;
  return rule;
}

inline std::optional<split_rule> best_subset_split(const std::vector<double>& x,
                                                   const std::vector<double>& u,
                                                   int col, int levels,
                                                   const ctree_controls& controls) {
  const std::size_t n = x.size();
  std::vector<int> count(static_cast<std::size_t>(levels), 0);
  std::vector<double> sum(static_cast<std::size_t>(levels), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(x[i]);
    ++count[l];
    sum[l] += u[i];
  }
  std::vector<int> observed;
  for (int l = 0; l < levels; ++l)
    if (count[static_cast<std::size_t>(l)] > 0) observed.push_back(l);
  const auto k = observed.size();
  if (k < 2) return std::nullopt;
  const double sum_u = std::accumulate(u.begin(), u.end(), 0.0);

  double best_score = -1.0;
  std::vector<int> best_left;
  auto consider = [&](const std::vector<int>& left_set) {
    double n_left = 0.0, t_left = 0.0;
    for (int l : left_set) {
      n_left += count[static_cast<std::size_t>(l)];
      t_left += sum[static_cast<std::size_t>(l)];
    }
    if (n_left < controls.min_bucket ||
        static_cast<double>(n) - n_left < controls.min_bucket)
      return;
    const double score = split_score(t_left, n_left, sum_u, static_cast<double>(n));
    if (score > best_score) {
      best_score = score;
      best_left = left_set;
    }
  };

  if (k <= 10) {
    // Enumerate bipartitions once by pinning the first observed level left.
    for (std::uint32_t mask = 0; mask < (1u << (k - 1)); ++mask) {
      std::vector<int> left_set = {observed[0]};
      for (std::size_t b = 1; b < k; ++b)
        if (mask & (1u << (b - 1))) left_set.push_back(observed[b]);
      if (left_set.size() == k) continue;
      consider(left_set);
    }
  } else {
    std::vector<int> by_mean = observed;
    std::stable_sort(by_mean.begin(), by_mean.end(), [&](int a, int b) {
      return sum[static_cast<std::size_t>(a)] / count[static_cast<std::size_t>(a)] <
             sum[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)];
    });
    std::vector<int> left_set;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      left_set.push_back(by_mean[i]);
      consider(left_set);
    }
  }
  if (best_score < 0.0) return std::nullopt;
  split_rule rule;
  rule.col = col;
  rule.is_subset = true;
  std::sort(best_left.begin(), best_left.end());
  rule.left_levels = best_left;
  rule.known_levels = observed;
  return rule;
}

}  // namespace detail

inline std::optional<split_rule> best_binary_split(const dataset& d,
                                                   const std::vector<int>& members,
                                                   int col, const std::vector<double>& u,
                                                   const ctree_controls& controls) {
  const auto j = static_cast<std::size_t>(col);
  std::vector<double> x;
  x.reserve(members.size());
  for (int i : members) x.push_back(d.records[static_cast<std::size_t>(i)].x[j]);
  const auto& spec = d.schema.columns[j];
  if (spec.kind == cov_kind::nominal)
    return detail::best_subset_split(x, u, col, static_cast<int>(spec.levels.size()),
                                     controls);
  return detail::best_threshold_split(x, u, col, controls);
}

namespace detail {

inline std::unique_ptr<tree_node> fit_ltrcit_node(const dataset& d,
                                                  std::vector<int> members, int depth,
                                                  const ctree_controls& controls,
                                                  int& next_id) {
  auto node = std::make_unique<tree_node>();
  node->id = next_id++;
  node->n = static_cast<int>(members.size());
  for (int i : members) node->events += d.records[static_cast<std::size_t>(i)].event;

  auto make_leaf = [&]() {
    node->curve = km_ltrc(d, members);
    node->members = std::move(members);
    return std::move(node);
  };

  if (node->events == 0 || node->n < controls.min_split ||
      (controls.max_depth > 0 && depth >= controls.max_depth))
    return make_leaf();

  const std::vector<double> u = logrank_scores_ltrc(d, members);
  const auto selected = select_split_variable(d, members, u, controls);
  if (!selected) return make_leaf();
  const auto rule = best_binary_split(d, members, selected->first, u, controls);
  if (!rule) return make_leaf();

  std::vector<int> left_members, right_members;
  for (std::size_t idx = 0; idx < members.size(); ++idx) {
    const int i = members[idx];
    if (goes_left(*rule, d.records[static_cast<std::size_t>(i)].x, d.schema))
      left_members.push_back(i);
    else
      right_members.push_back(i);
  }
  node->rule = *rule;
  node->p_value = selected->second;
  node->left = fit_ltrcit_node(d, std::move(left_members), depth + 1, controls, next_id);
  node->right =
      fit_ltrcit_node(d, std::move(right_members), depth + 1, controls, next_id);
  return std::move(node);
}

}  // namespace detail

inline tree_model fit_ltrcit(const dataset& d, const ctree_controls& controls = {}) {
  controls.check();
  check_dataset(d);
  if (d.records.empty()) throw validation_error("cannot fit on an empty dataset");
  int events = 0;
  for (const auto& r : d.records) events += r.event;
  if (events == 0) throw validation_error("cannot fit without any events");

  tree_model model;
  model.algo = "ltrcit";
  model.schema = d.schema;
  int next_id = 0;
  model.root =
      detail::fit_ltrcit_node(d, detail::all_members(d), 0, controls, next_id);
  return model;
}

inline const survival_curve& predict_ltrcit(const tree_model& model,
                                            const std::vector<double>& x) {
  return route(model, x)->curve;
}

}  // namespace ltrc
