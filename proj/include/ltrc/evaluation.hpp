#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <vector>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/estimators.hpp"
#include "ltrc/step_function.hpp"
#include "ltrc/tree.hpp"

namespace ltrc {

// Kaplan-Meier estimate of the censoring distribution: same machinery with
// the event flag complemented.
inline survival_curve censoring_km(const dataset& d) {
  dataset swapped;
  swapped.schema = d.schema;
  swapped.records = d.records;
  for (auto& r : swapped.records) r.event = 1 - r.event;
  return km_ltrc(swapped);
}

struct brier_result {
  double value = 0.0;
  int excluded = 0;
};

namespace detail {

inline double brier_sum_at(const dataset& d,
                           const std::vector<survival_curve>& curves, double t,
                           const survival_curve& g, int& included,
                           std::set<int>* excluded_ids) {
  double sum = 0.0;
  included = 0;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (r.right <= t && r.event == 1) {
      const double w = g.before(r.right);
      if (w <= 0.0) {
        if (excluded_ids) excluded_ids->insert(static_cast<int>(i));
        continue;
      }
      const double s = curves[i](t);
      sum += s * s / w;
    } else if (r.right > t) {
      const double w = g(t);
      if (w <= 0.0) {
        if (excluded_ids) excluded_ids->insert(static_cast<int>(i));
        continue;
      }
      const double s = curves[i](t);
      sum += (1.0 - s) * (1.0 - s) / w;
    }
    ++included;
  }
  return sum;
}

}  // namespace detail

inline brier_result brier_at_t(const dataset& d,
                               const std::vector<survival_curve>& curves, double t,
                               const survival_curve& g) {
  if (curves.size() != d.records.size())
    throw validation_error("one predicted curve per record is required");
  int included = 0;
  std::set<int> excluded;
  const double sum = detail::brier_sum_at(d, curves, t, g, included, &excluded);
  if (included == 0) throw numeric_error("no records carry positive weight");
  return {sum / included, static_cast<int>(excluded.size())};
}

inline brier_result brier_at_t(const dataset& d,
                               const std::vector<survival_curve>& curves, double t) {
  return brier_at_t(d, curves, t, censoring_km(d));
}

struct ibs_result {
  double value = 0.0;
  int excluded = 0;  // records dropped for zero weight at some evaluation point
};

inline ibs_result ibs(const dataset& d, const std::vector<survival_curve>& curves,
                      double tau) {
  if (curves.size() != d.records.size())
    throw validation_error("one predicted curve per record is required");
  if (!(tau > 0.0)) throw validation_error("tau must be positive");
  const survival_curve g = censoring_km(d);

  // The integrand is a right-continuous step function; integrate it exactly
  // over its breakpoints.
  std::set<double> knot_set{0.0};
  for (const auto& c : curves)
    for (double k : c.knots)
      if (k < tau) knot_set.insert(k);
  for (double k : g.knots)
    if (k < tau) knot_set.insert(k);
  for (const auto& r : d.records)
    if (r.right < tau) knot_set.insert(r.right);
  const std::vector<double> knots(knot_set.begin(), knot_set.end());

  std::set<int> excluded;
  double integral = 0.0;
  for (std::size_t j = 0; j < knots.size(); ++j) {
    const double hi = j + 1 < knots.size() ? knots[j + 1] : tau;
    int included = 0;
    const double sum =
        detail::brier_sum_at(d, curves, knots[j], g, included, &excluded);
    if (included == 0) throw numeric_error("no records carry positive weight");
    integral += sum / included * (hi - knots[j]);
  }
  return {integral / tau, static_cast<int>(excluded.size())};
}

inline ibs_result ibs(const dataset& d, const std::vector<survival_curve>& curves) {
  double tau = 0.0;
  for (const auto& r : d.records) tau = std::max(tau, r.right);
  return ibs(d, curves, tau);
}

// True structure is recovered when the tree has exactly as many terminal
// nodes as the target partition has cells and both induce the same grouping
// of the probe points.
inline bool structure_recovered(const tree_model& model,
                                const std::vector<std::vector<double>>& probes,
                                const std::vector<int>& truth_cells) {
  if (probes.size() != truth_cells.size())
    throw validation_error("one truth cell per probe is required");
  std::set<int> cells(truth_cells.begin(), truth_cells.end());
  if (leaves(model).size() != cells.size()) return false;
  std::map<int, const tree_node*> cell_leaf;
  std::map<const tree_node*, int> leaf_cell;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const tree_node* leaf = route(model, probes[i]);
    const auto by_cell = cell_leaf.emplace(truth_cells[i], leaf);
    if (!by_cell.second && by_cell.first->second != leaf) return false;
    const auto by_leaf = leaf_cell.emplace(leaf, truth_cells[i]);
    if (!by_leaf.second && by_leaf.first->second != truth_cells[i]) return false;
  }
  return true;
}

struct wilcoxon_result {
  double w_plus = 0.0;
  double z = 0.0;
  double p = 1.0;
  int m = 0;  // nonzero differences
};

inline wilcoxon_result wilcoxon_signed_rank(const std::vector<double>& a,
                                            const std::vector<double>& b) {
  if (a.size() != b.size()) throw validation_error("paired samples differ in length");
  if (a.size() < 6) throw validation_error("need at least 6 pairs");

  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  wilcoxon_result out;
  out.m = static_cast<int>(diff.size());
  if (diff.empty()) return out;

  std::vector<std::size_t> order(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diff[x]) < std::fabs(diff[y]);
  });

  std::vector<double> rank(diff.size());
  double tie_correction = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() &&
           std::fabs(diff[order[j]]) == std::fabs(diff[order[i]]))
      ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    const double t = static_cast<double>(j - i);
    tie_correction += t * t * t - t;
    i = j;
  }

  for (std::size_t i = 0; i < diff.size(); ++i)
    if (diff[i] > 0.0) out.w_plus += rank[i];

  const double m = static_cast<double>(out.m);
  const double mu = m * (m + 1.0) / 4.0;
  const double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_correction / 48.0;
  out.z = (out.w_plus - mu) / std::sqrt(var);
  out.p = std::erfc(std::fabs(out.z) / std::numbers::sqrt2);
  return out;
}

}  // namespace ltrc
