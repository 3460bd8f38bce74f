#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/estimators.hpp"
#include "ltrc/rng.hpp"
#include "ltrc/tree.hpp"

namespace ltrc {

struct cart_controls {
  int min_split = 20;
  int min_bucket = 7;
  int max_depth = 0;
  int cv_folds = 10;
  double se_rule = 0.0;
  double cp_min = 0.001;  // growth gate as a fraction of root deviance

  void check() const {
    if (min_bucket < 1) throw validation_error("min_bucket must be >= 1");
    if (min_split < 2 * min_bucket)
      throw validation_error("min_split must be >= 2*min_bucket");
    if (cv_folds < 2) throw validation_error("cv_folds must be >= 2");
    if (se_rule < 0.0) throw validation_error("se_rule must be >= 0");
    if (cp_min < 0.0) throw validation_error("cp_min must be >= 0");
  }
};

// Baseline cumulative-hazard mass over each record's observed interval.
inline std::vector<double> exposures(const dataset& d, const cumulative_hazard& lambda0) {
  std::vector<double> e;
  e.reserve(d.records.size());
  for (const auto& r : d.records) e.push_back(lambda0(r.right) - lambda0(r.left));
  return e;
}

inline double deviance_contribution(int event, double e, double theta) {
  const double mu = e * theta;
  if (event == 1) {
    if (!(mu > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * (-std::log(mu) - (1.0 - mu));
  }
  return 2.0 * mu;
}

namespace detail {

struct cart_ctx {
  const dataset* d = nullptr;
  const std::vector<double>* e = nullptr;
  cart_controls controls;
  double gate = 0.0;  // minimum absolute deviance reduction to keep growing
};

inline void fill_node_stats(tree_node& node, const cart_ctx& ctx,
                            const std::vector<int>& members) {
  node.n = static_cast<int>(members.size());
  node.events = 0;
  node.exposure = 0.0;
  for (int i : members) {
    node.events += ctx.d->records[static_cast<std::size_t>(i)].event;
    node.exposure += (*ctx.e)[static_cast<std::size_t>(i)];
  }
  node.theta = node.events > 0 ? node.events / node.exposure : 0.0;
  node.deviance = 0.0;
  for (int i : members)
    node.deviance += deviance_contribution(
        ctx.d->records[static_cast<std::size_t>(i)].event,
        (*ctx.e)[static_cast<std::size_t>(i)], node.theta);
}

// Child deviance at its own rate from aggregates: with D events, exposure E
// and S = sum of log e_i over the child's events, the deviance collapses to
// 2*(D*log(E/D) - S).
inline double child_deviance(double events, double exposure, double sum_log_e) {
  if (events <= 0.0) return 0.0;
  return 2.0 * (events * std::log(exposure / events) - sum_log_e);
}

struct cart_split {
  split_rule rule;
  double reduction = -1.0;
};

inline void scan_threshold_cart(const cart_ctx& ctx, const std::vector<int>& members,
                                int col, double parent_dev, cart_split& best) {
  const auto j = static_cast<std::size_t>(col);
  const std::size_t n = members.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = ctx.d->records[static_cast<std::size_t>(members[i])].x[j];
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  double tot_ev = 0.0, tot_e = 0.0, tot_loge = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ctx.d->records[static_cast<std::size_t>(members[i])];
    const double ei = (*ctx.e)[static_cast<std::size_t>(members[i])];
    tot_ev += r.event;
    tot_e += ei;
    if (r.event == 1) tot_loge += std::log(ei);
  }

  double ev = 0.0, ex = 0.0, loge = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto& r = ctx.d->records[static_cast<std::size_t>(members[order[i]])];
    const double ei = (*ctx.e)[static_cast<std::size_t>(members[order[i]])];
    ev += r.event;
    ex += ei;
    if (r.event == 1) loge += std::log(ei);
    if (x[order[i]] == x[order[i + 1]]) continue;
    const std::size_t n_left = i + 1;
    if (n_left < static_cast<std::size_t>(ctx.controls.min_bucket) ||
        n - n_left < static_cast<std::size_t>(ctx.controls.min_bucket))
      continue;
    const double reduction = parent_dev - child_deviance(ev, ex, loge) -
                             child_deviance(tot_ev - ev, tot_e - ex, tot_loge - loge);
    if (reduction > best.reduction) {
      best.reduction = reduction;
      best.rule = split_rule{};
      best.rule.col = col;
      best.rule.cut = 0.5 * (x[order[i]] + x[order[i + 1]]);
    }
  }
}

inline void scan_subset_cart(const cart_ctx& ctx, const std::vector<int>& members,
                             int col, double parent_dev, cart_split& best) {
  const auto j = static_cast<std::size_t>(col);
  const auto levels =
      static_cast<int>(ctx.d->schema.columns[j].levels.size());
  std::vector<int> count(static_cast<std::size_t>(levels), 0);
  std::vector<double> ev(static_cast<std::size_t>(levels), 0.0);
  std::vector<double> ex(static_cast<std::size_t>(levels), 0.0);
  std::vector<double> loge(static_cast<std::size_t>(levels), 0.0);
  for (int i : members) {
    const auto& r = ctx.d->records[static_cast<std::size_t>(i)];
    const auto l = static_cast<std::size_t>(r.x[j]);
    const double ei = (*ctx.e)[static_cast<std::size_t>(i)];
    ++count[l];
    ev[l] += r.event;
    ex[l] += ei;
    if (r.event == 1) loge[l] += std::log(ei);
  }
  std::vector<int> observed;
  for (int l = 0; l < levels; ++l)
    if (count[static_cast<std::size_t>(l)] > 0) observed.push_back(l);
  if (observed.size() < 2) return;

  // Order levels by event/exposure ratio and scan prefixes of that order.
  std::vector<int> by_rate = observed;
  std::stable_sort(by_rate.begin(), by_rate.end(), [&](int a, int b) {
    const double ra = ex[static_cast<std::size_t>(a)] > 0.0
                          ? ev[static_cast<std::size_t>(a)] / ex[static_cast<std::size_t>(a)]
                          : 0.0;
    const double rb = ex[static_cast<std::size_t>(b)] > 0.0
                          ? ev[static_cast<std::size_t>(b)] / ex[static_cast<std::size_t>(b)]
                          : 0.0;
    return ra < rb;
  });

  double tot_ev = std::accumulate(ev.begin(), ev.end(), 0.0);
  double tot_ex = std::accumulate(ex.begin(), ex.end(), 0.0);
  double tot_loge = std::accumulate(loge.begin(), loge.end(), 0.0);
  const std::size_t n = members.size();

  double cum_n = 0.0, cum_ev = 0.0, cum_ex = 0.0, cum_loge = 0.0;
  std::vector<int> left_set;
  for (std::size_t i = 0; i + 1 < by_rate.size(); ++i) {
    const auto l = static_cast<std::size_t>(by_rate[i]);
    left_set.push_back(by_rate[i]);
    cum_n += count[l];
    cum_ev += ev[l];
    cum_ex += ex[l];
    cum_loge += loge[l];
    if (cum_n < ctx.controls.min_bucket ||
        static_cast<double>(n) - cum_n < ctx.controls.min_bucket)
      continue;
    const double reduction =
        parent_dev - child_deviance(cum_ev, cum_ex, cum_loge) -
        child_deviance(tot_ev - cum_ev, tot_ex - cum_ex, tot_loge - cum_loge);
    if (reduction > best.reduction) {
      best.reduction = reduction;
      best.rule = split_rule{};
      best.rule.col = col;
      best.rule.is_subset = true;
      best.rule.left_levels = left_set;
      std::sort(best.rule.left_levels.begin(), best.rule.left_levels.end());
      best.rule.known_levels = observed;
    }
  }
}

inline std::unique_ptr<tree_node> grow_cart_node(const cart_ctx& ctx,
                                                 std::vector<int> members, int depth,
                                                 int& next_id) {
  auto node = std::make_unique<tree_node>();
  node->id = next_id++;
  fill_node_stats(*node, ctx, members);

  auto make_leaf = [&]() {
    node->members = std::move(members);
    return std::move(node);
  };

  if (node->events == 0 || node->n < ctx.controls.min_split ||
      (ctx.controls.max_depth > 0 && depth >= ctx.controls.max_depth))
    return make_leaf();

  cart_split best;
  for (std::size_t j = 0; j < ctx.d->schema.size(); ++j) {
    if (ctx.d->schema.columns[j].kind == cov_kind::nominal)
      scan_subset_cart(ctx, members, static_cast<int>(j), node->deviance, best);
    else
      scan_threshold_cart(ctx, members, static_cast<int>(j), node->deviance, best);
  }
  if (best.reduction <= ctx.gate || best.reduction <= 0.0) return make_leaf();

  std::vector<int> left_members, right_members;
  for (int i : members) {
    if (goes_left(best.rule, ctx.d->records[static_cast<std::size_t>(i)].x, ctx.d->schema))
      left_members.push_back(i);
    else
      right_members.push_back(i);
  }
  node->rule = best.rule;
  node->left = grow_cart_node(ctx, std::move(left_members), depth + 1, next_id);
  node->right = grow_cart_node(ctx, std::move(right_members), depth + 1, next_id);
  node->dev_reduction =
      node->deviance - (node->left->deviance + node->right->deviance);
  return std::move(node);
}

}  // namespace detail

inline tree_model grow_poisson_tree(const dataset& d, const std::vector<double>& e,
                                    const cart_controls& controls) {
  controls.check();
  if (e.size() != d.records.size())
    throw validation_error("exposure vector length mismatch");
  detail::cart_ctx ctx{&d, &e, controls, 0.0};
  // Gate computed from the root deviance so growth stops once reductions are
  // negligible on the root scale; pruning governs the final size.
  {
    tree_node probe;
    detail::fill_node_stats(probe, ctx, detail::all_members(d));
    ctx.gate = controls.cp_min * probe.deviance;
  }
  tree_model model;
  model.algo = "ltrcart";
  model.schema = d.schema;
  int next_id = 0;
  model.root = detail::grow_cart_node(ctx, detail::all_members(d), 0, next_id);
  return model;
}

struct prune_sequence {
  std::vector<double> alpha;           // relative thresholds, alpha[0] = 0
  std::vector<int> leaves;             // leaf count per subtree
  std::vector<double> train_deviance;  // leaf-deviance sum per subtree
  std::vector<double> cv_risk;         // filled by cv_select_subtree
  std::vector<double> cv_se;
  std::unordered_map<const tree_node*, double> prune_alpha;  // relative units
};

namespace detail {

struct prune_work {
  const tree_node* node;
  int leaves = 1;
  double leaf_dev = 0.0;
  bool pruned = false;
};

// Weakest-link pruning. Thresholds are stored relative to the root deviance
// so they transfer to cross-validation trees grown on folds.
inline prune_sequence weakest_link(const tree_node& root) {
  prune_sequence seq;
  const double scale = root.deviance > 0.0 ? root.deviance : 1.0;

  std::vector<const tree_node*> nodes;
  std::vector<const tree_node*> stack = {&root};
  while (!stack.empty()) {
    const tree_node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    if (!n->is_leaf()) {
      stack.push_back(n->left.get());
      stack.push_back(n->right.get());
    }
  }

  std::unordered_map<const tree_node*, prune_work> work;
  for (const tree_node* n : nodes) work[n] = prune_work{n};

  auto effective_leaf = [&](const tree_node* n) {
    return n->is_leaf() || work[n].pruned;
  };
  auto refresh = [&]() {
    // Recompute subtree summaries bottom-up over the preorder list reversed.
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      const tree_node* n = *it;
      auto& w = work[n];
      if (effective_leaf(n)) {
        w.leaves = 1;
        w.leaf_dev = n->deviance;
      } else {
        w.leaves = work[n->left.get()].leaves + work[n->right.get()].leaves;
        w.leaf_dev = work[n->left.get()].leaf_dev + work[n->right.get()].leaf_dev;
      }
    }
  };

  seq.alpha.push_back(0.0);
  refresh();
  seq.leaves.push_back(work[&root].leaves);
  seq.train_deviance.push_back(work[&root].leaf_dev);

  double last_alpha = 0.0;
  while (!effective_leaf(&root)) {
    double min_g = std::numeric_limits<double>::infinity();
    for (const tree_node* n : nodes) {
      if (effective_leaf(n)) continue;
      const auto& w = work[n];
      const double g = (n->deviance - w.leaf_dev) / (w.leaves - 1);
      min_g = std::min(min_g, g);
    }
    const double alpha = std::max(min_g, last_alpha);
    auto prune_subtree = [&](const tree_node* n, auto&& self) -> void {
      if (n->is_leaf()) return;
      if (!work[n].pruned) {
        work[n].pruned = true;
        seq.prune_alpha[n] = alpha / scale;
      }
      self(n->left.get(), self);
      self(n->right.get(), self);
    };
    for (const tree_node* n : nodes) {
      if (effective_leaf(n)) continue;
      const auto& w = work[n];
      const double g = (n->deviance - w.leaf_dev) / (w.leaves - 1);
      if (g <= min_g) prune_subtree(n, prune_subtree);
    }
    last_alpha = alpha;
    refresh();
    if (alpha / scale == seq.alpha.back()) {
      // Equal thresholds collapse to the further-pruned subtree.
      seq.leaves.back() = work[&root].leaves;
      seq.train_deviance.back() = work[&root].leaf_dev;
    } else {
      seq.alpha.push_back(alpha / scale);
      seq.leaves.push_back(work[&root].leaves);
      seq.train_deviance.push_back(work[&root].leaf_dev);
    }
  }
  return seq;
}

}  // namespace detail

inline prune_sequence cost_complexity_sequence(const tree_model& tree) {
  return detail::weakest_link(*tree.root);
}

namespace detail {

// Routes a record through a pruned view of a tree (internal nodes with
// prune_alpha <= beta act as leaves). Falls back to the deepest ancestor with
// positive exposure, and stops early on a level unseen in the fold.
inline double pruned_theta(const tree_node* node, const prune_sequence& seq,
                           double beta, const std::vector<double>& x,
                           const covariate_schema& schema) {
  double theta = node->exposure > 0.0 ? node->theta : 0.0;
  while (!node->is_leaf()) {
    auto it = seq.prune_alpha.find(node);
    if (it != seq.prune_alpha.end() && it->second <= beta) break;
    const auto& rule = node->rule;
    if (rule.is_subset) {
      const int level = static_cast<int>(x[static_cast<std::size_t>(rule.col)]);
      if (!std::binary_search(rule.known_levels.begin(), rule.known_levels.end(),
                              level))
        break;
      node = std::binary_search(rule.left_levels.begin(), rule.left_levels.end(),
                                level)
                 ? node->left.get()
                 : node->right.get();
    } else {
      node = x[static_cast<std::size_t>(rule.col)] <= rule.cut ? node->left.get()
                                                               : node->right.get();
    }
    if (node->exposure > 0.0) theta = node->theta;
  }
  return theta;
}

inline std::unique_ptr<tree_node> clone_cut(const tree_node& node,
                                            const prune_sequence& seq, double alpha) {
  auto out = std::make_unique<tree_node>();
  out->id = node.id;
  out->n = node.n;
  out->events = node.events;
  out->exposure = node.exposure;
  out->theta = node.theta;
  out->deviance = node.deviance;
  bool cut = node.is_leaf();
  if (!cut) {
    auto it = seq.prune_alpha.find(&node);
    cut = it != seq.prune_alpha.end() && it->second <= alpha;
  }
  if (cut) {
    collect_members(node, out->members);
    std::sort(out->members.begin(), out->members.end());
    return out;
  }
  out->rule = node.rule;
  out->dev_reduction = node.dev_reduction;
  out->left = clone_cut(*node.left, seq, alpha);
  out->right = clone_cut(*node.right, seq, alpha);
  return out;
}

inline void renumber(tree_node& node, int& next_id) {
  node.id = next_id++;
  if (node.is_leaf()) return;
  renumber(*node.left, next_id);
  renumber(*node.right, next_id);
}

inline std::vector<int> stratified_folds(const dataset& d, int folds, rng r) {
  std::vector<int> events, censored;
  for (std::size_t i = 0; i < d.records.size(); ++i)
    (d.records[i].event == 1 ? events : censored).push_back(static_cast<int>(i));
  auto shuffle = [&](std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(
                    r.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  };
  shuffle(events);
  shuffle(censored);
  std::vector<int> fold_of(d.records.size());
  int next = 0;
  for (int i : events) fold_of[static_cast<std::size_t>(i)] = next++ % folds;
  for (int i : censored) fold_of[static_cast<std::size_t>(i)] = next++ % folds;
  return fold_of;
}

}  // namespace detail

inline tree_model cv_select_subtree(const dataset& d, const std::vector<double>& e,
                                    const tree_model& grown, prune_sequence& seq,
                                    const cart_controls& controls, std::uint64_t seed) {
  if (static_cast<std::size_t>(controls.cv_folds) > d.records.size())
    throw validation_error("cv_folds exceeds the number of records");
  const std::size_t n = d.records.size();
  const std::size_t k_count = seq.alpha.size();

  // Representative complexity per subtree: geometric mean of its optimality
  // interval, with the last interval open to infinity.
  std::vector<double> beta(k_count);
  for (std::size_t k = 0; k < k_count; ++k)
    beta[k] = k + 1 < k_count ? std::sqrt(seq.alpha[k] * seq.alpha[k + 1])
                              : std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> contrib(k_count, std::vector<double>(n, 0.0));
  std::vector<int> fold_of;
  for (int attempt = 0;; ++attempt) {
    fold_of = detail::stratified_folds(d, controls.cv_folds,
                                       rng::substream(seed, 7700 + attempt));
    bool ok = true;
    for (int f = 0; f < controls.cv_folds && ok; ++f) {
      double train_exposure = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (fold_of[i] != f) train_exposure += e[i];
      ok = train_exposure > 0.0;
    }
    if (ok) break;
    if (attempt >= 1) throw numeric_error("cross-validation fold with zero exposure");
  }

  for (int f = 0; f < controls.cv_folds; ++f) {
    dataset train;
    train.schema = d.schema;
    std::vector<double> train_e;
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        held.push_back(i);
      } else {
        train.records.push_back(d.records[i]);
        train_e.push_back(e[i]);
      }
    }
    if (held.empty()) continue;
    int train_events = 0;
    for (const auto& r : train.records) train_events += r.event;
    if (train_events == 0) {
      // Degenerate fold: the parent rate is zero events over the training
      // exposure; score held-out records against it.
      for (std::size_t i : held)
        for (std::size_t k = 0; k < k_count; ++k)
          contrib[k][i] = deviance_contribution(d.records[i].event, e[i], 0.0);
      continue;
    }
    const tree_model fold_tree = grow_poisson_tree(train, train_e, controls);
    const prune_sequence fold_seq = cost_complexity_sequence(fold_tree);
    for (std::size_t i : held) {
      for (std::size_t k = 0; k < k_count; ++k) {
        const double theta =
            detail::pruned_theta(fold_tree.root.get(), fold_seq, beta[k],
                                 d.records[i].x, d.schema);
        contrib[k][i] = deviance_contribution(d.records[i].event, e[i], theta);
      }
    }
  }

  seq.cv_risk.assign(k_count, 0.0);
  seq.cv_se.assign(k_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double mean =
        std::accumulate(contrib[k].begin(), contrib[k].end(), 0.0) / n;
    double ss = 0.0;
    for (double c : contrib[k]) ss += (c - mean) * (c - mean);
    seq.cv_risk[k] = mean;
    seq.cv_se[k] = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  }

  std::size_t k_min = 0;
  for (std::size_t k = 0; k < k_count; ++k)
    if (seq.cv_risk[k] < seq.cv_risk[k_min]) k_min = k;
  const double limit = seq.cv_risk[k_min] + controls.se_rule * seq.cv_se[k_min];
  std::size_t chosen = k_min;
  for (std::size_t k = k_count; k-- > 0;) {
    if (seq.cv_risk[k] <= limit) {
      chosen = k;
      break;
    }
  }

  tree_model out;
  out.algo = "ltrcart";
  out.schema = d.schema;
  out.root = detail::clone_cut(*grown.root, seq, seq.alpha[chosen]);
  int next_id = 0;
  detail::renumber(*out.root, next_id);
  return out;
}

inline tree_model fit_ltrcart(const dataset& d, const cart_controls& controls,
                              std::uint64_t seed) {
  controls.check();
  check_dataset(d);
  if (d.records.empty()) throw validation_error("cannot fit on an empty dataset");
  int events = 0;
  for (const auto& r : d.records) events += r.event;
  if (events == 0) throw validation_error("cannot fit without any events");

  const cumulative_hazard lambda0 = nelson_aalen_ltrc(d);
  const std::vector<double> e = exposures(d, lambda0);
  const tree_model grown = grow_poisson_tree(d, e, controls);
  prune_sequence seq = cost_complexity_sequence(grown);
  tree_model final_tree = cv_select_subtree(d, e, grown, seq, controls, seed);
  final_tree.lambda0 = lambda0;
  return final_tree;
}

inline std::pair<double, survival_curve> predict_ltrcart(
    const tree_model& model, const std::vector<double>& x,
    const cumulative_hazard& lambda0) {
  const double theta = route(model, x)->theta;
  survival_curve s;
  s.initial = 1.0;
  s.knots = lambda0.knots;
  s.values.reserve(lambda0.values.size());
  for (double h : lambda0.values) s.values.push_back(std::exp(-theta * h));
  return {theta, s};
}

inline std::pair<double, survival_curve> predict_ltrcart(
    const tree_model& model, const std::vector<double>& x) {
  return predict_ltrcart(model, x, model.lambda0);
}

}  // namespace ltrc
