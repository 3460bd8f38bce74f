#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ltrc/estimators.hpp"
#include "ltrc/ltrcart.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ltrc;

namespace {

double direct_contribution(int event, double e, double theta) {
  const double mu = e * theta;
  return event == 1 ? 2.0 * (-std::log(mu) - (1.0 - mu)) : 2.0 * mu;
}

// Exponential lifetimes at rate 1 or 4 depending on x1, uniform noise in x2.
dataset rate_groups(int n, rng& r, double censor_rate = 0.0) {
  dataset d;
  d.schema = support::numeric_schema(2);
  for (int i = 0; i < n; ++i) {
    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    const double g = i % 2 == 0 ? 0.0 : 1.0;
    rec.left = 0.0;
    rec.right = r.exponential(g == 0.0 ? 1.0 : 4.0);
    rec.event = 1;
    if (censor_rate > 0.0) {
      const double c = r.exponential(censor_rate);
      if (c < rec.right) {
        rec.right = c;
        rec.event = 0;
      }
    }
    rec.x = {g, r.uniform()};
    d.records.push_back(std::move(rec));
  }
  return d;
}

}  // namespace

TEST_CASE("cart controls validation") {
  cart_controls c;
  c.cv_folds = 1;
  REQUIRE_THROWS_AS(c.check(), validation_error);
  c = {};
  c.se_rule = -1.0;
  REQUIRE_THROWS_AS(c.check(), validation_error);
  c = {};
  c.cp_min = -0.1;
  REQUIRE_THROWS_AS(c.check(), validation_error);
  c = {};
  c.min_split = 5;
  REQUIRE_THROWS_AS(c.check(), validation_error);
  REQUIRE_NOTHROW(cart_controls{}.check());
}

TEST_CASE("exposures are baseline hazard increments over the observed window") {
  const dataset d =
      support::make_ltrc({{0.0, 2.0, 1}, {1.0, 3.0, 0}, {1.0, 4.0, 1}});
  const auto lambda0 = nelson_aalen_ltrc(d);
  const auto e = exposures(d, lambda0);
  REQUIRE(e[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  REQUIRE(e[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  REQUIRE(e[2] == Catch::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("a record ending before the first event has zero exposure") {
  const dataset d = support::make_ltrc({{0.0, 1.0, 0}, {0.0, 3.0, 1}});
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  REQUIRE(e[0] == 0.0);
}

TEST_CASE("deviance contribution hand values") {
  REQUIRE(deviance_contribution(0, 0.5, 2.0) == 2.0);
  REQUIRE(deviance_contribution(1, 0.5, 2.0) == 0.0);  // saturated: mu = 1
  REQUIRE(deviance_contribution(0, 0.0, 5.0) == 0.0);
  REQUIRE(deviance_contribution(1, 0.0, 5.0) ==
          std::numeric_limits<double>::infinity());
  REQUIRE(deviance_contribution(1, 1.0, 2.0) ==
          Catch::Approx(2.0 * (1.0 - std::log(2.0))).epsilon(1e-14));
}

TEST_CASE("aggregated child deviance equals the per-record sum") {
  rng r(0xCA1);
  for (int rep = 0; rep < 50; ++rep) {
    const dataset d = support::random_ltrc(static_cast<int>(r.uniform_int(5, 40)), r);
    const auto e = exposures(d, nelson_aalen_ltrc(d));
    double events = 0.0, expo = 0.0, sum_log_e = 0.0;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      events += d.records[i].event;
      expo += e[i];
      if (d.records[i].event == 1) sum_log_e += std::log(e[i]);
    }
    if (!(expo > 0.0) || events == 0.0) continue;
    const double theta = events / expo;
    double direct = 0.0;
    for (std::size_t i = 0; i < d.records.size(); ++i)
      direct += direct_contribution(d.records[i].event, e[i], theta);
    const double collapsed = detail::child_deviance(events, expo, sum_log_e);
    REQUIRE(collapsed == Catch::Approx(direct).margin(1e-10));
  }
}

TEST_CASE("node statistics are exact aggregates of their members") {
  rng r(0xCA2);
  const dataset d = rate_groups(150, r, 0.5);
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  cart_controls c;
  c.cp_min = 0.0;
  const tree_model grown = grow_poisson_tree(d, e, c);

  std::vector<const tree_node*> stack = {grown.root.get()};
  while (!stack.empty()) {
    const tree_node* node = stack.back();
    stack.pop_back();
    std::vector<int> members;
    collect_members(*node, members);
    std::sort(members.begin(), members.end());

    int events = 0;
    double expo = 0.0;
    for (int i : members) {
      events += d.records[static_cast<std::size_t>(i)].event;
      expo += e[static_cast<std::size_t>(i)];
    }
    REQUIRE(node->n == static_cast<int>(members.size()));
    REQUIRE(node->events == events);
    REQUIRE(node->exposure == Catch::Approx(expo).epsilon(1e-12));
    if (node->events > 0)
      REQUIRE(node->events ==
              Catch::Approx(node->theta * node->exposure).epsilon(1e-12));

    // Stored deviance is exactly the member-wise Poisson deviance sum.
    double dev = 0.0;
    for (int i : members)
      dev += direct_contribution(d.records[static_cast<std::size_t>(i)].event,
                                 e[static_cast<std::size_t>(i)], node->theta);
    REQUIRE(node->deviance == dev);

    if (!node->is_leaf()) {
      REQUIRE(node->dev_reduction ==
              node->deviance - (node->left->deviance + node->right->deviance));
      stack.push_back(node->left.get());
      stack.push_back(node->right.get());
    }
  }
}

TEST_CASE("a strong rate contrast is split on the signal column") {
  rng r(0xCA3);
  const dataset d = rate_groups(200, r);
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  const tree_model grown = grow_poisson_tree(d, e, cart_controls{});
  REQUIRE_FALSE(grown.root->is_leaf());
  REQUIRE(grown.root->rule.col == 0);
  REQUIRE(grown.root->rule.cut > 0.0);
  REQUIRE(grown.root->rule.cut < 1.0);
  REQUIRE(grown.root->dev_reduction > 0.0);
}

TEST_CASE("a huge growth gate leaves the root alone") {
  rng r(0xCA4);
  const dataset d = rate_groups(200, r);
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  cart_controls c;
  c.cp_min = 10.0;
  const tree_model grown = grow_poisson_tree(d, e, c);
  REQUIRE(grown.root->is_leaf());
}

TEST_CASE("nominal covariates split by grouped levels") {
  dataset d;
  d.schema.columns.push_back({"arm", cov_kind::nominal, {"a", "b", "c"}});
  rng r(0xCA5);
  for (int i = 0; i < 180; ++i) {
    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    const int level = i % 3;
    rec.left = 0.0;
    rec.right = r.exponential(level == 1 ? 0.5 : 4.0);
    rec.event = 1;
    rec.x = {static_cast<double>(level)};
    d.records.push_back(std::move(rec));
  }
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  const tree_model grown = grow_poisson_tree(d, e, cart_controls{});
  REQUIRE_FALSE(grown.root->is_leaf());
  REQUIRE(grown.root->rule.is_subset);
  REQUIRE(grown.root->rule.known_levels == std::vector<int>{0, 1, 2});
  // Levels a and c share the high rate; one side must be exactly {b}.
  const auto& left = grown.root->rule.left_levels;
  const bool b_isolated = left == std::vector<int>{1} ||
                          left == std::vector<int>{0, 2};
  REQUIRE(b_isolated);
}

TEST_CASE("pruning thresholds match an independent weakest-link pass") {
  rng r(0xCA6);
  for (int rep = 0; rep < 10; ++rep) {
    const dataset d = rate_groups(120, r, 0.7);
    const auto e = exposures(d, nelson_aalen_ltrc(d));
    cart_controls c;
    c.cp_min = 0.0;
    c.min_split = 10;
    c.min_bucket = 3;
    const tree_model grown = grow_poisson_tree(d, e, c);
    if (grown.root->is_leaf()) continue;

    const prune_sequence seq = cost_complexity_sequence(grown);
    const auto steps = oracle::weakest_link_steps(*grown.root);
    const double scale = grown.root->deviance;

    REQUIRE(seq.alpha.size() == steps.size());
    for (std::size_t k = 0; k < steps.size(); ++k) {
      REQUIRE(seq.alpha[k] ==
              Catch::Approx(steps[k].alpha / scale).margin(1e-9));
      REQUIRE(seq.leaves[k] == steps[k].leaves);
    }
  }
}

TEST_CASE("the prune sequence shrinks to the root") {
  rng r(0xCA7);
  const dataset d = rate_groups(160, r, 0.5);
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  cart_controls c;
  c.cp_min = 0.0;
  const tree_model grown = grow_poisson_tree(d, e, c);
  const prune_sequence seq = cost_complexity_sequence(grown);

  REQUIRE(seq.alpha.front() == 0.0);
  for (std::size_t k = 1; k < seq.alpha.size(); ++k)
    REQUIRE(seq.alpha[k] > seq.alpha[k - 1]);
  for (std::size_t k = 1; k < seq.leaves.size(); ++k)
    REQUIRE(seq.leaves[k] < seq.leaves[k - 1]);
  REQUIRE(seq.leaves.back() == 1);
  for (std::size_t k = 1; k < seq.train_deviance.size(); ++k)
    REQUIRE(seq.train_deviance[k] >= seq.train_deviance[k - 1] - 1e-9);
}

TEST_CASE("stratified folds balance events and sizes") {
  rng r(0xCA8);
  dataset d;
  d.schema = support::numeric_schema(1);
  for (int i = 0; i < 40; ++i) {
    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    rec.left = 0.0;
    rec.right = 1.0 + i;
    rec.event = i < 23 ? 1 : 0;
    rec.x = {0.0};
    d.records.push_back(std::move(rec));
  }
  const auto fold_of = detail::stratified_folds(d, 5, rng(99));
  std::vector<int> size(5, 0), events(5, 0);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    ++size[static_cast<std::size_t>(fold_of[i])];
    events[static_cast<std::size_t>(fold_of[i])] += d.records[i].event;
  }
  for (int f = 0; f < 5; ++f) {
    REQUIRE(size[static_cast<std::size_t>(f)] == 8);
    REQUIRE(events[static_cast<std::size_t>(f)] >= 4);
    REQUIRE(events[static_cast<std::size_t>(f)] <= 5);
  }
}

TEST_CASE("cross-validation selection is deterministic in the seed") {
  rng r(0xCA9);
  const dataset d = rate_groups(140, r, 0.6);
  const tree_model a = fit_ltrcart(d, cart_controls{}, 17);
  const tree_model b = fit_ltrcart(d, cart_controls{}, 17);
  REQUIRE(tree_to_json(a) == tree_to_json(b));
}

TEST_CASE("cv_folds beyond the sample size is rejected") {
  rng r(0xCAA);
  const dataset d = rate_groups(8, r);
  cart_controls c;
  c.cv_folds = 9;
  c.min_split = 2;
  c.min_bucket = 1;
  REQUIRE_THROWS_AS(fit_ltrcart(d, c, 1), validation_error);
}

TEST_CASE("cv_folds equal to the sample size works") {
  rng r(0xCAB);
  const dataset d = rate_groups(15, r);
  cart_controls c;
  c.cv_folds = 15;
  c.min_split = 4;
  c.min_bucket = 2;
  const tree_model m = fit_ltrcart(d, c, 5);
  REQUIRE(m.root != nullptr);
}

TEST_CASE("the fitted model recovers the two rates") {
  rng r(0xCAC);
  const dataset d = rate_groups(400, r);
  const tree_model m = fit_ltrcart(d, cart_controls{}, 11);
  REQUIRE_FALSE(m.root->is_leaf());
  REQUIRE(m.root->rule.col == 0);
  REQUIRE(support::same_curve(m.lambda0, nelson_aalen_ltrc(d)));

  // Rates are estimated relative to the pooled baseline, so their ratio is
  // what identifies the groups.
  const double slow = predict_ltrcart(m, {0.0, 0.5}).first;
  const double fast = predict_ltrcart(m, {1.0, 0.5}).first;
  REQUIRE(fast / slow > 2.0);
}

TEST_CASE("an aggressive one-se rule collapses to the root") {
  rng r(0xCAD);
  const dataset d = rate_groups(120, r, 0.8);
  cart_controls c;
  c.se_rule = 1e9;
  const tree_model m = fit_ltrcart(d, c, 3);
  REQUIRE(m.root->is_leaf());
}

TEST_CASE("prediction scales the baseline by the leaf rate") {
  tree_model m;
  m.algo = "ltrcart";
  m.schema = support::numeric_schema(1);
  m.root = std::make_unique<tree_node>();
  m.root->theta = 2.0;
  m.root->exposure = 1.0;
  m.lambda0 = support::step_curve(0.0, {1.0, 2.0}, {0.5, 1.25});

  const auto [theta, curve] = predict_ltrcart(m, {0.3});
  REQUIRE(theta == 2.0);
  REQUIRE(curve.initial == 1.0);
  REQUIRE(curve.knots == std::vector<double>{1.0, 2.0});
  REQUIRE(curve.values[0] == Catch::Approx(std::exp(-1.0)).epsilon(1e-15));
  REQUIRE(curve.values[1] == Catch::Approx(std::exp(-2.5)).epsilon(1e-15));

  m.root->theta = 0.0;
  const auto flat = predict_ltrcart(m, {0.3});
  REQUIRE(flat.second.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("pruned routing matches the materialized subtree") {
  rng r(0xCAE);
  const dataset d = rate_groups(150, r, 0.6);
  const auto e = exposures(d, nelson_aalen_ltrc(d));
  cart_controls c;
  c.cp_min = 0.0;
  c.min_split = 10;
  c.min_bucket = 3;
  const tree_model grown = grow_poisson_tree(d, e, c);
  const prune_sequence seq = cost_complexity_sequence(grown);

  for (std::size_t k = 0; k < seq.alpha.size(); ++k) {
    tree_model cut;
    cut.schema = d.schema;
    cut.root = detail::clone_cut(*grown.root, seq, seq.alpha[k]);
    for (int rep = 0; rep < 50; ++rep) {
      const std::vector<double> x = {r.uniform(), r.uniform()};
      const tree_node* leaf = route(cut, x);
      if (!(leaf->exposure > 0.0)) continue;
      const double direct =
          detail::pruned_theta(grown.root.get(), seq, seq.alpha[k], x, d.schema);
      REQUIRE(direct == leaf->theta);
    }
  }
}
