#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/step_function.hpp"

namespace ltrc {

// Binary split. Threshold rules (numeric and ordinal columns) send
// x <= cut left; subset rules (nominal columns) send listed levels left and
// refuse levels unseen at fit time.
struct split_rule {
  int col = -1;
  bool is_subset = false;
  double cut = 0.0;
  std::vector<int> left_levels;
  std::vector<int> known_levels;
};

struct tree_node {
  int id = 0;
  std::unique_ptr<tree_node> left, right;
  split_rule rule;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double dev_reduction = 0.0;

  int n = 0;
  int events = 0;
  double exposure = 0.0;
  double theta = 0.0;
  double deviance = 0.0;

  std::vector<int> members;
  survival_curve curve;

  bool is_leaf() const { return !left; }
};

struct tree_model {
  std::string algo;  // "ltrcit" or "ltrcart"
  covariate_schema schema;
  std::unique_ptr<tree_node> root;
  cumulative_hazard lambda0;  // ltrcart baseline hazard
};

inline bool goes_left(const split_rule& rule, const std::vector<double>& x,
                      const covariate_schema& schema) {
  if (!rule.is_subset) return x[static_cast<std::size_t>(rule.col)] <= rule.cut;
  const auto& col = schema.columns[static_cast<std::size_t>(rule.col)];
  const int level = static_cast<int>(x[static_cast<std::size_t>(rule.col)]);
  if (level < 0 || static_cast<std::size_t>(level) >= col.levels.size())
    throw routing_error("level index " + std::to_string(level) + " of " + col.name +
                        " is out of range");
  if (!std::binary_search(rule.known_levels.begin(), rule.known_levels.end(), level))
    throw routing_error("level '" + col.levels[static_cast<std::size_t>(level)] +
                        "' of " + col.name + " was not seen when the tree was fitted");
  return std::binary_search(rule.left_levels.begin(), rule.left_levels.end(), level);
}

inline const tree_node* route(const tree_model& model, const std::vector<double>& x) {
  const tree_node* node = model.root.get();
  while (!node->is_leaf())
    node = goes_left(node->rule, x, model.schema) ? node->left.get() : node->right.get();
  return node;
}

inline void collect_members(const tree_node& node, std::vector<int>& out) {
  if (node.is_leaf()) {
    out.insert(out.end(), node.members.begin(), node.members.end());
    return;
  }
  collect_members(*node.left, out);
  collect_members(*node.right, out);
}

inline void collect_leaves(const tree_node* node, std::vector<const tree_node*>& out) {
  if (node->is_leaf()) {
    out.push_back(node);
    return;
  }
  collect_leaves(node->left.get(), out);
  collect_leaves(node->right.get(), out);
}

inline std::vector<const tree_node*> leaves(const tree_model& model) {
  std::vector<const tree_node*> out;
  collect_leaves(model.root.get(), out);
  return out;
}

inline void collect_split_columns(const tree_node* node, std::set<int>& out) {
  if (node->is_leaf()) return;
  out.insert(node->rule.col);
  collect_split_columns(node->left.get(), out);
  collect_split_columns(node->right.get(), out);
}

// Columns used by at least one split, as schema indices.
inline std::set<int> split_columns(const tree_model& model) {
  std::set<int> out;
  collect_split_columns(model.root.get(), out);
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline nlohmann::json curve_to_json(const step_function& f) {
  return {{"initial", f.initial}, {"knots", f.knots}, {"values", f.values}};
}

inline step_function curve_from_json(const nlohmann::json& j) {
  step_function f;
  f.initial = j.at("initial").get<double>();
  f.knots = j.at("knots").get<std::vector<double>>();
  f.values = j.at("values").get<std::vector<double>>();
  f.check();
  return f;
}

inline nlohmann::json node_to_json(const tree_node& node, const std::string& algo) {
  nlohmann::json j;
  j["id"] = node.id;
  j["n"] = node.n;
  j["events"] = node.events;
  if (algo == "ltrcart") {
    j["exposure"] = node.exposure;
    j["theta"] = node.theta;
    j["deviance"] = node.deviance;
  }
  if (node.is_leaf()) {
    j["members"] = node.members;
    if (algo == "ltrcit") j["curve"] = curve_to_json(node.curve);
    return j;
  }
  nlohmann::json s;
  s["col"] = node.rule.col;
  if (node.rule.is_subset) {
    s["kind"] = "subset";
    s["left_levels"] = node.rule.left_levels;
    s["known_levels"] = node.rule.known_levels;
  } else {
    s["kind"] = "threshold";
    s["cut"] = node.rule.cut;
  }
  j["split"] = s;
  if (algo == "ltrcit") j["p_value"] = node.p_value;
  if (algo == "ltrcart") j["dev_reduction"] = node.dev_reduction;
  j["left"] = node_to_json(*node.left, algo);
  j["right"] = node_to_json(*node.right, algo);
  return j;
}

inline std::unique_ptr<tree_node> node_from_json(const nlohmann::json& j,
                                                 const std::string& algo) {
  auto node = std::make_unique<tree_node>();
  node->id = j.at("id").get<int>();
  node->n = j.at("n").get<int>();
  node->events = j.at("events").get<int>();
  if (algo == "ltrcart") {
    node->exposure = j.at("exposure").get<double>();
    node->theta = j.at("theta").get<double>();
    node->deviance = j.at("deviance").get<double>();
  }
  if (!j.contains("split")) {
    node->members = j.at("members").get<std::vector<int>>();
    if (algo == "ltrcit") node->curve = curve_from_json(j.at("curve"));
    return node;
  }
  const auto& s = j.at("split");
  node->rule.col = s.at("col").get<int>();
  if (s.at("kind").get<std::string>() == "subset") {
    node->rule.is_subset = true;
    node->rule.left_levels = s.at("left_levels").get<std::vector<int>>();
    node->rule.known_levels = s.at("known_levels").get<std::vector<int>>();
  } else {
    node->rule.cut = s.at("cut").get<double>();
  }
  if (algo == "ltrcit") node->p_value = j.at("p_value").get<double>();
  if (algo == "ltrcart") node->dev_reduction = j.at("dev_reduction").get<double>();
  node->left = node_from_json(j.at("left"), algo);
  node->right = node_from_json(j.at("right"), algo);
  return node;
}

inline nlohmann::json schema_to_json(const covariate_schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == cov_kind::numeric  ? "numeric"
                 : c.kind == cov_kind::ordinal ? "ordinal"
                                               : "nominal";
    if (c.kind != cov_kind::numeric) jc["levels"] = c.levels;
    cols.push_back(jc);
  }
  return cols;
}

inline covariate_schema schema_from_json(const nlohmann::json& j) {
  covariate_schema schema;
  for (const auto& jc : j) {
    covariate_spec c;
    c.name = jc.at("name").get<std::string>();
    const std::string kind = jc.at("kind").get<std::string>();
    if (kind == "numeric")
      c.kind = cov_kind::numeric;
    else if (kind == "ordinal")
      c.kind = cov_kind::ordinal;
    else if (kind == "nominal")
      c.kind = cov_kind::nominal;
    else
      throw schema_error("unknown covariate kind: " + kind);
    if (c.kind != cov_kind::numeric)
      c.levels = jc.at("levels").get<std::vector<std::string>>();
    schema.columns.push_back(std::move(c));
  }
  schema.check();
  return schema;
}

}  // namespace detail

inline std::string tree_to_json(const tree_model& model) {
  nlohmann::json j;
  j["format"] = "ltrc-tree";
  j["version"] = 1;
  j["algo"] = model.algo;
  j["schema"] = detail::schema_to_json(model.schema);
  if (model.algo == "ltrcart") j["lambda0"] = detail::curve_to_json(model.lambda0);
  j["root"] = detail::node_to_json(*model.root, model.algo);
  return j.dump(2) + "\n";
}

inline tree_model tree_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("bad tree file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ltrc-tree")
      throw parse_error("not a tree file");
    if (j.at("version").get<int>() != 1) throw parse_error("unsupported tree version");
    tree_model model;
    model.algo = j.at("algo").get<std::string>();
    if (model.algo != "ltrcit" && model.algo != "ltrcart")
      throw parse_error("unknown algorithm tag: " + model.algo);
    model.schema = detail::schema_from_json(j.at("schema"));
    if (model.algo == "ltrcart")
      model.lambda0 = detail::curve_from_json(j.at("lambda0"));
    model.root = detail::node_from_json(j.at("root"), model.algo);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("bad tree file: ") + e.what());
  }
}

namespace detail {

inline void node_to_dot(const tree_node& node, const tree_model& model,
                        std::string& out) {
  const std::string name = "n" + std::to_string(node.id);
  if (node.is_leaf()) {
    std::string label = "node " + std::to_string(node.id) +
                        "\\nn=" + std::to_string(node.n) +
                        " events=" + std::to_string(node.events);
    if (model.algo == "ltrcart") label += "\\ntheta=" + format_double(node.theta);
    out += "  " + name + " [shape=box, label=\"" + label + "\"];\n";
    return;
  }
  const auto& col = model.schema.columns[static_cast<std::size_t>(node.rule.col)];
  std::string label = col.name;
  std::string edge_l, edge_r;
  if (node.rule.is_subset) {
    edge_l = "{";
    for (std::size_t k = 0; k < node.rule.left_levels.size(); ++k) {
      if (k) edge_l += ",";
      edge_l += col.levels[static_cast<std::size_t>(node.rule.left_levels[k])];
    }
    edge_l += "}";
    edge_r = "other";
  } else if (col.kind == cov_kind::ordinal) {
    const auto rank = static_cast<std::size_t>(std::floor(node.rule.cut));
    edge_l = "<= " + col.levels[std::min(rank, col.levels.size() - 1)];
    edge_r = "> " + col.levels[std::min(rank, col.levels.size() - 1)];
  } else {
    edge_l = "<= " + format_double(node.rule.cut);
    edge_r = "> " + format_double(node.rule.cut);
  }
  if (model.algo == "ltrcit" && std::isfinite(node.p_value))
    label += "\\np*=" + format_double(node.p_value);
  out += "  " + name + " [label=\"" + label + "\"];\n";
  node_to_dot(*node.left, model, out);
  node_to_dot(*node.right, model, out);
  out += "  " + name + " -> n" + std::to_string(node.left->id) + " [label=\"" +
         edge_l + "\"];\n";
  out += "  " + name + " -> n" + std::to_string(node.right->id) + " [label=\"" +
         edge_r + "\"];\n";
}

}  // namespace detail

inline std::string tree_to_dot(const tree_model& model) {
  std::string out = "digraph tree {\n";
  detail::node_to_dot(*model.root, model, out);
  out += "}\n";
  return out;
}

}  // namespace ltrc
