#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/io.hpp"
#include "ltrc/ltrcart.hpp"
#include "ltrc/ltrcit.hpp"
#include "ltrc/simulation.hpp"
#include "ltrc/tree.hpp"

namespace {

int env_default_threads() {
  const char* env = std::getenv("LTRC_THREADS");
  if (!env || !*env) return 1;
  int v = 0;
  const char* end = env + std::strlen(env);
  auto [ptr, ec] = std::from_chars(env, end, v);
  if (ec != std::errc{} || ptr != end || v < 1)
    throw ltrc::validation_error("LTRC_THREADS must be a positive integer");
  return v;
}

struct tree_flags {
  std::string algo = "ltrcit";
  double alpha = 0.05;
  int min_split = 20;
  int min_bucket = 7;
  int max_depth = 0;
  int cv_folds = 10;
  double se_rule = 0.0;
  double cp_min = 0.001;
  std::uint64_t seed = 1;
};

void add_tree_flags(CLI::App* cmd, tree_flags& f) {
  cmd->add_option("--algo", f.algo, "tree algorithm")
      ->check(CLI::IsMember({"ltrcit", "ltrcart"}));
  cmd->add_option("--alpha", f.alpha, "ltrcit split significance level");
  cmd->add_option("--min-split", f.min_split, "smallest node eligible for a split");
  cmd->add_option("--min-bucket", f.min_bucket, "smallest allowed child node");
  cmd->add_option("--max-depth", f.max_depth, "depth cap, 0 = unlimited");
  cmd->add_option("--cv-folds", f.cv_folds, "ltrcart cross-validation folds");
  cmd->add_option("--se-rule", f.se_rule, "ltrcart pruning SE multiplier");
  cmd->add_option("--cp-min", f.cp_min, "ltrcart growth gate fraction");
  cmd->add_option("--seed", f.seed, "random seed");
}

ltrc::ctree_controls it_controls(const tree_flags& f) {
  ltrc::ctree_controls c;
  c.alpha = f.alpha;
  c.min_split = f.min_split;
  c.min_bucket = f.min_bucket;
  c.max_depth = f.max_depth;
  return c;
}

ltrc::cart_controls cart_controls_of(const tree_flags& f) {
  ltrc::cart_controls c;
  c.min_split = f.min_split;
  c.min_bucket = f.min_bucket;
  c.max_depth = f.max_depth;
  c.cv_folds = f.cv_folds;
  c.se_rule = f.se_rule;
  c.cp_min = f.cp_min;
  return c;
}

std::string level_set_text(const ltrc::covariate_spec& col, const std::vector<int>& lv) {
  std::string out = "{";
  for (std::size_t k = 0; k < lv.size(); ++k) {
    if (k) out += ",";
    out += col.levels[static_cast<std::size_t>(lv[k])];
  }
  return out + "}";
}

std::string rule_text(const ltrc::tree_model& model, const ltrc::split_rule& rule,
                      bool left_side) {
  const auto& col = model.schema.columns[static_cast<std::size_t>(rule.col)];
  if (rule.is_subset)
    return col.name + (left_side ? " in " : " not in ") +
           level_set_text(col, rule.left_levels);
  if (col.kind == ltrc::cov_kind::ordinal) {
    const auto rank = static_cast<std::size_t>(std::floor(rule.cut));
    const auto& lv = col.levels[std::min(rank, col.levels.size() - 1)];
    return col.name + (left_side ? " <= " : " > ") + lv;
  }
  return col.name + (left_side ? " <= " : " > ") + ltrc::format_double(rule.cut);
}

std::string leaf_payload(const ltrc::tree_model& model, const ltrc::tree_node& node) {
  std::string out = "leaf " + std::to_string(node.id) +
                    ", n=" + std::to_string(node.n) +
                    ", events=" + std::to_string(node.events);
  if (model.algo == "ltrcart") {
    out += ", exposure=" + ltrc::format_double(node.exposure);
    out += ", theta=" + ltrc::format_double(node.theta);
    return out;
  }
  double median = -1.0;
  for (std::size_t k = 0; k < node.curve.knots.size(); ++k)
    if (node.curve.values[k] <= 0.5) {
      median = node.curve.knots[k];
      break;
    }
  out += median < 0.0 ? std::string(", median=na")
                      : ", median=" + ltrc::format_double(median);
  return out;
}

void summarize_node(const ltrc::tree_model& model, const ltrc::tree_node& node,
                    const std::string& intro, int depth, std::string& out) {
  out += std::string(2 * static_cast<std::size_t>(depth), ' ') + intro + ": ";
  if (node.is_leaf()) {
    out += leaf_payload(model, node) + "\n";
    return;
  }
  out += "n=" + std::to_string(node.n) + " events=" + std::to_string(node.events);
  out += ", split " + rule_text(model, node.rule, true);
  if (model.algo == "ltrcit")
    out += " (p*=" + ltrc::format_double(node.p_value) + ")";
  else
    out += " (reduction=" + ltrc::format_double(node.dev_reduction) + ")";
  out += "\n";
  summarize_node(model, *node.left, rule_text(model, node.rule, true), depth + 1, out);
  summarize_node(model, *node.right, rule_text(model, node.rule, false), depth + 1, out);
}

std::string summarize(const ltrc::tree_model& model) {
  std::string out = model.algo + " tree: " + std::to_string(model.root->n) +
                    " records, " + std::to_string(model.root->events) + " events, " +
                    std::to_string(ltrc::leaves(model).size()) + " leaves\n";
  summarize_node(model, *model.root, "root", 0, out);
  return out;
}

struct fit_options {
  tree_flags flags;
  std::string data, schema, out, dot;
};

int cmd_fit(const fit_options& o) {
  const auto schema = ltrc::load_schema_toml(ltrc::read_text_file(o.schema));
  const auto d = ltrc::parse_ltrc_csv(ltrc::read_text_file(o.data), schema);
  ltrc::tree_model model;
  if (o.flags.algo == "ltrcit")
    model = ltrc::fit_ltrcit(d, it_controls(o.flags));
  else
    model = ltrc::fit_ltrcart(d, cart_controls_of(o.flags), o.flags.seed);
  ltrc::write_text_file(o.out, ltrc::tree_to_json(model));
  if (!o.dot.empty()) ltrc::write_text_file(o.dot, ltrc::tree_to_dot(model));
  std::cout << summarize(model);
  return 0;
}

struct reformat_options {
  std::string data, schema, out;
};

int cmd_reformat(const reformat_options& o) {
  const auto schema = ltrc::load_schema_toml(ltrc::read_text_file(o.schema));
  const auto rows = ltrc::parse_long_csv(ltrc::read_text_file(o.data), schema);
  const auto d = ltrc::reformat_long_to_ltrc(rows, schema);
  ltrc::write_text_file(o.out, ltrc::write_ltrc_csv(d));
  std::cout << "reformatted " << rows.size() << " visit rows into "
            << d.records.size() << " intervals\n";
  return 0;
}

struct predict_options {
  std::string tree, data, out;
};

int cmd_predict(const predict_options& o) {
  const auto model = ltrc::tree_from_json(ltrc::read_text_file(o.tree));
  const auto& schema = model.schema;
  const auto lines = ltrc::detail::csv_lines(ltrc::read_text_file(o.data));
  if (lines.empty()) throw ltrc::parse_error("empty CSV input");
  std::vector<std::string> expected = {"id"};
  for (const auto& col : schema.columns) expected.push_back(col.name);
  ltrc::detail::check_header(ltrc::detail::split_csv_line(lines[0]), expected);

  const bool cart = model.algo == "ltrcart";
  std::string out_csv = cart ? "id,theta,initial,knots,values\n"
                             : "id,initial,knots,values\n";
  std::vector<std::string> offenders;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto cells = ltrc::detail::split_csv_line(lines[i]);
    if (cells.size() != expected.size())
      throw ltrc::parse_error("row " + std::to_string(row) + ": expected " +
                              std::to_string(expected.size()) + " cells, got " +
                              std::to_string(cells.size()));
    std::vector<double> x;
    bool bad_level = false;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& col = schema.columns[j];
      if (col.kind == ltrc::cov_kind::numeric) {
        x.push_back(ltrc::detail::parse_number_cell(cells[1 + j], row, col.name));
        continue;
      }
      bool found = false;
      for (std::size_t l = 0; l < col.levels.size(); ++l)
        if (col.levels[l] == cells[1 + j]) {
          x.push_back(static_cast<double>(l));
          found = true;
          break;
        }
      if (!found) {
        offenders.push_back("row " + std::to_string(row) + ": unknown level '" +
                            cells[1 + j] + "' of " + col.name);
        bad_level = true;
        break;
      }
    }
    if (bad_level) continue;
    try {
      if (cart) {
        const auto [theta, curve] = ltrc::predict_ltrcart(model, x);
        out_csv += cells[0] + "," + ltrc::format_double(theta) + "," +
                   ltrc::format_double(curve.initial) + "," +
                   ltrc::join_doubles(curve.knots, ';') + "," +
                   ltrc::join_doubles(curve.values, ';') + "\n";
      } else {
        const auto& curve = ltrc::predict_ltrcit(model, x);
        out_csv += cells[0] + "," + ltrc::format_double(curve.initial) + "," +
                   ltrc::join_doubles(curve.knots, ';') + "," +
                   ltrc::join_doubles(curve.values, ';') + "\n";
      }
    } catch (const ltrc::routing_error& e) {
      offenders.push_back("row " + std::to_string(row) + ": " + e.what());
    }
  }
  if (!offenders.empty()) {
    for (const auto& line : offenders) std::cerr << "error: " << line << "\n";
    return 3;
  }
  ltrc::write_text_file(o.out, out_csv);
  std::cout << "predicted " << lines.size() - 1 << " rows\n";
  return 0;
}

struct benchmark_options {
  tree_flags flags;
  std::string grid, out;
  int threads = 1;
  bool seed_set = false;
};

int cmd_benchmark(const benchmark_options& o) {
  auto grid = ltrc::load_scenario_grid(ltrc::read_text_file(o.grid));
  if (o.seed_set)
    for (auto& run : grid.runs) run.spec.seed = o.flags.seed;
  const auto itc = it_controls(o.flags);
  const auto cc = cart_controls_of(o.flags);

  std::vector<ltrc::trial_row> all;
  for (const auto& run : grid.runs) {
    std::vector<ltrc::trial_row> rows;
    switch (run.kind) {
      case ltrc::experiment_kind::recovery:
        rows = ltrc::run_recovery_experiment(run.spec, run.trials, itc, cc, o.threads);
        break;
      case ltrc::experiment_kind::null_selection:
        rows = ltrc::run_null_selection_experiment(run.trials, run.spec.seed,
                                                   run.spec.n, o.threads,
                                                   run.spec.name);
        break;
      case ltrc::experiment_kind::ibs:
        rows = ltrc::run_ibs_experiment(run.spec, run.trials, itc, cc, o.threads);
        break;
    }
    all.insert(all.end(), rows.begin(), rows.end());
  }
  ltrc::write_text_file(o.out, ltrc::write_trial_csv(all));
  std::cout << "wrote " << all.size() << " result rows for " << grid.runs.size()
            << " scenarios\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"survival trees for left-truncated right-censored data"};
  app.require_subcommand(1);

  fit_options fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a tree to wide-format LTRC data");
  fit_cmd->add_option("--data", fit.data, "wide-format CSV")->required();
  fit_cmd->add_option("--schema", fit.schema, "covariate schema TOML")->required();
  fit_cmd->add_option("--out", fit.out, "tree JSON output path")->required();
  fit_cmd->add_option("--dot", fit.dot, "optional DOT output path");
  add_tree_flags(fit_cmd, fit.flags);

  reformat_options reformat;
  auto* ref_cmd =
      app.add_subcommand("reformat", "turn long-format visits into LTRC intervals");
  ref_cmd->add_option("--data", reformat.data, "long-format CSV")->required();
  ref_cmd->add_option("--schema", reformat.schema, "covariate schema TOML")->required();
  ref_cmd->add_option("--out", reformat.out, "wide-format CSV output path")->required();

  predict_options predict;
  auto* pred_cmd = app.add_subcommand("predict", "predict survival curves per subject");
  pred_cmd->add_option("--tree", predict.tree, "fitted tree JSON")->required();
  pred_cmd->add_option("--data", predict.data, "covariate CSV")->required();
  pred_cmd->add_option("--out", predict.out, "curve CSV output path")->required();

  benchmark_options bench;
  bench.threads = env_default_threads();
  auto* bench_cmd = app.add_subcommand("benchmark", "run a simulation scenario grid");
  bench_cmd->add_option("--grid", bench.grid, "scenario grid TOML")->required();
  bench_cmd->add_option("--out", bench.out, "results CSV output path")->required();
  auto* bench_seed = bench_cmd->add_option("--seed", bench.flags.seed,
                                           "override every scenario seed");
  bench_cmd->add_option("--threads", bench.threads, "worker threads for trials")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--alpha", bench.flags.alpha, "ltrcit split significance level");
  bench_cmd->add_option("--min-split", bench.flags.min_split,
                        "smallest node eligible for a split");
  bench_cmd->add_option("--min-bucket", bench.flags.min_bucket,
                        "smallest allowed child node");
  bench_cmd->add_option("--cv-folds", bench.flags.cv_folds,
                        "ltrcart cross-validation folds");
  bench_cmd->add_option("--se-rule", bench.flags.se_rule,
                        "ltrcart pruning SE multiplier");
  bench_cmd->add_option("--cp-min", bench.flags.cp_min, "ltrcart growth gate fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  bench.seed_set = bench_seed->count() > 0;

  if (fit_cmd->parsed()) return cmd_fit(fit);
  if (ref_cmd->parsed()) return cmd_reformat(reformat);
  if (pred_cmd->parsed()) return cmd_predict(predict);
  return cmd_benchmark(bench);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ltrc::routing_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ltrc::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
