#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ltrc/common.hpp"
#include "ltrc/data.hpp"
#include "ltrc/estimators.hpp"
#include "ltrc/evaluation.hpp"
#include "ltrc/ltrcart.hpp"
#include "ltrc/ltrcit.hpp"
#include "ltrc/rng.hpp"
#include "ltrc/tree.hpp"

namespace ltrc {

enum class sim_family {
  exponential,
  weibull_increasing,
  weibull_decreasing,
  lognormal,
  bathtub,
  gompertz,
};

enum class sim_setup { tree, linear, nonlinear, tv_type1, tv_type2, tv_continuous };

struct scenario_spec {
  std::string name;
  sim_family family = sim_family::exponential;
  sim_setup setup = sim_setup::tree;
  double trunc_upper = 0.0;    // 0 means no left truncation
  double censor_target = 0.0;  // fraction of records censored, 0 disables
  int n = 100;
  std::uint64_t seed = 1;

  void check() const {
    if (n < 1) throw validation_error("scenario n must be >= 1");
    if (trunc_upper < 0.0) throw validation_error("truncation bound must be >= 0");
    if (censor_target < 0.0 || censor_target >= 1.0)
      throw validation_error("censoring target must be in [0, 1)");
  }
};

struct tv_params {
  double beta = 0.0;
  double beta_z = 0.0;
  double scale = 1.0;
  double shape = 1.0;
};

inline tv_params tv_params_for(sim_family f) {
  switch (f) {
    case sim_family::exponential: return {0.8, 1.4, 0.1, 1.0};
    case sim_family::weibull_decreasing: return {0.9, 1.6, 0.3, 0.8};
    case sim_family::gompertz: return {1.2, 2.0, 0.2, 0.1};
    default: throw validation_error("no time-varying parameters for this family");
  }
}

// Per-leaf survival law for the tree-structured generator.
struct leaf_law {
  sim_family family = sim_family::exponential;
  double p1 = 1.0;  // rate / shape / mu / bathtub a
  double p2 = 0.0;  // scale / sigma
};

inline std::array<leaf_law, 4> tree_leaf_laws(sim_family f) {
  using sf = sim_family;
  switch (f) {
    case sf::exponential:
      return {{{sf::exponential, 0.1}, {sf::exponential, 0.23},
               {sf::exponential, 0.4}, {sf::exponential, 0.9}}};
    case sf::weibull_decreasing:
      return {{{sf::weibull_decreasing, 0.9, 7.0}, {sf::weibull_decreasing, 0.9, 3.0},
               {sf::weibull_decreasing, 0.9, 2.5}, {sf::weibull_decreasing, 0.9, 1.0}}};
    case sf::weibull_increasing:
      return {{{sf::weibull_increasing, 3.0, 2.0}, {sf::weibull_increasing, 3.0, 4.3},
               {sf::weibull_increasing, 3.0, 6.2}, {sf::weibull_increasing, 3.0, 10.0}}};
    case sf::lognormal:
      return {{{sf::lognormal, 2.0, 0.3}, {sf::lognormal, 1.7, 0.2},
               {sf::lognormal, 1.3, 0.3}, {sf::lognormal, 0.5, 0.5}}};
    case sf::bathtub:
      return {{{sf::bathtub, 0.01}, {sf::bathtub, 0.05},
               {sf::bathtub, 0.1}, {sf::bathtub, 0.7}}};
    default:
      throw validation_error("family not available for the tree setup");
  }
}

inline double bathtub_survival(double a, double t) {
  // S(t) = exp(-a t^2 / 2) / (1 + c t)^(b/c) with b = 1, c = 5.
  return std::exp(-0.5 * a * t * t - 0.2 * std::log1p(5.0 * t));
}

inline double invert_survival(const leaf_law& law, double u) {
  switch (law.family) {
    case sim_family::exponential:
      return -std::log(u) / law.p1;
    case sim_family::weibull_increasing:
    case sim_family::weibull_decreasing:
      return law.p2 * std::pow(-std::log(u), 1.0 / law.p1);
    case sim_family::lognormal: {
      const boost::math::normal_distribution<> norm;
      return std::exp(law.p1 + law.p2 * boost::math::quantile(norm, 1.0 - u));
    }
    case sim_family::bathtub: {
      const double a = law.p1;
      double hi = 1.0;
      int expand = 0;
      while (bathtub_survival(a, hi) > u) {
        hi *= 2.0;
        if (++expand > 200)
          throw numeric_error("bathtub inversion failed to bracket, a=" +
                              std::to_string(a));
      }
      double lo = 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (bathtub_survival(a, mid) > u ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    case sim_family::gompertz:
      return std::log1p(-law.p2 * std::log(u) / law.p1) / law.p2;
    default:
      throw validation_error("unknown family");
  }
}

inline double sample_survival(const leaf_law& law, rng& r) {
  return invert_survival(law, r.uniform());
}

inline covariate_schema six_numeric_schema() {
  covariate_schema schema;
  for (int j = 1; j <= 6; ++j)
    schema.columns.push_back({"x" + std::to_string(j), cov_kind::numeric, {}});
  return schema;
}

inline int tree_truth_cell(const std::vector<double>& x) {
  if (x[0] <= 2.0) return x[1] == 1.0 ? 0 : 1;
  return x[2] <= 1.0 ? 2 : 3;
}

struct probe_grid {
  std::vector<std::vector<double>> points;
  std::vector<int> cells;
};

// Discrete axes enumerate their levels; continuous axes take the ten bin
// midpoints of their range, so a cut misplaced by more than a twentieth of
// the range lands probes on the wrong side and the match fails.
inline std::vector<double> probe_midpoints(double lo, double hi) {
  std::vector<double> v(10);
  for (int k = 0; k < 10; ++k) v[static_cast<std::size_t>(k)] = lo + (hi - lo) * (2 * k + 1) / 20.0;
  return v;
}

inline probe_grid tree_truth_probes() {
  probe_grid g;
  const std::vector<double> mids = probe_midpoints(0.0, 2.0);
  for (double x1 = 1.0; x1 <= 5.0; ++x1)
    for (double x2 = 1.0; x2 <= 2.0; ++x2)
      for (double x3 : mids)
        for (double x4 = 1.0; x4 <= 5.0; ++x4)
          for (double x5 = 1.0; x5 <= 2.0; ++x5)
            for (double x6 : mids) {
              g.points.push_back({x1, x2, x3, x4, x5, x6});
              g.cells.push_back(tree_truth_cell(g.points.back()));
            }
  return g;
}

struct sim_tree_data {
  dataset data;
  std::vector<int> cell;
};

namespace detail {

struct tree_subject {
  std::vector<double> x;
  int cell = 0;
  double left = 0.0, right = 0.0;
  int event = 1;
};

inline tree_subject draw_tree_subject(const scenario_spec& spec,
                                      const std::array<leaf_law, 4>& laws,
                                      double lambda_d, rng& r) {
  for (int tries = 0; tries < 1000000; ++tries) {
    tree_subject s;
    s.x = {static_cast<double>(r.uniform_int(1, 5)),
           static_cast<double>(r.uniform_int(1, 2)),
           r.uniform(0.0, 2.0),
           static_cast<double>(r.uniform_int(1, 5)),
           static_cast<double>(r.uniform_int(1, 2)),
           r.uniform(0.0, 2.0)};
    s.cell = tree_truth_cell(s.x);
    const double t = invert_survival(laws[static_cast<std::size_t>(s.cell)], r.uniform());
    const double l = spec.trunc_upper > 0.0 ? r.uniform(0.0, spec.trunc_upper) : 0.0;
    if (t <= l) continue;
    s.left = l;
    if (lambda_d > 0.0) {
      const double c = l + r.exponential(lambda_d);
      if (c < t) {
        s.right = c;
        s.event = 0;
        return s;
      }
    }
    s.right = t;
    s.event = 1;
    return s;
  }
  throw numeric_error("rejection sampling failed to accept a subject");
}

}  // namespace detail

inline sim_tree_data gen_tree_ltrc(const scenario_spec& spec, double lambda_d, rng r) {
  spec.check();
  const auto laws = tree_leaf_laws(spec.family);
  sim_tree_data out;
  out.data.schema = six_numeric_schema();
  for (int i = 0; i < spec.n; ++i) {
    auto s = detail::draw_tree_subject(spec, laws, lambda_d, r);
    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    rec.left = s.left;
    rec.right = s.right;
    rec.event = s.event;
    rec.x = std::move(s.x);
    out.data.records.push_back(std::move(rec));
    out.cell.push_back(s.cell);
  }
  return out;
}

// Proportional-hazards setups (ii) linear and (iii) nonlinear.
inline double ph_location(sim_setup setup, double x1, double x2) {
  if (setup == sim_setup::linear) return -x1 - x2;
  const double s = x1 + x2;
  return -(std::cos(s * std::numbers::pi) + std::sqrt(s));
}

inline double ph_survival_time(sim_family f, double theta, double u) {
  switch (f) {
    case sim_family::exponential:
      return -std::log(u) * std::exp(-theta);
    case sim_family::weibull_increasing:
      return 10.0 * std::exp(theta) * std::sqrt(-std::log(u));
    case sim_family::weibull_decreasing: {
      const double l = -std::log(u);
      return 5.0 * std::exp(theta) * l * l;
    }
    default:
      throw validation_error("family not available for the PH setups");
  }
}

struct sim_ph_data {
  dataset train;
  dataset test;  // same covariate process, never truncated or censored
};

inline sim_ph_data gen_ph_data(const scenario_spec& spec, double lambda_d, rng r) {
  spec.check();
  if (spec.setup != sim_setup::linear && spec.setup != sim_setup::nonlinear)
    throw validation_error("gen_ph_data requires the linear or nonlinear setup");
  sim_ph_data out;
  out.train.schema = six_numeric_schema();
  out.test.schema = out.train.schema;

  auto draw_x = [&r]() {
    return std::vector<double>{r.uniform(),
                               r.bernoulli(0.5) ? 1.0 : 0.0,
                               r.bernoulli(0.5) ? 1.0 : 0.0,
                               r.uniform(),
                               r.uniform(),
                               r.bernoulli(0.5) ? 1.0 : 0.0};
  };

  for (int i = 0; i < spec.n; ++i) {
    for (int tries = 0;; ++tries) {
      if (tries >= 1000000)
        throw numeric_error("rejection sampling failed to accept a subject");
      std::vector<double> x = draw_x();
      const double theta = ph_location(spec.setup, x[0], x[1]);
      const double t = ph_survival_time(spec.family, theta, r.uniform());
      const double l = spec.trunc_upper > 0.0 ? r.uniform(0.0, spec.trunc_upper) : 0.0;
      if (t <= l) continue;
      ltrc_record rec;
      rec.id = std::to_string(i + 1);
      rec.left = l;
      rec.right = t;
      rec.event = 1;
      if (lambda_d > 0.0) {
        const double c = l + r.exponential(lambda_d);
        if (c < t) {
          rec.right = c;
          rec.event = 0;
        }
      }
      rec.x = std::move(x);
      out.train.records.push_back(std::move(rec));
      break;
    }
  }
  for (int i = 0; i < spec.n; ++i) {
    std::vector<double> x = draw_x();
    const double theta = ph_location(spec.setup, x[0], x[1]);
    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    rec.left = 0.0;
    rec.right = ph_survival_time(spec.family, theta, r.uniform());
    rec.event = 1;
    rec.x = std::move(x);
    out.test.records.push_back(std::move(rec));
  }
  return out;
}

// Time-varying machinery ------------------------------------------------------

struct step_path {
  double initial = 0.0;
  std::vector<double> times;   // strictly increasing switch times
  std::vector<double> values;  // value on [times[j], times[j+1])
};

struct tv_baseline {
  sim_family family = sim_family::exponential;
  double lambda = 1.0;
  double shape = 1.0;  // Weibull nu or Gompertz alpha

  double cumulative(double t) const {
    switch (family) {
      case sim_family::exponential: return lambda * t;
      case sim_family::weibull_decreasing: return lambda * std::pow(t, shape);
      case sim_family::gompertz: return lambda / shape * std::expm1(shape * t);
      default: throw validation_error("family not available for the TV setups");
    }
  }
  double inverse(double h) const {
    switch (family) {
      case sim_family::exponential: return h / lambda;
      case sim_family::weibull_decreasing: return std::pow(h / lambda, 1.0 / shape);
      case sim_family::gompertz: return std::log1p(shape * h / lambda) / shape;
      default: throw validation_error("family not available for the TV setups");
    }
  }
};

inline tv_baseline tv_baseline_for(sim_family f, const tv_params& p) {
  return {f, p.scale, p.shape};
}

// Inverts H(T) = -log u where H accumulates h0(t)e^(bx + beta_z z(t)) over the
// z-constant segments.
inline double piecewise_ph_invert(const tv_baseline& h0, double bx, double beta_z,
                                  const step_path& z, double u) {
  double remaining = -std::log(u);
  double seg_start = 0.0;
  double seg_value = z.initial;
  for (std::size_t j = 0; j <= z.times.size(); ++j) {
    const double eta = std::exp(bx + beta_z * seg_value);
    const double h_start = h0.cumulative(seg_start);
    if (j == z.times.size())
      return h0.inverse(h_start + remaining / eta);
    const double budget = eta * (h0.cumulative(z.times[j]) - h_start);
    if (remaining <= budget) return h0.inverse(h_start + remaining / eta);
    remaining -= budget;
    seg_start = z.times[j];
    seg_value = z.values[j];
  }
  throw numeric_error("piecewise inversion fell through");
}

inline covariate_schema tv_schema() {
  covariate_schema schema;
  schema.columns.push_back({"x1", cov_kind::numeric, {}});
  schema.columns.push_back({"x2", cov_kind::numeric, {}});
  schema.columns.push_back({"x3", cov_kind::numeric, {}});
  schema.columns.push_back({"x4", cov_kind::numeric, {}});
  schema.columns.push_back({"x5", cov_kind::ordinal, {"1", "2", "3", "4", "5"}});
  return schema;
}

inline probe_grid tv_truth_probes(bool continuous_x2) {
  probe_grid g;
  const std::vector<double> x2_vals =
      continuous_x2 ? probe_midpoints(0.0, 10.0) : std::vector<double>{0.0, 1.0};
  for (double x1 : {0.0, 1.0})
    for (double x2 : x2_vals)
      for (double x3 : {0.0, 1.0})
        for (double x4 : probe_midpoints(0.0, 1.0))
          for (double x5 = 0.0; x5 <= 4.0; ++x5) {
            g.points.push_back({x1, x2, x3, x4, x5});
            const int i2 = continuous_x2 ? (x2 > 5.0 ? 1 : 0) : (x2 == 1.0 ? 1 : 0);
            g.cells.push_back(static_cast<int>(x1) * 2 + i2);
          }
  return g;
}

inline dataset gen_tv_data(const scenario_spec& spec, const tv_params& params,
                           double lambda_d, rng r) {
  spec.check();
  if (spec.setup != sim_setup::tv_type1 && spec.setup != sim_setup::tv_type2 &&
      spec.setup != sim_setup::tv_continuous)
    throw validation_error("gen_tv_data requires a time-varying setup");
  const bool continuous = spec.setup == sim_setup::tv_continuous;
  const tv_baseline h0 = tv_baseline_for(spec.family, params);

  dataset out;
  out.schema = tv_schema();
  for (int i = 0; i < spec.n; ++i) {
    const double x1 = r.bernoulli(0.5) ? 1.0 : 0.0;
    const double u = r.uniform();

    std::vector<double> switches;
    if (spec.setup == sim_setup::tv_type2) {
      switches = {r.uniform(0.6, 6.0), r.uniform(0.6, 6.0), r.uniform(0.6, 6.0)};
      std::sort(switches.begin(), switches.end());
    } else {
      switches = {r.uniform(0.6, 6.0)};
    }

    // x2 per z-constant segment, and the 0/1 path that drives the hazard.
    std::vector<double> x2_segments;
    step_path z;
    z.times = switches;
    if (continuous) {
      x2_segments.push_back(r.uniform(0.0, 10.0));
      for (std::size_t j = 0; j < switches.size(); ++j)
        x2_segments.push_back(r.uniform(0.0, 10.0));
      z.initial = x2_segments[0] > 5.0 ? 1.0 : 0.0;
      for (std::size_t j = 1; j < x2_segments.size(); ++j)
        z.values.push_back(x2_segments[j] > 5.0 ? 1.0 : 0.0);
    } else {
      x2_segments.push_back(0.0);
      double cur = 0.0;
      for (std::size_t j = 0; j < switches.size(); ++j) {
        cur = 1.0 - cur;
        x2_segments.push_back(cur);
        z.values.push_back(cur);
      }
      z.initial = 0.0;
    }

    const double t = piecewise_ph_invert(h0, params.beta * x1, params.beta_z, z, u);
    double y = t;
    int event = 1;
    if (lambda_d > 0.0) {
      const double c = r.exponential(lambda_d);
      if (c < t) {
        y = c;
        event = 0;
      }
    }

    std::vector<double> cuts;
    for (double s : switches)
      if (s < y && (cuts.empty() || s > cuts.back())) cuts.push_back(s);

    ltrc_record base;
    base.id = std::to_string(i + 1);
    base.left = 0.0;
    base.right = y;
    base.event = event;
    base.x.assign(5, 0.0);
    auto pieces = make_pseudo_subjects(base, cuts);
    for (auto& piece : pieces) {
      std::size_t seg = 0;
      while (seg < switches.size() && switches[seg] <= piece.left) ++seg;
      piece.x[0] = x1;
      piece.x[1] = x2_segments[seg];
      piece.x[2] = r.bernoulli(0.5) ? 1.0 : 0.0;
      piece.x[3] = r.uniform();
      piece.x[4] = static_cast<double>(r.uniform_int(0, 4));
      out.records.push_back(std::move(piece));
    }
  }
  return out;
}

inline dataset gen_tv_test_set(sim_family family, const tv_params& params, int n,
                               bool continuous, rng r) {
  const tv_baseline h0 = tv_baseline_for(family, params);
  dataset out;
  out.schema = tv_schema();
  for (int i = 0; i < n; ++i) {
    const double x1 = r.bernoulli(0.5) ? 1.0 : 0.0;
    const double x2 = continuous ? r.uniform(0.0, 10.0) : (r.bernoulli(0.5) ? 1.0 : 0.0);
    const bool z_on = continuous ? x2 > 5.0 : x2 == 1.0;
    const double theta = params.beta * x1 + (z_on ? params.beta_z : 0.0);

    ltrc_record rec;
    rec.id = std::to_string(i + 1);
    rec.x = {x1, x2, r.bernoulli(0.5) ? 1.0 : 0.0, r.uniform(),
             static_cast<double>(r.uniform_int(0, 4))};
    if (z_on) {
      // Nodes with the time-varying effect active are left truncated at 0.6.
      double t = 0.0;
      do {
        t = h0.inverse(-std::log(r.uniform()) / std::exp(theta));
      } while (t <= 0.6);
      rec.left = 0.6;
      rec.right = t;
      rec.event = 1;
    } else {
      // The remaining nodes are right censored at 6.
      const double t = h0.inverse(-std::log(r.uniform()) / std::exp(theta));
      rec.left = 0.0;
      rec.right = std::min(t, 6.0);
      rec.event = t <= 6.0 ? 1 : 0;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

// Censoring-rate calibration --------------------------------------------------

namespace detail {

inline double censored_fraction(const scenario_spec& spec, double lambda_d,
                                std::uint64_t pilot_seed, int pilots) {
  scenario_spec pilot = spec;
  pilot.n = pilots;
  int censored = 0;
  switch (spec.setup) {
    case sim_setup::tree: {
      const auto d = gen_tree_ltrc(pilot, lambda_d, rng(pilot_seed));
      for (const auto& rec : d.data.records) censored += 1 - rec.event;
      break;
    }
    case sim_setup::linear:
    case sim_setup::nonlinear: {
      const auto d = gen_ph_data(pilot, lambda_d, rng(pilot_seed));
      for (const auto& rec : d.train.records) censored += 1 - rec.event;
      break;
    }
    default: {
      // Time-varying: censoring status lives on the final pseudo-subject.
      const auto d =
          gen_tv_data(pilot, tv_params_for(spec.family), lambda_d, rng(pilot_seed));
      int subjects = 0;
      std::string last_id;
      for (const auto& rec : d.records) {
        if (rec.id != last_id) {
          ++subjects;
          last_id = rec.id;
        }
      }
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        const bool final_piece =
            i + 1 == d.records.size() || d.records[i + 1].id != d.records[i].id;
        if (final_piece) censored += 1 - d.records[i].event;
      }
      return static_cast<double>(censored) / subjects;
    }
  }
  return static_cast<double>(censored) / pilots;
}

}  // namespace detail

inline double calibrate_censoring(const scenario_spec& spec, double target,
                                  int pilots = 10000) {
  if (target <= 0.0) return 0.0;
  if (target >= 1.0) throw validation_error("censoring target must be below 1");
  const std::uint64_t pilot_seed = 0x9E1107u;
  auto frac = [&](double lambda_d) {
    return detail::censored_fraction(spec, lambda_d, pilot_seed, pilots);
  };
  double hi = 1.0;
  int expand = 0;
  while (frac(hi) < target) {
    hi *= 2.0;
    if (++expand > 60)
      throw numeric_error("censoring calibration failed to bracket the target");
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = frac(mid);
    if (std::fabs(f - target) <= 0.01) return mid;
    (f < target ? lo : hi) = mid;
  }
  throw numeric_error("censoring calibration did not converge");
}

inline double calibrate_censoring(const scenario_spec& spec) {
  return calibrate_censoring(spec, spec.censor_target);
}

// Experiment drivers ----------------------------------------------------------

struct trial_row {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

namespace detail {

// Runs fn(trial) for trial = 0..trials-1, possibly on worker threads; results
// are merged by trial index, so the output is independent of thread count.
template <typename Result, typename Fn>
inline std::vector<Result> map_trials(int trials, int threads, Fn&& fn) {
  std::vector<Result> out(static_cast<std::size_t>(std::max(trials, 0)));
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) out[static_cast<std::size_t>(t)] = fn(t);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
      try {
        out[static_cast<std::size_t>(t)] = fn(t);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min(threads, std::max(trials, 1));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline bool is_tv_setup(sim_setup s) {
  return s == sim_setup::tv_type1 || s == sim_setup::tv_type2 ||
         s == sim_setup::tv_continuous;
}

inline void push_recovery_rows(std::vector<trial_row>& rows,
                               const scenario_spec& spec, const std::string& method,
                               std::uint64_t trial, const tree_model& model,
                               const probe_grid& probes,
                               const std::vector<int>& truth_cols) {
  const bool rec = structure_recovered(model, probes.points, probes.cells);
  rows.push_back({spec.name, method, trial, "recovered", rec ? 1.0 : 0.0});
  const auto used = split_columns(model);
  for (int col : truth_cols)
    rows.push_back({spec.name, method, trial,
                    "uses_" + model.schema.columns[static_cast<std::size_t>(col)].name,
                    used.count(col) ? 1.0 : 0.0});
}

}  // namespace detail

inline std::vector<trial_row> run_recovery_experiment(
    const scenario_spec& spec, int trials, const ctree_controls& it_controls = {},
    const cart_controls& cart_ctrl = {}, int threads = 1) {
  spec.check();
  const double lambda_d = calibrate_censoring(spec);
  const bool tv = detail::is_tv_setup(spec.setup);
  const probe_grid probes =
      tv ? tv_truth_probes(spec.setup == sim_setup::tv_continuous)
         : tree_truth_probes();
  const std::vector<int> truth_cols = tv ? std::vector<int>{0, 1}
                                         : std::vector<int>{0, 1, 2};

  auto one_trial = [&](int t) {
    const auto trial_id = static_cast<std::uint64_t>(t);
    const rng data_rng = rng::substream(spec.seed, trial_id);
    dataset d;
    if (tv)
      d = gen_tv_data(spec, tv_params_for(spec.family), lambda_d, data_rng);
    else
      d = gen_tree_ltrc(spec, lambda_d, data_rng).data;

    std::vector<trial_row> rows;
    const tree_model it = fit_ltrcit(d, it_controls);
    detail::push_recovery_rows(rows, spec, "ltrcit", trial_id, it, probes, truth_cols);
    const tree_model cart =
        fit_ltrcart(d, cart_ctrl, rng::substream(spec.seed, 1000000 + trial_id).next());
    detail::push_recovery_rows(rows, spec, "ltrcart", trial_id, cart, probes,
                               truth_cols);
    return rows;
  };
  const auto per_trial =
      detail::map_trials<std::vector<trial_row>>(trials, threads, one_trial);
  std::vector<trial_row> rows;
  for (const auto& chunk : per_trial) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

// First candidate variable at the root, ignoring the stopping rules, for the
// split-selection bias experiment.
inline int ltrcit_first_variable(const dataset& d) {
  const auto members = detail::all_members(d);
  const auto u = logrank_scores_ltrc(d, members);
  int best = 0;
  double best_p = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d.schema.size(); ++j) {
    const auto res = association_test(d, members, static_cast<int>(j), u);
    if (res.p < best_p) {
      best_p = res.p;
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline int ltrcart_first_variable(const dataset& d) {
  const cumulative_hazard lambda0 = nelson_aalen_ltrc(d);
  const std::vector<double> e = exposures(d, lambda0);
  cart_controls loose;
  loose.min_bucket = 1;
  loose.min_split = 2;
  detail::cart_ctx ctx{&d, &e, loose, 0.0};
  tree_node root;
  detail::fill_node_stats(root, ctx, detail::all_members(d));
  int best = 0;
  double best_reduction = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d.schema.size(); ++j) {
    detail::cart_split s;
    if (d.schema.columns[j].kind == cov_kind::nominal)
      detail::scan_subset_cart(ctx, detail::all_members(d), static_cast<int>(j),
                               root.deviance, s);
    else
      detail::scan_threshold_cart(ctx, detail::all_members(d), static_cast<int>(j),
                                  root.deviance, s);
    if (s.reduction > best_reduction) {
      best_reduction = s.reduction;
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline std::vector<trial_row> run_null_selection_experiment(
    int trials, std::uint64_t seed, int n = 100, int threads = 1,
    const std::string& name = "null") {
  // Response independent of all six covariates: exponential survival with the
  // usual truncation and exact 20% censoring via the memoryless property.
  const double rate = 0.23;
  const double lambda_d = rate / 4.0;

  scenario_spec spec;
  spec.name = name;
  spec.family = sim_family::exponential;
  spec.setup = sim_setup::tree;
  spec.trunc_upper = 2.0;
  spec.n = n;
  spec.seed = seed;

  auto one_trial = [&](int t) {
    rng r = rng::substream(seed, static_cast<std::uint64_t>(t));
    const leaf_law law{sim_family::exponential, rate};
    dataset d;
    d.schema = six_numeric_schema();
    for (int i = 0; i < n; ++i) {
      auto s = detail::draw_tree_subject(spec, {law, law, law, law}, lambda_d, r);
      ltrc_record rec;
      rec.id = std::to_string(i + 1);
      rec.left = s.left;
      rec.right = s.right;
      rec.event = s.event;
      rec.x = std::move(s.x);
      d.records.push_back(std::move(rec));
    }
    return std::pair<int, int>{ltrcit_first_variable(d), ltrcart_first_variable(d)};
  };
  const auto picks = detail::map_trials<std::pair<int, int>>(trials, threads, one_trial);

  std::array<int, 6> it_counts{};
  std::array<int, 6> cart_counts{};
  for (const auto& [it_col, cart_col] : picks) {
    ++it_counts[static_cast<std::size_t>(it_col)];
    ++cart_counts[static_cast<std::size_t>(cart_col)];
  }

  std::vector<trial_row> rows;
  auto emit = [&](const std::string& method, const std::array<int, 6>& counts) {
    for (std::size_t j = 0; j < 6; ++j)
      rows.push_back({name, method, 0, "first_split_x" + std::to_string(j + 1),
                      static_cast<double>(counts[j])});
  };
  emit("ltrcit", it_counts);
  emit("ltrcart", cart_counts);

  if (trials > 0) {
    const double expected = trials / 6.0;
    double q = 0.0;
    for (int c : it_counts) {
      const double dlt = c - expected;
      q += dlt * dlt / expected;
    }
    rows.push_back({name, "ltrcit", 0, "uniformity_p",
                    boost::math::gamma_q(2.5, q / 2.0)});
  }
  return rows;
}

inline std::vector<trial_row> run_ibs_experiment(const scenario_spec& spec, int trials,
                                                 const ctree_controls& it_controls = {},
                                                 const cart_controls& cart_ctrl = {},
                                                 int threads = 1) {
  spec.check();
  const double lambda_d = calibrate_censoring(spec);
  const bool tv = detail::is_tv_setup(spec.setup);

  auto one_trial = [&](int t) {
    const auto trial_id = static_cast<std::uint64_t>(t);
    const rng data_rng = rng::substream(spec.seed, trial_id);
    dataset train, test;
    if (tv) {
      train = gen_tv_data(spec, tv_params_for(spec.family), lambda_d, data_rng);
      test = gen_tv_test_set(spec.family, tv_params_for(spec.family), spec.n,
                             spec.setup == sim_setup::tv_continuous,
                             rng::substream(spec.seed, 2000000 + trial_id));
    } else if (spec.setup == sim_setup::tree) {
      auto g = gen_tree_ltrc(spec, lambda_d, data_rng);
      train = std::move(g.data);
      scenario_spec test_spec = spec;
      test_spec.trunc_upper = 0.0;
      auto gt = gen_tree_ltrc(test_spec, 0.0,
                              rng::substream(spec.seed, 2000000 + trial_id));
      test = std::move(gt.data);
    } else {
      auto g = gen_ph_data(spec, lambda_d, data_rng);
      train = std::move(g.train);
      test = std::move(g.test);
    }

    const tree_model it = fit_ltrcit(train, it_controls);
    const tree_model cart =
        fit_ltrcart(train, cart_ctrl, rng::substream(spec.seed, 1000000 + trial_id).next());
    const survival_curve root_curve = km_ltrc(train);

    std::vector<survival_curve> it_curves, cart_curves, root_curves;
    for (const auto& rec : test.records) {
      it_curves.push_back(predict_ltrcit(it, rec.x));
      cart_curves.push_back(predict_ltrcart(cart, rec.x).second);
      root_curves.push_back(root_curve);
    }
    std::vector<trial_row> rows;
    rows.push_back({spec.name, "ltrcit", trial_id, "ibs",
                    ibs(test, it_curves).value});
    rows.push_back({spec.name, "ltrcart", trial_id, "ibs",
                    ibs(test, cart_curves).value});
    rows.push_back({spec.name, "root", trial_id, "ibs",
                    ibs(test, root_curves).value});
    return rows;
  };
  const auto per_trial =
      detail::map_trials<std::vector<trial_row>>(trials, threads, one_trial);
  std::vector<trial_row> rows;
  for (const auto& chunk : per_trial) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

}  // namespace ltrc
