#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ltrc/common.hpp"

namespace ltrc {

// Right-continuous step function: value is `initial` before the first knot
// and `values[i]` on [knots[i], knots[i+1]). Knots strictly increasing.
struct step_function {
  double initial = 0.0;
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return initial;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  // Left limit: value just before t.
  double before(double t) const {
    auto it = std::lower_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return initial;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  void check() const {
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i - 1] < knots[i]))
        throw validation_error("step function knots not strictly increasing");
    if (knots.size() != values.size())
      throw validation_error("step function knot/value length mismatch");
  }
};

using survival_curve = step_function;    // initial 1, non-increasing
using cumulative_hazard = step_function; // initial 0, non-decreasing

}  // namespace ltrc
