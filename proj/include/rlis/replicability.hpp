#pragma once

// The rLIS step-up multiple-testing procedure: oracle and data-driven
// variants, FDP estimation and rejection reporting.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rlis/em.hpp"
#include "rlis/forward_backward.hpp"
#include "rlis/model.hpp"

namespace rlis {

struct TestOutcome {
  std::vector<double> rlis;
  std::optional<double> threshold;  // largest rejected rLIS value
  std::vector<std::size_t> rejected;  // original indices, ascending
  double estimated_fdp = 0.0;  // mean rLIS over the rejected set
  double nominal_q = 0.0;
};

// Rejects the largest prefix of the ascending statistics whose running
// mean stays at or below q.  Features tied at the cutoff value are kept
// or dropped as a group, which makes the prefix rule coincide with the
// sup-threshold rule.
inline TestOutcome step_up(const std::vector<double>& rlis, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("step_up: q must lie in (0,1)");
  for (double v : rlis)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("step_up: statistics must lie in [0,1]");

  const std::size_t m = rlis.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rlis[a] < rlis[b];
  });

  std::size_t best = 0;
  double best_mean = 0.0;
  double run = 0.0;
  for (std::size_t r = 1; r <= m; ++r) {
    run += rlis[order[r - 1]];
    const bool group_end = (r == m) || (rlis[order[r]] > rlis[order[r - 1]]);
    if (group_end && run <= q * static_cast<double>(r)) {
      best = r;
      best_mean = run / static_cast<double>(r);
    }
  }

  TestOutcome out;
  out.rlis = rlis;
  out.nominal_q = q;
  if (best > 0) {
    out.threshold = rlis[order[best - 1]];
    out.rejected.assign(order.begin(), order.begin() + static_cast<long>(best));
    std::sort(out.rejected.begin(), out.rejected.end());
    out.estimated_fdp = best_mean;
  }
  return out;
}

// Data-driven procedure: fit the model, plug the estimate into the rLIS
// statistics, then step up.
inline std::pair<EmFit, TestOutcome> test_replicability(
    const PairedPValues& data, double q, const EmConfig& cfg) {
  EmFit fitted = fit(data, cfg);
  TestOutcome outcome = step_up(compute_rlis(fitted.params, data), q);
  return {std::move(fitted), std::move(outcome)};
}

// Oracle procedure with known parameters.
inline TestOutcome oracle_test(const HmmParams& true_params,
                               const PairedPValues& data, double q) {
  const auto bad = validate_params(true_params);
  if (!bad.empty())
    throw std::invalid_argument("oracle_test: invalid parameters: " + bad.front());
  return step_up(compute_rlis(true_params, data), q);
}

}  // namespace rlis
