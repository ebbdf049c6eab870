#pragma once

// Weighted pool-adjacent-violators solver and the closed-form monotone
// density update used by the EM M-step.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rlis/model.hpp"

namespace rlis {

struct WeightedLevels {
  std::vector<double> targets;
  std::vector<double> weights;
};

// Weighted least-squares projection onto the non-increasing cone.
// Stack-of-blocks scan, O(n): a new point opens a block; adjacent blocks
// pool while the left mean is below the right mean.
inline std::vector<double> pava_nonincreasing(const WeightedLevels& in) {
  const std::size_t n = in.targets.size();
  if (in.weights.size() != n)
    throw std::invalid_argument("pava_nonincreasing: targets/weights length mismatch");
  for (double w : in.weights)
    if (!(w > 0.0))
      throw std::invalid_argument("pava_nonincreasing: weights must be positive");
  if (n == 0) return {};

  std::vector<double> mean(n), weight(n);
  std::vector<std::size_t> count(n);
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean[top] = in.targets[i];
    weight[top] = in.weights[i];
    count[top] = 1;
    ++top;
    while (top > 1 && mean[top - 2] < mean[top - 1]) {
      const double w = weight[top - 2] + weight[top - 1];
      mean[top - 2] =
          (weight[top - 2] * mean[top - 2] + weight[top - 1] * mean[top - 1]) / w;
      weight[top - 2] = w;
      count[top - 2] += count[top - 1];
      --top;
    }
  }

  std::vector<double> out(n);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < top; ++b)
    for (std::size_t c = 0; c < count[b]; ++c) out[pos++] = mean[b];
  return out;
}

// Monotone nonparametric density update from posterior masses.
//
// Given ordered p-values y_(1) <= ... <= y_(n) with weights G_(j), the
// unconstrained stationary point of the weighted log-likelihood under the
// unit-integral constraint is z_j = (G_(j)/sum G) / w_j with w_j the
// interval width.  The non-increasing constraint is imposed by projecting
// u_j = -1/z_j with PAVA and mapping back by z = -1/u.
//
// Exact ties are merged into one breakpoint with summed weight.  Points
// whose relative mass vanishes at machine scale are dropped: an interior
// drop hands its interval to the next kept point and a trailing drop
// leaves a zero-height tail, which are the exact zero-weight limits of
// the maximizer.  When the largest sample point is kept its interval
// extends to 1, so the result integrates to one over (0,1].
inline StepDensity grenander_update(const std::vector<double>& sorted_p,
                                    const std::vector<double>& gamma_mass) {
  const std::size_t n = sorted_p.size();
  if (gamma_mass.size() != n)
    throw std::invalid_argument("grenander_update: length mismatch");
  if (n == 0)
    throw std::invalid_argument("grenander_update: no sample points");

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double y = sorted_p[j];
    const double g = gamma_mass[j];
    if (!(y > 0.0) || !(y <= 1.0))
      throw std::invalid_argument("grenander_update: p-values must lie in (0,1]");
    if (j > 0 && y < sorted_p[j - 1])
      throw std::invalid_argument("grenander_update: p-values must be sorted");
    if (!(g >= 0.0))
      throw std::invalid_argument("grenander_update: negative weight");
    total += g;
  }
  if (!(total > 0.0))
    throw numeric_error("grenander_update: all posterior mass is zero");

  // The floor only guards the -total*w/mass targets against overflow; a
  // kept weight this small has no visible effect on the solution.
  const double drop_below = total * 1e-250;
  std::vector<double> pts, mass;
  pts.reserve(n);
  mass.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double g = gamma_mass[j];
    if (g <= drop_below) continue;
    if (!pts.empty() && pts.back() == sorted_p[j])
      mass.back() += g;
    else {
      pts.push_back(sorted_p[j]);
      mass.push_back(g);
    }
  }
  if (pts.empty())
    throw numeric_error("grenander_update: all posterior mass is zero");

  // Dropped points past the last kept one leave a zero-height tail; the
  // last kept interval then ends at its own sample point.
  const bool zero_tail = pts.back() < sorted_p[n - 1];

  const std::size_t k = pts.size();
  WeightedLevels lv;
  lv.targets.resize(k);
  lv.weights = mass;
  for (std::size_t j = 0; j < k; ++j) {
    const double lo = (j == 0) ? 0.0 : pts[j - 1];
    const double hi = (j + 1 == k && !zero_tail) ? 1.0 : pts[j];
    lv.targets[j] = -total * (hi - lo) / mass[j];
  }
  const std::vector<double> u = pava_nonincreasing(lv);

  std::vector<double> breaks, heights;
  breaks.reserve(k + 2);
  heights.reserve(k + 1);
  breaks.push_back(0.0);
  for (std::size_t j = 0; j + 1 < k; ++j) breaks.push_back(pts[j]);
  for (std::size_t j = 0; j < k; ++j) heights.push_back(-1.0 / u[j]);
  if (zero_tail && pts.back() < 1.0) {
    breaks.push_back(pts.back());
    heights.push_back(0.0);
  }
  breaks.push_back(1.0);

  // The block averages integrate to one in exact arithmetic; rescale to
  // absorb accumulated rounding on long inputs.
  return StepDensity::normalized(std::move(breaks), std::move(heights));
}

}  // namespace rlis
