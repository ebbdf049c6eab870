#pragma once

// Nonparametric maximum-likelihood estimation of (pi, A, f1, f2) by EM:
// scaled forward-backward E-steps, closed-form pi/A updates and monotone
// density M-steps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlis/forward_backward.hpp"
#include "rlis/isotonic.hpp"
#include "rlis/model.hpp"

namespace rlis {

// Weak-signal fits approach the maximizer slowly and the FDR guarantee
// needs the fit close to it, so the defaults favor full convergence over
// iteration thrift.
struct EmConfig {
  int max_iterations = 2000;
  double rel_tol = 1e-8;       // relative log-likelihood change
  std::uint64_t seed = 0;      // reserved for randomized restarts
  bool store_trace = true;
  std::size_t min_features = 100;
  double param_floor = 1e-8;   // keeps pi and A numerically irreducible
};

struct EmFit {
  HmmParams params;
  std::vector<double> log_likelihood_trace;
  int iterations_used = 0;
  bool converged = false;
};

namespace detail {

// Evaluates a step density at ascending query points in one pass.
inline std::vector<double> density_at_sorted(const StepDensity& f,
                                             const std::vector<double>& sorted_y) {
  const auto& breaks = f.breakpoints();
  const auto& heights = f.heights();
  std::vector<double> out(sorted_y.size());
  std::size_t k = 0;
  for (std::size_t j = 0; j < sorted_y.size(); ++j) {
    while (sorted_y[j] > breaks[k + 1]) ++k;
    out[j] = heights[k];
  }
  return out;
}

inline Vec4 floored_probs(const Vec4& raw, double floor) {
  Vec4 out;
  double s = 0.0;
  for (int i = 0; i < kNumStates; ++i) {
    out[i] = std::max(raw[i], floor);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

// Moment-based starting point shared by the chain and product-model fits:
// the fraction of small p-values in each study crossed into four cells.
inline Vec4 moment_state_probs(const PairedPValues& data, double cut = 0.05,
                               double floor = 0.02) {
  const std::size_t m = data.size();
  double q1 = 0.0, q2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (data.y1[j] < cut) q1 += 1.0;
    if (data.y2[j] < cut) q2 += 1.0;
  }
  q1 /= static_cast<double>(m);
  q2 /= static_cast<double>(m);
  const Vec4 cells{(1 - q1) * (1 - q2), (1 - q1) * q2, q1 * (1 - q2), q1 * q2};
  return floored_probs(cells, floor);
}

inline StepDensity initial_signal_density() {
  return StepDensity::normalized({0.0, 0.2, 1.0}, {4.0, 4.0 / 9.0});
}

struct SortedView {
  std::vector<std::size_t> order;  // ascending p-value order
  std::vector<double> values;      // p-values in that order

  explicit SortedView(const std::vector<double>& y) {
    order.resize(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    values.resize(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) values[j] = y[order[j]];
  }
};

}  // namespace detail

// Deterministic moment-based initializer.  The transition matrix mixes the
// identity with the broadcast stationary rows, which keeps pi exactly
// stationary for it.
inline HmmParams initialize(const PairedPValues& data, const EmConfig& cfg) {
  const auto bad = validate_pvalues(data);
  if (!bad.empty()) throw std::invalid_argument("initialize: " + bad.front());
  if (data.size() < cfg.min_features)
    throw std::invalid_argument(
        "initialize: need at least " + std::to_string(cfg.min_features) +
        " features, got " + std::to_string(data.size()));

  const Vec4 pi = detail::moment_state_probs(data);
  Mat4 a;
  for (int k = 0; k < kNumStates; ++k)
    for (int l = 0; l < kNumStates; ++l)
      a[k][l] = 0.7 * (k == l ? 1.0 : 0.0) + 0.3 * pi[l];

  HmmParams p{StationaryDist(pi), TransitionMatrix::row_normalized(a),
              detail::initial_signal_density(), detail::initial_signal_density()};
  return p;
}

// Full EM fit.  The trace records the observed-data log-likelihood of the
// parameters entering each E-step; the final stationary vector is
// recomputed from the fitted transition matrix.
inline EmFit fit(const PairedPValues& data, const EmConfig& cfg) {
  HmmParams params = initialize(data, cfg);
  const std::size_t m = data.size();

  const detail::SortedView s1(data.y1), s2(data.y2);

  // Density values aligned with the original feature order.
  std::vector<double> f1v(m), f2v(m);
  {
    const auto v1 = detail::density_at_sorted(params.f1, s1.values);
    const auto v2 = detail::density_at_sorted(params.f2, s2.values);
    for (std::size_t j = 0; j < m; ++j) {
      f1v[s1.order[j]] = v1[j];
      f2v[s2.order[j]] = v2[j];
    }
  }

  EmFit result;
  std::vector<double> w1(m), w2(m);
  double prev_ll = -std::numeric_limits<double>::infinity();
  double last_ll = prev_ll;
  int iter = 0;
  bool converged = false;

  for (; iter < cfg.max_iterations; ++iter) {
    PosteriorTables post = detail::forward_backward_values(
        params.pi, params.a, f1v, f2v, XiStorage::kNone);
    if (!std::isfinite(post.log_likelihood))
      throw numeric_error("fit: non-finite log-likelihood at iteration " +
                          std::to_string(iter));
    last_ll = post.log_likelihood;
    if (cfg.store_trace) result.log_likelihood_trace.push_back(last_ll);

    const double rel =
        std::abs(last_ll - prev_ll) / (1.0 + std::abs(last_ll));
    if (iter > 0 && rel < cfg.rel_tol) {
      converged = true;
      ++iter;
      break;
    }
    prev_ll = last_ll;

    // M-step: closed-form pi and A.
    params.pi = StationaryDist(detail::floored_probs(post.gamma[0], cfg.param_floor));
    Mat4 a;
    for (int k = 0; k < kNumStates; ++k) {
      Vec4 row{};
      for (int l = 0; l < kNumStates; ++l) row[l] = post.xi_sums[k][l];
      a[k] = detail::floored_probs(row, cfg.param_floor);
    }
    if (m == 1) a = params.a.a;  // no transitions observed
    params.a = TransitionMatrix(a);

    // M-step: monotone density updates from the posterior signal masses.
    for (std::size_t j = 0; j < m; ++j) {
      w1[j] = post.gamma[j][2] + post.gamma[j][3];
      w2[j] = post.gamma[j][1] + post.gamma[j][3];
    }
    std::vector<double> ws(m);
    for (std::size_t j = 0; j < m; ++j) ws[j] = w1[s1.order[j]];
    params.f1 = grenander_update(s1.values, ws);
    for (std::size_t j = 0; j < m; ++j) ws[j] = w2[s2.order[j]];
    params.f2 = grenander_update(s2.values, ws);

    const auto v1 = detail::density_at_sorted(params.f1, s1.values);
    const auto v2 = detail::density_at_sorted(params.f2, s2.values);
    for (std::size_t j = 0; j < m; ++j) {
      f1v[s1.order[j]] = v1[j];
      f2v[s2.order[j]] = v2[j];
    }
  }

  params.pi = stationary_from_transition(params.a);
  if (!cfg.store_trace) result.log_likelihood_trace.assign(1, last_ll);
  result.params = std::move(params);
  result.iterations_used = iter;
  result.converged = converged;
  return result;
}

// Expected complete-data log-likelihood D(phi | posteriors); -inf when a
// positive posterior weight meets a zero density.
inline double d_objective(const HmmParams& params, const PosteriorTables& post,
                          const PairedPValues& data) {
  const std::size_t m = post.gamma.size();
  if (data.size() != m)
    throw std::invalid_argument("d_objective: posterior/data length mismatch");

  double d = 0.0;
  for (int s = 0; s < kNumStates; ++s) {
    const double g = post.gamma[0][s];
    if (g > 0.0) d += g * std::log(params.pi[s]);
  }
  for (int k = 0; k < kNumStates; ++k)
    for (int l = 0; l < kNumStates; ++l) {
      const double x = post.xi_sums[k][l];
      if (x > 0.0) d += x * std::log(params.a(k, l));
    }
  for (std::size_t j = 0; j < m; ++j)
    for (int s = 0; s < kNumStates; ++s) {
      const double g = post.gamma[j][s];
      if (g > 0.0)
        d += g * std::log(emission_density(params, StateCode(s), data.y1[j],
                                           data.y2[j]));
    }
  return d;
}

}  // namespace rlis
