#pragma once

// Reference implementations of five replicability procedures that ignore
// chain dependence: per-study BH intersection, MaxP, the adaptive radjust
// procedure, JUMP and STAREG.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlis/em.hpp"
#include "rlis/isotonic.hpp"
#include "rlis/model.hpp"
#include "rlis/replicability.hpp"

namespace rlis {

enum class BaselineMethod { kAdHocBH, kMaxP, kRadjustAdaptive, kJump, kStareg };

inline const char* baseline_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::kAdHocBH: return "adhoc_bh";
    case BaselineMethod::kMaxP: return "maxp";
    case BaselineMethod::kRadjustAdaptive: return "radjust";
    case BaselineMethod::kJump: return "jump";
    case BaselineMethod::kStareg: return "stareg";
  }
  return "?";
}

struct BaselineOutcome {
  BaselineMethod method;
  std::vector<std::size_t> rejected;           // original indices, ascending
  std::vector<double> statistic;               // per-feature test statistic
  std::map<std::string, double> auxiliary;     // method-specific diagnostics
};

namespace detail {

inline void check_level(double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("baselines: q must lie in (0,1)");
}

inline void check_data(const PairedPValues& d) {
  const auto bad = validate_pvalues(d);
  if (!bad.empty()) throw std::invalid_argument("baselines: " + bad.front());
}

}  // namespace detail

// Benjamini-Hochberg step-up on one p-value vector; returns the rejected
// indices in ascending order.
inline std::vector<std::size_t> bh(const std::vector<double>& p, double q) {
  detail::check_level(q);
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::size_t khat = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (p[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m))
      khat = k;
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<long>(khat));
  std::sort(out.begin(), out.end());
  return out;
}

// Intersection of the two per-study BH rejection sets.
inline BaselineOutcome adhoc_bh(const PairedPValues& data, double q) {
  detail::check_data(data);
  const auto r1 = bh(data.y1, q);
  const auto r2 = bh(data.y2, q);
  BaselineOutcome out;
  out.method = BaselineMethod::kAdHocBH;
  std::set_intersection(r1.begin(), r1.end(), r2.begin(), r2.end(),
                        std::back_inserter(out.rejected));
  out.statistic.resize(data.size());
  for (std::size_t j = 0; j < data.size(); ++j)
    out.statistic[j] = std::max(data.y1[j], data.y2[j]);
  out.auxiliary["rejections_study1"] = static_cast<double>(r1.size());
  out.auxiliary["rejections_study2"] = static_cast<double>(r2.size());
  return out;
}

// BH applied to the elementwise maximum of the paired p-values.
inline BaselineOutcome maxp(const PairedPValues& data, double q) {
  detail::check_data(data);
  BaselineOutcome out;
  out.method = BaselineMethod::kMaxP;
  out.statistic.resize(data.size());
  for (std::size_t j = 0; j < data.size(); ++j)
    out.statistic[j] = std::max(data.y1[j], data.y2[j]);
  out.rejected = bh(out.statistic, q);
  return out;
}

// Adaptive radjust: pre-select p <= q in each study, estimate the null
// fractions among the cross-study selections, then find the largest r
// whose pairwise thresholds admit exactly r features.
inline BaselineOutcome radjust_adaptive(const PairedPValues& data, double q) {
  detail::check_data(data);
  detail::check_level(q);
  const std::size_t m = data.size();

  BaselineOutcome out;
  out.method = BaselineMethod::kRadjustAdaptive;
  out.statistic.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    out.statistic[j] = std::max(data.y1[j], data.y2[j]);

  std::vector<std::size_t> s1, s2, both;
  for (std::size_t j = 0; j < m; ++j) {
    const bool in1 = data.y1[j] <= q;
    const bool in2 = data.y2[j] <= q;
    if (in1) s1.push_back(j);
    if (in2) s2.push_back(j);
    if (in1 && in2) both.push_back(j);
  }
  out.auxiliary["selected_study1"] = static_cast<double>(s1.size());
  out.auxiliary["selected_study2"] = static_cast<double>(s2.size());
  if (s1.empty() || s2.empty() || both.empty()) {
    out.auxiliary["empty_selection"] = 1.0;
    return out;
  }

  double over1 = 0.0, over2 = 0.0;
  for (std::size_t j : s2)
    if (data.y1[j] > q) over1 += 1.0;
  for (std::size_t j : s1)
    if (data.y2[j] > q) over2 += 1.0;
  const double pi0_1 = (1.0 + over1) / (static_cast<double>(s2.size()) * (1.0 - q));
  const double pi0_2 = (1.0 + over2) / (static_cast<double>(s1.size()) * (1.0 - q));
  out.auxiliary["pi0_study1"] = pi0_1;
  out.auxiliary["pi0_study2"] = pi0_2;

  const double denom1 = 2.0 * static_cast<double>(s2.size()) * pi0_1;
  const double denom2 = 2.0 * static_cast<double>(s1.size()) * pi0_2;
  const auto count_at = [&](std::size_t r) {
    const double t1 = static_cast<double>(r) * q / denom1;
    const double t2 = static_cast<double>(r) * q / denom2;
    std::size_t c = 0;
    for (std::size_t j : both)
      if (data.y1[j] <= t1 && data.y2[j] <= t2) ++c;
    return c;
  };

  // count_at is non-decreasing, so iterating r <- count_at(r) from the top
  // lands on the largest fixed point.
  std::size_t r = both.size();
  while (true) {
    const std::size_t c = count_at(r);
    if (c == r) break;
    r = c;
  }
  out.auxiliary["fixed_point"] = static_cast<double>(r);
  if (r > 0) {
    const double t1 = static_cast<double>(r) * q / denom1;
    const double t2 = static_cast<double>(r) * q / denom2;
    for (std::size_t j : both)
      if (data.y1[j] <= t1 && data.y2[j] <= t2) out.rejected.push_back(j);
  }
  return out;
}

struct JumpOptions {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double lambda3 = 0.5;
};

// JUMP: Storey-type estimates of the composite-null proportions feed a
// conservative plug-in FDR estimate over the max-p statistic.
inline BaselineOutcome jump(const PairedPValues& data, double q,
                            const JumpOptions& opt = {}) {
  detail::check_data(data);
  detail::check_level(q);
  const std::size_t m = data.size();
  const double dm = static_cast<double>(m);

  BaselineOutcome out;
  out.method = BaselineMethod::kJump;
  out.statistic.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    out.statistic[j] = std::max(data.y1[j], data.y2[j]);

  double n1 = 0.0, n2 = 0.0, n00 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (data.y1[j] >= opt.lambda1) n1 += 1.0;
    if (data.y2[j] >= opt.lambda2) n2 += 1.0;
    if (data.y1[j] >= opt.lambda3 && data.y2[j] >= opt.lambda3) n00 += 1.0;
  }
  const double pi0_1 = n1 / (dm * (1.0 - opt.lambda1));
  const double pi0_2 = n2 / (dm * (1.0 - opt.lambda2));
  const double xi00_raw = n00 / (dm * (1.0 - opt.lambda3) * (1.0 - opt.lambda3));
  const double xi00 = std::clamp(xi00_raw, 0.0, 1.0);
  const double xi01 = std::clamp(pi0_1 - xi00, 0.0, 1.0);
  const double xi10 = std::clamp(pi0_2 - xi00, 0.0, 1.0);
  out.auxiliary["pi0_study1"] = pi0_1;
  out.auxiliary["pi0_study2"] = pi0_2;
  out.auxiliary["xi00_raw"] = xi00_raw;
  out.auxiliary["xi00"] = xi00;
  out.auxiliary["xi01"] = xi01;
  out.auxiliary["xi10"] = xi10;
  out.auxiliary["xi00_clamped"] = (xi00 != xi00_raw) ? 1.0 : 0.0;
  out.auxiliary["xi01_clamped"] = (xi01 != pi0_1 - xi00) ? 1.0 : 0.0;
  out.auxiliary["xi10_clamped"] = (xi10 != pi0_2 - xi00) ? 1.0 : 0.0;

  std::vector<double> sorted = out.statistic;
  std::sort(sorted.begin(), sorted.end());
  std::size_t khat = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    const double t = sorted[k - 1];
    const auto le = static_cast<double>(
        std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    const double fdr_hat = dm * (xi00 * t * t + (xi01 + xi10) * t) / std::max(le, 1.0);
    if (fdr_hat <= q) khat = k;
  }
  if (khat > 0) {
    const double cut = sorted[khat - 1];
    for (std::size_t j = 0; j < m; ++j)
      if (out.statistic[j] <= cut) out.rejected.push_back(j);
  }
  return out;
}

// Stopping rule of the published reference implementation.  The marginal
// four-group mixture is only weakly identified (a uniform slice of f1 or
// f2 can migrate between the null and signal weights), so running its EM
// to full convergence drifts along that ridge; the reference tolerances
// stop near the moment initialization instead.
inline EmConfig stareg_default_config() {
  EmConfig cfg;
  cfg.max_iterations = 200;
  cfg.rel_tol = 1e-3;
  return cfg;
}

// STAREG: the four-group model without the chain.  EM over the mixture
// weights and the two monotone densities with productized marginal
// responsibilities; the local fdr is the posterior mass off state (1,1).
inline BaselineOutcome stareg(const PairedPValues& data, double q,
                              const EmConfig& cfg = stareg_default_config()) {
  detail::check_data(data);
  detail::check_level(q);
  const std::size_t m = data.size();
  if (m == 0) throw std::invalid_argument("stareg: empty input");

  BaselineOutcome out;
  out.method = BaselineMethod::kStareg;

  Vec4 xi = detail::moment_state_probs(data);  // (00, 01, 10, 11)
  const detail::SortedView s1(data.y1), s2(data.y2);
  std::vector<double> f1v(m), f2v(m);
  {
    const StepDensity f0 = detail::initial_signal_density();
    const auto v1 = detail::density_at_sorted(f0, s1.values);
    const auto v2 = detail::density_at_sorted(f0, s2.values);
    for (std::size_t j = 0; j < m; ++j) {
      f1v[s1.order[j]] = v1[j];
      f2v[s2.order[j]] = v2[j];
    }
  }

  std::vector<double> g00(m), g01(m), g10(m), g11(m), ws(m);
  double prev_ll = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  int ascent_violations = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    double ll = 0.0;
    Vec4 mean{};
    for (std::size_t j = 0; j < m; ++j) {
      const double d00 = xi[0];
      const double d01 = xi[1] * f2v[j];
      const double d10 = xi[2] * f1v[j];
      const double d11 = xi[3] * f1v[j] * f2v[j];
      const double den = d00 + d01 + d10 + d11;
      if (!(den > 0.0) || !std::isfinite(den))
        throw numeric_error("stareg: degenerate mixture density at index " +
                            std::to_string(j));
      g00[j] = d00 / den;
      g01[j] = d01 / den;
      g10[j] = d10 / den;
      g11[j] = d11 / den;
      mean[0] += g00[j];
      mean[1] += g01[j];
      mean[2] += g10[j];
      mean[3] += g11[j];
      ll += std::log(den);
    }
    if (!std::isfinite(ll))
      throw numeric_error("stareg: non-finite log-likelihood at iteration " +
                          std::to_string(iter));
    if (iter > 0 && ll < prev_ll - 1e-8) ++ascent_violations;
    const double rel = std::abs(ll - prev_ll) / (1.0 + std::abs(ll));
    if (iter > 0 && rel < cfg.rel_tol) {
      converged = true;
      ++iter;
      break;
    }
    prev_ll = ll;

    for (double& v : mean) v /= static_cast<double>(m);
    xi = detail::floored_probs(mean, cfg.param_floor);

    for (std::size_t j = 0; j < m; ++j) ws[j] = g10[s1.order[j]] + g11[s1.order[j]];
    const StepDensity f1 = grenander_update(s1.values, ws);
    for (std::size_t j = 0; j < m; ++j) ws[j] = g01[s2.order[j]] + g11[s2.order[j]];
    const StepDensity f2 = grenander_update(s2.values, ws);
    const auto v1 = detail::density_at_sorted(f1, s1.values);
    const auto v2 = detail::density_at_sorted(f2, s2.values);
    for (std::size_t j = 0; j < m; ++j) {
      f1v[s1.order[j]] = v1[j];
      f2v[s2.order[j]] = v2[j];
    }
  }

  // Local fdr under the final parameters.
  out.statistic.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d11 = xi[3] * f1v[j] * f2v[j];
    const double den = xi[0] + xi[1] * f2v[j] + xi[2] * f1v[j] + d11;
    out.statistic[j] = 1.0 - d11 / den;
    g11[j] = d11 / den;
  }
  const TestOutcome su = step_up(out.statistic, q);
  out.rejected = su.rejected;
  out.auxiliary["xi00"] = xi[0];
  out.auxiliary["xi01"] = xi[1];
  out.auxiliary["xi10"] = xi[2];
  out.auxiliary["xi11"] = xi[3];
  out.auxiliary["iterations"] = static_cast<double>(iter);
  out.auxiliary["converged"] = converged ? 1.0 : 0.0;
  out.auxiliary["ascent_violations"] = static_cast<double>(ascent_violations);
  if (su.threshold) out.auxiliary["threshold"] = *su.threshold;
  out.auxiliary["estimated_fdp"] = su.estimated_fdp;
  return out;
}

}  // namespace rlis
