#pragma once

// Monte Carlo harness: chain-structured truth, z-value mixtures turned
// into one-sided p-values, and empirical FDR/power evaluation of the
// testing procedures across replications.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rlis/baselines.hpp"
#include "rlis/em.hpp"
#include "rlis/model.hpp"
#include "rlis/replicability.hpp"

namespace rlis {

namespace detail {

// Upper-tail probability of the standard normal.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Standard normal quantile: Acklam's rational approximation polished with
// one Halley step against erfc, giving near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    const double u = p - 0.5;
    const double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  // Halley refinement on Phi(x) - p = 0.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent engine for (seed, stream) pairs.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 1)));
}

}  // namespace detail

// The two transition matrices used by the generating process, stored as
// exact fractions so the paired stationary vectors (0.7,0.1,0.1,0.1) and
// (0.6,0.15,0.15,0.1) hold to machine precision.
inline TransitionMatrix scenario_matrix(int which) {
  if (which == 1) {
    const double d = 19.0 / 21.0, o = 2.0 / 63.0;
    const double s = 1.0 / 3.0, t = 2.0 / 9.0;
    return TransitionMatrix(Mat4{Vec4{d, o, o, o}, Vec4{t, s, t, t},
                                 Vec4{t, t, s, t}, Vec4{t, t, t, s}});
  }
  if (which == 2) {
    const double d = 8.0 / 9.0, o = 1.0 / 27.0;
    const double u = 4.0 / 27.0, v = 5.0 / 9.0;
    const double s = 1.0 / 3.0, t = 2.0 / 9.0;
    return TransitionMatrix(Mat4{Vec4{d, o, o, o}, Vec4{u, v, u, u},
                                 Vec4{u, u, v, u}, Vec4{t, t, t, s}});
  }
  throw std::invalid_argument("scenario_matrix: scenario must be 1 or 2");
}

struct SimConfig {
  std::size_t m = 10000;
  TransitionMatrix a = scenario_matrix(1);
  double mu1 = 2.0, mu2 = 2.0;
  double sigma1 = 1.0, sigma2 = 1.0;
  std::vector<double> q_grid{0.05};
  int replications = 100;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 -> hardware concurrency
  EmConfig em;
  EmConfig stareg_em = stareg_default_config();
  JumpOptions jump_opts;
  int oracle_bins = 1024;

  static SimConfig desk_preset() {
    SimConfig c;
    c.m = 2000;
    c.replications = 20;
    return c;
  }
  static SimConfig paper_preset() { return SimConfig{}; }
};

struct SimTruth {
  std::vector<std::uint8_t> states;

  bool theta1(std::size_t j) const { return (states[j] & 2) != 0; }
  bool theta2(std::size_t j) const { return (states[j] & 1) != 0; }
  bool is_null(std::size_t j) const { return states[j] != 3; }
};

inline SimTruth simulate_states(const SimConfig& cfg, std::mt19937_64& rng) {
  if (cfg.m < 1) throw std::invalid_argument("simulate_states: m must be >= 1");
  if (!is_irreducible(cfg.a))
    throw std::invalid_argument("simulate_states: transition matrix is reducible");
  const StationaryDist pi = stationary_from_transition(cfg.a);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto draw = [&](const double* probs) {
    const double u = unif(rng);
    double acc = 0.0;
    for (int s = 0; s < kNumStates - 1; ++s) {
      acc += probs[s];
      if (u < acc) return static_cast<std::uint8_t>(s);
    }
    return static_cast<std::uint8_t>(kNumStates - 1);
  };

  SimTruth t;
  t.states.resize(cfg.m);
  t.states[0] = draw(pi.pi.data());
  for (std::size_t j = 1; j < cfg.m; ++j)
    t.states[j] = draw(cfg.a.a[t.states[j - 1]].data());
  return t;
}

// z-values from the two-group mixture, mapped to one-sided p-values via
// the standard-normal survival function.
inline PairedPValues simulate_pvalues(const SimTruth& truth, const SimConfig& cfg,
                                      std::mt19937_64& rng) {
  if (truth.states.size() != cfg.m)
    throw std::invalid_argument("simulate_pvalues: truth length mismatch");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto clamp01 = [](double y) {
    return std::min(std::max(y, 1e-300), 1.0 - 1e-16);
  };
  PairedPValues d;
  d.y1.resize(cfg.m);
  d.y2.resize(cfg.m);
  for (std::size_t j = 0; j < cfg.m; ++j) {
    const double x1 =
        (truth.theta1(j) ? cfg.mu1 : 0.0) + cfg.sigma1 * gauss(rng);
    const double x2 =
        (truth.theta2(j) ? cfg.mu2 : 0.0) + cfg.sigma2 * gauss(rng);
    d.y1[j] = clamp01(detail::normal_sf(x1));
    d.y2[j] = clamp01(detail::normal_sf(x2));
  }
  return d;
}

// Step-density approximation of the generating parameters, for the oracle
// procedure.  Equal-mass bins of the exact signal p-value distribution
// give non-increasing heights when the z-mixture has unit variance; any
// residual non-monotonicity is projected away.
inline HmmParams true_params(const SimConfig& cfg) {
  const int k = cfg.oracle_bins;
  if (k < 2) throw std::invalid_argument("true_params: need at least 2 bins");

  const auto signal_density = [&](double mu, double sigma) {
    std::vector<double> breaks(static_cast<std::size_t>(k) + 1);
    breaks[0] = 0.0;
    breaks[static_cast<std::size_t>(k)] = 1.0;
    for (int i = 1; i < k; ++i) {
      // G^{-1}(u) for G(t) = P(sf(X) <= t) with X ~ N(mu, sigma^2).
      const double u = static_cast<double>(i) / k;
      const double z = -detail::normal_quantile(u);  // sf^{-1}(u)
      breaks[static_cast<std::size_t>(i)] = detail::normal_sf(sigma * z + mu);
    }
    std::vector<double> heights(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      heights[static_cast<std::size_t>(i)] =
          (1.0 / k) / (breaks[static_cast<std::size_t>(i) + 1] -
                       breaks[static_cast<std::size_t>(i)]);
    for (int i = 1; i < k; ++i)
      if (heights[static_cast<std::size_t>(i)] >
          heights[static_cast<std::size_t>(i) - 1]) {
        WeightedLevels lv;
        lv.targets = heights;
        lv.weights.resize(heights.size());
        for (std::size_t j = 0; j < heights.size(); ++j)
          lv.weights[j] = breaks[j + 1] - breaks[j];
        heights = pava_nonincreasing(lv);
        break;
      }
    return StepDensity::normalized(std::move(breaks), std::move(heights));
  };

  HmmParams p{stationary_from_transition(cfg.a), cfg.a,
              signal_density(cfg.mu1, cfg.sigma1),
              signal_density(cfg.mu2, cfg.sigma2)};
  return p;
}

struct EvalCell {
  std::string method;
  double q = 0.0;
  double fdr = 0.0, fdr_se = 0.0;
  double power = 0.0, power_se = 0.0;
  int n_reps = 0;
  int failures = 0;
};

struct EvalReport {
  double mu1 = 0.0, mu2 = 0.0;
  std::vector<EvalCell> cells;

  std::string to_csv() const {
    std::string out = "method,q,mu1,mu2,metric,value,stderr,n_reps\n";
    char buf[256];
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,fdr,%.10g,%.10g,%d\n",
                    c.method.c_str(), c.q, mu1, mu2, c.fdr, c.fdr_se, c.n_reps);
      out += buf;
      std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,power,%.10g,%.10g,%d\n",
                    c.method.c_str(), c.q, mu1, mu2, c.power, c.power_se, c.n_reps);
      out += buf;
    }
    return out;
  }
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> k{
      "rlis", "oracle", "adhoc_bh", "maxp", "radjust", "jump", "stareg"};
  return k;
}

// Runs every replication, applies the selected methods, and aggregates
// per-replication FDP and power.  Replications use independent RNG
// streams keyed by (seed, index) and results are reduced in index order,
// so the report does not depend on the worker count.
inline EvalReport evaluate(const SimConfig& cfg,
                           const std::vector<std::string>& methods) {
  if (methods.empty())
    throw std::invalid_argument("evaluate: select at least one method");
  for (const auto& name : methods)
    if (std::find(known_methods().begin(), known_methods().end(), name) ==
        known_methods().end())
      throw std::invalid_argument("evaluate: unknown method '" + name + "'");
  for (double q : cfg.q_grid)
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument("evaluate: q_grid entries must lie in (0,1)");
  if (cfg.replications < 1)
    throw std::invalid_argument("evaluate: need at least one replication");

  const bool want_oracle =
      std::find(methods.begin(), methods.end(), "oracle") != methods.end();
  HmmParams oracle_params;
  if (want_oracle) oracle_params = true_params(cfg);

  const std::size_t n_methods = methods.size();
  const std::size_t n_q = cfg.q_grid.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);

  struct RepResult {
    std::vector<double> fdp, power;  // n_methods * n_q, -1 marks failure
  };
  std::vector<RepResult> results(reps);

  const auto run_rep = [&](std::size_t rep) {
    RepResult& rr = results[rep];
    rr.fdp.assign(n_methods * n_q, -1.0);
    rr.power.assign(n_methods * n_q, -1.0);

    std::mt19937_64 rng = detail::stream_rng(cfg.seed, rep);
    const SimTruth truth = simulate_states(cfg, rng);
    const PairedPValues data = simulate_pvalues(truth, cfg, rng);

    std::size_t n_signal = 0;
    for (std::size_t j = 0; j < cfg.m; ++j)
      if (!truth.is_null(j)) ++n_signal;

    const auto score = [&](std::size_t mi, std::size_t qi,
                           const std::vector<std::size_t>& rejected) {
      std::size_t false_rej = 0, true_rej = 0;
      for (std::size_t j : rejected)
        (truth.is_null(j) ? false_rej : true_rej)++;
      rr.fdp[mi * n_q + qi] =
          static_cast<double>(false_rej) /
          std::max<std::size_t>(rejected.size(), 1);
      rr.power[mi * n_q + qi] =
          static_cast<double>(true_rej) / std::max<std::size_t>(n_signal, 1);
    };

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const std::string& name = methods[mi];
      try {
        if (name == "rlis") {
          const EmFit f = fit(data, cfg.em);
          const auto r = compute_rlis(f.params, data);
          for (std::size_t qi = 0; qi < n_q; ++qi)
            score(mi, qi, step_up(r, cfg.q_grid[qi]).rejected);
        } else if (name == "oracle") {
          const auto r = compute_rlis(oracle_params, data);
          for (std::size_t qi = 0; qi < n_q; ++qi)
            score(mi, qi, step_up(r, cfg.q_grid[qi]).rejected);
        } else if (name == "stareg") {
          for (std::size_t qi = 0; qi < n_q; ++qi)
            score(mi, qi, stareg(data, cfg.q_grid[qi], cfg.stareg_em).rejected);
        } else {
          for (std::size_t qi = 0; qi < n_q; ++qi) {
            const double q = cfg.q_grid[qi];
            if (name == "adhoc_bh") score(mi, qi, adhoc_bh(data, q).rejected);
            else if (name == "maxp") score(mi, qi, maxp(data, q).rejected);
            else if (name == "radjust")
              score(mi, qi, radjust_adaptive(data, q).rejected);
            else score(mi, qi, jump(data, q, cfg.jump_opts).rejected);
          }
        }
      } catch (const std::exception&) {
        // failure already marked by the -1 sentinel
      }
    }
  };

  unsigned n_threads = cfg.threads > 0
                           ? static_cast<unsigned>(cfg.threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(reps));
  if (n_threads <= 1) {
    for (std::size_t rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t rep = next.fetch_add(1); rep < reps;
             rep = next.fetch_add(1))
          run_rep(rep);
      });
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  report.mu1 = cfg.mu1;
  report.mu2 = cfg.mu2;
  for (std::size_t mi = 0; mi < n_methods; ++mi)
    for (std::size_t qi = 0; qi < n_q; ++qi) {
      EvalCell cell;
      cell.method = methods[mi];
      cell.q = cfg.q_grid[qi];
      double sf = 0.0, sp = 0.0;
      int n = 0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const double f = results[rep].fdp[mi * n_q + qi];
        if (f < 0.0) continue;
        sf += f;
        sp += results[rep].power[mi * n_q + qi];
        ++n;
      }
      cell.n_reps = n;
      cell.failures = static_cast<int>(reps) - n;
      if (n > 0) {
        cell.fdr = sf / n;
        cell.power = sp / n;
        double vf = 0.0, vp = 0.0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
          const double f = results[rep].fdp[mi * n_q + qi];
          if (f < 0.0) continue;
          vf += (f - cell.fdr) * (f - cell.fdr);
          vp += (results[rep].power[mi * n_q + qi] - cell.power) *
                (results[rep].power[mi * n_q + qi] - cell.power);
        }
        if (n > 1) {
          cell.fdr_se = std::sqrt(vf / (n - 1) / n);
          cell.power_se = std::sqrt(vp / (n - 1) / n);
        }
      }
      report.cells.push_back(std::move(cell));
    }
  return report;
}

}  // namespace rlis
