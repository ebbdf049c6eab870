// Acceptance suite: runs the project's exit criteria end to end and prints
// one pass/fail line per criterion.  Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rlis/baselines.hpp"
#include "rlis/em.hpp"
#include "rlis/forward_backward.hpp"
#include "rlis/isotonic.hpp"
#include "rlis/model.hpp"
#include "rlis/replicability.hpp"
#include "rlis/simulate.hpp"
#include "oracles.hpp"

using namespace rlis;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %s — %s [%.1fs]\n", pass ? "PASS" : "FAIL",
              id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

char buf[512];

// ---- criterion 1: forward-backward vs exhaustive enumeration -----------

void criterion_posterior_oracle() {
  Timer timer;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> mm(1, 8);
  double worst = 0.0;
  bool pass = true;
  for (int rep = 0; rep < 500 && pass; ++rep) {
    const auto p = oracles::random_params(rng);
    const std::size_t m = static_cast<std::size_t>(mm(rng));
    const auto d = oracles::random_data(rng, m);
    const auto got = run_forward_backward(p, d, XiStorage::kStore);
    const auto want = oracles::enumerate_paths(p, d);
    double dev = std::abs(got.log_likelihood - want.log_likelihood);
    for (std::size_t j = 0; j < m; ++j)
      for (int s = 0; s < 4; ++s)
        dev = std::max(dev, std::abs(got.gamma[j][s] - want.gamma[j][s]));
    for (std::size_t j = 0; j + 1 < m; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l)
          dev = std::max(dev, std::abs(got.xi[j][k][l] - want.xi[j][k][l]));
    worst = std::max(worst, dev);
    if (dev > 1e-10) pass = false;
  }
  const double secs = timer.elapsed();
  pass = pass && secs < 10.0;
  std::snprintf(buf, sizeof buf,
                "500 instances, max |scaled - enumerated| = %.3g (tol 1e-10)",
                worst);
  report(1, "posterior oracle equivalence", pass, buf, secs);
}

// ---- criterion 2: PAVA vs exhaustive partition minimizer ---------------

void criterion_pava_oracle() {
  Timer timer;
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> nn(1, 8);
  std::uniform_real_distribution<double> uy(-3.0, 3.0);
  std::uniform_real_distribution<double> uw(0.05, 4.0);
  std::uniform_int_distribution<int> tie(0, 2);
  double worst = 0.0;
  bool pass = true;
  for (int rep = 0; rep < 1000 && pass; ++rep) {
    const int n = nn(rng);
    std::vector<double> y(n), w(n);
    for (int i = 0; i < n; ++i) {
      y[i] = uy(rng);
      w[i] = uw(rng);
    }
    if (n > 2 && tie(rng) == 0) y[2] = y[1];
    const auto got = pava_nonincreasing({y, w});
    const auto want = oracles::partition_minimizer(y, w);
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(got[i] - want[i]));
      if (std::abs(got[i] - want[i]) > 1e-12) pass = false;
    }
  }
  const double secs = timer.elapsed();
  pass = pass && secs < 5.0;
  std::snprintf(buf, sizeof buf,
                "1000 instances, max |pava - partition minimizer| = %.3g "
                "(tol 1e-12)",
                worst);
  report(2, "pava oracle equivalence", pass, buf, secs);
}

// ---- criterion 3: Grenander validity and local optimality ---------------

void criterion_grenander() {
  Timer timer;
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> nn(1, 80);
  std::uniform_real_distribution<double> uy(1e-5, 1.0);
  std::exponential_distribution<double> ug(1.0);
  bool pass = true;
  double worst_integral = 0.0;
  for (int rep = 0; rep < 10000 && pass; ++rep) {
    const int n = nn(rng);
    std::vector<double> y(n), g(n);
    for (int i = 0; i < n; ++i) {
      y[i] = uy(rng);
      g[i] = ug(rng) + 1e-6;
    }
    std::sort(y.begin(), y.end());
    const auto f = grenander_update(y, g);
    worst_integral = std::max(worst_integral, std::abs(f.integral() - 1.0));
    if (!f.is_non_increasing() || std::abs(f.integral() - 1.0) > 1e-8)
      pass = false;
  }

  // Local optimality: no feasible single-height perturbation improves the
  // weighted log-likelihood.
  int improved = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + rep % 40;
    std::vector<double> y(n), g(n);
    for (int i = 0; i < n; ++i) {
      y[i] = uy(rng);
      g[i] = ug(rng) + 1e-3;
    }
    std::sort(y.begin(), y.end());
    const auto f = grenander_update(y, g);
    const auto obj = [&](const StepDensity& dd) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += g[i] * std::log(dd(y[i]));
      return acc;
    };
    const double base = obj(f);
    const auto& h0 = f.heights();
    for (std::size_t k = 0; k < h0.size(); ++k)
      for (double delta : {1e-4, -1e-4}) {
        std::vector<double> h = h0;
        h[k] += delta;
        if (h[k] < 0.0) continue;
        bool monotone = true;
        for (std::size_t i = 1; i < h.size(); ++i)
          if (h[i] > h[i - 1]) monotone = false;
        if (!monotone) continue;
        const auto alt = StepDensity::normalized(f.breakpoints(), h);
        if (obj(alt) > base + 1e-12) ++improved;
      }
  }
  pass = pass && improved == 0;
  std::snprintf(buf, sizeof buf,
                "10000 outputs monotone, max |integral - 1| = %.3g (tol 1e-8); "
                "%d improving perturbations (want 0)",
                worst_integral, improved);
  report(3, "grenander validity and optimality", pass, buf, timer.elapsed());
}

// ---- criterion 4: EM ascent over a seed sweep ---------------------------

void criterion_em_ascent() {
  Timer timer;
  const SimConfig desk = SimConfig::desk_preset();
  int violations = 0;
  double worst_drop = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SimConfig cfg = desk;
    cfg.mu1 = cfg.mu2 = 1.5 + 0.5 * static_cast<double>(seed % 3);
    std::mt19937_64 rng = rlis::detail::stream_rng(900 + seed, 0);
    const auto truth = simulate_states(cfg, rng);
    const auto data = simulate_pvalues(truth, cfg, rng);
    const EmFit f = fit(data, cfg.em);
    for (std::size_t t = 1; t < f.log_likelihood_trace.size(); ++t) {
      const double drop =
          f.log_likelihood_trace[t - 1] - f.log_likelihood_trace[t];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-8) ++violations;
    }
  }
  std::snprintf(buf, sizeof buf,
                "100 seeds at m=2000, %d ascent violations (worst drop %.3g, "
                "slack 1e-8)",
                violations, worst_drop);
  report(4, "EM ascent", violations == 0, buf, timer.elapsed());
}

// ---- criteria 5-7: Monte Carlo FDR/power comparison ----------------------

struct MuResult {
  double mu = 0.0;
  double fdr_rlis = 0.0, se_rlis = 0.0;
  double power_rlis = 0.0, power_rlis_se = 0.0;
  double power_maxp = 0.0, power_maxp_se = 0.0;
  double power_jump = 0.0, power_jump_se = 0.0;
  double fdr_adhoc = 0.0, fdr_adhoc_se = 0.0;
};

std::vector<MuResult> run_figure_grid() {
  std::vector<MuResult> rows;
  for (double mu : {1.5, 2.0, 2.5}) {
    SimConfig cfg;  // scenario-1 matrix, m = 10000
    cfg.mu1 = cfg.mu2 = mu;
    cfg.replications = 50;
    cfg.q_grid = {0.05};
    cfg.seed = 20240815;
    cfg.threads = 0;
    const auto rep = evaluate(cfg, {"rlis", "maxp", "jump", "adhoc_bh"});
    MuResult r;
    r.mu = mu;
    for (const auto& c : rep.cells) {
      if (c.method == "rlis") {
        r.fdr_rlis = c.fdr;
        r.se_rlis = c.fdr_se;
        r.power_rlis = c.power;
        r.power_rlis_se = c.power_se;
      } else if (c.method == "maxp") {
        r.power_maxp = c.power;
        r.power_maxp_se = c.power_se;
      } else if (c.method == "jump") {
        r.power_jump = c.power;
        r.power_jump_se = c.power_se;
      } else if (c.method == "adhoc_bh") {
        r.fdr_adhoc = c.fdr;
        r.fdr_adhoc_se = c.fdr_se;
      }
    }
    rows.push_back(r);
  }
  return rows;
}

void criteria_figure(const std::vector<MuResult>& rows, double secs) {
  bool fdr_ok = true;
  std::string fdr_detail = "50 reps, q=0.05:";
  for (const auto& r : rows) {
    if (r.fdr_rlis > 0.07) fdr_ok = false;
    std::snprintf(buf, sizeof buf, " mu=%.1f FDR=%.4f(se %.4f)", r.mu,
                  r.fdr_rlis, r.se_rlis);
    fdr_detail += buf;
  }
  fdr_detail += " (tol 0.07)";
  report(5, "FDR control of the rlis procedure", fdr_ok, fdr_detail, secs);

  // Dominance at every mu; the weak-signal advantage shows up in the
  // power ratio over the best competitor (absolute margins are ceiling
  // limited at large mu, so the ratio carries the ordering).
  bool power_ok = true;
  std::vector<double> ratios;
  std::string pow_detail;
  for (const auto& r : rows) {
    if (r.power_rlis < r.power_maxp || r.power_rlis < r.power_jump)
      power_ok = false;
    const double best = std::max(r.power_maxp, r.power_jump);
    const double ratio = best > 0.0
                             ? r.power_rlis / best
                             : (r.power_rlis > 0.0
                                    ? std::numeric_limits<double>::infinity()
                                    : 1.0);
    ratios.push_back(ratio);
    std::snprintf(buf, sizeof buf,
                  " mu=%.1f rlis=%.4f(se %.4f) maxp=%.4f(se %.4f) "
                  "jump=%.4f(se %.4f) ratio=%.3g;",
                  r.mu, r.power_rlis, r.power_rlis_se, r.power_maxp,
                  r.power_maxp_se, r.power_jump, r.power_jump_se, ratio);
    pow_detail += buf;
  }
  const bool weak_margin_largest =
      ratios[0] >= ratios[1] && ratios[0] >= ratios[2];
  power_ok = power_ok && weak_margin_largest;
  report(6, "power dominance over MaxP and JUMP", power_ok, pow_detail, 0.0);

  // This check is pinned to the mu=1.5 cell of criterion 5's grid.  There
  // the per-study BH sets are tiny and their intersection is almost
  // surely truly replicable, so the empirical FDR sits at zero and the
  // check cannot pass; the failure phenomenon needs more one-study
  // signal mass.  A pi1=pi2=0.25 cell is printed alongside to show the
  // procedure does break down where theory says it must.
  const bool adhoc_ok = rows[0].fdr_adhoc > 0.05;
  double context_fdr = 0.0;
  {
    SimConfig ctx;
    ctx.m = 10000;
    ctx.mu1 = ctx.mu2 = 3.0;
    const Vec4 pi{0.4, 0.25, 0.25, 0.1};
    Mat4 a;
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) a[k][l] = 0.6 * (k == l) + 0.4 * pi[l];
    ctx.a = TransitionMatrix(a);
    int n = 30;
    for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(n); ++s) {
      std::mt19937_64 rng = rlis::detail::stream_rng(s, 21);
      const auto truth = simulate_states(ctx, rng);
      const auto data = simulate_pvalues(truth, ctx, rng);
      const auto out = adhoc_bh(data, 0.05);
      std::size_t v = 0;
      for (auto j : out.rejected)
        if (truth.is_null(j)) ++v;
      context_fdr += out.rejected.empty()
                         ? 0.0
                         : static_cast<double>(v) / out.rejected.size();
    }
    context_fdr /= n;
  }
  std::snprintf(buf, sizeof buf,
                "mu=1.5: adhoc BH empirical FDR = %.4f (se %.4f), want > 0.05 "
                "[context: at pi=(0.4,0.25,0.25,0.1), mu=3 the FDR is %.4f]",
                rows[0].fdr_adhoc, rows[0].fdr_adhoc_se, context_fdr);
  report(7, "ad hoc BH fails to control FDR", adhoc_ok, buf, 0.0);
}

// ---- criterion 8: parameter recovery -------------------------------------

// The 0.05 tolerance on the transition matrix is tighter than the MLE's
// own sampling noise at this design: restarting the EM from the true
// parameters reproduces the same fits (same likelihoods), and the
// supervised estimator with observed states already spends ~0.03 of the
// budget, so the latent-state price lands the median near 0.06.  The
// criterion runs as specified; the supervised bound is printed for
// context.
void criterion_recovery() {
  Timer timer;
  SimConfig cfg;
  cfg.mu1 = cfg.mu2 = 2.0;
  const auto a_true = cfg.a;
  const Vec4 pi_true{0.7, 0.1, 0.1, 0.1};
  std::vector<double> dev_a, dev_pi, dev_sup;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng = rlis::detail::stream_rng(7000 + seed, 0);
    const auto truth = simulate_states(cfg, rng);
    const auto data = simulate_pvalues(truth, cfg, rng);

    double counts[4][4] = {};
    for (std::size_t j = 1; j < cfg.m; ++j)
      counts[truth.states[j - 1]][truth.states[j]] += 1.0;
    double ds = 0.0;
    for (int k = 0; k < 4; ++k) {
      double row = 0.0;
      for (int l = 0; l < 4; ++l) row += counts[k][l];
      for (int l = 0; l < 4; ++l)
        ds = std::max(ds, std::abs(counts[k][l] / row - a_true(k, l)));
    }
    dev_sup.push_back(ds);

    const EmFit f = fit(data, cfg.em);
    double da = 0.0, dp = 0.0;
    for (int k = 0; k < 4; ++k) {
      dp = std::max(dp, std::abs(f.params.pi[k] - pi_true[k]));
      for (int l = 0; l < 4; ++l)
        da = std::max(da, std::abs(f.params.a(k, l) - a_true(k, l)));
    }
    dev_a.push_back(da);
    dev_pi.push_back(dp);
  }
  std::sort(dev_a.begin(), dev_a.end());
  std::sort(dev_pi.begin(), dev_pi.end());
  std::sort(dev_sup.begin(), dev_sup.end());
  const double med_a = 0.5 * (dev_a[9] + dev_a[10]);
  const double med_pi = 0.5 * (dev_pi[9] + dev_pi[10]);
  const double med_sup = 0.5 * (dev_sup[9] + dev_sup[10]);
  const bool pass = med_a <= 0.05 && med_pi <= 0.03;
  std::snprintf(buf, sizeof buf,
                "20-seed medians at m=10000, mu=2: |A_hat - A|_max = %.4f "
                "(tol 0.05), |pi_hat - pi|_max = %.4f (tol 0.03) "
                "[known-state estimator reaches %.4f]",
                med_a, med_pi, med_sup);
  report(8, "parameter recovery", pass, buf, timer.elapsed());
}

// ---- criterion 9: stationary eigenvector of the published matrix ---------

void criterion_eigenvector() {
  const auto a = TransitionMatrix::row_normalized(
      Mat4{Vec4{0.9840, 0.0066, 0.0040, 0.0055},
           Vec4{0.0657, 0.9271, 0.0004, 0.0069},
           Vec4{0.0546, 0.0010, 0.9379, 0.0066},
           Vec4{0.0501, 0.0045, 0.0050, 0.9403}});
  Timer timer;
  const auto pi = stationary_from_transition(a);
  const double secs = timer.elapsed();
  const Vec4 want{0.779, 0.077, 0.057, 0.087};
  double dev = 0.0;
  for (int k = 0; k < 4; ++k) dev = std::max(dev, std::abs(pi[k] - want[k]));
  const bool pass = dev <= 5e-3 && secs < 1e-3;
  std::snprintf(buf, sizeof buf,
                "pi = (%.4f, %.4f, %.4f, %.4f), max dev %.2g (tol 5e-3), "
                "%.3g ms",
                pi[0], pi[1], pi[2], pi[3], dev, secs * 1e3);
  report(9, "stationary eigenvector of the published matrix", pass, buf, secs);
}

// ---- criterion 10: determinism across thread counts ----------------------

void criterion_determinism() {
  Timer timer;
  SimConfig cfg;
  cfg.m = 2000;
  cfg.replications = 6;
  cfg.q_grid = {0.05, 0.1};
  cfg.seed = 777;
  const std::vector<std::string> methods{"rlis", "maxp"};
  cfg.threads = 1;
  const std::string csv1 = evaluate(cfg, methods).to_csv();
  cfg.threads = 4;
  const std::string csv4 = evaluate(cfg, methods).to_csv();
  cfg.threads = 3;
  const std::string csv3 = evaluate(cfg, methods).to_csv();
  const bool csv_ok = csv1 == csv4 && csv1 == csv3;

  // Rerunning the data-driven test reproduces the TSV byte for byte.
  std::mt19937_64 rng = rlis::detail::stream_rng(31, 0);
  SimConfig small;
  small.m = 600;
  const auto truth = simulate_states(small, rng);
  const auto data = simulate_pvalues(truth, small, rng);
  EmConfig em;
  const auto r1 = test_replicability(data, 0.05, em);
  const auto r2 = test_replicability(data, 0.05, em);
  const bool tsv_ok = r1.second.rlis == r2.second.rlis &&
                      r1.second.rejected == r2.second.rejected;
  const bool pass = csv_ok && tsv_ok;
  std::snprintf(buf, sizeof buf,
                "CSV identical across 1/3/4 threads: %s; repeated fits "
                "identical: %s",
                csv_ok ? "yes" : "no", tsv_ok ? "yes" : "no");
  report(10, "seeded determinism", pass, buf, timer.elapsed());
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_posterior_oracle();
  criterion_pava_oracle();
  criterion_grenander();
  criterion_em_ascent();
  {
    Timer timer;
    const auto rows = run_figure_grid();
    criteria_figure(rows, timer.elapsed());
  }
  criterion_recovery();
  criterion_eigenvector();
  criterion_determinism();
  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
