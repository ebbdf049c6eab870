#pragma once

// Scaled forward-backward inference for the four-state chain: marginal
// posteriors gamma, pairwise posteriors xi, log-likelihood and the rLIS
// statistic.  Per-index normalization keeps every intermediate in a sane
// range regardless of chain length.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlis/model.hpp"

namespace rlis {

struct PosteriorTables {
  std::vector<Vec4> gamma;  // m x 4, rows sum to 1
  std::vector<Mat4> xi;     // (m-1) x 4 x 4, filled only when requested
  Mat4 xi_sums{};           // sum over j of xi_j(k,l)
  double log_likelihood = 0.0;
};

enum class XiStorage { kNone, kStore };

namespace detail {

// Densities evaluated below this are treated as this floor so one
// impossible observation degrades the posterior instead of producing 0/0.
inline constexpr double kDensityFloor = 1e-300;

// Core recursion over precomputed non-null density values f1(y1j), f2(y2j).
inline PosteriorTables forward_backward_values(const StationaryDist& pi,
                                               const TransitionMatrix& a,
                                               const std::vector<double>& f1v,
                                               const std::vector<double>& f2v,
                                               XiStorage store_xi) {
  const std::size_t m = f1v.size();
  if (m == 0) throw std::invalid_argument("run_forward_backward: empty chain");
  if (f2v.size() != m)
    throw std::invalid_argument("run_forward_backward: length mismatch");

  const auto emissions = [&](std::size_t j, Vec4& e) {
    const double v1 = std::max(f1v[j], kDensityFloor);
    const double v2 = std::max(f2v[j], kDensityFloor);
    e[0] = 1.0;
    e[1] = v2;
    e[2] = v1;
    e[3] = v1 * v2;
  };

  PosteriorTables out;
  out.gamma.resize(m);
  if (store_xi == XiStorage::kStore && m > 1) out.xi.resize(m - 1);

  // Forward pass: alpha_hat[j] is alpha_j normalized to sum one, and the
  // log-likelihood accumulates the normalizers.
  std::vector<Vec4> alpha(m);
  std::vector<double> scale(m);
  double loglik = 0.0;
  Vec4 e;
  emissions(0, e);
  {
    double c = 0.0;
    for (int s = 0; s < kNumStates; ++s) {
      alpha[0][s] = pi[s] * e[s];
      c += alpha[0][s];
    }
    if (!(c > 0.0) || !std::isfinite(c))
      throw numeric_error(
          "run_forward_backward: zero total probability at index 0");
    for (int s = 0; s < kNumStates; ++s) alpha[0][s] /= c;
    scale[0] = c;
    loglik += std::log(c);
  }
  for (std::size_t j = 1; j < m; ++j) {
    emissions(j, e);
    double c = 0.0;
    for (int l = 0; l < kNumStates; ++l) {
      double acc = 0.0;
      for (int k = 0; k < kNumStates; ++k) acc += alpha[j - 1][k] * a(k, l);
      alpha[j][l] = acc * e[l];
      c += alpha[j][l];
    }
    if (!(c > 0.0) || !std::isfinite(c))
      throw numeric_error(
          "run_forward_backward: zero total probability at index " +
          std::to_string(j));
    for (int l = 0; l < kNumStates; ++l) alpha[j][l] /= c;
    scale[j] = c;
    loglik += std::log(c);
  }
  out.log_likelihood = loglik;

  // Backward pass with the same normalizers; gamma and xi are emitted on
  // the fly so only the running beta row is kept.
  Vec4 beta{1.0, 1.0, 1.0, 1.0};
  {
    double g = 0.0;
    Vec4& row = out.gamma[m - 1];
    for (int s = 0; s < kNumStates; ++s) {
      row[s] = alpha[m - 1][s];
      g += row[s];
    }
    for (int s = 0; s < kNumStates; ++s) row[s] /= g;
  }
  for (std::size_t j = m - 1; j-- > 0;) {
    emissions(j + 1, e);
    Mat4 x;
    double xsum = 0.0;
    Vec4 beta_next;
    for (int k = 0; k < kNumStates; ++k) {
      double acc = 0.0;
      for (int l = 0; l < kNumStates; ++l) {
        const double v = alpha[j][k] * a(k, l) * e[l] * beta[l];
        x[k][l] = v;
        acc += a(k, l) * e[l] * beta[l];
        xsum += v;
      }
      beta_next[k] = acc / scale[j + 1];
    }
    if (!(xsum > 0.0) || !std::isfinite(xsum))
      throw numeric_error(
          "run_forward_backward: degenerate pairwise posterior at index " +
          std::to_string(j));
    for (int k = 0; k < kNumStates; ++k)
      for (int l = 0; l < kNumStates; ++l) {
        x[k][l] /= xsum;
        out.xi_sums[k][l] += x[k][l];
      }
    if (!out.xi.empty()) out.xi[j] = x;

    beta = beta_next;
    double g = 0.0;
    Vec4& row = out.gamma[j];
    for (int s = 0; s < kNumStates; ++s) {
      row[s] = alpha[j][s] * beta[s];
      g += row[s];
    }
    for (int s = 0; s < kNumStates; ++s) row[s] /= g;
  }
  return out;
}

inline void eval_density_at(const StepDensity& f, const std::vector<double>& y,
                            std::vector<double>& out) {
  out.resize(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = f(y[j]);
}

}  // namespace detail

inline PosteriorTables run_forward_backward(const HmmParams& p,
                                            const PairedPValues& data,
                                            XiStorage store_xi = XiStorage::kNone) {
  const auto bad = validate_pvalues(data);
  if (!bad.empty())
    throw std::invalid_argument("run_forward_backward: " + bad.front());
  std::vector<double> f1v, f2v;
  detail::eval_density_at(p.f1, data.y1, f1v);
  detail::eval_density_at(p.f2, data.y2, f2v);
  return detail::forward_backward_values(p.pi, p.a, f1v, f2v, store_xi);
}

// rLIS_j = P(s_j != 3 | data) = 1 - gamma_j(3).
inline std::vector<double> compute_rlis(const HmmParams& p,
                                        const PairedPValues& data) {
  const PosteriorTables t = run_forward_backward(p, data, XiStorage::kNone);
  std::vector<double> r(t.gamma.size());
  for (std::size_t j = 0; j < r.size(); ++j) {
    r[j] = 1.0 - t.gamma[j][3];
    if (r[j] < 0.0) r[j] = 0.0;
    if (r[j] > 1.0) r[j] = 1.0;
  }
  return r;
}

}  // namespace rlis
