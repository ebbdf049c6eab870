#pragma once

// Core domain types for the four-state paired-study mixture model:
// joint hidden states, transition matrix, stationary distribution,
// monotone step densities and the paired p-value container.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlis {

inline constexpr int kNumStates = 4;

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

// Thrown on malformed user input (files, argument values).
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation degenerates numerically.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Joint association status of a feature across the two studies.
// 0 -> (0,0), 1 -> (0,1), 2 -> (1,0), 3 -> (1,1).
struct StateCode {
  int value = 0;

  constexpr StateCode() = default;
  constexpr explicit StateCode(int v) : value(v) {
    if (v < 0 || v >= kNumStates)
      throw std::invalid_argument("StateCode: value must be in {0,1,2,3}");
  }

  // Signal indicator in study 1 / study 2.
  constexpr bool theta1() const { return (value & 2) != 0; }
  constexpr bool theta2() const { return (value & 1) != 0; }

  // The replicability null covers every state except (1,1).
  constexpr bool is_replicability_null() const { return value != 3; }

  friend constexpr bool operator==(StateCode a, StateCode b) {
    return a.value == b.value;
  }
};

struct TransitionMatrix {
  Mat4 a{};

  TransitionMatrix() {
    for (int k = 0; k < kNumStates; ++k)
      for (int l = 0; l < kNumStates; ++l) a[k][l] = 0.25;
  }
  explicit TransitionMatrix(const Mat4& m) : a(m) {}

  double operator()(int k, int l) const { return a[k][l]; }

  // Rescales each row to sum to one. Rows must have positive mass.
  static TransitionMatrix row_normalized(const Mat4& m) {
    Mat4 out = m;
    for (int k = 0; k < kNumStates; ++k) {
      double s = 0.0;
      for (double v : out[k]) s += v;
      if (!(s > 0.0))
        throw std::invalid_argument("TransitionMatrix: row with no mass");
      for (double& v : out[k]) v /= s;
    }
    return TransitionMatrix(out);
  }
};

struct StationaryDist {
  Vec4 pi{0.25, 0.25, 0.25, 0.25};

  StationaryDist() = default;
  explicit StationaryDist(const Vec4& p) : pi(p) {}

  double operator[](int k) const { return pi[k]; }
};

// Non-increasing piecewise-constant density on (0,1].  Value on the
// half-open interval (breaks[k-1], breaks[k]] is heights[k-1]; a point
// that coincides with a breakpoint takes the interval ending there.
class StepDensity {
 public:
  // Uniform(0,1] density.
  StepDensity() : breaks_{0.0, 1.0}, heights_{1.0} {}

  StepDensity(std::vector<double> breaks, std::vector<double> heights)
      : breaks_(std::move(breaks)), heights_(std::move(heights)) {
    if (breaks_.size() < 2 || heights_.size() + 1 != breaks_.size())
      throw std::invalid_argument("StepDensity: need K+1 breakpoints for K heights");
    if (breaks_.front() != 0.0 || breaks_.back() != 1.0)
      throw std::invalid_argument("StepDensity: breakpoints must span [0,1]");
    for (std::size_t k = 1; k < breaks_.size(); ++k)
      if (!(breaks_[k] > breaks_[k - 1]))
        throw std::invalid_argument("StepDensity: breakpoints must be strictly increasing");
    for (double h : heights_)
      if (!(h >= 0.0) || !std::isfinite(h))
        throw std::invalid_argument("StepDensity: heights must be finite and non-negative");
  }

  // Builds a density from raw non-negative heights by rescaling so the
  // integral over (0,1] is exactly one.
  static StepDensity normalized(std::vector<double> breaks,
                                std::vector<double> raw_heights) {
    StepDensity d(std::move(breaks), std::move(raw_heights));
    double mass = d.integral();
    if (!(mass > 0.0))
      throw std::invalid_argument("StepDensity: total mass must be positive");
    for (double& h : d.heights_) h /= mass;
    return d;
  }

  double operator()(double y) const {
    if (!(y > 0.0) || !(y <= 1.0))
      throw std::domain_error("StepDensity: argument outside (0,1]");
    // First breakpoint >= y ends the interval containing y.
    auto it = std::lower_bound(breaks_.begin() + 1, breaks_.end(), y);
    return heights_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
  }

  double cdf(double y) const {
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) y = 1.0;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
      if (y <= breaks_[k]) break;
      acc += heights_[k] * (std::min(y, breaks_[k + 1]) - breaks_[k]);
    }
    return acc;
  }

  double integral() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < heights_.size(); ++k)
      acc += heights_[k] * (breaks_[k + 1] - breaks_[k]);
    return acc;
  }

  bool is_non_increasing() const {
    for (std::size_t k = 1; k < heights_.size(); ++k)
      if (heights_[k] > heights_[k - 1]) return false;
    return true;
  }

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& heights() const { return heights_; }

 private:
  std::vector<double> breaks_;
  std::vector<double> heights_;
};

// The full estimand: stationary distribution, transition matrix and the
// two non-null p-value densities.  The null density is Uniform(0,1].
struct HmmParams {
  StationaryDist pi;
  TransitionMatrix a;
  StepDensity f1;
  StepDensity f2;
};

// Aligned p-values from the two studies, in chain order.
struct PairedPValues {
  std::vector<double> y1;
  std::vector<double> y2;
  std::vector<std::string> ids;  // optional, empty or size() entries

  std::size_t size() const { return y1.size(); }
};

namespace detail {

inline bool rows_stochastic(const Mat4& a, double tol, std::string* msg) {
  for (int k = 0; k < kNumStates; ++k) {
    double s = 0.0;
    for (int l = 0; l < kNumStates; ++l) {
      if (!(a[k][l] >= 0.0 && a[k][l] <= 1.0)) {
        if (msg)
          *msg = "transition entry (" + std::to_string(k) + "," +
                 std::to_string(l) + ") outside [0,1]";
        return false;
      }
      s += a[k][l];
    }
    if (std::abs(s - 1.0) > tol) {
      if (msg)
        *msg = "transition row " + std::to_string(k) + " sums to " +
               std::to_string(s);
      return false;
    }
  }
  return true;
}

}  // namespace detail

// All four states reachable from each other along positive transition
// probabilities.
inline bool is_irreducible(const TransitionMatrix& a) {
  for (int start = 0; start < kNumStates; ++start) {
    std::array<bool, kNumStates> seen{};
    std::array<int, kNumStates> stack{};
    int top = 0;
    stack[top++] = start;
    seen[start] = true;
    while (top > 0) {
      int k = stack[--top];
      for (int l = 0; l < kNumStates; ++l) {
        if (!seen[l] && a(k, l) > 0.0) {
          seen[l] = true;
          stack[top++] = l;
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
  }
  return true;
}

// Solves pi A = pi, sum(pi) = 1 by Gaussian elimination on the rank-3
// system (A' - I) pi = 0 with the normalization row appended.  Direct
// solve keeps the result deterministic across runs.
inline StationaryDist stationary_from_transition(const TransitionMatrix& a) {
  std::string msg;
  if (!detail::rows_stochastic(a.a, 1e-9, &msg))
    throw std::invalid_argument("stationary_from_transition: " + msg);
  if (!is_irreducible(a))
    throw numeric_error(
        "stationary_from_transition: chain is reducible; stationary "
        "distribution is not unique");

  // Rows 0..3: (A' - I) pi = 0; replace the last with sum(pi) = 1.
  double m[kNumStates][kNumStates + 1] = {};
  for (int r = 0; r < kNumStates; ++r) {
    for (int c = 0; c < kNumStates; ++c)
      m[r][c] = a(c, r) - (r == c ? 1.0 : 0.0);
    m[r][kNumStates] = 0.0;
  }
  for (int c = 0; c < kNumStates; ++c) m[kNumStates - 1][c] = 1.0;
  m[kNumStates - 1][kNumStates] = 1.0;

  for (int col = 0; col < kNumStates; ++col) {
    int piv = col;
    for (int r = col + 1; r < kNumStates; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-13)
      throw numeric_error(
          "stationary_from_transition: singular system; eigenvector at "
          "eigenvalue 1 is not unique");
    std::swap(m[piv], m[col]);
    for (int r = 0; r < kNumStates; ++r) {
      if (r == col) continue;
      double f = m[r][col] / m[col][col];
      for (int c = col; c <= kNumStates; ++c) m[r][c] -= f * m[col][c];
    }
  }

  Vec4 pi{};
  for (int k = 0; k < kNumStates; ++k) pi[k] = m[k][kNumStates] / m[k][k];

  for (int k = 0; k < kNumStates; ++k)
    if (!(pi[k] > 0.0))
      throw numeric_error(
          "stationary_from_transition: non-positive stationary entry for "
          "state " + std::to_string(k));

  double resid = 0.0;
  for (int l = 0; l < kNumStates; ++l) {
    double v = -pi[l];
    for (int k = 0; k < kNumStates; ++k) v += pi[k] * a(k, l);
    resid = std::max(resid, std::abs(v));
  }
  if (resid > 1e-10)
    throw numeric_error("stationary_from_transition: residual " +
                        std::to_string(resid) + " too large");
  return StationaryDist(pi);
}

// Joint emission density of a p-value pair given the hidden state.
// The four states factor as f0*f0, f0*f2, f1*f0, f1*f2.
inline double emission_density(const HmmParams& p, StateCode s, double y1,
                               double y2) {
  if (!(y1 > 0.0) || !(y1 <= 1.0) || !(y2 > 0.0) || !(y2 <= 1.0))
    throw std::domain_error("emission_density: p-values must lie in (0,1]");
  const double g1 = s.theta1() ? p.f1(y1) : 1.0;
  const double g2 = s.theta2() ? p.f2(y2) : 1.0;
  return g1 * g2;
}

// Reports every violated model invariant; empty means valid.
inline std::vector<std::string> validate_params(const HmmParams& p) {
  std::vector<std::string> out;

  double pi_sum = 0.0;
  for (int k = 0; k < kNumStates; ++k) {
    if (!(p.pi[k] >= 0.0 && p.pi[k] <= 1.0))
      out.push_back("pi[" + std::to_string(k) + "] outside [0,1]");
    pi_sum += p.pi[k];
  }
  if (std::abs(pi_sum - 1.0) > 1e-12)
    out.push_back("pi sums to " + std::to_string(pi_sum) + ", expected 1");

  std::string msg;
  if (!detail::rows_stochastic(p.a.a, 1e-12, &msg)) out.push_back(msg);

  double resid = 0.0;
  for (int l = 0; l < kNumStates; ++l) {
    double v = -p.pi[l];
    for (int k = 0; k < kNumStates; ++k) v += p.pi[k] * p.a(k, l);
    resid = std::max(resid, std::abs(v));
  }
  if (resid > 1e-8)
    out.push_back("pi is not stationary for A (residual " +
                  std::to_string(resid) + ")");

  for (const auto* f : {&p.f1, &p.f2}) {
    const std::string which = (f == &p.f1) ? "f1" : "f2";
    if (!f->is_non_increasing())
      out.push_back(which + " heights are not non-increasing");
    if (std::abs(f->integral() - 1.0) > 1e-10)
      out.push_back(which + " integrates to " + std::to_string(f->integral()) +
                    ", expected 1");
  }
  return out;
}

inline std::vector<std::string> validate_pvalues(const PairedPValues& d) {
  std::vector<std::string> out;
  if (d.y1.size() != d.y2.size())
    out.push_back("y1 and y2 differ in length");
  if (!d.ids.empty() && d.ids.size() != d.y1.size())
    out.push_back("feature ids differ in length from p-values");
  for (std::size_t j = 0; j < std::min(d.y1.size(), d.y2.size()); ++j) {
    const double a = d.y1[j], b = d.y2[j];
    if (!(a > 0.0 && a <= 1.0) || std::isnan(a) || !(b > 0.0 && b <= 1.0) ||
        std::isnan(b)) {
      out.push_back("p-value pair at index " + std::to_string(j) +
                    " outside (0,1]");
      break;
    }
  }
  return out;
}

}  // namespace rlis
