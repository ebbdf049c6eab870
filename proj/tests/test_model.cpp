#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rlis/model.hpp"
#include "rlis/simulate.hpp"
#include "oracles.hpp"

using namespace rlis;

namespace {

// Transition matrix reported in the two-study diabetes analysis, rounded
// to four decimals; rows are renormalized before use.
TransitionMatrix diabetes_matrix() {
  return TransitionMatrix::row_normalized(
      Mat4{Vec4{0.9840, 0.0066, 0.0040, 0.0055},
           Vec4{0.0657, 0.9271, 0.0004, 0.0069},
           Vec4{0.0546, 0.0010, 0.9379, 0.0066},
           Vec4{0.0501, 0.0045, 0.0050, 0.9403}});
}

}  // namespace

TEST_CASE("state codes decode to study indicators") {
  CHECK_FALSE(StateCode(0).theta1());
  CHECK_FALSE(StateCode(0).theta2());
  CHECK_FALSE(StateCode(1).theta1());
  CHECK(StateCode(1).theta2());
  CHECK(StateCode(2).theta1());
  CHECK_FALSE(StateCode(2).theta2());
  CHECK(StateCode(3).theta1());
  CHECK(StateCode(3).theta2());
  for (int s = 0; s < 4; ++s)
    CHECK(StateCode(s).is_replicability_null() == (s != 3));
  CHECK_THROWS_AS(StateCode(4), std::invalid_argument);
  CHECK_THROWS_AS(StateCode(-1), std::invalid_argument);
}

TEST_CASE("validate_params accepts the published fitted model") {
  HmmParams p;
  p.a = diabetes_matrix();
  p.pi = stationary_from_transition(p.a);
  CHECK(validate_params(p).empty());

  for (int k = 0; k < 4; ++k)
    CHECK(p.pi[k] == Catch::Approx(Vec4{0.779, 0.077, 0.057, 0.087}[k]).margin(5e-3));
}

TEST_CASE("validate_params names a defective row") {
  HmmParams p;
  p.a.a[1] = Vec4{0.2, 0.3, 0.2, 0.2};  // sums to 0.9
  const auto v = validate_params(p);
  REQUIRE_FALSE(v.empty());
  bool found = false;
  for (const auto& s : v)
    if (s.find("row 1") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate_params reports increasing heights") {
  HmmParams p;  // uniform pi, uniform A rows
  p.a = TransitionMatrix();
  p.pi = StationaryDist();
  p.f1 = StepDensity({0.0, 0.5, 1.0}, {1.0, 2.0});
  const auto v = validate_params(p);
  bool found = false;
  for (const auto& s : v)
    if (s.find("non-increasing") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("stationary distribution of the simulation matrices") {
  SECTION("rounded published values") {
    const auto a = TransitionMatrix::row_normalized(
        Mat4{Vec4{0.905, 0.032, 0.032, 0.032}, Vec4{0.222, 0.333, 0.222, 0.222},
             Vec4{0.222, 0.222, 0.333, 0.222}, Vec4{0.222, 0.222, 0.222, 0.333}});
    const auto pi = stationary_from_transition(a);
    const Vec4 want{0.7, 0.1, 0.1, 0.1};
    for (int k = 0; k < 4; ++k)
      CHECK(pi[k] == Catch::Approx(want[k]).margin(5e-3));
  }
  SECTION("exact scenario matrices") {
    const auto pi1 = stationary_from_transition(scenario_matrix(1));
    const Vec4 want1{0.7, 0.1, 0.1, 0.1};
    for (int k = 0; k < 4; ++k)
      CHECK(pi1[k] == Catch::Approx(want1[k]).margin(1e-12));
    const auto pi2 = stationary_from_transition(scenario_matrix(2));
    const Vec4 want2{0.6, 0.15, 0.15, 0.1};
    for (int k = 0; k < 4; ++k)
      CHECK(pi2[k] == Catch::Approx(want2[k]).margin(1e-12));
  }
  SECTION("doubly stochastic symmetric case") {
    const auto pi = stationary_from_transition(TransitionMatrix());
    for (int k = 0; k < 4; ++k) CHECK(pi[k] == Catch::Approx(0.25).margin(1e-14));
  }
  SECTION("reducible chain is rejected") {
    Mat4 id{};
    for (int k = 0; k < 4; ++k) id[k][k] = 1.0;
    CHECK_FALSE(is_irreducible(TransitionMatrix(id)));
    CHECK_THROWS_AS(stationary_from_transition(TransitionMatrix(id)),
                    numeric_error);
  }
}

TEST_CASE("stationary vector reproduces itself under A") {
  std::mt19937_64 rng(20240811);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto a = oracles::random_transition(rng);
    const auto pi = stationary_from_transition(a);
    double resid = 0.0, sum = 0.0;
    for (int l = 0; l < 4; ++l) {
      double v = -pi[l];
      for (int k = 0; k < 4; ++k) v += pi[k] * a(k, l);
      resid = std::max(resid, std::abs(v));
      sum += pi[l];
    }
    REQUIRE(resid <= 1e-8);
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("emission density factorization") {
  HmmParams p;
  SECTION("uniform components") {
    CHECK(emission_density(p, StateCode(0), 0.3, 0.8) == 1.0);
    CHECK(emission_density(p, StateCode(3), 0.3, 0.8) == 1.0);
  }
  SECTION("step density lookup") {
    p.f1 = StepDensity({0.0, 0.5, 1.0}, {1.5, 0.5});
    CHECK(emission_density(p, StateCode(2), 0.25, 0.9) == 1.5);
    CHECK(p.f1.integral() == Catch::Approx(1.0).margin(1e-15));
    CHECK(emission_density(p, StateCode(3), 0.25, 0.9) == 1.5);
    CHECK(emission_density(p, StateCode(1), 0.25, 0.9) == 1.0);
  }
  SECTION("domain errors") {
    CHECK_THROWS_AS(emission_density(p, StateCode(0), 0.0, 0.5),
                    std::domain_error);
    CHECK_THROWS_AS(emission_density(p, StateCode(0), 0.5, 1.5),
                    std::domain_error);
  }
}

TEST_CASE("emission densities integrate to one for valid params") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = oracles::random_params(rng);
    REQUIRE(validate_params(p).empty());
    // The pair density factorizes, so the double integral is the product
    // of the marginal integrals, each available in closed form.
    const double i1 = p.f1.integral();
    const double i2 = p.f2.integral();
    const double targets[4] = {1.0, i2, i1, i1 * i2};
    for (int s = 0; s < 4; ++s)
      REQUIRE(targets[s] == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("step density evaluation and CDF differencing agree") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = oracles::random_step_density(rng);
    const auto& b = f.breakpoints();
    const auto& h = f.heights();
    for (std::size_t k = 0; k < h.size(); ++k) {
      CHECK(f.cdf(b[k + 1]) - f.cdf(b[k]) ==
            Catch::Approx(h[k] * (b[k + 1] - b[k])).margin(1e-12));
      // Right-continuity on half-open intervals: the left endpoint's value
      // belongs to the previous piece, the right endpoint to this one.
      CHECK(f(b[k + 1]) == h[k]);
      if (k > 0) CHECK(f(std::nextafter(b[k], 1.0)) == h[k]);
    }
  }
}

TEST_CASE("paired p-value validation") {
  PairedPValues d;
  d.y1 = {0.5, 0.2};
  d.y2 = {0.1};
  CHECK_FALSE(validate_pvalues(d).empty());
  d.y2 = {0.1, 0.0};
  CHECK_FALSE(validate_pvalues(d).empty());
  d.y2 = {0.1, std::nan("")};
  CHECK_FALSE(validate_pvalues(d).empty());
  d.y2 = {0.1, 1.0};
  CHECK(validate_pvalues(d).empty());
}
