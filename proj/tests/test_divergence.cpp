#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phibayes/divergence.hpp"
#include "phibayes/rng.hpp"
#include "phibayes/stats.hpp"

#include <cmath>

using namespace phibayes;

TEST_CASE("generator values at pinned points") {
  // modified KL generator: -log x + x - 1
  CHECK(phi(DivergenceSpec{0.0}, 2.0) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  // chi-squared generator: (x - 1)^2 / 2
  CHECK(phi(DivergenceSpec{2.0}, 3.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(phi_prime(DivergenceSpec{0.0}, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(phi_second(DivergenceSpec{2.0}, 7.0) == doctest::Approx(1.0).epsilon(1e-12));
  // KL generator at x = 1 is 0 with zero slope
  CHECK(phi(DivergenceSpec{1.0}, 1.0) == doctest::Approx(0.0));
  CHECK(phi_prime(DivergenceSpec{1.0}, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("domain and overflow errors") {
  CHECK_THROWS_AS(phi(DivergenceSpec{1.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(phi(DivergenceSpec{1.0}, -2.0), std::domain_error);
  CHECK_THROWS_AS(phi(DivergenceSpec{1.0}, std::nan("")), std::domain_error);
  // x^gamma overflows double range
  CHECK_THROWS_AS(phi(DivergenceSpec{3.0}, 1e300), std::overflow_error);
}

TEST_CASE("nonnegativity, zero at one, convexity over random (gamma, x)") {
  RngStream rng(20240817);
  for (int i = 0; i < 1000000; ++i) {
    const double gamma = -2.0 + 5.0 * rng.uniform();
    const double x = std::exp(-6.0 + 12.0 * rng.uniform());  // (e^-6, e^6)
    const double v = phi_from_log(gamma, std::log(x));
    CHECK(v >= -1e-12);
  }
  for (double gamma : {-2.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0}) {
    CHECK(phi(DivergenceSpec{gamma}, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
    // midpoint convexity on random pairs
    for (int i = 0; i < 20000; ++i) {
      const double a = std::exp(-4.0 + 8.0 * rng.uniform());
      const double b = std::exp(-4.0 + 8.0 * rng.uniform());
      const double lhs = phi_from_log(gamma, std::log(0.5 * (a + b)));
      const double rhs = 0.5 * (phi_from_log(gamma, std::log(a)) +
                                phi_from_log(gamma, std::log(b)));
      CHECK(lhs <= rhs + 1e-10 * (1.0 + std::abs(rhs)));
    }
  }
}

TEST_CASE("derivatives match finite differences of phi") {
  RngStream rng(7);
  for (int i = 0; i < 5000; ++i) {
    const double gamma = -2.0 + 5.0 * rng.uniform();
    const double x = std::exp(-3.0 + 6.0 * rng.uniform());
    const DivergenceSpec spec{gamma};
    const double s = 1e-5 * x;
    const double fd1 = (phi(spec, x + s) - phi(spec, x - s)) / (2.0 * s);
    const double ex1 = phi_prime(spec, x);
    CHECK(std::abs(fd1 - ex1) <= 1e-6 * std::max(std::abs(ex1), 1e-8) + 1e-10);
    // wider step for the second difference: 1 / s^2 amplifies roundoff
    const double s2 = 1e-3 * x;
    const double fd2 =
        (phi(spec, x + s2) - 2.0 * phi(spec, x) + phi(spec, x - s2)) / (s2 * s2);
    const double ex2 = phi_second(spec, x);
    CHECK(std::abs(fd2 - ex2) <= 1e-4 * std::max(std::abs(ex2), 1e-8) + 1e-8);
  }
}

TEST_CASE("continuity across the gamma limit boundaries") {
  // just inside and outside the closed-form branch around 0 and 1
  for (double x : {0.25, 0.9, 1.1, 3.0, 20.0}) {
    const double l = std::log(x);
    CHECK(phi_from_log(1e-5, l) == doctest::Approx(phi_from_log(0.0, l)).epsilon(1e-4));
    CHECK(phi_from_log(-1e-5, l) == doctest::Approx(phi_from_log(0.0, l)).epsilon(1e-4));
    CHECK(phi_from_log(1.0 + 1e-5, l) == doctest::Approx(phi_from_log(1.0, l)).epsilon(1e-4));
    CHECK(phi_from_log(1.0 - 1e-5, l) == doctest::Approx(phi_from_log(1.0, l)).epsilon(1e-4));
    // inside the branch tolerance the limit form is used verbatim
    CHECK(phi_from_log(1e-8, l) == phi_from_log(0.0, l));
    CHECK(phi_from_log(1.0 + 1e-8, l) == phi_from_log(1.0, l));
  }
}

TEST_CASE("dual bracket and phi_prime from log are consistent with phi") {
  RngStream rng(99);
  for (int i = 0; i < 20000; ++i) {
    const double gamma = -2.0 + 5.0 * rng.uniform();
    const double x = std::exp(-3.0 + 6.0 * rng.uniform());
    const double l = std::log(x);
    const double lhs = dual_bracket_from_log(gamma, l);
    const double rhs = x * phi_prime_from_log(gamma, l) - phi_from_log(gamma, l);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("growth condition witnesses") {
  const auto grid = log_grid(1e-6, 1e6, 4001);

  SUBCASE("chi-squared with eta = 0 needs only the trivial witness") {
    const auto r = check_growth_condition(DivergenceSpec{2.0}, 0.0, grid);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->c1 == doctest::Approx(1.0));
    CHECK(r.witness->c2 == doctest::Approx(0.0));
    CHECK(r.witness->c3 == doctest::Approx(0.0));
  }

  SUBCASE("all preset generators admit a witness at eta = 0.1") {
    for (double gamma : {0.0, 0.5, 1.0, 2.0}) {
      const auto r = check_growth_condition(DivergenceSpec{gamma}, 0.1, grid);
      REQUIRE_MESSAGE(r.witness.has_value(), "gamma = " << gamma);
      // verify the witness on an independent, denser grid
      const auto fine = log_grid(1e-6, 1e6, 20011);
      const auto w = *r.witness;
      for (const double x : fine) {
        for (double c : {0.9, 0.95, 1.0, 1.05, 1.1}) {
          const double lhs = phi_from_log(gamma, std::log(c * x));
          const double rhs = w.c1 * phi_from_log(gamma, std::log(x)) + w.c2 * x + w.c3;
          CHECK(lhs <= rhs + 1e-9 * (1.0 + std::abs(rhs)));
        }
      }
    }
  }

  SUBCASE("reports the worst violation when no witness exists") {
    // phi grows like x^5 for gamma = 5 and the candidate set tops out at
    // c1 = 8, so c = 1.9 (c^5 = 24.8) at large x defeats every candidate
    std::vector<double> far = {1e6};
    const auto r = check_growth_condition(DivergenceSpec{5.0}, 0.9, far);
    CHECK_FALSE(r.witness.has_value());
    CHECK(r.worst_violation > 0.0);
    CHECK(r.worst_x == doctest::Approx(1e6));
    CHECK(r.worst_c > 1.0);
  }
}

TEST_CASE("named presets") {
  CHECK(divergence_preset("KLm")->gamma == doctest::Approx(0.0));
  CHECK(divergence_preset("KL")->gamma == doctest::Approx(1.0));
  CHECK(divergence_preset("Hellinger")->gamma == doctest::Approx(0.5));
  CHECK(divergence_preset("ChiSquared")->gamma == doctest::Approx(2.0));
  CHECK_FALSE(divergence_preset("Total Variation").has_value());
}
