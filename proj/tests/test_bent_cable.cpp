#include <doctest.h>

#include <cmath>
#include <random>

#include "bentcable/bent_cable.hpp"
#include "bentcable/errors.hpp"
#include "cable_checks.hpp"

using namespace bentcable;

using testing::kernel_slope;

TEST_CASE("bend_kernel worked values") {
  CHECK(bend_kernel(1995, 2000, 3) == 0.0);
  CHECK(bend_kernel(2003, 2000, 3) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(bend_kernel(2001, 2000, 3) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(bend_kernel(2010, 2000, 3) == 10.0);
}

TEST_CASE("quadratic branch agrees with the integral of the slope") {
  // Midpoint rule on q' from tau - gamma; q' is linear there, so the rule is exact.
  const double tau = 2000, gamma = 3, t = 2001;
  const int n = 1000;
  const double lo = tau - gamma, h = (t - lo) / n;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += kernel_slope(lo + (k + 0.5) * h, tau, gamma) * h;
  CHECK(bend_kernel(t, tau, gamma) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("bend_kernel rejects bad arguments") {
  CHECK_THROWS_AS(bend_kernel(2000, 2000, 0.0), DomainError);
  CHECK_THROWS_AS(bend_kernel(2000, 2000, -1.0), DomainError);
  CHECK_THROWS_AS(bend_kernel(NAN, 2000, 1.0), DomainError);
  CHECK_THROWS_AS(bend_kernel(2000, INFINITY, 1.0), DomainError);
}

TEST_CASE("bend_kernel is continuous and C1 at randomized joins") {
  const auto r = testing::cable_sweep(1000, 42);
  CHECK(r.max_jump < 1e-10);
  CHECK(r.max_fd_error < 1e-6);
  CHECK(r.max_straddle_excess < 1e-8);
}

TEST_CASE("bend_mean") {
  CHECK(bend_mean(1234.5, {0, 0, 2000, 2}) == 0.0);
  CHECK(bend_mean(2001, {1, 0, 2000, 2}) == 2001.0);
  // Outgoing branch by hand: 0.5 * 2005 - (2005 - 2000).
  CHECK(bend_mean(2005, {0.5, -1, 2000, 2}) == doctest::Approx(997.5).epsilon(1e-15));
  // No bend: zero second difference.
  const BendParams p{0.37, 0.0, 2000, 2};
  for (double t = 1990; t < 2010; t += 0.7) {
    CHECK(bend_mean(t + 1, p) - 2 * bend_mean(t, p) + bend_mean(t - 1, p) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("transition_window") {
  auto w = transition_window({0, 0, 2000, 3});
  CHECK(w.start == 1997);
  CHECK(w.mid == 2000);
  CHECK(w.end == 2003);
  w = transition_window({0, 0, 2003.5, 5.5});
  CHECK(w.start == 1998);
  CHECK(w.end == 2009);
  w = transition_window({0, 0, 2007, 1e-12});
  CHECK(w.start == doctest::Approx(2007));
  CHECK(w.end == doctest::Approx(2007));
}

TEST_CASE("transform_response") {
  CHECK(transform_response(std::exp(-1.0), 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(transform_response(std::exp(-std::exp(1.0)), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  const double y = transform_response(1.0, 100.0);
  CHECK(y == doctest::Approx(1.52718).epsilon(1e-5));
  CHECK(inverse_transform_response(y) == doctest::Approx(0.01).epsilon(1e-14));

  CHECK_THROWS_AS(transform_response(100.0, 100.0), DomainError);
  CHECK_THROWS_AS(transform_response(150.0, 100.0), DomainError);
  CHECK_THROWS_AS(transform_response(0.0, 100.0), ZeroDeforestationError);
  CHECK(transform_response(0.0, 100.0, 1e-6) == doctest::Approx(std::log(-std::log(1e-6))));
}

TEST_CASE("transform_response round trip and monotonicity") {
  double prev = INFINITY;
  for (double lr = -6; lr < 0; lr += 0.01) {
    const double r = std::min(std::pow(10.0, lr), 1 - 1e-6);
    const double y = transform_response(r, 1.0);
    CHECK(std::abs(inverse_transform_response(y) - r) < 1e-12);
    CHECK(y < prev);
    prev = y;
  }
  CHECK(std::abs(inverse_transform_response(transform_response(1 - 1e-6, 1.0)) - (1 - 1e-6)) < 1e-12);
}

TEST_CASE("tenure covariate reproduces the published LGA values") {
  CHECK(std::abs(tenure_covariate(1.0, 0.0) - 2.0) < 0.01);    // Brisbane
  CHECK(std::abs(tenure_covariate(0.0, 1.0) + 2.0) < 0.01);    // Richmond
  CHECK(std::abs(tenure_covariate(0.46, 0.53) + 0.06) < 0.01); // Quilpie, roughly even split
  CHECK(tenure_covariate(0.3, 0.3) == 0.0);
  CHECK_THROWS_AS(tenure_covariate(1.2, 0.0), DomainError);
  CHECK_THROWS_AS(tenure_covariate(0.5, -0.1), DomainError);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng), b = u(rng);
    CHECK(tenure_covariate(a, b) == -tenure_covariate(b, a));
    CHECK(std::abs(tenure_covariate(a, b)) <= std::log10(101.0) + 1e-15);
  }
}
