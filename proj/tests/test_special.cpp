#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dc/rng.hpp"
#include "dc/special.hpp"
#include "support.hpp"

using dc::chi_cdf;
using dc::chi_inv_cdf;
using dc::gaussian_inv_cdf;
using dc::normal_cdf;

namespace {

// independent oracle: bisection on Phi computed from erfc
double inv_cdf_bisect(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("gaussian_inv_cdf: median and frozen quantile") {
  CHECK(gaussian_inv_cdf(0.5) == 0.0);
  // 1.9599639845400545 computed by the bisection oracle above
  const double oracle = inv_cdf_bisect(0.975);
  CHECK(std::abs(oracle - 1.9599639845400545) < 1e-12);
  CHECK(std::abs(gaussian_inv_cdf(0.975) - oracle) < 1e-9);
  CHECK(std::abs(gaussian_inv_cdf(0.975) - 1.9599640) < 1e-6);
}

TEST_CASE("gaussian_inv_cdf: round trip accuracy over a grid") {
  double worst = 0.0;
  for (int i = 1; i < 10000; ++i) {
    const double p = static_cast<double>(i) / 10000.0;
    worst = std::max(worst, std::abs(normal_cdf(gaussian_inv_cdf(p)) - p));
  }
  // tails down to the spec'd bracket
  for (double p : {1e-12, 1e-9, 1e-6, 1e-3, 1 - 1e-3, 1 - 1e-6, 1 - 1e-9}) {
    worst = std::max(worst, std::abs(normal_cdf(gaussian_inv_cdf(p)) - p));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("gaussian_inv_cdf: antisymmetry is exact on exact complements") {
  for (double p : {0.125, 0.25, 0.3125, 0.484375, 0.046875}) {
    CHECK(gaussian_inv_cdf(1.0 - p) == -gaussian_inv_cdf(p));
  }
  // generic p: complement computed in double, agreement to rounding
  dc::RngStream rng(21, 0);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform01();
    CHECK(gaussian_inv_cdf(1.0 - p) ==
          doctest::Approx(-gaussian_inv_cdf(p)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian_inv_cdf: domain errors") {
  CHECK_THROWS_AS(gaussian_inv_cdf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_inv_cdf(1.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_inv_cdf(-0.1), std::invalid_argument);
}

TEST_CASE("chi_inv_cdf: analytic chi_2 inversion") {
  // chi_2 CDF is 1 - exp(-r^2/2); at r = 1 that is 1 - e^{-1/2}
  const double p = 1.0 - std::exp(-0.5);
  const double r = chi_inv_cdf(p, 2);
  CHECK(std::abs(r - 1.0) < 1e-9);
  CHECK(std::abs(chi_cdf(r, 2) - p) <= 1e-9);
}

TEST_CASE("chi_inv_cdf: chi_1 via the normal CDF") {
  // chi_1 CDF at 1 equals 2 Phi(1) - 1 = 0.6826894921370859
  const double p = 2.0 * normal_cdf(1.0) - 1.0;
  CHECK(std::abs(p - 0.6826894921370859) < 1e-15);
  CHECK(std::abs(chi_inv_cdf(p, 1) - 1.0) < 1e-9);
}

TEST_CASE("chi_inv_cdf: monotone in p") {
  dc::RngStream rng(5, 0);
  for (int d : {1, 2, 3, 7, 20}) {
    for (int i = 0; i < 100; ++i) {
      double p1 = rng.uniform01(), p2 = rng.uniform01();
      if (p1 > p2) std::swap(p1, p2);
      if (p1 == p2) continue;
      CHECK(chi_inv_cdf(p1, d) < chi_inv_cdf(p2, d));
    }
  }
}

TEST_CASE("chi_inv_cdf: generic-d path against a quadrature oracle") {
  // chi_5 CDF by Simpson integration of the density
  const int d = 5;
  auto pdf = [&](double r) {
    if (r <= 0.0) return 0.0;
    const double log_norm = (0.5 * d - 1.0) * std::log(2.0) + std::lgamma(0.5 * d);
    return std::exp((d - 1.0) * std::log(r) - 0.5 * r * r - log_norm);
  };
  for (double r0 : {0.7, 1.3, 2.0, 3.1}) {
    const double p = dctest::simpson(pdf, 1e-12, r0, 4000);
    CHECK(std::abs(chi_inv_cdf(p, d) - r0) < 1e-7);
    CHECK(std::abs(chi_cdf(r0, d) - p) < 1e-9);
  }
}

TEST_CASE("chi_inv_cdf: domain errors") {
  CHECK_THROWS_AS(chi_inv_cdf(0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(chi_inv_cdf(1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(chi_inv_cdf(0.5, 0), std::invalid_argument);
}
