#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dc/mapping.hpp"
#include "dc/rng.hpp"
#include "dc/special.hpp"
#include "dc/stats.hpp"
#include "support.hpp"

using namespace dc;

TEST_CASE("cartesian map: medians to the origin") {
  CubeMap map{MapKind::cartesian, 2};
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;
  const Eigen::VectorXd u = map_cube_to_standard(map, w);
  CHECK(u[0] == 0.0);
  CHECK(u[1] == 0.0);
}

TEST_CASE("elliptical angle form: analytic chi_2 radius and quarter turn") {
  const double w1 = 1.0 - std::exp(-0.5);  // F_chi2(1)
  const Eigen::Vector2d u = elliptical_angle_map_2d(w1, 0.25);
  CHECK(std::abs(u.norm() - 1.0) < 1e-9);
  CHECK(std::abs(u[0]) < 1e-12);
  CHECK(std::abs(u[1] - 1.0) < 1e-9);
}

TEST_CASE("elliptical map: norm equals the inverse chi CDF by construction") {
  RngStream rng(17, 0);
  for (int d : {1, 2, 3, 6}) {
    CubeMap map{MapKind::elliptical, d};
    CHECK(map.d_omega() == d + 1);
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd w(d + 1);
      for (int j = 0; j <= d; ++j) w[j] = rng.uniform01();
      const Eigen::VectorXd u = map_cube_to_standard(map, w);
      const double r = chi_inv_cdf(w[0], d);
      CHECK(std::abs(u.norm() - r) <= 1e-12 * (1.0 + r));
    }
  }
}

TEST_CASE("boundary coordinates are clamped, not fatal") {
  CubeMap map{MapKind::cartesian, 1};
  Eigen::VectorXd w(1);
  w << 0.0;
  CHECK(std::isfinite(map_cube_to_standard(map, w)[0]));
  w << 1.0;
  CHECK(std::isfinite(map_cube_to_standard(map, w)[0]));
}

TEST_CASE("affine map: identity, arithmetic, triangular round trip") {
  GaussianParams id = identity_params(3);
  Eigen::VectorXd u(3);
  u << 0.3, -1.2, 2.0;
  CHECK((affine_map(id, u) - u).norm() == 0.0);

  GaussianParams theta;
  theta.mu = Eigen::Vector2d(1.0, 1.0);
  theta.scale = Eigen::Matrix2d{{2.0, 0.0}, {0.0, 3.0}};
  Eigen::VectorXd v(2);
  v << 1.0, -1.0;
  const Eigen::VectorXd z = affine_map(theta, v);
  CHECK(z[0] == 3.0);
  CHECK(z[1] == -2.0);

  // solve back: C^{-1}(z - mu) = u
  GaussianParams tri;
  tri.mu = Eigen::Vector2d(0.5, -0.25);
  tri.scale = Eigen::Matrix2d{{1.3, 0.0}, {-0.7, 0.4}};
  RngStream rng(3, 1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd uu(2);
    uu << gaussian_inv_cdf(rng.uniform01()), gaussian_inv_cdf(rng.uniform01());
    Eigen::VectorXd back = affine_map(tri, uu) - tri.mu;
    tri.scale.triangularView<Eigen::Lower>().solveInPlace(back);
    CHECK((back - uu).norm() <= 1e-12);
  }
  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(affine_map(tri, bad), std::invalid_argument);
}

TEST_CASE("log_q: frozen values and trapezoid normalization") {
  GaussianParams std1 = identity_params(1);
  Eigen::VectorXd z0(1);
  z0 << 0.0;
  CHECK(log_q(std1, z0) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));

  GaussianParams wide;
  wide.mu = Eigen::VectorXd::Zero(1);
  wide.scale = Eigen::MatrixXd::Constant(1, 1, 2.0);
  CHECK(log_q(wide, z0) ==
        doctest::Approx(-0.9189385332046727 - std::log(2.0)).epsilon(1e-14));

  GaussianParams theta;
  theta.mu = Eigen::VectorXd::Constant(1, 0.3);
  theta.scale = Eigen::MatrixXd::Constant(1, 1, 1.7);
  auto dens = [&](double z) {
    Eigen::VectorXd zz(1);
    zz << z;
    return std::exp(log_q(theta, zz));
  };
  const double mass = dctest::trapezoid(dens, 0.3 - 20.0, 0.3 + 20.0, 1 << 17);
  CHECK(std::abs(mass - 1.0) <= 1e-6);
}

TEST_CASE("change of variables: log_q at the mapped point matches the identity") {
  GaussianParams theta;
  theta.mu = Eigen::Vector2d(0.4, -1.1);
  theta.scale = Eigen::Matrix2d{{1.5, 0.0}, {0.6, 0.8}};
  RngStream rng(19, 0);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd u(2);
    u << gaussian_inv_cdf(rng.uniform01()), gaussian_inv_cdf(rng.uniform01());
    const double direct = log_q(theta, affine_map(theta, u));
    const double via_id = log_q_of_standard(theta, u.squaredNorm());
    CHECK(direct == doctest::Approx(via_id).epsilon(1e-12));
  }
}

TEST_CASE("antithetic commutation: omega -> 1-omega gives u -> -u exactly") {
  CubeMap map{MapKind::cartesian, 2};
  GaussianParams theta;
  theta.mu = Eigen::Vector2d(0.7, -0.2);
  theta.scale = Eigen::Matrix2d{{1.2, 0.0}, {-0.5, 0.9}};
  RngStream rng(23, 0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd w(2), wr(2);
    for (int j = 0; j < 2; ++j) {
      w[j] = rng.uniform01();
      wr[j] = 1.0 - w[j];
    }
    const Eigen::VectorXd u = map_cube_to_standard(map, w);
    const Eigen::VectorXd ur = map_cube_to_standard(map, wr);
    CHECK(ur[0] == -u[0]);  // exact on the uniform grid
    CHECK(ur[1] == -u[1]);
    // hence z maps to 2 mu - z through the affine map
    const Eigen::VectorXd z = affine_map(theta, u);
    const Eigen::VectorXd zr = affine_map(theta, ur);
    CHECK((zr - (2.0 * theta.mu - z)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("pushforward moments: both maps produce N(0, I)") {
  const std::size_t n = 1000000;
  for (MapKind kind : {MapKind::cartesian, MapKind::elliptical}) {
    CubeMap map{kind, 2};
    RngStream rng(29, static_cast<std::uint64_t>(kind));
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sum2 = Eigen::Matrix2d::Zero();
    Eigen::VectorXd w(map.d_omega()), u(2);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < map.d_omega(); ++j) w[j] = rng.uniform01();
      map_cube_to_standard(map, w.data(), u.data());
      sum += u;
      sum2 += u * u.transpose();
    }
    const Eigen::Vector2d mean = sum / static_cast<double>(n);
    const Eigen::Matrix2d cov = sum2 / static_cast<double>(n) - mean * mean.transpose();
    const double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
    // var of x^2 for a standard normal is 2; var of x*y is 1
    const double se_var = std::sqrt(2.0 / static_cast<double>(n));
    const double se_cov = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean[0]) <= 3.0 * se_mean);
    CHECK(std::abs(mean[1]) <= 3.0 * se_mean);
    CHECK(std::abs(cov(0, 0) - 1.0) <= 3.0 * se_var);
    CHECK(std::abs(cov(1, 1) - 1.0) <= 3.0 * se_var);
    CHECK(std::abs(cov(0, 1)) <= 3.0 * se_cov);
  }
}

TEST_CASE("GaussianParams validation") {
  GaussianParams bad;
  bad.mu = Eigen::Vector2d::Zero();
  bad.scale = Eigen::Matrix2d{{1.0, 0.5}, {0.0, 1.0}};  // upper entry set
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.scale = Eigen::Matrix2d{{-1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
