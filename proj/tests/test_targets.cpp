#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dc/rng.hpp"
#include "dc/target.hpp"
#include "support.hpp"

using namespace dc;

namespace {

std::vector<Target> all_builtins() {
  std::vector<Target> out;
  out.push_back(make_std_gaussian(2));
  out.push_back(make_gaussian(Eigen::Vector2d(1.0, 2.0),
                              Eigen::Matrix2d{{1.3, 0.4}, {0.4, 0.9}}));
  out.push_back(make_skewed_mixture_1d());
  out.push_back(make_funnel(2));
  out.push_back(make_logit_reg_small());
  return out;
}

}  // namespace

TEST_CASE("std_gaussian: mode value and normalizer") {
  const Target t = make_std_gaussian(1);
  Eigen::VectorXd z(1);
  z << 0.0;
  CHECK(t.log_density(z) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(*t.log_normalizer == 0.0);
}

TEST_CASE("gaussian: constructed normalized, errors on bad input") {
  const Target t = make_gaussian(Eigen::VectorXd::Zero(1),
                                 Eigen::MatrixXd::Constant(1, 1, 2.0), 1.0);
  CHECK(*t.log_normalizer == 0.0);
  CHECK_THROWS_AS(
      make_gaussian(Eigen::Vector2d::Zero(), Eigen::Matrix2d{{1.0, 2.0}, {2.0, 1.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      make_gaussian(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(3, 3)),
      std::invalid_argument);
  TargetSpec unknown;
  unknown.name = "nope";
  CHECK_THROWS_AS(builtin_target(unknown), std::invalid_argument);
}

TEST_CASE("skewed mixture: trapezoid normalizer equals 1") {
  const Target t = make_skewed_mixture_1d();
  auto dens = [&](double z) {
    Eigen::VectorXd zz(1);
    zz << z;
    return std::exp(t.log_density(zz));
  };
  const double mass = dctest::trapezoid(dens, -10.0, 10.0, 100000);
  CHECK(std::abs(mass - 1.0) <= 1e-6);
}

TEST_CASE("gradients match central finite differences at random points") {
  for (const Target& t : all_builtins()) {
    RngStream rng(101, static_cast<std::uint64_t>(t.dim));
    auto f = [&](const Eigen::VectorXd& z) { return t.log_density(z); };
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd z = dctest::random_finite_point(t, rng);
      const Eigen::VectorXd g = t.grad(z);
      const Eigen::VectorXd fd = dctest::fd_gradient(f, z, 1e-5);
      INFO("target ", t.name, " i ", i);
      CHECK(dctest::max_rel_err(g, fd) <= 1e-5);
    }
  }
}

TEST_CASE("moment oracle: analytic gaussian") {
  const Eigen::Vector2d mu(1.0, 2.0);
  const Target t = make_gaussian(mu, Eigen::Matrix2d::Identity());
  const MomentOracle o = moment_oracle(t);
  CHECK(o.source == OracleSource::analytic);
  CHECK((o.mean - mu).norm() == 0.0);
  CHECK((o.cov - Eigen::Matrix2d::Identity()).norm() == 0.0);
}

TEST_CASE("moment oracle: skewed mixture quadrature matches closed form") {
  // closed form: mean = sum w m = -0.575; var = sum w (s^2 + m^2) - mean^2
  const double mean_cf = 0.55 * 0.0 + 0.25 * 0.9 + 0.2 * (-4.0);
  const double var_cf =
      0.55 * (0.36 + 0.0) + 0.25 * (1.21 + 0.81) + 0.2 * (0.64 + 16.0) - mean_cf * mean_cf;
  CHECK(mean_cf == doctest::Approx(-0.575));
  CHECK(var_cf == doctest::Approx(3.700375));

  const Target t = make_skewed_mixture_1d();
  const MomentOracle q = moment_oracle_quadrature(t);
  CHECK(q.source == OracleSource::grid_quadrature);
  CHECK(std::abs(q.mean[0] - mean_cf) <= 1e-4);
  CHECK(std::abs(q.cov(0, 0) - var_cf) <= 1e-3);
}

TEST_CASE("moment oracle invariants: SPD covariance") {
  for (const Target& t : all_builtins()) {
    const MomentOracle o = moment_oracle(t);
    const Eigen::MatrixXd sym = 0.5 * (o.cov + o.cov.transpose());
    CHECK((o.cov - sym).norm() <= 1e-12 * (1.0 + o.cov.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("moment oracle cross-check: quadrature vs long-run IS within 1e-2") {
  for (const Target& t :
       {make_skewed_mixture_1d(),
        make_gaussian(Eigen::Vector2d(0.5, -0.3), Eigen::Matrix2d{{1.2, 0.5}, {0.5, 0.8}}),
        make_logit_reg_small()}) {
    const MomentOracle q = moment_oracle_quadrature(t);
    RngStream rng(77, 3);
    const MomentOracle is = moment_oracle_importance(t, 2'000'000, rng);
    INFO("target ", t.name);
    for (int j = 0; j < t.dim; ++j) {
      CHECK(std::abs(q.mean[j] - is.mean[j]) <=
            1e-2 * (1.0 + std::abs(q.mean[j])));
      CHECK(std::abs(q.cov(j, j) - is.cov(j, j)) <= 1e-2 * (1.0 + q.cov(j, j)));
    }
  }
}

TEST_CASE("funnel: analytic moments; tensor quadrature honestly refuses") {
  const Target t = make_funnel(2);
  const MomentOracle o = moment_oracle(t);
  CHECK(o.source == OracleSource::analytic);
  CHECK(o.cov(0, 0) == doctest::Approx(9.0));
  CHECK(o.cov(1, 1) == doctest::Approx(std::exp(4.5)));
  // the conditional scale of z2 spans e^{+-several} across the z1 range the
  // variance integral needs, so grid widening cannot stabilize
  CHECK_THROWS_AS(moment_oracle_quadrature(t), std::runtime_error);
}

TEST_CASE("importance oracle: ESS guard trips on a mismatched proposal") {
  Target t = make_skewed_mixture_1d();
  t.reference_proposal = {Eigen::VectorXd::Constant(1, 40.0), 0.05};
  RngStream rng(5, 0);
  CHECK_THROWS_AS(moment_oracle_importance(t, 10000, rng), std::runtime_error);
}
