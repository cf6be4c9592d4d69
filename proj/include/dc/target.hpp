#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>

#include "dc/rng.hpp"

namespace dc {

/// An unnormalized target log p(z,x) with gradient. The observation x is
/// fixed inside the closures. log_density may return -inf outside the
/// support (importance weights become exactly zero); it must be finite on a
/// set of positive measure.
struct Target {
  int dim = 0;
  std::string name;
  std::function<double(Eigen::Ref<const Eigen::VectorXd>)> log_density;
  std::function<void(Eigen::Ref<const Eigen::VectorXd>, Eigen::Ref<Eigen::VectorXd>)>
      grad_log_density;
  /// log p(x), when known analytically (built-in normalized targets use 0).
  std::optional<double> log_normalizer;

  /// Closed-form posterior moments, when the family admits them.
  struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
  };
  std::optional<Moments> analytic_moments;

  /// Proposal for the long-run importance-sampling oracle (mean, isotropic sd).
  struct Proposal {
    Eigen::VectorXd mean;
    double sd = 4.0;
  };
  std::optional<Proposal> reference_proposal;

  Eigen::VectorXd grad(Eigen::Ref<const Eigen::VectorXd> z) const {
    Eigen::VectorXd g(dim);
    grad_log_density(z, g);
    return g;
  }
};

// Built-in families. gaussian validates positive definiteness; all carry
// log_normalizer = log(evidence).
Target make_std_gaussian(int d, double evidence = 1.0);
Target make_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                     double evidence = 1.0);
/// Asymmetric 1-d mixture: dominant skewed lobe (two overlapping components
/// near the origin) plus a minor mode at -4; normalized so log p(x) = 0.
Target make_skewed_mixture_1d();
/// z1 ~ N(0, 3^2), z_j | z1 ~ N(0, exp(z1)) for j >= 2; log p(x) = 0.
Target make_funnel(int d);
/// Two-parameter Bayesian logistic regression (intercept, slope) on a fixed
/// 8-point dataset, N(0, 4 I) prior. No known normalizer.
Target make_logit_reg_small();

/// Name + parameters, as selected from the CLI config.
struct TargetSpec {
  std::string name;
  int dim = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  double evidence = 1.0;
};

/// Resolve a spec to a Target. Throws std::invalid_argument for unknown
/// names, non-positive-definite covariances, or dimension mismatches.
Target builtin_target(const TargetSpec& spec);

enum class OracleSource { analytic, grid_quadrature, long_run_importance_sampling };

/// Ground-truth posterior moments used by the diagnostics in place of an
/// external sampler.
struct MomentOracle {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  OracleSource source = OracleSource::analytic;
};

/// Best available oracle: analytic when the family admits it, tensor-grid
/// quadrature for dim <= 2, otherwise long-run self-normalized importance
/// sampling with `budget` draws (requires a reference proposal).
MomentOracle moment_oracle(const Target& t, long budget = 1'000'000);

/// Quadrature oracle with widening and refinement self-checks; dim <= 2.
/// Throws std::runtime_error when grid widening fails to stabilize.
MomentOracle moment_oracle_quadrature(const Target& t);

/// Self-normalized importance sampling oracle. Throws std::runtime_error when
/// the effective sample size falls below budget/100.
MomentOracle moment_oracle_importance(const Target& t, long budget, RngStream& rng);

}  // namespace dc
