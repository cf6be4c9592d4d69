#pragma once

#include <Eigen/Core>
#include <vector>

#include "dc/cube.hpp"
#include "dc/mapping.hpp"
#include "dc/rng.hpp"
#include "dc/target.hpp"

namespace dc {

/// A fixed bank of pre-drawn batches (common random numbers). The cube points
/// are mapped to standard-normal points once at construction; every objective
/// evaluation at the same theta is then bitwise identical.
struct SampleBank {
  Method method = Method::iid;
  int M = 1;
  CubeMap map;
  int N = 0;
  Eigen::VectorXd log_prior_w;     // shared across batches (equal-weight constructions)
  std::vector<Eigen::MatrixXd> u;  // per batch: d x M standard-normal points
  std::vector<Eigen::VectorXd> u_sq;  // per batch: per-candidate ||u||^2
};

SampleBank draw_bank(Method method, int M, const CubeMap& map, int N, RngStream& rng);

/// (1/N) sum_n log R(batch_n; theta). Returns -inf if every batch is
/// degenerate. Deterministic given the bank.
double empirical_elbo(const GaussianParams& theta, const SampleBank& bank,
                      const Target& target);

struct ElboGradient {
  double value = 0.0;
  Eigen::VectorXd d_mu;
  Eigen::MatrixXd d_scale;  // lower triangular, upper part zero
};

/// Exact reparameterization gradient of empirical_elbo over (mu, C): per
/// candidate the softmax-weighted target gradient flows through z = C u + mu,
/// and the only direct C-dependence of log q along that path is -sum log C_jj.
ElboGradient elbo_gradient(const GaussianParams& theta, const SampleBank& bank,
                           const Target& target);

struct LaplaceOptions {
  Eigen::VectorXd start;      // empty = origin
  int max_steps = 500;
  double grad_tol = 1e-8;
  double fd_step = 1e-4;      // central-difference Hessian step
  double fallback_scale = 0.1;  // C = fallback_scale * I when -H is not SPD
};

/// mu at the MAP (gradient ascent with backtracking line search), C the lower
/// Cholesky factor of the inverse negative finite-difference Hessian;
/// C = 0.1 I when the Hessian is not negative definite.
GaussianParams laplace_init(const Target& target, const LaplaceOptions& opts = {});

struct OptimizerSettings {
  enum class Engine { adam, lbfgs };
  Engine engine = Engine::adam;
  double step = 0.02;        // adam step size
  int iters = 2000;
  int lbfgs_memory = 10;
  double grad_tol = 1e-6;
  /// Also optimize from the init with C widened by widen_factor and keep the
  /// better final objective; escapes the local basin next to a tight
  /// mode-seeking init on multimodal targets. Deterministic.
  bool widen_restart = true;
  double widen_factor = 3.0;
};

struct OptResult {
  GaussianParams theta_star;
  std::vector<double> elbo_trace;  // objective at each iterate of the winning run
  double final_elbo = 0.0;         // training-bank objective at theta_star
  int iterations = 0;
  bool converged = false;
};

/// Maximizes empirical_elbo over the unconstrained parameterization
/// (mu raw; diag C through exp, off-diagonal raw). Pure function of
/// (target, bank, init, settings).
OptResult optimize(const Target& target, const SampleBank& bank,
                   const GaussianParams& init, const OptimizerSettings& settings = {});

}  // namespace dc
