#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

#include "dc/cube.hpp"
#include "dc/mapping.hpp"
#include "dc/rng.hpp"
#include "dc/target.hpp"

namespace dc {

/// Raised when a batch carries no usable mass (every candidate weight is
/// exactly zero): the estimate R = 0 is legitimate, but there is no mixture
/// to sample a posterior point from.
struct DegenerateBatch : std::runtime_error {
  DegenerateBatch() : std::runtime_error("degenerate batch: all candidate weights are zero") {}
};

/// One evaluated batch: mapped candidate points with their prior batch
/// weights and density ratios. Candidates are stored one per column.
struct CandidateSet {
  Eigen::MatrixXd z;            // d x M mapped points T_theta(F^{-1}(omega_m))
  Eigen::MatrixXd u;            // d x M standard-normal points (kept for gradients)
  Eigen::VectorXd log_prior_w;  // log mu_m, sums to 1 in probability space
  Eigen::VectorXd log_r0;       // log p(z_m,x) - log q_theta(z_m), entries in [-inf, inf)

  int size() const { return static_cast<int>(log_r0.size()); }
  int dim() const { return static_cast<int>(z.rows()); }
};

/// Shared evaluation path: batch -> mapped candidates + density ratios.
/// log q is evaluated through the affine change of variables (exact identity
/// log q(T_theta(u)) = -(d/2) log 2pi - sum log C_jj - ||u||^2/2).
void candidate_set_from_batch(const WeightedCubeBatch& batch, const CubeMap& map,
                              const GaussianParams& theta, const Target& target,
                              CandidateSet& out);

/// Construction stage of a pair. `split` carries the selector m symbolically
/// (draw it with draw_split_log_R / sample_split_coupling); `rao_blackwellized`
/// has m marginalized out, giving the Table-1 estimator and softmax coupling.
enum class PairStage { base, split, rao_blackwellized };

/// A sampling distribution Q plus the paired estimator R and coupling a(z|.),
/// valid in the sense E_Q[R a(z|.)] = p(z,x). Closed under split_lift and
/// rao_blackwell_discrete.
struct EstimatorCouplingPair {
  Method method = Method::iid;
  int num_candidates = 1;  // candidate points per batch (anti_strat: 2 per stratum)
  CubeMap map;
  GaussianParams theta;
  const Target* target = nullptr;
  PairStage stage = PairStage::base;

  void evaluate_into(RngStream& rng, WeightedCubeBatch& batch_scratch,
                     CandidateSet& out) const;
  CandidateSet evaluate(RngStream& rng) const;
};

/// M = 1 pair with R_0 = p(T(omega),x)/q(T(omega)) and the deterministic
/// coupling that returns the mapped point.
EstimatorCouplingPair base_pair(const GaussianParams& theta, const CubeMap& map,
                                const Target& target);

/// Replicates the base pair to M candidates drawn by `method`, carrying the
/// selector m with conditional probabilities mu_m.
EstimatorCouplingPair split_lift(const EstimatorCouplingPair& pair0, Method method,
                                 int M);

/// Marginalizes the discrete selector: R = sum_m mu_m R_0(omega_m), coupling
/// picks z_m with probability mu_m R_0(omega_m) / sum mu R_0.
EstimatorCouplingPair rao_blackwell_discrete(const EstimatorCouplingPair& pair);

/// log R = logsumexp_m(log mu_m + log r0_m); -inf when every entry is -inf.
double compute_log_R(const CandidateSet& cs);

/// Selector-carrying estimator of the split stage: draws m ~ mu and returns
/// log R_0(omega_m).
double draw_split_log_R(const CandidateSet& cs, RngStream& rng);

/// Fig.-5 coupling: selects m with probability proportional to mu_m R_0(omega_m)
/// (normalized in log space). Throws DegenerateBatch when all weights vanish.
int sample_coupling_index(const CandidateSet& cs, RngStream& rng);
Eigen::VectorXd sample_coupling(const CandidateSet& cs, RngStream& rng);

/// Coupling of the split stage: m ~ mu_m regardless of R.
Eigen::VectorXd sample_split_coupling(const CandidateSet& cs, RngStream& rng);

/// One-pass quadrature of the coupled joint over the batch randomness.
struct CouplingQuadrature {
  std::vector<double> coupled_mass;  // E_Q[R(omega) a(z in bin | omega)] per bin
  std::vector<double> target_mass;   // integral of p(z,x) per bin
  std::vector<double> q_mass;        // Q(z in bin) = E_Q[a(z in bin | omega)]
  double max_rel_err = 0.0;          // over bins holding >= 1e-6 of target mass
};

/// Integrates Q(omega) R(omega) a(z|omega) by a tensor midpoint rule over the
/// batch's underlying uniforms (cube dimension <= 2; the discrete selector and
/// LHS permutations are summed exactly) and compares against the bin-integrated
/// target. `corrupt_coupling` reverses the selection probabilities (negative
/// control). Throws std::runtime_error when halving the grid step moves a
/// reported bin mass by more than 10%.
CouplingQuadrature coupling_quadrature(const EstimatorCouplingPair& pair,
                                       const Target& target,
                                       std::span<const double> z_grid,
                                       int quad_points, bool corrupt_coupling = false);

/// Max relative bin error of the validity identity E_Q[R a(z|.)] = p(z,x).
double check_validity(const EstimatorCouplingPair& pair, const Target& target,
                      std::span<const double> z_grid, int quad_points,
                      bool corrupt_coupling = false);

/// Equal-q-mass bin edges: images of i/bins, i = 1..bins-1, under the pair's
/// map and affine transform (1-d, cartesian). These align with the validity
/// quadrature grid whenever quad_points is a multiple of bins.
std::vector<double> equal_mass_grid(const GaussianParams& theta, int bins);

}  // namespace dc
