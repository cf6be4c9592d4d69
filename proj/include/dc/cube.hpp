#pragma once

#include <Eigen/Core>
#include <span>
#include <string>

#include "dc/rng.hpp"

namespace dc {

/// Table-1 sampling distributions over batches of unit-cube points.
enum class Method { iid, anti, strat, anti_strat, qmc, lhs };

Method method_from_name(const std::string& name);
const char* method_name(Method m);

/// A batch of M cube points with prior weights mu_m. Every point is marginally
/// uniform on [0,1)^d; weights are positive and sum to 1. All built-in
/// constructions use equal weights (equal-probability strata).
struct WeightedCubeBatch {
  Eigen::MatrixXd points;   // M x d, entries in [0,1)
  Eigen::VectorXd weights;  // length M, strictly positive, sums to 1
  Method method = Method::iid;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// ---------------------------------------------------------------------------
// Deterministic batch constructions from raw uniforms. These are the sampler
// cores; the rng samplers below fill the uniforms from an RngStream, and the
// coupling-validity quadrature integrates over them directly.
// ---------------------------------------------------------------------------

/// Number of (0,1) uniforms each construction consumes for a batch of
/// `points` candidate points in cube dimension d.
int uniform_count(Method m, int points, int d);

void make_iid(std::span<const double> u, int M, int d, WeightedCubeBatch& out);
/// M even; pairs (omega, 1-omega) in adjacent rows.
void make_antithetic(std::span<const double> u, int M, int d, WeightedCubeBatch& out);
/// First coordinate stratified into M equal slabs, one point per slab.
void make_stratified(std::span<const double> u, int M, int d, WeightedCubeBatch& out);
/// M_strata slabs on the first coordinate; each point paired with its
/// within-slab reflection (first coord -> (2m-1)/M - w1, others -> 1-w).
/// Emits 2*M_strata points; pair rows adjacent.
void make_antithetic_stratified(std::span<const double> u, int M_strata, int d,
                                WeightedCubeBatch& out);
/// Halton points 1..M (coordinate j in the j-th prime base) under a
/// Cranley-Patterson rotation by `shift` (one uniform per coordinate).
void make_rqmc(std::span<const double> shift, int M, int d, WeightedCubeBatch& out);
/// Latin hypercube: point m coordinate j = (perm[j*M+m] + eta[m*d+j]) / M.
void make_lhs(std::span<const double> eta, std::span<const int> perm, int M, int d,
              WeightedCubeBatch& out);

// ---------------------------------------------------------------------------
// Samplers. Pure functions of the RngStream state; identical streams give
// byte-identical batches. A single stream must not be shared across threads.
// ---------------------------------------------------------------------------

WeightedCubeBatch sample_iid(RngStream& rng, int M, int d);
WeightedCubeBatch sample_antithetic(RngStream& rng, int M, int d);  // M even
WeightedCubeBatch sample_stratified(RngStream& rng, int M, int d);
/// Spec'd in strata: emits 2*M_strata points.
WeightedCubeBatch sample_antithetic_stratified(RngStream& rng, int M_strata, int d);
WeightedCubeBatch sample_rqmc(RngStream& rng, int M, int d);  // d <= 64
WeightedCubeBatch sample_lhs(RngStream& rng, int M, int d);

/// Dispatcher in the candidate-count convention used by estimators and
/// configs: `points` is the number of emitted rows for every method
/// (anti_strat maps to points/2 strata; anti and anti_strat require even).
void sample_batch_into(Method m, RngStream& rng, int points, int d,
                       WeightedCubeBatch& out);
WeightedCubeBatch sample_batch(Method m, RngStream& rng, int points, int d);

/// Van der Corput radical inverse of index >= 1 in the given base.
double halton_radical_inverse(std::uint64_t index, std::uint32_t base);

/// Componentwise antithetic reflection.
double reflect_unit(double w);

}  // namespace dc
