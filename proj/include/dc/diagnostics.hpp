#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dc/estimator.hpp"
#include "dc/objective.hpp"
#include "dc/target.hpp"

namespace dc {

/// Fresh-bank estimate of the variational objective.
struct ElboEstimate {
  double elbo_hat = 0.0;
  double se = 0.0;
};
ElboEstimate eval_elbo(const EstimatorCouplingPair& pair, const SampleBank& eval_bank);

/// Gap and coupled-posterior divergence at an optimized theta. kl fields are
/// present only for dim <= 2 targets with a known normalizer.
struct GapReport {
  double elbo_hat = 0.0;
  double elbo_se = 0.0;
  double log_px = 0.0;
  double gap = 0.0;  // log p(x) - elbo_hat
  std::optional<double> kl_z_hat;
  std::optional<double> kl_z_se;
  double grid_mass_coverage = 0.0;  // oracle posterior mass inside the grid
  double draw_coverage = 0.0;       // fraction of coupled draws inside the grid
};

struct GapOptions {
  long kl_draws = 1'000'000;
  int bins_1d = 400;
  int bins_per_axis_2d = 80;
  double range_sigmas = 8.0;  // grid spans oracle mean +- range_sigmas * sd
};

/// Requires target.log_normalizer. Q(z) is estimated by binning coupled draws
/// on the oracle-centered grid; p(z|x) by per-bin quadrature. Throws when the
/// grid covers < 99.9% of the oracle posterior mass.
GapReport gap_report(const EstimatorCouplingPair& pair, const Target& target,
                     const SampleBank& eval_bank, const MomentOracle& oracle,
                     RngStream& rng, const GapOptions& opts = {});

/// Squared errors of coupled-posterior moment estimates against the oracle.
struct MomentError {
  double mean_err = 0.0;  // ||mean_hat - mean||^2
  double cov_err = 0.0;   // ||cov_hat - cov||_F^2
  long n_samples = 0;
  long degenerate = 0;
};

/// Draws n coupled posterior samples (fresh batches) and compares moments.
/// Throws when more than half the batches are degenerate.
MomentError moment_error(const EstimatorCouplingPair& pair, const MomentOracle& oracle,
                         long n, RngStream& rng);

/// One grid cell of the experiment sweep.
struct SweepRecord {
  std::string target;
  std::string method;
  std::string map;
  int M = 1;
  std::uint64_t seed = 0;
  std::optional<double> final_elbo;
  std::optional<double> gap;
  std::optional<double> kl_z;
  std::optional<double> mean_err;
  std::optional<double> cov_err;
  long wall_time_ms = 0;
  std::string error;  // empty on success
};

/// Pearson correlation between bound improvement and posterior-error
/// improvement across records. Each non-iid record pairs with the iid record
/// sharing (target, map, M, seed), falling back to the iid M=1 baseline with
/// the same (target, map, seed). delta_elbo = elbo_method - elbo_iid;
/// delta_log_err = log cov_err_iid - log cov_err_method. Records where either
/// improvement is negative are kept in `pearson` and dropped in
/// `pearson_filtered`.
struct CorrelationReport {
  double pearson = 0.0;
  double pearson_filtered = 0.0;
  int n_pairs = 0;
  std::string note;  // set when the correlation is undefined
};

/// Throws std::invalid_argument with fewer than 5 valid pairs.
CorrelationReport sweep_correlation(std::span<const SweepRecord> records);

}  // namespace dc
