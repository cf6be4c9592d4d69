#include "dc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dc/special.hpp"
#include "dc/stats.hpp"

namespace dc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void candidate_set_from_batch(const WeightedCubeBatch& batch, const CubeMap& map,
                              const GaussianParams& theta, const Target& target,
                              CandidateSet& out) {
  const int M = batch.size();
  const int d = map.d;
  if (batch.dim() != map.d_omega())
    throw std::invalid_argument("candidate_set_from_batch: batch/map dimension mismatch");
  if (target.dim != d || theta.dim() != d)
    throw std::invalid_argument("candidate_set_from_batch: target/theta dimension mismatch");

  out.z.resize(d, M);
  out.u.resize(d, M);
  out.log_prior_w.resize(M);
  out.log_r0.resize(M);

  double wbuf[72];
  for (int m = 0; m < M; ++m) {
    for (int j = 0; j < batch.dim(); ++j) wbuf[j] = batch.points(m, j);
    map_cube_to_standard(map, wbuf, out.u.col(m).data());
  }
  out.z.noalias() = theta.scale.triangularView<Eigen::Lower>() * out.u;
  out.z.colwise() += theta.mu;

  for (int m = 0; m < M; ++m) {
    const double lq = log_q_of_standard(theta, out.u.col(m).squaredNorm());
    out.log_r0[m] = target.log_density(out.z.col(m)) - lq;
    out.log_prior_w[m] = std::log(batch.weights[m]);
  }
}

void EstimatorCouplingPair::evaluate_into(RngStream& rng,
                                          WeightedCubeBatch& batch_scratch,
                                          CandidateSet& out) const {
  sample_batch_into(method, rng, num_candidates, map.d_omega(), batch_scratch);
  candidate_set_from_batch(batch_scratch, map, theta, *target, out);
}

CandidateSet EstimatorCouplingPair::evaluate(RngStream& rng) const {
  WeightedCubeBatch batch;
  CandidateSet cs;
  evaluate_into(rng, batch, cs);
  return cs;
}

EstimatorCouplingPair base_pair(const GaussianParams& theta, const CubeMap& map,
                                const Target& target) {
  theta.validate();
  if (theta.dim() != map.d || target.dim != map.d)
    throw std::invalid_argument("base_pair: dimension mismatch");
  EstimatorCouplingPair p;
  p.method = Method::iid;
  p.num_candidates = 1;
  p.map = map;
  p.theta = theta;
  p.target = &target;
  p.stage = PairStage::base;
  return p;
}

EstimatorCouplingPair split_lift(const EstimatorCouplingPair& pair0, Method method,
                                 int M) {
  if (pair0.stage != PairStage::base)
    throw std::invalid_argument("split_lift: expects a base pair");
  if (M < 1) throw std::invalid_argument("split_lift: M must be positive");
  if ((method == Method::anti || method == Method::anti_strat) && M % 2 != 0)
    throw std::invalid_argument("split_lift: antithetic methods need even M");
  EstimatorCouplingPair p = pair0;
  p.method = method;
  p.num_candidates = M;
  p.stage = PairStage::split;
  return p;
}

EstimatorCouplingPair rao_blackwell_discrete(const EstimatorCouplingPair& pair) {
  if (pair.stage != PairStage::split)
    throw std::invalid_argument("rao_blackwell_discrete: expects a split-lifted pair");
  EstimatorCouplingPair p = pair;
  p.stage = PairStage::rao_blackwellized;
  return p;
}

double compute_log_R(const CandidateSet& cs) {
  const int M = cs.size();
  double hi = kNegInf;
  for (int m = 0; m < M; ++m) hi = std::max(hi, cs.log_prior_w[m] + cs.log_r0[m]);
  if (!std::isfinite(hi)) return kNegInf;
  double s = 0.0;
  for (int m = 0; m < M; ++m) s += std::exp(cs.log_prior_w[m] + cs.log_r0[m] - hi);
  return hi + std::log(s);
}

namespace {

int draw_from_probs(const double* p, int n, RngStream& rng) {
  const double v = rng.uniform01();
  double acc = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    acc += p[i];
    if (v < acc) return i;
  }
  return n - 1;
}

}  // namespace

double draw_split_log_R(const CandidateSet& cs, RngStream& rng) {
  const int M = cs.size();
  double probs[1024];
  if (M > 1024) throw std::invalid_argument("draw_split_log_R: M too large");
  for (int m = 0; m < M; ++m) probs[m] = std::exp(cs.log_prior_w[m]);
  return cs.log_r0[draw_from_probs(probs, M, rng)];
}

int sample_coupling_index(const CandidateSet& cs, RngStream& rng) {
  const int M = cs.size();
  if (M > 1024) throw std::invalid_argument("sample_coupling_index: M too large");
  double logw[1024];
  double hi = kNegInf;
  for (int m = 0; m < M; ++m) {
    logw[m] = cs.log_prior_w[m] + cs.log_r0[m];
    hi = std::max(hi, logw[m]);
  }
  if (!std::isfinite(hi)) throw DegenerateBatch{};
  double probs[1024];
  double tot = 0.0;
  for (int m = 0; m < M; ++m) {
    probs[m] = std::exp(logw[m] - hi);
    tot += probs[m];
  }
  for (int m = 0; m < M; ++m) probs[m] /= tot;
  return draw_from_probs(probs, M, rng);
}

Eigen::VectorXd sample_coupling(const CandidateSet& cs, RngStream& rng) {
  return cs.z.col(sample_coupling_index(cs, rng));
}

Eigen::VectorXd sample_split_coupling(const CandidateSet& cs, RngStream& rng) {
  const int M = cs.size();
  double probs[1024];
  if (M > 1024) throw std::invalid_argument("sample_split_coupling: M too large");
  for (int m = 0; m < M; ++m) probs[m] = std::exp(cs.log_prior_w[m]);
  return cs.z.col(draw_from_probs(probs, M, rng));
}

// ---------------------------------------------------------------------------
// Coupling validity quadrature
// ---------------------------------------------------------------------------

namespace {

// all permutations of {0..M-1}
std::vector<std::vector<int>> all_perms(int M) {
  std::vector<int> p(static_cast<std::size_t>(M));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

struct BinAccumulator {
  std::vector<double> coupled;
  std::vector<double> q;

  explicit BinAccumulator(std::size_t bins) : coupled(bins, 0.0), q(bins, 0.0) {}
};

// One quadrature pass at n nodes per axis.
void integrate_pass(const EstimatorCouplingPair& pair, std::span<const double> edges,
                    int n, bool corrupt, BinAccumulator& acc) {
  const Method method = pair.method;
  const int M = pair.num_candidates;
  const int dw = pair.map.d_omega();
  const int k = uniform_count(method, M, dw);
  const std::size_t bins = edges.size() - 1;

  std::vector<std::vector<int>> perms;        // lhs only
  std::vector<int> perm_flat(static_cast<std::size_t>(M) * dw);
  long n_discrete = 1;
  if (method == Method::lhs) {
    perms = all_perms(M);
    n_discrete = 1;
    for (int j = 0; j < dw; ++j) n_discrete *= static_cast<long>(perms.size());
    if (n_discrete > 20000)
      throw std::invalid_argument("coupling_quadrature: too many LHS permutations");
  }

  WeightedCubeBatch batch;
  CandidateSet cs;
  std::vector<double> uni(static_cast<std::size_t>(k));
  const double node_w = 1.0 / (static_cast<double>(n_discrete) * std::pow(n, k));

  long n_nodes = 1;
  for (int i = 0; i < k; ++i) n_nodes *= n;

  for (long disc = 0; disc < n_discrete; ++disc) {
    if (method == Method::lhs) {
      long rem = disc;
      for (int j = 0; j < dw; ++j) {
        const auto& pj = perms[static_cast<std::size_t>(rem % static_cast<long>(perms.size()))];
        rem /= static_cast<long>(perms.size());
        for (int m = 0; m < M; ++m) perm_flat[static_cast<std::size_t>(j) * M + m] = pj[static_cast<std::size_t>(m)];
      }
    }
    for (long node = 0; node < n_nodes; ++node) {
      long rem = node;
      for (int i = 0; i < k; ++i) {
        uni[static_cast<std::size_t>(i)] =
            (static_cast<double>(rem % n) + 0.5) / static_cast<double>(n);
        rem /= n;
      }
      switch (method) {
        case Method::iid: make_iid(uni, M, dw, batch); break;
        case Method::anti: make_antithetic(uni, M, dw, batch); break;
        case Method::strat: make_stratified(uni, M, dw, batch); break;
        case Method::anti_strat: make_antithetic_stratified(uni, M / 2, dw, batch); break;
        case Method::qmc: make_rqmc(uni, M, dw, batch); break;
        case Method::lhs: make_lhs(uni, perm_flat, M, dw, batch); break;
      }
      candidate_set_from_batch(batch, pair.map, pair.theta, *pair.target, cs);

      // selection probabilities and R
      double hi = kNegInf;
      double lw[1024];
      for (int m = 0; m < M; ++m) {
        lw[m] = cs.log_prior_w[m] + cs.log_r0[m];
        hi = std::max(hi, lw[m]);
      }
      if (!std::isfinite(hi)) continue;  // R = 0 node contributes nothing
      double probs[1024];
      double tot = 0.0;
      for (int m = 0; m < M; ++m) {
        probs[m] = std::exp(lw[m] - hi);
        tot += probs[m];
      }
      const double R = std::exp(hi) * tot;  // sum_m mu_m R0(omega_m)
      for (int m = 0; m < M; ++m) probs[m] /= tot;
      if (corrupt) std::reverse(probs, probs + M);

      for (int m = 0; m < M; ++m) {
        const double z = cs.z(0, m);
        const auto it = std::upper_bound(edges.begin(), edges.end(), z);
        if (it == edges.begin() || it == edges.end()) continue;
        const std::size_t b = static_cast<std::size_t>(it - edges.begin()) - 1;
        acc.coupled[b] += node_w * R * probs[m];
        acc.q[b] += node_w * probs[m];
        (void)bins;
      }
    }
  }
}

// Simpson integral of exp(log p) over [a, b] with an even node count.
double bin_target_mass(const Target& t, double a, double b) {
  constexpr int n = 128;
  const double h = (b - a) / n;
  Eigen::VectorXd z(1);
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    z[0] = a + h * i;
    const double f = std::exp(t.log_density(z));
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * f;
  }
  return s * h / 3.0;
}

}  // namespace

CouplingQuadrature coupling_quadrature(const EstimatorCouplingPair& pair,
                                       const Target& target,
                                       std::span<const double> z_grid,
                                       int quad_points, bool corrupt_coupling) {
  if (target.dim != 1)
    throw std::invalid_argument("coupling_quadrature: 1-d targets only");
  if (z_grid.size() < 2)
    throw std::invalid_argument("coupling_quadrature: need at least two grid edges");
  const int k = uniform_count(pair.method, pair.num_candidates, pair.map.d_omega());
  if (k > 2)
    throw std::invalid_argument("coupling_quadrature: cube dimension > 2");
  if (quad_points < 8 || quad_points % 2 != 0)
    throw std::invalid_argument("coupling_quadrature: quad_points must be even and >= 8");

  const std::size_t bins = z_grid.size() - 1;
  BinAccumulator fine(bins), coarse(bins);
  integrate_pass(pair, z_grid, quad_points, corrupt_coupling, fine);
  integrate_pass(pair, z_grid, quad_points / 2, corrupt_coupling, coarse);

  CouplingQuadrature out;
  out.coupled_mass = fine.coupled;
  out.q_mass = fine.q;
  out.target_mass.resize(bins);
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    out.target_mass[b] = bin_target_mass(target, z_grid[b], z_grid[b + 1]);
    total += out.target_mass[b];
  }

  double max_err = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (out.target_mass[b] < 1e-6 * total) continue;
    // convergence: halving the grid step must not move the estimate by > 10%
    const double ref = std::max(std::abs(fine.coupled[b]), 1e-300);
    if (std::abs(fine.coupled[b] - coarse.coupled[b]) > 0.10 * ref)
      throw std::runtime_error("coupling_quadrature: quadrature did not converge");
    max_err = std::max(max_err,
                       std::abs(fine.coupled[b] - out.target_mass[b]) / out.target_mass[b]);
  }
  out.max_rel_err = max_err;
  return out;
}

double check_validity(const EstimatorCouplingPair& pair, const Target& target,
                      std::span<const double> z_grid, int quad_points,
                      bool corrupt_coupling) {
  return coupling_quadrature(pair, target, z_grid, quad_points, corrupt_coupling)
      .max_rel_err;
}

std::vector<double> equal_mass_grid(const GaussianParams& theta, int bins) {
  if (theta.dim() != 1)
    throw std::invalid_argument("equal_mass_grid: 1-d only");
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(bins) - 1);
  for (int i = 1; i < bins; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(bins);
    edges.push_back(theta.mu[0] + theta.scale(0, 0) * gaussian_inv_cdf(p));
  }
  return edges;
}

}  // namespace dc
