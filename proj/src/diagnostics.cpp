#include "dc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "dc/stats.hpp"

namespace dc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093455;
}  // namespace

ElboEstimate eval_elbo(const EstimatorCouplingPair& pair, const SampleBank& eval_bank) {
  std::vector<double> vals(static_cast<std::size_t>(eval_bank.N));
  const GaussianParams& theta = pair.theta;
  const double log_det_C = theta.log_det_scale();
  const double d_half_log2pi = 0.5 * theta.dim() * kLog2Pi;
  Eigen::MatrixXd z;
  double lw[1024];
  for (int n = 0; n < eval_bank.N; ++n) {
    const Eigen::MatrixXd& U = eval_bank.u[static_cast<std::size_t>(n)];
    const int M = static_cast<int>(U.cols());
    z.noalias() = theta.scale.triangularView<Eigen::Lower>() * U;
    z.colwise() += theta.mu;
    double hi = kNegInf;
    for (int m = 0; m < M; ++m) {
      lw[m] = eval_bank.log_prior_w[m] + pair.target->log_density(z.col(m)) +
              d_half_log2pi + log_det_C +
              0.5 * eval_bank.u_sq[static_cast<std::size_t>(n)][m];
      hi = std::max(hi, lw[m]);
    }
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += std::exp(lw[m] - hi);
    vals[static_cast<std::size_t>(n)] = std::isfinite(hi) ? hi + std::log(s) : kNegInf;
  }
  const MeanSe ms = mean_and_se(vals);
  return {ms.mean, ms.se};
}

namespace {

// per-bin quadrature of the normalized posterior over [a,b] (1-d) or a cell (2-d)
double cell_posterior_mass_1d(const Target& t, double log_px, double a, double b) {
  constexpr int n = 32;
  const double h = (b - a) / n;
  Eigen::VectorXd z(1);
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    z[0] = a + h * i;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * std::exp(t.log_density(z) - log_px);
  }
  return s * h / 3.0;
}

double cell_posterior_mass_2d(const Target& t, double log_px, double a0, double b0,
                              double a1, double b1) {
  constexpr int n = 8;
  const double h0 = (b0 - a0) / n, h1 = (b1 - a1) / n;
  Eigen::VectorXd z(2);
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double wi = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    z[0] = a0 + h0 * i;
    for (int j = 0; j <= n; ++j) {
      const double wj = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      z[1] = a1 + h1 * j;
      s += wi * wj * std::exp(t.log_density(z) - log_px);
    }
  }
  return s * h0 * h1 / 9.0;
}

}  // namespace

GapReport gap_report(const EstimatorCouplingPair& pair, const Target& target,
                     const SampleBank& eval_bank, const MomentOracle& oracle,
                     RngStream& rng, const GapOptions& opts) {
  if (!target.log_normalizer)
    throw std::invalid_argument("gap_report: target needs a known log normalizer");
  GapReport rep;
  const ElboEstimate e = eval_elbo(pair, eval_bank);
  rep.elbo_hat = e.elbo_hat;
  rep.elbo_se = e.se;
  rep.log_px = *target.log_normalizer;
  rep.gap = rep.log_px - rep.elbo_hat;

  const int d = target.dim;
  if (d > 2) return rep;  // kl fields absent

  // grid over oracle mean +- k sd
  const Eigen::VectorXd sd = oracle.cov.diagonal().cwiseSqrt();
  const int bins = d == 1 ? opts.bins_1d : opts.bins_per_axis_2d;
  Eigen::VectorXd lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    lo[j] = oracle.mean[j] - opts.range_sigmas * sd[j];
    hi[j] = oracle.mean[j] + opts.range_sigmas * sd[j];
  }

  // oracle posterior mass per bin
  const std::size_t n_bins = d == 1 ? static_cast<std::size_t>(bins)
                                    : static_cast<std::size_t>(bins) * bins;
  std::vector<double> p_mass(n_bins, 0.0);
  if (d == 1) {
    const double h = (hi[0] - lo[0]) / bins;
    for (int b = 0; b < bins; ++b)
      p_mass[static_cast<std::size_t>(b)] =
          cell_posterior_mass_1d(target, rep.log_px, lo[0] + b * h, lo[0] + (b + 1) * h);
  } else {
    const double h0 = (hi[0] - lo[0]) / bins, h1 = (hi[1] - lo[1]) / bins;
    for (int b0 = 0; b0 < bins; ++b0)
      for (int b1 = 0; b1 < bins; ++b1)
        p_mass[static_cast<std::size_t>(b0) * bins + b1] =
            cell_posterior_mass_2d(target, rep.log_px, lo[0] + b0 * h0,
                                   lo[0] + (b0 + 1) * h0, lo[1] + b1 * h1,
                                   lo[1] + (b1 + 1) * h1);
  }
  double covered = 0.0;
  for (double m : p_mass) covered += m;
  rep.grid_mass_coverage = covered;
  if (covered < 0.999)
    throw std::runtime_error("gap_report: grid covers < 99.9% of the posterior mass");

  // binned coupled draws
  std::vector<double> q_count(n_bins, 0.0);
  WeightedCubeBatch batch;
  CandidateSet cs;
  long inside = 0;
  for (long i = 0; i < opts.kl_draws; ++i) {
    pair.evaluate_into(rng, batch, cs);
    int idx;
    try {
      idx = sample_coupling_index(cs, rng);
    } catch (const DegenerateBatch&) {
      continue;
    }
    bool in = true;
    std::size_t bin = 0;
    for (int j = 0; j < d; ++j) {
      const double z = cs.z(j, idx);
      if (z < lo[j] || z >= hi[j]) {
        in = false;
        break;
      }
      const int b = static_cast<int>((z - lo[j]) / (hi[j] - lo[j]) * bins);
      bin = bin * static_cast<std::size_t>(bins) + static_cast<std::size_t>(std::min(b, bins - 1));
    }
    if (!in) continue;
    q_count[bin] += 1.0;
    ++inside;
  }
  rep.draw_coverage = static_cast<double>(inside) / static_cast<double>(opts.kl_draws);

  // KL[Qhat || phat] over bins with target mass >= 1e-12, delta-method SE
  const double n_draws = static_cast<double>(opts.kl_draws);
  double kl = 0.0, second = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (p_mass[b] < 1e-12 || q_count[b] == 0.0) continue;
    const double qh = q_count[b] / n_draws;
    const double term = std::log(qh / p_mass[b]);
    kl += qh * term;
    second += qh * term * term;
  }
  rep.kl_z_hat = kl;
  rep.kl_z_se = std::sqrt(std::max(0.0, second - kl * kl) / n_draws);
  return rep;
}

MomentError moment_error(const EstimatorCouplingPair& pair, const MomentOracle& oracle,
                         long n, RngStream& rng) {
  if (n < 100) throw std::invalid_argument("moment_error: n must be >= 100");
  const int d = pair.map.d;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(d, d);
  WeightedCubeBatch batch;
  CandidateSet cs;
  long ok = 0, degenerate = 0;
  for (long i = 0; i < n; ++i) {
    pair.evaluate_into(rng, batch, cs);
    int idx;
    try {
      idx = sample_coupling_index(cs, rng);
    } catch (const DegenerateBatch&) {
      ++degenerate;
      continue;
    }
    const auto z = cs.z.col(idx);
    sum += z;
    sum2 += z * z.transpose();
    ++ok;
  }
  if (degenerate * 2 > n)
    throw std::runtime_error("moment_error: more than half the batches were degenerate");
  const Eigen::VectorXd mean = sum / static_cast<double>(ok);
  Eigen::MatrixXd cov = sum2 / static_cast<double>(ok) - mean * mean.transpose();
  cov *= static_cast<double>(ok) / static_cast<double>(ok - 1);

  MomentError out;
  out.mean_err = (mean - oracle.mean).squaredNorm();
  out.cov_err = (cov - oracle.cov).squaredNorm();
  out.n_samples = ok;
  out.degenerate = degenerate;
  return out;
}

CorrelationReport sweep_correlation(std::span<const SweepRecord> records) {
  // index iid records by (target, map, M, seed) and the M=1 baselines
  std::map<std::string, const SweepRecord*> iid_exact, iid_base;
  auto key = [](const SweepRecord& r, bool with_m) {
    return r.target + "|" + r.map + (with_m ? "|" + std::to_string(r.M) : "") + "|" +
           std::to_string(r.seed);
  };
  for (const SweepRecord& r : records) {
    if (r.method != "iid" || !r.error.empty()) continue;
    iid_exact[key(r, true)] = &r;
    if (r.M == 1) iid_base[key(r, false)] = &r;
  }

  std::vector<double> d_elbo, d_logerr;
  for (const SweepRecord& r : records) {
    if (r.method == "iid" || !r.error.empty()) continue;
    if (!r.final_elbo || !r.cov_err) continue;
    const SweepRecord* base = nullptr;
    if (auto it = iid_exact.find(key(r, true)); it != iid_exact.end()) base = it->second;
    else if (auto it2 = iid_base.find(key(r, false)); it2 != iid_base.end()) base = it2->second;
    if (!base || !base->final_elbo || !base->cov_err) continue;
    if (!(*r.cov_err > 0.0) || !(*base->cov_err > 0.0)) continue;
    d_elbo.push_back(*r.final_elbo - *base->final_elbo);
    d_logerr.push_back(std::log(*base->cov_err) - std::log(*r.cov_err));
  }
  if (d_elbo.size() < 5)
    throw std::invalid_argument("sweep_correlation: fewer than 5 valid records");

  CorrelationReport rep;
  rep.n_pairs = static_cast<int>(d_elbo.size());
  rep.pearson = pearson(d_elbo, d_logerr);
  if (std::isnan(rep.pearson)) rep.note = "undefined: zero variance in improvements";

  std::vector<double> fe, fl;
  for (std::size_t i = 0; i < d_elbo.size(); ++i)
    if (d_elbo[i] > 0.0 && d_logerr[i] > 0.0) {
      fe.push_back(d_elbo[i]);
      fl.push_back(d_logerr[i]);
    }
  rep.pearson_filtered =
      fe.size() >= 2 ? pearson(fe, fl) : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace dc
