#include "dc/target.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dc/special.hpp"

namespace dc {

namespace {
constexpr double kLog2Pi = 1.8378770664093455;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

Target make_std_gaussian(int d, double evidence) {
  if (d < 1) throw std::invalid_argument("std_gaussian: d must be positive");
  if (!(evidence > 0.0)) throw std::invalid_argument("std_gaussian: evidence must be positive");
  Target t;
  t.dim = d;
  t.name = "std_gaussian";
  const double log_ev = std::log(evidence);
  t.log_density = [d, log_ev](Eigen::Ref<const Eigen::VectorXd> z) {
    return log_ev - 0.5 * z.squaredNorm() - 0.5 * d * kLog2Pi;
  };
  t.grad_log_density = [](Eigen::Ref<const Eigen::VectorXd> z,
                          Eigen::Ref<Eigen::VectorXd> g) { g = -z; };
  t.log_normalizer = log_ev;
  t.analytic_moments = {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
  t.reference_proposal = {Eigen::VectorXd::Zero(d), 2.0};
  return t;
}

Target make_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                     double evidence) {
  const int d = static_cast<int>(mu.size());
  if (d < 1) throw std::invalid_argument("gaussian: empty mean");
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("gaussian: covariance dimension mismatch");
  if (!(evidence > 0.0)) throw std::invalid_argument("gaussian: evidence must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian: covariance not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  double log_det_L = 0.0;
  for (int j = 0; j < d; ++j) log_det_L += std::log(L(j, j));
  const double log_const = std::log(evidence) - log_det_L - 0.5 * d * kLog2Pi;

  Target t;
  t.dim = d;
  t.name = "gaussian";
  t.log_density = [mu, L, log_const](Eigen::Ref<const Eigen::VectorXd> z) {
    Eigen::VectorXd w = z - mu;
    L.triangularView<Eigen::Lower>().solveInPlace(w);
    return log_const - 0.5 * w.squaredNorm();
  };
  t.grad_log_density = [mu, L](Eigen::Ref<const Eigen::VectorXd> z,
                               Eigen::Ref<Eigen::VectorXd> g) {
    Eigen::VectorXd w = z - mu;
    L.triangularView<Eigen::Lower>().solveInPlace(w);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
    g = -w;
  };
  t.log_normalizer = std::log(evidence);
  t.analytic_moments = {mu, cov};
  t.reference_proposal = {mu, 2.0 * std::sqrt(cov.diagonal().maxCoeff())};
  return t;
}

Target make_skewed_mixture_1d() {
  // component weights / means / sds; weights sum to 1 so log p(x) = 0
  static constexpr double w[3] = {0.55, 0.25, 0.20};
  static constexpr double m[3] = {0.0, 0.9, -4.0};
  static constexpr double s[3] = {0.6, 1.1, 0.8};

  Target t;
  t.dim = 1;
  t.name = "skewed_mixture_1d";
  t.log_density = [](Eigen::Ref<const Eigen::VectorXd> zv) {
    const double z = zv[0];
    double comp[3];
    double hi = kNegInf;
    for (int k = 0; k < 3; ++k) {
      const double r = (z - m[k]) / s[k];
      comp[k] = std::log(w[k]) - 0.5 * r * r - std::log(s[k]) - 0.5 * kLog2Pi;
      if (comp[k] > hi) hi = comp[k];
    }
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) acc += std::exp(comp[k] - hi);
    return hi + std::log(acc);
  };
  t.grad_log_density = [](Eigen::Ref<const Eigen::VectorXd> zv,
                          Eigen::Ref<Eigen::VectorXd> g) {
    const double z = zv[0];
    double comp[3];
    double hi = kNegInf;
    for (int k = 0; k < 3; ++k) {
      const double r = (z - m[k]) / s[k];
      comp[k] = std::log(w[k]) - 0.5 * r * r - std::log(s[k]) - 0.5 * kLog2Pi;
      if (comp[k] > hi) hi = comp[k];
    }
    double acc = 0.0, grad = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = std::exp(comp[k] - hi);
      acc += e;
      grad += e * (-(z - m[k]) / (s[k] * s[k]));
    }
    g[0] = grad / acc;
  };
  t.log_normalizer = 0.0;
  // mixture moments: mean = sum w m, var = sum w (s^2 + m^2) - mean^2
  double mean = 0.0, second = 0.0;
  for (int k = 0; k < 3; ++k) {
    mean += w[k] * m[k];
    second += w[k] * (s[k] * s[k] + m[k] * m[k]);
  }
  Eigen::VectorXd mu(1);
  mu << mean;
  Eigen::MatrixXd cov(1, 1);
  cov << second - mean * mean;
  t.analytic_moments = {mu, cov};
  Eigen::VectorXd pm(1);
  pm << -1.0;
  t.reference_proposal = {pm, 4.0};
  return t;
}

Target make_funnel(int d) {
  if (d < 2) throw std::invalid_argument("funnel: d must be >= 2");
  Target t;
  t.dim = d;
  t.name = "funnel";
  t.log_density = [d](Eigen::Ref<const Eigen::VectorXd> z) {
    const double z1 = z[0];
    double lp = -z1 * z1 / 18.0 - 0.5 * std::log(9.0) - 0.5 * kLog2Pi;
    const double inv_var = std::exp(-z1);
    for (int j = 1; j < d; ++j)
      lp += -0.5 * z[j] * z[j] * inv_var - 0.5 * (z1 + kLog2Pi);
    return lp;
  };
  t.grad_log_density = [d](Eigen::Ref<const Eigen::VectorXd> z,
                           Eigen::Ref<Eigen::VectorXd> g) {
    const double z1 = z[0];
    const double inv_var = std::exp(-z1);
    double sum_sq = 0.0;
    for (int j = 1; j < d; ++j) {
      sum_sq += z[j] * z[j];
      g[j] = -z[j] * inv_var;
    }
    g[0] = -z1 / 9.0 - 0.5 * (d - 1) + 0.5 * inv_var * sum_sq;
  };
  t.log_normalizer = 0.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * std::exp(4.5);
  cov(0, 0) = 9.0;
  t.analytic_moments = {Eigen::VectorXd::Zero(d), cov};
  return t;
}

Target make_logit_reg_small() {
  // fixed 1-feature dataset; latent (intercept, slope) with N(0, 4 I) prior
  static constexpr double xs[8] = {-2.5, -1.5, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0};
  static constexpr double ys[8] = {-1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0};
  static constexpr double prior_var = 4.0;

  Target t;
  t.dim = 2;
  t.name = "logit_reg_small";
  t.log_density = [](Eigen::Ref<const Eigen::VectorXd> th) {
    double lp = -0.5 * th.squaredNorm() / prior_var - std::log(prior_var) - kLog2Pi;
    for (int i = 0; i < 8; ++i) {
      const double margin = ys[i] * (th[0] + th[1] * xs[i]);
      lp -= margin > -30.0 ? std::log1p(std::exp(-margin)) : -margin;
    }
    return lp;
  };
  t.grad_log_density = [](Eigen::Ref<const Eigen::VectorXd> th,
                          Eigen::Ref<Eigen::VectorXd> g) {
    g = -th / prior_var;
    for (int i = 0; i < 8; ++i) {
      const double margin = ys[i] * (th[0] + th[1] * xs[i]);
      const double sig = 1.0 / (1.0 + std::exp(margin));  // sigma(-margin)
      g[0] += ys[i] * sig;
      g[1] += ys[i] * xs[i] * sig;
    }
  };
  t.reference_proposal = {Eigen::VectorXd::Zero(2), 3.0};
  return t;
}

Target builtin_target(const TargetSpec& spec) {
  if (spec.name == "std_gaussian") return make_std_gaussian(spec.dim, spec.evidence);
  if (spec.name == "gaussian") return make_gaussian(spec.mu, spec.cov, spec.evidence);
  if (spec.name == "skewed_mixture_1d") return make_skewed_mixture_1d();
  if (spec.name == "funnel") return make_funnel(spec.dim);
  if (spec.name == "logit_reg_small") return make_logit_reg_small();
  throw std::invalid_argument("unknown target: " + spec.name);
}

// ---------------------------------------------------------------------------
// Moment oracles
// ---------------------------------------------------------------------------

namespace {

struct GridMoments {
  double mass = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Trapezoid-rule moments of exp(log_density) over the tensor box, n nodes per
// axis. Self-normalizing, so no normalizer is needed.
GridMoments grid_moments(const Target& t, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, int n) {
  const int d = t.dim;
  GridMoments out;
  out.mean = Eigen::VectorXd::Zero(d);
  out.cov = Eigen::MatrixXd::Zero(d, d);

  std::vector<double> lps;
  Eigen::VectorXd z(d);
  double mx = kNegInf;

  auto node = [&](int j, int i) {
    return lo[j] + (hi[j] - lo[j]) * static_cast<double>(i) / (n - 1);
  };
  auto trap_w = [&](int i) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };

  if (d == 1) {
    lps.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      z[0] = node(0, i);
      lps[static_cast<std::size_t>(i)] = t.log_density(z);
      mx = std::max(mx, lps[static_cast<std::size_t>(i)]);
    }
    if (!std::isfinite(mx)) throw std::runtime_error("grid_moments: no mass in box");
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = trap_w(i) * std::exp(lps[static_cast<std::size_t>(i)] - mx);
      const double zz = node(0, i);
      m0 += w;
      m1 += w * zz;
      m2 += w * zz * zz;
    }
    const double h = (hi[0] - lo[0]) / (n - 1);
    out.mass = m0 * h * std::exp(mx);
    out.mean[0] = m1 / m0;
    out.cov(0, 0) = m2 / m0 - out.mean[0] * out.mean[0];
    return out;
  }

  // d == 2
  double m0 = 0.0;
  Eigen::Vector2d m1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  lps.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    z[0] = node(0, i);
    for (int j = 0; j < n; ++j) {
      z[1] = node(1, j);
      const double lp = t.log_density(z);
      lps[static_cast<std::size_t>(i) * n + j] = lp;
      mx = std::max(mx, lp);
    }
  }
  if (!std::isfinite(mx)) throw std::runtime_error("grid_moments: no mass in box");
  for (int i = 0; i < n; ++i) {
    const double zi = node(0, i);
    for (int j = 0; j < n; ++j) {
      const double zj = node(1, j);
      const double w =
          trap_w(i) * trap_w(j) * std::exp(lps[static_cast<std::size_t>(i) * n + j] - mx);
      m0 += w;
      m1[0] += w * zi;
      m1[1] += w * zj;
      m2(0, 0) += w * zi * zi;
      m2(1, 1) += w * zj * zj;
      m2(0, 1) += w * zi * zj;
    }
  }
  const double h0 = (hi[0] - lo[0]) / (n - 1);
  const double h1 = (hi[1] - lo[1]) / (n - 1);
  out.mass = m0 * h0 * h1 * std::exp(mx);
  out.mean = m1 / m0;
  out.cov = m2 / m0 - out.mean * out.mean.transpose();
  out.cov(1, 0) = out.cov(0, 1);
  return out;
}

double rel_change(const GridMoments& a, const GridMoments& b) {
  double r = (a.mean - b.mean).cwiseAbs().maxCoeff() / (1.0 + b.mean.cwiseAbs().maxCoeff());
  r = std::max(r, (a.cov - b.cov).cwiseAbs().maxCoeff() /
                      (1.0 + b.cov.cwiseAbs().maxCoeff()));
  return r;
}

}  // namespace

MomentOracle moment_oracle_quadrature(const Target& t) {
  if (t.dim > 2)
    throw std::invalid_argument("moment_oracle_quadrature: dim must be <= 2");
  const int d = t.dim;

  // coarse scan to locate the bulk
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, -30.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(d, 30.0);
  GridMoments rough = grid_moments(t, lo, hi, 301);

  // widen mean +- k*sd until moments stabilize
  GridMoments prev = rough;
  bool stable = false;
  double k = 8.0;
  for (int it = 0; it < 8; ++it, k *= 1.5) {
    Eigen::VectorXd sd = prev.cov.diagonal().cwiseMax(1e-6).cwiseSqrt();
    for (int j = 0; j < d; ++j) {
      lo[j] = prev.mean[j] - k * sd[j];
      hi[j] = prev.mean[j] + k * sd[j];
    }
    GridMoments cur = grid_moments(t, lo, hi, 513);
    if (it > 0 && rel_change(cur, prev) < 1e-5) {
      stable = true;
      prev = cur;
      break;
    }
    prev = cur;
  }
  if (!stable)
    throw std::runtime_error(
        "moment_oracle_quadrature: grid widening failed to stabilize");

  // refinement check: doubling the node count must move the mean by < 1e-4
  GridMoments fine = grid_moments(t, lo, hi, 1025);
  if ((fine.mean - prev.mean).cwiseAbs().maxCoeff() >= 1e-4) {
    GridMoments finer = grid_moments(t, lo, hi, 2049);
    if ((finer.mean - fine.mean).cwiseAbs().maxCoeff() >= 1e-4)
      throw std::runtime_error("moment_oracle_quadrature: refinement did not converge");
    fine = finer;
  }
  return {fine.mean, fine.cov, OracleSource::grid_quadrature};
}

MomentOracle moment_oracle_importance(const Target& t, long budget, RngStream& rng) {
  if (!t.reference_proposal)
    throw std::invalid_argument("moment_oracle_importance: no reference proposal");
  if (budget < 100) throw std::invalid_argument("moment_oracle_importance: budget too small");
  const int d = t.dim;
  const Eigen::VectorXd& pm = t.reference_proposal->mean;
  const double sd = t.reference_proposal->sd;
  const double log_prop_const = -0.5 * d * kLog2Pi - d * std::log(sd);

  std::vector<double> logw(static_cast<std::size_t>(budget));
  Eigen::MatrixXd zs(d, budget);
  Eigen::VectorXd z(d);
  for (long i = 0; i < budget; ++i) {
    for (int j = 0; j < d; ++j) z[j] = pm[j] + sd * gaussian_inv_cdf(rng.uniform01());
    zs.col(i) = z;
    const double lq = log_prop_const - 0.5 * (z - pm).squaredNorm() / (sd * sd);
    logw[static_cast<std::size_t>(i)] = t.log_density(z) - lq;
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double sw = 0.0, sw2 = 0.0;
  for (double& lw : logw) {
    lw = std::exp(lw - mx);
    sw += lw;
    sw2 += lw * lw;
  }
  const double ess = sw * sw / sw2;
  if (ess < static_cast<double>(budget) / 100.0)
    throw std::runtime_error("moment_oracle_importance: effective sample size below budget/100");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (long i = 0; i < budget; ++i) mean += logw[static_cast<std::size_t>(i)] * zs.col(i);
  mean /= sw;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < budget; ++i) {
    const Eigen::VectorXd c = zs.col(i) - mean;
    cov += logw[static_cast<std::size_t>(i)] * c * c.transpose();
  }
  cov /= sw;
  return {mean, cov, OracleSource::long_run_importance_sampling};
}

MomentOracle moment_oracle(const Target& t, long budget) {
  if (t.analytic_moments)
    return {t.analytic_moments->mean, t.analytic_moments->cov, OracleSource::analytic};
  if (t.dim <= 2) return moment_oracle_quadrature(t);
  RngStream rng(0xD1CEu, 0);
  return moment_oracle_importance(t, budget, rng);
}

}  // namespace dc
