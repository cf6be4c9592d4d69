#include "dc/objective.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dc/estimator.hpp"
#include "dc/stats.hpp"

namespace dc {

namespace {
constexpr double kLog2Pi = 1.8378770664093455;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

SampleBank draw_bank(Method method, int M, const CubeMap& map, int N, RngStream& rng) {
  if (N < 1) throw std::invalid_argument("draw_bank: N must be positive");
  SampleBank bank;
  bank.method = method;
  bank.M = M;
  bank.map = map;
  bank.N = N;
  bank.u.resize(static_cast<std::size_t>(N));
  bank.u_sq.resize(static_cast<std::size_t>(N));

  WeightedCubeBatch batch;
  double wbuf[72];
  for (int n = 0; n < N; ++n) {
    sample_batch_into(method, rng, M, map.d_omega(), batch);
    if (n == 0) bank.log_prior_w = batch.weights.array().log();
    Eigen::MatrixXd& U = bank.u[static_cast<std::size_t>(n)];
    U.resize(map.d, batch.size());
    for (int m = 0; m < batch.size(); ++m) {
      for (int j = 0; j < batch.dim(); ++j) wbuf[j] = batch.points(m, j);
      map_cube_to_standard(map, wbuf, U.col(m).data());
    }
    bank.u_sq[static_cast<std::size_t>(n)] = U.colwise().squaredNorm();
  }
  return bank;
}

namespace {

// log R for one bank entry; log r0_m = log p(z_m) + (d/2) log 2pi + logdetC + ||u_m||^2/2
double bank_log_R(const GaussianParams& theta, const SampleBank& bank,
                  const Target& target, std::size_t n, double log_det_C,
                  Eigen::MatrixXd& z_scratch) {
  const Eigen::MatrixXd& U = bank.u[n];
  const int M = static_cast<int>(U.cols());
  const double d_half_log2pi = 0.5 * theta.dim() * kLog2Pi;
  z_scratch.noalias() = theta.scale.triangularView<Eigen::Lower>() * U;
  z_scratch.colwise() += theta.mu;
  double hi = kNegInf;
  double lw[1024];
  for (int m = 0; m < M; ++m) {
    const double lr0 = target.log_density(z_scratch.col(m)) + d_half_log2pi +
                       log_det_C + 0.5 * bank.u_sq[n][m];
    lw[m] = bank.log_prior_w[m] + lr0;
    hi = std::max(hi, lw[m]);
  }
  if (!std::isfinite(hi)) return kNegInf;
  double s = 0.0;
  for (int m = 0; m < M; ++m) s += std::exp(lw[m] - hi);
  return hi + std::log(s);
}

}  // namespace

double empirical_elbo(const GaussianParams& theta, const SampleBank& bank,
                      const Target& target) {
  theta.validate();
  if (theta.dim() != bank.map.d || target.dim != bank.map.d)
    throw std::invalid_argument("empirical_elbo: dimension mismatch");
  const double log_det_C = theta.log_det_scale();
  Eigen::MatrixXd z;
  std::vector<double> vals(static_cast<std::size_t>(bank.N));
  for (std::size_t n = 0; n < vals.size(); ++n)
    vals[n] = bank_log_R(theta, bank, target, n, log_det_C, z);
  return pairwise_sum(vals) / static_cast<double>(bank.N);
}

ElboGradient elbo_gradient(const GaussianParams& theta, const SampleBank& bank,
                           const Target& target) {
  theta.validate();
  const int d = theta.dim();
  if (d != bank.map.d || target.dim != d)
    throw std::invalid_argument("elbo_gradient: dimension mismatch");
  const double log_det_C = theta.log_det_scale();
  const double d_half_log2pi = 0.5 * d * kLog2Pi;

  ElboGradient out;
  out.d_mu = Eigen::VectorXd::Zero(d);
  out.d_scale = Eigen::MatrixXd::Zero(d, d);

  Eigen::MatrixXd z;
  Eigen::VectorXd g(d);
  std::vector<double> vals(static_cast<std::size_t>(bank.N));
  double lw[1024];
  double sm[1024];

  for (int n = 0; n < bank.N; ++n) {
    const Eigen::MatrixXd& U = bank.u[static_cast<std::size_t>(n)];
    const int M = static_cast<int>(U.cols());
    z.noalias() = theta.scale.triangularView<Eigen::Lower>() * U;
    z.colwise() += theta.mu;
    double hi = kNegInf;
    for (int m = 0; m < M; ++m) {
      const double lr0 = target.log_density(z.col(m)) + d_half_log2pi + log_det_C +
                         0.5 * bank.u_sq[static_cast<std::size_t>(n)][m];
      lw[m] = bank.log_prior_w[m] + lr0;
      hi = std::max(hi, lw[m]);
    }
    if (!std::isfinite(hi)) {
      vals[static_cast<std::size_t>(n)] = kNegInf;
      continue;  // a zero-mass batch contributes no gradient
    }
    double tot = 0.0;
    for (int m = 0; m < M; ++m) {
      sm[m] = std::exp(lw[m] - hi);
      tot += sm[m];
    }
    vals[static_cast<std::size_t>(n)] = hi + std::log(tot);
    for (int m = 0; m < M; ++m) {
      const double w = sm[m] / tot;
      target.grad_log_density(z.col(m), g);
      out.d_mu += w * g;
      // lower-triangular part of g * u^T
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) out.d_scale(i, j) += w * g[i] * U(j, m);
    }
  }
  const double invN = 1.0 / static_cast<double>(bank.N);
  out.d_mu *= invN;
  out.d_scale *= invN;
  for (int j = 0; j < d; ++j) out.d_scale(j, j) += 1.0 / theta.scale(j, j);
  out.value = pairwise_sum(vals) * invN;
  return out;
}

GaussianParams laplace_init(const Target& target, const LaplaceOptions& opts) {
  const int d = target.dim;
  Eigen::VectorXd x = opts.start.size() == d ? opts.start : Eigen::VectorXd::Zero(d);
  double f = target.log_density(x);
  if (!std::isfinite(f))
    throw std::invalid_argument("laplace_init: log density not finite at the start point");

  // MAP by gradient ascent with backtracking
  Eigen::VectorXd g(d), trial(d);
  double step = 1.0;
  for (int it = 0; it < opts.max_steps; ++it) {
    target.grad_log_density(x, g);
    if (g.norm() < opts.grad_tol) break;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      trial = x + step * g;
      const double ft = target.log_density(trial);
      if (std::isfinite(ft) && ft > f) {
        x = trial;
        f = ft;
        step *= 2.0;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // 50 shrinking trials all decreased the objective
  }

  // central-difference Hessian of log p, symmetrized
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd gp(d), gm(d);
  for (int j = 0; j < d; ++j) {
    trial = x;
    trial[j] += opts.fd_step;
    target.grad_log_density(trial, gp);
    trial[j] -= 2.0 * opts.fd_step;
    target.grad_log_density(trial, gm);
    H.col(j) = (gp - gm) / (2.0 * opts.fd_step);
  }
  H = 0.5 * (H + H.transpose()).eval();

  GaussianParams theta;
  theta.mu = x;
  Eigen::LLT<Eigen::MatrixXd> neg_llt(-H);
  if (neg_llt.info() == Eigen::Success) {
    const Eigen::MatrixXd sigma = (-H).llt().solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::LLT<Eigen::MatrixXd> sig_llt(sigma);
    if (sig_llt.info() == Eigen::Success) {
      theta.scale = sig_llt.matrixL();
      return theta;
    }
  }
  theta.scale = opts.fallback_scale * Eigen::MatrixXd::Identity(d, d);
  return theta;
}

// ---------------------------------------------------------------------------
// Optimizer: unconstrained raw vector <-> GaussianParams
// ---------------------------------------------------------------------------

namespace {

int raw_size(int d) { return d + d * (d + 1) / 2; }

Eigen::VectorXd pack(const GaussianParams& theta) {
  const int d = theta.dim();
  Eigen::VectorXd x(raw_size(d));
  x.head(d) = theta.mu;
  int k = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j)
      x[k++] = i == j ? std::log(theta.scale(i, i)) : theta.scale(i, j);
  return x;
}

GaussianParams unpack(const Eigen::VectorXd& x, int d) {
  GaussianParams theta;
  theta.mu = x.head(d);
  theta.scale = Eigen::MatrixXd::Zero(d, d);
  int k = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      theta.scale(i, j) = i == j ? std::exp(x[k]) : x[k];
      ++k;
    }
  return theta;
}

// objective and gradient in raw coordinates (maximization sign)
double eval_raw(const Eigen::VectorXd& x, int d, const SampleBank& bank,
                const Target& target, Eigen::VectorXd& grad) {
  const GaussianParams theta = unpack(x, d);
  const ElboGradient eg = elbo_gradient(theta, bank, target);
  grad.resize(x.size());
  grad.head(d) = eg.d_mu;
  int k = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      grad[k] = i == j ? eg.d_scale(i, i) * theta.scale(i, i) : eg.d_scale(i, j);
      ++k;
    }
  return eg.value;
}

struct RunOutcome {
  Eigen::VectorXd x;
  std::vector<double> trace;
  double final_value = kNegInf;
  int iterations = 0;
  bool converged = false;
};

bool rel_change_small(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  if (n < 11) return false;
  const double a = trace[n - 11], b = trace[n - 1];
  return std::abs(b - a) < 1e-9 * (1.0 + std::abs(b));
}

RunOutcome run_adam(const Eigen::VectorXd& x0, int d, const SampleBank& bank,
                    const Target& target, const OptimizerSettings& st) {
  RunOutcome out;
  out.x = x0;
  Eigen::VectorXd g, m = Eigen::VectorXd::Zero(x0.size()),
                     v = Eigen::VectorXd::Zero(x0.size());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= st.iters; ++t) {
    const double f = eval_raw(out.x, d, bank, target, g);
    if (t == 1 && !std::isfinite(f))
      throw std::runtime_error("optimize: objective not finite at the initial point");
    out.trace.push_back(f);
    out.iterations = t;
    if (g.norm() < st.grad_tol) {
      out.converged = true;
      break;
    }
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);
    out.x += st.step * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
  }
  Eigen::VectorXd gf;
  out.final_value = eval_raw(out.x, d, bank, target, gf);
  out.trace.push_back(out.final_value);
  if (!out.converged)
    out.converged = gf.norm() < st.grad_tol || rel_change_small(out.trace);
  return out;
}

// strong-Wolfe line search (bracket + zoom), minimizing phi(a) = -elbo(x + a p)
struct LineEval {
  double f;  // -elbo
  Eigen::VectorXd grad;  // of -elbo
};

RunOutcome run_lbfgs(const Eigen::VectorXd& x0, int d, const SampleBank& bank,
                     const Target& target, const OptimizerSettings& st) {
  const double c1 = 1e-4, c2 = 0.9;
  const int mem = st.lbfgs_memory;

  auto eval_neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double f = eval_raw(x, d, bank, target, g);
    g = -g;
    return -f;
  };

  RunOutcome out;
  out.x = x0;
  Eigen::VectorXd g(x0.size());
  double f = eval_neg(out.x, g);
  if (!std::isfinite(f))
    throw std::runtime_error("optimize: objective not finite at the initial point");
  out.trace.push_back(-f);

  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho;

  for (int t = 1; t <= st.iters; ++t) {
    out.iterations = t;
    if (g.norm() < st.grad_tol) {
      out.converged = true;
      break;
    }
    // two-loop recursion
    Eigen::VectorXd q = g;
    const int h = static_cast<int>(s_hist.size());
    std::vector<double> alpha(static_cast<std::size_t>(h));
    for (int i = h - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] =
          rho[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    if (h > 0) {
      const auto& sl = s_hist.back();
      const auto& yl = y_hist.back();
      q *= sl.dot(yl) / yl.squaredNorm();
    }
    for (int i = 0; i < h; ++i) {
      const double beta =
          rho[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)].dot(q);
      q += (alpha[static_cast<std::size_t>(i)] - beta) * s_hist[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd p = -q;
    double dg0 = g.dot(p);
    if (dg0 >= 0.0) {  // not a descent direction; reset
      p = -g;
      dg0 = g.dot(p);
      s_hist.clear();
      y_hist.clear();
      rho.clear();
    }

    // strong Wolfe search
    double a_prev = 0.0, f_prev = f;
    double a = t == 1 ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    double a_final = 0.0;
    Eigen::VectorXd x_new, g_new(g.size());
    double f_new = f;
    bool found = false;
    double lo = 0.0, hi_a = 0.0, f_lo = f;
    bool bracketed = false;
    for (int ls = 0; ls < 30 && !found; ++ls) {
      x_new = out.x + a * p;
      f_new = eval_neg(x_new, g_new);
      if (f_new > f + c1 * a * dg0 || (ls > 0 && f_new >= f_prev)) {
        lo = a_prev;
        hi_a = a;
        f_lo = f_prev;
        bracketed = true;
        break;
      }
      const double dg = g_new.dot(p);
      if (std::abs(dg) <= -c2 * dg0) {
        found = true;
        a_final = a;
        break;
      }
      if (dg >= 0.0) {
        lo = a;
        hi_a = a_prev;
        f_lo = f_new;
        bracketed = true;
        break;
      }
      a_prev = a;
      f_prev = f_new;
      a *= 2.0;
    }
    if (!found && bracketed) {
      for (int zi = 0; zi < 30; ++zi) {
        a = 0.5 * (lo + hi_a);
        x_new = out.x + a * p;
        f_new = eval_neg(x_new, g_new);
        if (f_new > f + c1 * a * dg0 || f_new >= f_lo) {
          hi_a = a;
        } else {
          const double dg = g_new.dot(p);
          if (std::abs(dg) <= -c2 * dg0) {
            found = true;
            a_final = a;
            break;
          }
          if (dg * (hi_a - lo) >= 0.0) hi_a = lo;
          lo = a;
          f_lo = f_new;
        }
      }
    }
    if (!found) break;  // line search failed; keep the current iterate

    const Eigen::VectorXd s = a_final * p;
    const Eigen::VectorXd y = g_new - g;
    out.x = x_new;
    f = f_new;
    g = g_new;
    out.trace.push_back(-f);
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > mem) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho.erase(rho.begin());
      }
    }
    if (rel_change_small(out.trace) && g.norm() < 1e-3) {
      out.converged = g.norm() < st.grad_tol;
      break;
    }
  }
  if (!out.converged) out.converged = g.norm() < st.grad_tol || rel_change_small(out.trace);
  out.final_value = -f;
  return out;
}

}  // namespace

OptResult optimize(const Target& target, const SampleBank& bank,
                   const GaussianParams& init, const OptimizerSettings& settings) {
  init.validate();
  if (init.dim() != bank.map.d || target.dim != bank.map.d)
    throw std::invalid_argument("optimize: dimension mismatch");
  const int d = init.dim();

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(pack(init));
  if (settings.widen_restart) {
    GaussianParams wide = init;
    wide.scale *= settings.widen_factor;
    starts.push_back(pack(wide));
  }

  RunOutcome best;
  bool have = false;
  for (const Eigen::VectorXd& x0 : starts) {
    RunOutcome run = settings.engine == OptimizerSettings::Engine::adam
                         ? run_adam(x0, d, bank, target, settings)
                         : run_lbfgs(x0, d, bank, target, settings);
    if (!have || run.final_value > best.final_value) {
      best = std::move(run);
      have = true;
    }
  }

  OptResult res;
  res.theta_star = unpack(best.x, d);
  res.elbo_trace = std::move(best.trace);
  res.final_elbo = best.final_value;
  res.iterations = best.iterations;
  res.converged = best.converged;
  return res;
}

}  // namespace dc
