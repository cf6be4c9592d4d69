#pragma once

// Shared test-side oracles: quadrature rules, finite differences, and small
// statistical helpers kept independent of the library's implementation paths.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <vector>

#include "dc/rng.hpp"
#include "dc/target.hpp"

namespace dctest {

/// Trapezoid rule for f on [a, b] with n+1 nodes.
inline double trapezoid(const std::function<double(double)>& f, double a, double b,
                        int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + h * i);
  return s * h;
}

/// Simpson rule (n even).
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += ((i % 2 == 1) ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

/// Central finite-difference gradient of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / (1 + |a_i|)
inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double r = 0.0;
  for (int i = 0; i < a.size(); ++i)
    r = std::max(r, std::abs(a[i] - b[i]) / (1.0 + std::abs(a[i])));
  return r;
}

/// Standard normal draw through the library RNG (inverse-CDF free, Box-Muller
/// style is avoided on purpose; tests that need normals use this).
inline double erfinv_normal(dc::RngStream& rng) {
  // sum of 12 uniforms minus 6: Irwin-Hall approximation is NOT used in
  // assertions, only to decorrelate scan starts.
  double s = 0.0;
  for (int i = 0; i < 12; ++i) s += rng.uniform01();
  return s - 6.0;
}

/// Random point with finite density for gradient checks: rejection from a box.
inline Eigen::VectorXd random_finite_point(const dc::Target& t, dc::RngStream& rng,
                                           double box = 3.0) {
  Eigen::VectorXd z(t.dim);
  for (int tries = 0; tries < 100; ++tries) {
    for (int j = 0; j < t.dim; ++j) z[j] = (2.0 * rng.uniform01() - 1.0) * box;
    if (std::isfinite(t.log_density(z))) return z;
  }
  z.setZero();
  return z;
}

}  // namespace dctest
