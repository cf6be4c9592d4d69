#include "dc/mapping.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dc/special.hpp"

namespace dc {

namespace {
constexpr double kBoundaryEps = 1e-15;
constexpr double kLog2Pi = 1.8378770664093455;

inline double clamp_unit(double w) {
  if (w < kBoundaryEps) return kBoundaryEps;
  if (w > 1.0 - kBoundaryEps) return 1.0 - kBoundaryEps;
  return w;
}
}  // namespace

double GaussianParams::log_det_scale() const {
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) s += std::log(scale(j, j));
  return s;
}

void GaussianParams::validate() const {
  const int d = dim();
  if (scale.rows() != d || scale.cols() != d)
    throw std::invalid_argument("GaussianParams: scale must be d x d");
  for (int j = 0; j < d; ++j) {
    if (!(scale(j, j) > 0.0))
      throw std::invalid_argument("GaussianParams: diag(C) must be positive");
    for (int i = 0; i < j; ++i)
      if (scale(i, j) != 0.0)
        throw std::invalid_argument("GaussianParams: C must be lower triangular");
  }
}

GaussianParams identity_params(int d) {
  return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
}

MapKind map_kind_from_name(const std::string& name) {
  if (name == "cartesian") return MapKind::cartesian;
  if (name == "elliptical") return MapKind::elliptical;
  throw std::invalid_argument("unknown map kind: " + name);
}

const char* map_kind_name(MapKind k) {
  return k == MapKind::cartesian ? "cartesian" : "elliptical";
}

void map_cube_to_standard(const CubeMap& map, const double* omega, double* u) {
  const int d = map.d;
  if (map.kind == MapKind::cartesian) {
    for (int j = 0; j < d; ++j) u[j] = gaussian_inv_cdf(clamp_unit(omega[j]));
    return;
  }
  const double r = chi_inv_cdf(clamp_unit(omega[0]), d);
  double norm2 = 0.0;
  for (int j = 0; j < d; ++j) {
    u[j] = gaussian_inv_cdf(clamp_unit(omega[j + 1]));
    norm2 += u[j] * u[j];
  }
  const double norm = std::sqrt(norm2);
  if (norm > 0.0) {
    const double f = r / norm;
    for (int j = 0; j < d; ++j) u[j] *= f;
  } else {
    // all direction components hit the median exactly; fix a deterministic axis
    u[0] = r;
    for (int j = 1; j < d; ++j) u[j] = 0.0;
  }
}

Eigen::VectorXd map_cube_to_standard(const CubeMap& map, const Eigen::VectorXd& omega) {
  if (omega.size() != map.d_omega())
    throw std::invalid_argument("map_cube_to_standard: omega has wrong dimension");
  Eigen::VectorXd u(map.d);
  map_cube_to_standard(map, omega.data(), u.data());
  return u;
}

Eigen::Vector2d elliptical_angle_map_2d(double w1, double w2) {
  const double r = chi_inv_cdf(clamp_unit(w1), 2);
  const double a = 2.0 * std::numbers::pi * w2;
  return {r * std::cos(a), r * std::sin(a)};
}

Eigen::VectorXd affine_map(const GaussianParams& theta, const Eigen::VectorXd& u) {
  if (u.size() != theta.dim())
    throw std::invalid_argument("affine_map: dimension mismatch");
  return theta.scale.triangularView<Eigen::Lower>() * u + theta.mu;
}

double log_q(const GaussianParams& theta, const Eigen::VectorXd& z) {
  const int d = theta.dim();
  if (z.size() != d) throw std::invalid_argument("log_q: dimension mismatch");
  Eigen::VectorXd w = z - theta.mu;
  theta.scale.triangularView<Eigen::Lower>().solveInPlace(w);
  return -0.5 * d * kLog2Pi - theta.log_det_scale() - 0.5 * w.squaredNorm();
}

double log_q_of_standard(const GaussianParams& theta, double u_squared_norm) {
  return -0.5 * theta.dim() * kLog2Pi - theta.log_det_scale() - 0.5 * u_squared_norm;
}

}  // namespace dc
