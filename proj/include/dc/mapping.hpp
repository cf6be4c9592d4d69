#pragma once

#include <Eigen/Core>
#include <string>

namespace dc {

/// Variational parameters theta = (mu, C) of q = N(mu, C C^T).
/// C is lower triangular with strictly positive diagonal.
struct GaussianParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd scale;

  int dim() const { return static_cast<int>(mu.size()); }
  double log_det_scale() const;  // sum of log C_jj
  void validate() const;         // throws std::invalid_argument
};

GaussianParams identity_params(int d);

enum class MapKind { cartesian, elliptical };

MapKind map_kind_from_name(const std::string& name);
const char* map_kind_name(MapKind k);

/// Map from the unit cube to the standard Gaussian. Cartesian applies the
/// inverse normal CDF componentwise (cube dimension d); elliptical draws the
/// radius from the inverse chi_d CDF and the direction from d redundant
/// normal components, normalized (cube dimension d+1).
struct CubeMap {
  MapKind kind = MapKind::cartesian;
  int d = 1;

  int d_omega() const { return kind == MapKind::cartesian ? d : d + 1; }
};

/// omega (length d_omega, entries in [0,1]; 0/1 clamped to 1e-15 away from
/// the boundary) -> u ~ N(0, I_d).
void map_cube_to_standard(const CubeMap& map, const double* omega, double* u);
Eigen::VectorXd map_cube_to_standard(const CubeMap& map, const Eigen::VectorXd& omega);

/// 2-d elliptical map in angle form, u = F_chi2^{-1}(w1) * (cos 2*pi*w2, sin 2*pi*w2).
Eigen::Vector2d elliptical_angle_map_2d(double w1, double w2);

/// z = C u + mu.
Eigen::VectorXd affine_map(const GaussianParams& theta, const Eigen::VectorXd& u);

/// log N(z; mu, C C^T) by forward triangular solve.
double log_q(const GaussianParams& theta, const Eigen::VectorXd& z);

/// log q at z = affine_map(theta, u) given ||u||^2, via change of variables:
/// -(d/2) log 2*pi - sum_j log C_jj - ||u||^2 / 2.
double log_q_of_standard(const GaussianParams& theta, double u_squared_norm);

}  // namespace dc
