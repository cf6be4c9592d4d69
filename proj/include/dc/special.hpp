#pragma once

namespace dc {

/// Standard normal CDF via erfc, stable in both tails.
double normal_cdf(double x);

double normal_logpdf(double x);

/// Inverse standard normal CDF. Rational initial approximation refined by a
/// Newton step against the erfc-based CDF; absolute error <= 1e-9 on
/// [1e-12, 1-1e-12]. Antisymmetric: for p > 1/2 evaluates as -inv(1-p), so
/// pairs (p, 1-p) with exact complements map to exact negatives.
/// Throws std::invalid_argument outside (0,1).
double gaussian_inv_cdf(double p);

/// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
/// continued fraction for the upper tail otherwise.
double gamma_p(double a, double x);

/// chi_d CDF, F(r) = P(d/2, r^2/2).
double chi_cdf(double r, int d);

/// Inverse chi_d CDF: bracketed Newton on gamma_p with a Wilson-Hilferty
/// starting guess; |F(r) - p| <= 1e-9. Throws std::invalid_argument outside
/// (0,1) or for d < 1.
double chi_inv_cdf(double p, int d);

}  // namespace dc
