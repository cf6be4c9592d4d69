#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dc {

/// Pairwise (cascade) summation. Deterministic for a fixed element order and
/// much better conditioned than sequential accumulation for large n.
double pairwise_sum(std::span<const double> x);

double logsumexp(std::span<const double> x);

struct MeanSe {
  double mean;
  double se;       // standard error of the mean
  double sd;       // sample standard deviation (ddof = 1)
  std::size_t n;
};
MeanSe mean_and_se(std::span<const double> x);

double sample_variance(std::span<const double> x);

/// Pearson correlation; NaN when either column has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// One-sample Kolmogorov-Smirnov statistic against U(0,1). Sorts a copy.
double ks_statistic_uniform(std::vector<double> x);

/// Two-sample KS statistic. Sorts copies.
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

/// Kolmogorov distribution tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda);

/// Asymptotic two-sample KS p-value for statistic d with sample sizes n and m.
double ks_two_sample_pvalue(double d, std::size_t n, std::size_t m);

/// 95% critical value for the one-sample KS statistic, 1.358/sqrt(n).
double ks_critical_95(std::size_t n);

}  // namespace dc
