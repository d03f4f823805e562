#pragma once

#include <span>
#include <vector>

namespace difflab::stats {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Student t CDF with (possibly fractional) degrees of freedom.
double student_t_cdf(double t, double dof);
/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double dof);

double normal_cdf(double x);
/// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> xs);
/// Variance with divisor n - ddof.
double variance(std::span<const double> xs, int ddof = 1);

/// Empirical quantile with linear interpolation between order statistics
/// (position q * (n - 1)). Input need not be sorted.
double quantile(std::span<const double> xs, double q);
/// Same, on data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

/// Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
double ks_uniform(std::span<const double> sample);

}  // namespace difflab::stats
