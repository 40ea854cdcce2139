#pragma once

#include <span>
#include <vector>

#include "prefsteer/errors.hpp"

namespace prefsteer {

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Returns NaN when either input has zero rank
/// variance. Throws InvalidArgument when sizes differ or fewer than 2 points are given.
double spearman_rho(std::span<const double> xs, std::span<const double> ys);

double mean(std::span<const double> xs);
/// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> xs);

/// Regularized incomplete beta I_x(a, b) by continued fraction (relative tolerance 1e-10).
double regularized_incomplete_beta(double a, double b, double x);

/// P(T > t) for Student's t with `df` degrees of freedom (df may be fractional).
double student_t_sf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  /// Two-sided.
  double p = 1.0;
};

/// Welch's unequal-variance t-test. Throws InvalidArgument when a sample has fewer than 2
/// values and DegenerateSample when both variances are zero.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace prefsteer
