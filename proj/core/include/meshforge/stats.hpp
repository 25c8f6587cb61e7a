#pragma once

#include <span>
#include <vector>

namespace meshforge {

/// Ordinary least squares y = intercept + slope * x with a two-sided t test of
/// the slope on n - 2 degrees of freedom.
struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double p_value = 1;
  double slope_stderr = 0;
  std::size_t n = 0;
};

/// Requires at least 3 points and non-constant x (throws Error otherwise).
/// A perfect fit with non-zero slope gets p = 0; a zero slope gets p = 1.
LinearFit linear_regression(std::span<const double> x, std::span<const double> y);

/// Two-sided critical value t_{1-alpha/2, dof}.
double student_t_critical(double alpha, double dof);

/// Least squares polynomial of the given degree in (x - center), solved by
/// Householder QR.
struct PolynomialFit {
  double center = 0;
  std::vector<double> coefficients;  // ascending powers
  double residual_variance = 0;      // SSE / (n - p); 0 when n == p
  std::size_t dof = 0;
  std::vector<double> covariance_unscaled;  // (X^T X)^{-1}, row-major p x p

  double evaluate(double x) const;
  /// Half-width of the two-sided confidence band for the fitted mean at x.
  double band_half_width(double x, double level) const;
};

PolynomialFit polynomial_fit(std::span<const double> x, std::span<const double> y, int degree, double center);

}  // namespace meshforge
