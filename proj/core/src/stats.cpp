#include "meshforge/stats.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "meshforge/error.hpp"

namespace meshforge {

LinearFit linear_regression(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("regression inputs differ in length");
  const auto n = x.size();
  if (n < 3) throw Error("regression needs at least 3 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw Error("regression needs at least two distinct x values");

  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  const double dof = static_cast<double>(n - 2);
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  if (fit.slope_stderr == 0 || !std::isfinite(fit.slope_stderr)) {
    fit.p_value = fit.slope == 0 ? 1.0 : 0.0;
    return fit;
  }
  const double t = fit.slope / fit.slope_stderr;
  boost::math::students_t dist(dof);
  fit.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return fit;
}

double student_t_critical(double alpha, double dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha / 2));
}

double PolynomialFit::evaluate(double x) const {
  double v = 0, p = 1;
  for (double c : coefficients) {
    v += c * p;
    p *= x - center;
  }
  return v;
}

double PolynomialFit::band_half_width(double x, double level) const {
  if (dof == 0 || residual_variance == 0) return 0.0;
  const auto p = coefficients.size();
  std::vector<double> row(p);
  double pw = 1;
  for (std::size_t k = 0; k < p; ++k) {
    row[k] = pw;
    pw *= x - center;
  }
  double q = 0;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) q += row[a] * covariance_unscaled[a * p + b] * row[b];
  }
  return student_t_critical(1 - level, static_cast<double>(dof)) * std::sqrt(residual_variance * q);
}

PolynomialFit polynomial_fit(std::span<const double> x, std::span<const double> y, int degree, double center) {
  if (x.size() != y.size()) throw Error("fit inputs differ in length");
  const auto p = static_cast<std::size_t>(degree + 1);
  const auto n = x.size();
  if (n < p) throw Error("polynomial fit of degree " + std::to_string(degree) + " needs at least " +
                         std::to_string(p) + " points");
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pw = 1;
    for (std::size_t k = 0; k < p; ++k) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = pw;
      pw *= x[i] - center;
    }
    rhs(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(p)) throw Error("polynomial fit design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(rhs);

  PolynomialFit fit;
  fit.center = center;
  fit.coefficients.assign(beta.data(), beta.data() + p);
  fit.dof = n - p;
  const Eigen::VectorXd resid = rhs - design * beta;
  fit.residual_variance = fit.dof == 0 ? 0.0 : resid.squaredNorm() / static_cast<double>(fit.dof);
  const Eigen::MatrixXd cov = (design.transpose() * design).inverse();
  fit.covariance_unscaled.resize(p * p);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      fit.covariance_unscaled[a * p + b] = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return fit;
}

}  // namespace meshforge
