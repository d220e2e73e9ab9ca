#pragma once

// Deterministic numerical primitives: Student-t and normal distribution
// functions, pooled order statistics, and least squares without intercept.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nes/error.hpp"

namespace nes {

namespace detail {

inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);  // reentrant; std::lgamma writes signgam
#else
  return std::lgamma(x);
#endif
}

// Continued fraction for the incomplete beta function, evaluated with the
// modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 200000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
namespace detail {

// {I_x(a, b), 1 - I_x(a, b)} with y = 1 - x supplied by the caller, so
// neither side is formed by cancellation.
inline std::pair<double, double> incomplete_beta_parts(double a, double b, double x, double y) {
  if (x == 0.0) return {0.0, 1.0};
  if (y == 0.0) return {1.0, 0.0};
  const double log_front =
      log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    const double v = front * beta_continued_fraction(a, b, x) / a;
    return {v, 1.0 - v};
  }
  const double w = front * beta_continued_fraction(b, a, y) / b;
  return {1.0 - w, w};
}

}  // namespace detail

inline double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorKind::invalid_argument, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, ErrorKind::invalid_argument, "incomplete beta needs x in [0, 1]");
  return detail::incomplete_beta_parts(a, b, x, 1.0 - x).first;
}

/// Pr(T_df >= x) for a Student-t variable with df degrees of freedom.
inline double student_t_sf(double x, double df) {
  require(df > 0.0 && !std::isnan(df), ErrorKind::invalid_argument, "t distribution needs df > 0");
  require(std::isfinite(x), ErrorKind::invalid_argument, "t survival function needs finite x");
  if (x == 0.0) return 0.5;
  const double ax = std::fabs(x);
  double upper;
  if (std::isinf(df)) {
    upper = 0.5 * std::erfc(ax / std::numbers::sqrt2);
  } else {
    // q = df/(df+x^2) and its complement, written to avoid overflow of x^2.
    const double ratio = df / (ax * ax);
    const double q = ratio / (1.0 + ratio);
    const double z = 1.0 / (1.0 + ratio);
    upper = 0.5 * detail::incomplete_beta_parts(0.5 * df, 0.5, q, z).first;
  }
  return x > 0.0 ? upper : 1.0 - upper;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

namespace detail {

// Acklam's rational approximation for the lower half, refined by one Halley
// step against erfc. Valid for 0 < p <= 0.5.
inline double normal_quantile_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double kLowBreak = 0.02425;

  double x;
  if (p < kLowBreak) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int step = 0; step < 2; ++step) {
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// Inverse of the standard normal CDF.
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::invalid_argument, "normal quantile needs p in (0, 1)");
  if (p == 0.5) return 0.0;
  return p < 0.5 ? detail::normal_quantile_lower(p) : -detail::normal_quantile_lower(1.0 - p);
}

/// Median with the midpoint convention for even lengths.
inline double pooled_median(std::span<const double> values) {
  require(!values.empty(), ErrorKind::invalid_argument, "median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Linear-interpolation (type 7) sample quantile at prob in [0, 1].
inline double pooled_quantile(std::span<const double> values, double prob) {
  require(!values.empty(), ErrorKind::invalid_argument, "quantile of an empty sample");
  require(prob >= 0.0 && prob <= 1.0, ErrorKind::invalid_argument, "quantile level must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

// Rank-revealing factorization of a fixed design, reusable across responses.
// Rank tolerance is machine epsilon times the larger dimension, relative to
// the leading pivot.
class LeastSquaresNoIntercept {
 public:
  explicit LeastSquaresNoIntercept(const Eigen::Ref<const Eigen::MatrixXd>& design) {
    require(design.rows() >= 1 && design.cols() >= 1, ErrorKind::invalid_argument, "empty design matrix");
    cod_.setThreshold(std::numeric_limits<double>::epsilon() *
                      static_cast<double>(std::max(design.rows(), design.cols())));
    cod_.compute(design);
  }

  Eigen::Index rows() const { return cod_.rows(); }
  Eigen::Index rank() const { return cod_.rank(); }

  Eigen::VectorXd solve(std::span<const double> response) const {
    require(static_cast<std::size_t>(cod_.rows()) == response.size(), ErrorKind::invalid_argument,
            "design has " + std::to_string(cod_.rows()) + " rows but response has " +
                std::to_string(response.size()));
    const Eigen::Map<const Eigen::VectorXd> y(response.data(), static_cast<Eigen::Index>(response.size()));
    return cod_.solve(y);
  }

 private:
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

/// Least squares fit of response on the design columns, no intercept.
/// Rank-deficient designs yield the minimum-norm coefficient vector.
inline Eigen::VectorXd ols_no_intercept(const Eigen::Ref<const Eigen::MatrixXd>& design,
                                        std::span<const double> response) {
  require(static_cast<std::size_t>(design.rows()) == response.size(), ErrorKind::invalid_argument,
          "design has " + std::to_string(design.rows()) + " rows but response has " +
              std::to_string(response.size()));
  return LeastSquaresNoIntercept(design).solve(response);
}

// Sample count, mean and (n-1)-denominator variance.
struct SampleMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

inline SampleMoments sample_moments(std::span<const double> values) {
  SampleMoments m;
  m.n = values.size();
  if (m.n == 0) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(m.n);
  if (m.n < 2) return m;
  double ss = 0.0;
  for (double v : values) {
    const double d = v - m.mean;
    ss += d * d;
  }
  m.variance = ss / static_cast<double>(m.n - 1);
  return m;
}

}  // namespace nes
