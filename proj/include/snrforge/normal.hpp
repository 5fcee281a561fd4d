#pragma once

#include <cmath>
#include <numbers>

#include "snrforge/errors.hpp"

namespace snrforge::normal {

inline double pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Phi(x), evaluated through erfc so the lower tail keeps relative accuracy.
inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// 1 - Phi(x), accurate in the upper tail.
inline double upper_cdf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Acklam's rational approximation for p in (0, 0.5]; relative error below 1.15e-9.
inline double acklam_lower(double p) noexcept {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01,  -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// One Halley step against the erfc-based CDF; takes the approximation to full double precision.
inline double halley_refine(double x, double p) noexcept {
  const double e = cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

} // namespace detail

/// Lower-tail quantile Phi^{-1}(p) for p in (0, 1).
///
/// Acklam's rational approximation (|relative error| < 1.15e-9) followed by a
/// single Halley refinement step. For p > 0.5 the computation is mirrored, so
/// callers that know the small tail mass should use upper_quantile instead of
/// passing 1 - q.
inline double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw domain_error("normal::quantile: p must lie in (0, 1)");
  }
  if (p <= 0.5) {
    return detail::halley_refine(detail::acklam_lower(p), p);
  }
  const double q = 1.0 - p;
  return -detail::halley_refine(detail::acklam_lower(q), q);
}

/// z such that P(Z > z) = q, without forming 1 - q for small q.
inline double upper_quantile(double q) { return -quantile(q); }

/// Unrefined Acklam approximation, exposed for accuracy tests.
inline double quantile_approx(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw domain_error("normal::quantile_approx: p must lie in (0, 1)");
  }
  return p <= 0.5 ? detail::acklam_lower(p) : -detail::acklam_lower(1.0 - p);
}

} // namespace snrforge::normal
